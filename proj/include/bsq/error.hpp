#pragma once

#include <stdexcept>
#include <string>

namespace bsq {

/// Invalid user-supplied configuration or parameters (CLI exit code 2).
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Fields defined on different grids (or incompatible bases) were combined.
class GridMismatch : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A trajectory could not be continued: NaN, solver breakdown (CLI exit code 3).
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Krylov or Picard iteration stopped before reaching the requested tolerance.
class SolverError : public NumericalError {
 public:
  SolverError(const std::string& what, int iterations, double residual)
      : NumericalError(what), iterations_(iterations), residual_(residual) {}
  int iterations() const noexcept { return iterations_; }
  double residual() const noexcept { return residual_; }

 private:
  int iterations_;
  double residual_;
};

}  // namespace bsq
