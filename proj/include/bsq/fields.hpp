#pragma once

#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "bsq/grid.hpp"

namespace bsq {

/// Basis used for the temperature-like scalar.
///  - Sine: e^{2 pi i k1 x1 / L} sin(m pi x2 / L), m = 1..n2 (Dirichlet at x2 = 0, L).
///  - Periodic: mean-zero Fourier modes on the torus.
enum class ScalarBasis : std::uint32_t { Sine = 1, Periodic = 2 };

std::string_view to_string(ScalarBasis basis);
ScalarBasis scalar_basis_from_string(std::string_view name);

/// Two-component velocity field as truncated Fourier series
///   u(x) = sum_k u_hat(k) e^{i k.x},  k = 2 pi (k1, k2) / L.
/// Coefficients are the series amplitudes themselves, so the continuum L2
/// norm is L^2 * sum |u_hat|^2.
class VectorField {
 public:
  explicit VectorField(GridPtr grid);

  const Grid& grid() const noexcept { return *grid_; }
  const GridPtr& grid_ptr() const noexcept { return grid_; }

  std::span<cplx> component(int c) noexcept { return {data_.data() + c * grid_->size(), grid_->size()}; }
  std::span<const cplx> component(int c) const noexcept {
    return {data_.data() + c * grid_->size(), grid_->size()};
  }
  std::span<cplx> data() noexcept { return data_; }
  std::span<const cplx> data() const noexcept { return data_; }

  cplx& operator()(int c, int i1, int i2) noexcept { return data_[c * grid_->size() + grid_->index(i1, i2)]; }
  const cplx& operator()(int c, int i1, int i2) const noexcept {
    return data_[c * grid_->size() + grid_->index(i1, i2)];
  }

  VectorField& operator+=(const VectorField& other);
  VectorField& operator-=(const VectorField& other);
  VectorField& operator*=(double a) noexcept;
  /// this += a * x
  void axpy(double a, const VectorField& x);
  void set_zero() noexcept;
  bool is_zero() const noexcept;
  bool has_nan() const noexcept;

 private:
  GridPtr grid_;
  std::vector<cplx> data_;
};

/// Scalar field in either the sine basis or the periodic basis. With the sine
/// basis the continuum L2 norm is (L^2 / 2) * sum |theta_hat|^2.
class ScalarField {
 public:
  ScalarField(GridPtr grid, ScalarBasis basis);

  const Grid& grid() const noexcept { return *grid_; }
  const GridPtr& grid_ptr() const noexcept { return grid_; }
  ScalarBasis basis() const noexcept { return basis_; }

  std::span<cplx> data() noexcept { return data_; }
  std::span<const cplx> data() const noexcept { return data_; }

  /// (i1, i2) for the periodic basis; (i1, m - 1) for the sine basis.
  cplx& operator()(int i1, int i2) noexcept { return data_[grid_->index(i1, i2)]; }
  const cplx& operator()(int i1, int i2) const noexcept { return data_[grid_->index(i1, i2)]; }

  /// Weight w with ||f||^2 = w * sum |f_hat|^2.
  double weight() const noexcept;

  ScalarField& operator+=(const ScalarField& other);
  ScalarField& operator-=(const ScalarField& other);
  ScalarField& operator*=(double a) noexcept;
  void axpy(double a, const ScalarField& x);
  void set_zero() noexcept;
  bool is_zero() const noexcept;
  bool has_nan() const noexcept;

 private:
  GridPtr grid_;
  ScalarBasis basis_;
  std::vector<cplx> data_;
};

VectorField operator+(VectorField a, const VectorField& b);
VectorField operator-(VectorField a, const VectorField& b);
VectorField operator*(double s, VectorField a);
ScalarField operator+(ScalarField a, const ScalarField& b);
ScalarField operator-(ScalarField a, const ScalarField& b);
ScalarField operator*(double s, ScalarField a);

/// Continuum L2 inner products (real fields).
double inner(const VectorField& a, const VectorField& b);
double inner(const ScalarField& a, const ScalarField& b);

/// Largest violation of f_hat(-k) = conj(f_hat(k)) over the stored modes.
double hermitian_defect(const VectorField& f);
double hermitian_defect(const ScalarField& f);

/// Zero every non-retained slot and replace each mode pair by its Hermitian
/// average, so the field is exactly real-valued.
void symmetrize(VectorField& f);
void symmetrize(ScalarField& f);

void require_compatible(const ScalarField& a, const ScalarField& b, const char* where);

}  // namespace bsq
