#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "bsq/constants.hpp"
#include "bsq/noise.hpp"
#include "bsq/scheme.hpp"

namespace bsq {

/// Initial data.
///   zero      u0 = 0, theta0 = 0
///   smooth    deterministic band-limited fields, normalized to the amplitudes
///   gaussian  per-sample Gaussian fields with E||u0||^2 = amplitude_u^2
struct InitialSpec {
  std::string type = "smooth";
  double amplitude_u = 0.5;
  double amplitude_theta = 0.5;
  int band = 2;         // modes with max(|k1|, |k2|) <= band (sine: 1 <= m <= band)
  double decay = 2.0;   // coefficient falloff (1 + |k|^2)^(-decay)
};

enum class SchemeVariant { SemiImplicit, FullyImplicit };

/// Everything a study needs. Loaded from JSON; see docs/config.md.
struct RunConfig {
  ModelParams model = ModelParams::make(1.0, 1.0, 1.0, 1.0, 0.0, 0.0);
  int n = 16;  // grid points per direction
  ScalarBasis temperature_basis = ScalarBasis::Sine;

  CovarianceConfig cov_u;
  CovarianceConfig cov_theta;
  NoiseKind noise_kind = NoiseKind::Additive;
  Sigma sigma_u;
  Sigma sigma_theta;
  double l1 = -1.0;
  double l1_tilde = -1.0;

  InitialSpec initial;
  SolverOptions solver;
  SchemeVariant scheme = SchemeVariant::SemiImplicit;

  std::vector<int> n_list{8, 16, 32};
  int n_ref = 256;
  int samples = 8;
  std::uint64_t seed = 1;
  int threads = 0;  // 0: hardware concurrency
  std::filesystem::path output = "bsq_out";

  double c4 = kDefaultC4;
  double gamma = kDefaultGamma;
  // Initial-data exponential-moment rates; 0 selects half the largest
  // admissible rate of the configured initial data (infinite when deterministic).
  double gamma0 = 0.0;
  double gamma0_tilde = 0.0;

  std::vector<int> p_list{1, 2};
  std::vector<double> beta_factors{0.0, 0.25, 0.5};
  std::string exp_functional = "auto";  // auto | coupled | temperature | velocity
  std::vector<double> m_list{};         // empty: chosen from the data
  double probability_exponent = 0.8;
  double eta = 1.0;                     // rate exponent in the localized bound shape
  std::vector<int> lags{1, 2, 4, 8, 16};
  std::vector<double> anchors{0.25, 0.5};  // increment anchor times as fractions of T

  /// Throws ConfigError on any inconsistency (N must divide N_ref, T / N < 1, ...).
  void validate() const;
  NoiseModel noise_model() const;
};

/// Parses a JSON document. Unknown keys are rejected.
RunConfig load_config(const std::string& json_text);
RunConfig load_config_file(const std::filesystem::path& path);
std::string to_json(const RunConfig& cfg);

/// Objects shared read-only by all samples of a study.
struct Problem {
  RunConfig cfg;
  GridPtr grid;
  std::shared_ptr<const CovarianceSpec> cov_u;
  std::shared_ptr<const CovarianceSpec> cov_theta;
  NoiseModel noise;

  explicit Problem(RunConfig config);
};

}  // namespace bsq
