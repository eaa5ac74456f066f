#pragma once

#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "bsq/noise.hpp"
#include "bsq/scheme.hpp"

namespace bsq {

inline constexpr double kInfinity = std::numeric_limits<double>::infinity();

/// Default Gagliardo-Nirenberg constant used in reports (overridable).
inline const double kDefaultC4 = 1.189207115002721;  // 2^(1/4)
inline constexpr double kDefaultGamma = 0.01;

/// Inputs shared by every threshold formula. gamma0 / gamma0_tilde are the
/// exponential-moment rates of the initial data (infinite for deterministic data).
struct ThresholdInputs {
  ModelParams params;
  double lambda1 = 0.0;
  double lambda1_tilde = 0.0;
  double trace_q = 0.0;
  double trace_q_tilde = 0.0;
  double gamma0 = kInfinity;
  double gamma0_tilde = kInfinity;

  static ThresholdInputs from(const ModelParams& params, const CovarianceSpec& cov_u, const CovarianceSpec& cov_theta,
                              double gamma0 = kInfinity, double gamma0_tilde = kInfinity);
};

/// A threshold value with its applicability. Undefined thresholds keep the
/// formula value (possibly non-finite) and say why they do not apply.
struct Threshold {
  double value = 0.0;
  bool defined = false;
  std::string reason;
};

struct Thresholds {
  ThresholdInputs in;
  /// Coupled exponential-moment thresholds; need |C_L| < nu kappa lambda1 lambda1~ / 4.
  Threshold beta0, beta1;
  /// Temperature-only and velocity thresholds for C_L = 0.
  Threshold beta0_tilde, beta1_tilde, alpha1, alpha1_tilde;
  /// alpha1~ in its unsimplified form (in terms of beta1~); equal up to round-off.
  double alpha1_tilde_factored = 0.0;
};

Thresholds compute_thresholds(const ThresholdInputs& in);
Thresholds compute_thresholds(const ModelParams& params, const CovarianceSpec& cov_u, const CovarianceSpec& cov_theta,
                              double gamma0 = kInfinity, double gamma0_tilde = kInfinity);

/// Growth constant of the localized error bound:
///   (9 (1 + gamma) C4^4 / 8) max(5 / nu, 1 / kappa) M.
double loc_growth_constant(double m, const ModelParams& params, double c4, double gamma = kDefaultGamma);

struct Condition {
  std::string name;
  bool applicable = false;
  bool holds = false;
  double lhs = 0.0;
  double rhs = 0.0;
  double margin = 0.0;  // rhs - lhs
  std::string note;
};

struct ConditionReport {
  Thresholds thresholds;
  double c4 = kDefaultC4;
  std::vector<Condition> conditions;
  const Condition& find(const std::string& name) const;
};

/// Evaluates the smallness conditions that guarantee the strong rate:
///   coupling_precondition                |C_L| < nu kappa lambda1 lambda1~ / 4
///   coupled_deterministic / coupled_random          (C_L != 0)
///   decoupled_deterministic / decoupled_random      (C_L == 0)
///   decoupled_deterministic_derived      the same bound with the velocity-trace term
///                                        carried through from alpha1 (factor 4 instead of 1)
ConditionReport check_strong_rate_conditions(const ThresholdInputs& in, double c4 = kDefaultC4);
ConditionReport check_strong_rate_conditions(const ModelParams& params, const CovarianceSpec& cov_u,
                                             const CovarianceSpec& cov_theta, double gamma0, double gamma0_tilde,
                                             double c4 = kDefaultC4);

struct GagliardoEstimate {
  double estimate = 0.0;
  std::vector<double> per_trial;  // max ratio observed in each trial
};

/// Lower bound for C4 in ||u||_L4 <= C4 ||A^1/2 u||^1/2 ||u||^1/2 from random
/// band-limited solenoidal fields (random spectra and periodized Gaussian
/// vortices). Each trial also evaluates the truncations of its field to every
/// coarser dyadic resolution, so estimates are nested across grids.
GagliardoEstimate estimate_gagliardo_c4(const GridPtr& grid, int trials, std::uint64_t seed);

/// ||u||_L4 / (||A^1/2 u||^1/2 ||u||^1/2)
double gagliardo_ratio(const VectorField& u);

}  // namespace bsq
