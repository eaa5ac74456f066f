#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "bsq/config.hpp"
#include "bsq/constants.hpp"
#include "bsq/noise.hpp"
#include "bsq/scheme.hpp"

namespace bsq {

/// Key of sample `index`. The Wiener path uses it as its seed and the
/// initial data draws from derive(key, kInitialStream).
std::uint64_t sample_key(std::uint64_t master_seed, int index);
inline constexpr std::uint64_t kInitialStream = 7;

/// Initial data of a sample (deterministic for the zero and smooth types).
std::pair<VectorField, ScalarField> initial_data(const Problem& problem, int sample);

/// Largest gamma with E exp(gamma ||u0||^2) < infinity (and the same for theta0):
/// infinite for deterministic data, 1 / (2 max coordinate variance) for Gaussian data.
std::pair<double, double> admissible_gamma_rates(const Problem& problem);
/// The rates used in threshold formulas: configured values, or half the admissible rate.
std::pair<double, double> gamma_rates(const Problem& problem);
ThresholdInputs threshold_inputs(const Problem& problem);

/// Per-level diagnostics, l = 0 .. N.
struct StepRecord {
  double t = 0.0;
  double u_l2 = 0.0;      // ||u^l||^2 in V0
  double theta_l2 = 0.0;  // ||theta^l||^2 in H0
  double u_h1 = 0.0;      // ||A^1/2 u^l||^2
  double theta_h1 = 0.0;  // ||A~^1/2 theta^l||^2
  int iterations_u = 0;
  int iterations_theta = 0;
  double residual_u = 0.0;
  double residual_theta = 0.0;
  double energy_u = 0.0;      // relative energy-identity defect (additive noise only)
  double energy_theta = 0.0;
};

struct TrajectoryRecord {
  int sample = 0;
  int n_steps = 0;
  double h = 0.0;
  bool failed = false;
  std::string error;
  std::vector<StepRecord> steps;
  std::vector<SchemeState> saved;  // states at the requested step indices, in order
};

struct TrajectoryOptions {
  bool energy_residuals = false;
  std::vector<int> save_steps;  // step indices whose states are kept
};

/// Called after each completed level with the new state and its diagnostics.
using StepObserver = std::function<void(const SchemeState&, const StepRecord&)>;

/// Runs one sample at N steps, driven by the level-N aggregation of the
/// sample's N_ref path. Deterministic in (config, sample). Numerical failures
/// are caught and reported in the record.
TrajectoryRecord run_trajectory(const Problem& problem, int sample, int n_steps, const TrajectoryOptions& opts = {},
                                const StepObserver& observer = {});
TrajectoryRecord run_trajectory(const RunConfig& cfg, int sample);

/// Runs f(sample) for every sample on `threads` workers (0: hardware concurrency).
void parallel_for_samples(int samples, int threads, const std::function<void(int)>& f);

// ---------------------------------------------------------------------------
// Convergence study

struct ErrorRow {
  int n = 0;
  int sample = 0;
  double e_max = 0.0;  // max_j ||e_j||^2 + ||e~_j||^2
  double d_sum = 0.0;  // h sum_j ||A^1/2 e_j||^2 + ||A~^1/2 e~_j||^2
  bool failed = false;
};

struct ErrorSummary {
  int n = 0;
  double h = 0.0;
  int count = 0;
  int failed = 0;
  double mean_e_max = 0.0, se_e_max = 0.0;
  double mean_d_sum = 0.0, se_d_sum = 0.0;
  double mean_total = 0.0, se_total = 0.0;  // E_max + D_sum
  double ci_low(double mean, double se) const { return mean - 1.96 * se; }
  double ci_high(double mean, double se) const { return mean + 1.96 * se; }
};

struct ErrorTable {
  double horizon = 1.0;
  int n_ref = 0;
  std::vector<int> n_list;
  std::vector<ErrorRow> rows;  // ordered by (N index, sample)
  /// Reference-path suprema over all fine levels, per sample.
  std::vector<double> ref_sup_u_h1;
  std::vector<double> ref_sup_theta_h1;
  std::vector<bool> ref_failed;

  std::vector<ErrorSummary> summarize() const;
  const ErrorRow& at(std::size_t n_index, int sample) const;
  int samples() const { return static_cast<int>(ref_failed.size()); }
};

/// For each sample: simulate at N_ref once, then at every N of the list with
/// the aggregated increments of the same path; errors at the coarse times.
ErrorTable run_convergence_study(const Problem& problem);

enum class ErrorMetric { EMax, DSum, Total };

struct RateFit {
  double slope = 0.0;
  double intercept = 0.0;
  double stderr_slope = 0.0;
  int points = 0;
  bool floor_dropped = false;
};

/// Least squares of log(y) against log(h). Throws ConfigError with fewer than
/// two points or non-positive values.
RateFit fit_log_log(const std::vector<double>& h, const std::vector<double>& y);
/// Slope of log(mean error) against log(T / N). Needs >= 3 distinct N with
/// positive means. With `detect_floor`, drops the largest N when the last
/// segment's slope is below half the mean slope of the earlier segments.
RateFit estimate_rate(const ErrorTable& table, ErrorMetric which, bool detect_floor = true);

/// Empirical P(E_max + D_sum >= N^-exponent) per N, over non-failed samples.
struct ExceedancePoint {
  int n = 0;
  double threshold = 0.0;
  double probability = 0.0;
  int count = 0;
};
std::vector<ExceedancePoint> exceedance_probabilities(const ErrorTable& table, double exponent);

// ---------------------------------------------------------------------------
// Localization

struct LocalizedLevel {
  int n = 0;
  double mean_total = 0.0;  // mean of E_max + D_sum over the samples in Omega_M (NaN if empty)
  double bound_shape = 0.0; // (1 + M) exp(C(M) T) h^eta
};

struct LocalizedReport {
  double m = 0.0;
  int inside = 0;
  int count = 0;
  double probability = 0.0;
  bool empty = false;
  double growth_constant = 0.0;  // C(M)
  std::vector<LocalizedLevel> levels;
};

/// M = +infinity keeps every sample.
std::vector<LocalizedReport> localized_statistics(const ErrorTable& table, const Problem& problem,
                                                  const std::vector<double>& m_values);

// ---------------------------------------------------------------------------
// Moments

/// Per-sample path functionals of one run.
struct PathFunctionals {
  double max_u_l2 = 0.0, max_theta_l2 = 0.0;
  double max_u_h1 = 0.0, max_theta_h1 = 0.0;
  double diss_u = 0.0, diss_theta = 0.0;  // h sum_l ||A^1/2 u^l||^2, h sum_l ||A~^1/2 theta^l||^2
  bool failed = false;
};
PathFunctionals path_functionals(const TrajectoryRecord& rec);

struct MomentLevel {
  int n = 0;
  int count = 0;
  std::vector<double> u_l2, theta_l2, u_h1, theta_h1;  // E[max ...^(2p)] per p
  std::vector<double> combined;  // E[max ||u||^(2p) + max ||theta||^(2p)] per p
  std::vector<double> combined_se;
  double diss_u = 0.0, diss_theta = 0.0;
};

struct MomentReport {
  std::vector<int> p_list;
  std::vector<MomentLevel> levels;
  std::vector<double> spread;          // max over N / min over N of `combined`, per p
  std::vector<double> growth_slope;    // slope of log combined against log N, per p
  std::vector<double> growth_stderr;
  std::vector<bool> growth_flag;       // slope > 3 stderr above 0
};

MomentReport estimate_moment_bounds(const Problem& problem);
/// Power means (E X^(2p))^(1/(2p)).
double power_mean(const std::vector<double>& x, int p);

// ---------------------------------------------------------------------------
// Exponential moments

enum class ExpFunctional { Coupled, Temperature, Velocity };
ExpFunctional resolve_functional(const Problem& problem);
std::string_view to_string(ExpFunctional f);

/// X_N of one run:
///   coupled      max_n |C_L| ||u^n||^2 + ||theta^n||^2 + h sum_{l<=n} (|C_L| nu ||A^1/2 u^l||^2 + kappa ||A~^1/2 theta^l||^2)
///   temperature  max_n ||theta^n||^2 + h kappa sum_{l<=n} ||A~^1/2 theta^l||^2
///   velocity     max_n ||u^n||^2 + h nu sum_{l<=n} ||A^1/2 u^l||^2
double exp_functional_value(const TrajectoryRecord& rec, ExpFunctional f, const ModelParams& params);

struct ExpMomentPoint {
  double beta = 0.0;
  double log_mean = 0.0;     // log of the empirical mean of exp(beta X)
  double estimate = 0.0;     // exp(log_mean); +inf on overflow
  double max_fraction = 0.0; // share of the largest sample in the sum
  bool heavy_tail = false;   // max_fraction > 0.5
};

struct ExpMomentLevel {
  int n = 0;
  int count = 0;
  std::vector<ExpMomentPoint> points;
};

struct ExpMomentReport {
  ExpFunctional functional = ExpFunctional::Coupled;
  std::string threshold_name;
  double threshold = 0.0;
  bool threshold_defined = false;
  std::vector<double> betas;
  std::vector<ExpMomentLevel> levels;
};

/// Log-sum-exp mean of exp(beta x_i); beta = 0 gives exactly 1.
ExpMomentPoint exp_moment(const std::vector<double>& x, double beta);

/// betas = factor * applicable threshold. Additive noise only (ConfigError otherwise).
ExpMomentReport estimate_exponential_moments(const Problem& problem);

// ---------------------------------------------------------------------------
// Time increments along reference trajectories

struct IncrementPoint {
  int lag = 0;
  double delta = 0.0;
  double mean_u = 0.0;      // E ||u(tau + delta) - u(tau)||^2, averaged over anchors
  double mean_theta = 0.0;
};

struct IncrementReport {
  std::vector<IncrementPoint> points;
  RateFit fit_u;
  RateFit fit_theta;
  int count = 0;
};

IncrementReport increment_order_study(const Problem& problem);

// ---------------------------------------------------------------------------
// Output (layouts documented in docs/formats.md)

inline constexpr int kOutputVersion = 1;

std::string error_table_csv(const ErrorTable& table);
std::string error_summary_json(const ErrorTable& table, const Problem& problem);
std::string condition_report_json(const ConditionReport& report, const Problem* problem = nullptr);
std::string trajectory_csv(const TrajectoryRecord& rec);
std::string moment_report_csv(const MomentReport& report);
std::string moment_report_json(const MomentReport& report);
std::string exp_moment_report_csv(const ExpMomentReport& report);
std::string exp_moment_report_json(const ExpMomentReport& report);
std::string localized_report_json(const std::vector<LocalizedReport>& reports);
std::string exceedance_json(const std::vector<ExceedancePoint>& points, double exponent);
std::string increment_report_json(const IncrementReport& report);

void write_text(const std::filesystem::path& path, const std::string& text);

}  // namespace bsq
