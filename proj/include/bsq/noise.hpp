#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "bsq/fields.hpp"

namespace bsq {

/// Per-mode variance law q_j = amplitude * (1 + lambda_j / lambda_first)^(-exponent)
/// over the retained modes, optionally restricted to |k1|, |k2| <= cutoff
/// (sine index m <= 2 cutoff) and optionally rescaled to a prescribed trace.
struct CovarianceConfig {
  std::string law = "power";
  double amplitude = 1.0;
  double exponent = 3.0;
  int cutoff = 0;           // 0 keeps every retained mode
  double trace = 0.0;       // > 0 rescales so that Tr(Q) equals this value
  bool require_admissible = false;  // demands exponent > 2
};

/// One element zeta_j of the orthonormal real basis of the noise space.
/// The basis function has coefficient `coeff` at slot (i1, i2) and its
/// conjugate at the mirrored slot (none for self-conjugate sine modes);
/// velocity modes point along k_perp / |k|.
struct NoiseMode {
  int i1 = 0;
  int i2 = 0;
  int mirror1 = 0;
  int mirror2 = 0;
  bool self_conjugate = false;
  cplx coeff;
  double dir1 = 0.0;
  double dir2 = 0.0;
  double eigenvalue = 0.0;
  double variance = 0.0;
};

class CovarianceSpec {
 public:
  enum class Target { Velocity, Scalar };

  static CovarianceSpec velocity(GridPtr grid, const CovarianceConfig& cfg);
  static CovarianceSpec scalar(GridPtr grid, ScalarBasis basis, const CovarianceConfig& cfg);

  Target target() const noexcept { return target_; }
  ScalarBasis basis() const noexcept { return basis_; }
  const GridPtr& grid_ptr() const noexcept { return grid_; }
  const CovarianceConfig& config() const noexcept { return cfg_; }
  const std::vector<NoiseMode>& modes() const noexcept { return modes_; }
  std::size_t size() const noexcept { return modes_.size(); }

  double trace() const noexcept { return trace_; }
  /// sum_j lambda_j q_j
  double k0() const noexcept { return k0_; }
  double lambda_first() const noexcept { return lambda_first_; }

  /// sum_j coords[j] zeta_j
  VectorField velocity_field(std::span<const double> coords) const;
  ScalarField scalar_field(std::span<const double> coords) const;

 private:
  CovarianceSpec() = default;
  void finish();

  Target target_ = Target::Velocity;
  ScalarBasis basis_ = ScalarBasis::Sine;
  GridPtr grid_;
  CovarianceConfig cfg_;
  std::vector<NoiseMode> modes_;
  double trace_ = 0.0;
  double k0_ = 0.0;
  double lambda_first_ = 0.0;
};

/// Increment coordinates in the orthonormal bases: u[j] multiplies zeta_j,
/// theta[j] multiplies the scalar basis element j.
struct NoiseIncrement {
  std::vector<double> u;
  std::vector<double> theta;
};

/// A Brownian path on [0, T] resolved at N_ref fine steps.
///
/// Each fine Gaussian is a pure function of (seed, stream, mode, step) and is
/// quantized to a multiple of 2^-16; the per-mode scale sqrt(q_j h_ref) is
/// rounded to 21 significant bits. Every increment is therefore scale * an
/// integer with at most 53 bits, so sums of fine increments are exact in any
/// order and any coarse increment is bitwise the sum of the fine ones.
class WienerPath {
 public:
  WienerPath(std::shared_ptr<const CovarianceSpec> cov_u, std::shared_ptr<const CovarianceSpec> cov_theta,
             int n_ref, double horizon, std::uint64_t seed);

  int n_ref() const noexcept { return n_ref_; }
  double horizon() const noexcept { return horizon_; }
  double fine_step() const noexcept { return horizon_ / n_ref_; }
  std::uint64_t seed() const noexcept { return seed_; }
  const CovarianceSpec& cov_u() const noexcept { return *cov_u_; }
  const CovarianceSpec& cov_theta() const noexcept { return *cov_theta_; }

  /// Quantized standard normals (units of 2^-16) of fine step `step` (0-based).
  void fine_normals(int step, std::vector<std::int64_t>& u, std::vector<std::int64_t>& theta) const;
  /// Increment coordinates from summed quantized normals.
  NoiseIncrement from_sums(std::span<const std::int64_t> u, std::span<const std::int64_t> theta) const;
  /// Increment over fine steps [first, last).
  NoiseIncrement increment(int first, int last) const;

  /// Effective per-mode variance rate scale_j^2 / h_ref (differs from q_j by < 1e-6 relative).
  double effective_variance_u(std::size_t j) const { return scale_u_[j] * scale_u_[j] / fine_step(); }
  double effective_variance_theta(std::size_t j) const {
    return scale_t_[j] * scale_t_[j] / fine_step();
  }

 private:
  std::shared_ptr<const CovarianceSpec> cov_u_, cov_theta_;
  int n_ref_;
  double horizon_;
  std::uint64_t seed_;
  std::vector<double> scale_u_, scale_t_;
};

WienerPath sample_fine_path(std::shared_ptr<const CovarianceSpec> cov_u,
                            std::shared_ptr<const CovarianceSpec> cov_theta, int n_ref, double horizon,
                            std::uint64_t seed);

/// Level-N view of a path: increment l (1-based) covers fine steps
/// (l - 1) N_ref / N .. l N_ref / N - 1. Materialized lazily.
class IncrementSequence {
 public:
  IncrementSequence(const WienerPath& path, int n);
  int size() const noexcept { return n_; }
  int block() const noexcept { return block_; }
  double step() const noexcept { return path_->horizon() / n_; }
  const WienerPath& path() const noexcept { return *path_; }
  NoiseIncrement get(int l) const;

 private:
  const WienerPath* path_;
  int n_;
  int block_;
};

/// Throws ConfigError unless N >= 1 divides N_ref.
IncrementSequence aggregate_increments(const WienerPath& path, int n);
/// Aggregates an already aggregated sequence further by summing its increments.
std::vector<NoiseIncrement> aggregate(const std::vector<NoiseIncrement>& finer, int n);

enum class NoiseKind { Additive, Multiplicative };

/// Bounded, C^1, globally Lipschitz pointwise coefficient:
///   Saturating: sigma(v) = c0 + c1 v / sqrt(1 + v^2)   (Lipschitz |c1|)
///   Lorentzian: sigma(v) = c0 + c1 / (1 + v^2)         (Lipschitz |c1| 3 sqrt(3) / 8)
struct Sigma {
  enum class Shape { Saturating, Lorentzian };
  Shape shape = Shape::Saturating;
  double c0 = 1.0;
  double c1 = 0.0;
  double operator()(double v) const noexcept;
  double lipschitz() const noexcept;
  double bound() const noexcept;
};

/// Diffusion coefficients G (velocity) and G~ (temperature), applied
/// componentwise in physical space. Reported constants describe the
/// pointwise map sigma; growth bounds in the V1/H1 norms are an assumption
/// carried into reports, not something verified here.
struct NoiseModel {
  NoiseKind kind = NoiseKind::Additive;
  Sigma sigma_u;
  Sigma sigma_theta;
  double declared_l1 = 0.0;
  double declared_l1_tilde = 0.0;

  static NoiseModel additive();
  static NoiseModel multiplicative(Sigma u, Sigma theta, double l1 = -1.0, double l1_tilde = -1.0);

  struct Constants {
    double k0, k1, k2, k3, l1;
  };
  Constants velocity_constants() const;
  Constants temperature_constants() const;
};

std::string_view to_string(NoiseKind kind);
NoiseKind noise_kind_from_string(std::string_view s);
std::string_view to_string(Sigma::Shape shape);
Sigma::Shape sigma_shape_from_string(std::string_view s);

/// G(state) increment: additive returns Pi(increment); multiplicative samples
/// sigma(state) * increment on the padded grid and projects back (Leray for
/// velocity; odd reflection and sine projection for Dirichlet scalars).
VectorField apply_diffusion(const NoiseModel& model, const VectorField& state, const VectorField& increment);
ScalarField apply_diffusion(const NoiseModel& model, const ScalarField& state, const ScalarField& increment);

}  // namespace bsq
