#pragma once

#include <memory>

#include "bsq/fields.hpp"
#include "bsq/krylov.hpp"
#include "bsq/noise.hpp"
#include "bsq/nonlinear.hpp"
#include "bsq/spectral.hpp"

namespace bsq {

/// Physical parameters. C_L = (T_L - T_0) / L.
struct ModelParams {
  double nu = 1.0;
  double kappa = 1.0;
  double length = 1.0;
  double horizon = 1.0;
  double t0 = 0.0;
  double tl = 0.0;
  double c_l = 0.0;

  /// Fills c_l from the boundary temperatures.
  static ModelParams make(double nu, double kappa, double length, double horizon, double t0, double tl);
  /// Throws ConfigError on non-positive nu, kappa, L, T or an inconsistent C_L.
  void validate() const;
};

struct SolverOptions {
  double tol = 1e-10;
  int max_iter = 200;
  int restart = 40;
  bool advection = true;  // false drops the transport terms (testing aid)
  double picard_tol = 1e-10;
  int picard_max = 50;
};

struct SchemeState {
  long step = 0;
  int n_steps = 1;
  double h = 1.0;
  VectorField u;
  ScalarField theta;

  double time() const noexcept { return step * h; }

  /// State at l = 0 for a run of n_steps steps over [0, horizon]; h must be < 1.
  static SchemeState initial(VectorField u0, ScalarField theta0, double horizon, int n_steps);
};

struct StepInfo {
  int iterations_u = 0;
  int iterations_theta = 0;
  double residual_u = 0.0;
  double residual_theta = 0.0;
  int picard_iterations = 0;
};

/// Frozen-coefficient linear operators of one step:
///   velocity:    x + h nu A x + h Pi[(w . grad) x]
///   temperature: x + h kappa A~ x + h (w . grad) x
/// with w the frozen advecting velocity.
class ImplicitSystem {
 public:
  ImplicitSystem(GridPtr grid, ScalarBasis basis);

  void set(double h, double nu, double kappa, const VectorField& advecting, bool advection);

  VectorField apply(const VectorField& x);
  ScalarField apply(const ScalarField& x);
  /// (I + h diffusion)^-1, the exact inverse when the advecting field vanishes.
  VectorField precondition(const VectorField& x) const;
  ScalarField precondition(const ScalarField& x) const;

  VectorField solve(const VectorField& rhs, const SolverOptions& opts, GmresResult* info = nullptr);
  ScalarField solve(const ScalarField& rhs, const SolverOptions& opts, GmresResult* info = nullptr);

  bool advecting_is_zero() const noexcept { return !advection_ || ws_.frozen_is_zero(); }

 private:
  GridPtr grid_;
  ScalarBasis basis_;
  BilinearWorkspace ws_;
  double h_ = 0.0;
  bool advection_ = true;
  std::vector<double> diag_u_, diag_t_;
};

/// One semi-implicit Euler step:
///   (I + h nu A) u^l + h B(u^{l-1}, u^l) = u^{l-1} + h Pi(theta^{l-1} e2) + G(u^{l-1}) dW
///   (I + h kappa A~) theta^l + h (u^{l-1} . grad) theta^l = theta^{l-1} - h C_L u2^{l-1} + G~(theta^{l-1}) dW~
/// Reuses its workspaces; one Stepper per thread.
class Stepper {
 public:
  Stepper(GridPtr grid, ScalarBasis basis, ModelParams params, NoiseModel noise, SolverOptions opts);

  const ModelParams& params() const noexcept { return params_; }
  const NoiseModel& noise() const noexcept { return noise_; }
  const SolverOptions& options() const noexcept { return opts_; }

  /// Advances `state` in place. Throws NumericalError on NaN and SolverError on non-convergence.
  void step(SchemeState& state, const VectorField& dw, const ScalarField& dw_theta, StepInfo* info = nullptr);
  /// Variant with B(u^l, u^l) in place of B(u^{l-1}, u^l), solved by Picard iteration.
  void fully_implicit_step(SchemeState& state, const VectorField& dw, const ScalarField& dw_theta,
                           StepInfo* info = nullptr);

  /// Right-hand sides of the two linear systems.
  VectorField velocity_rhs(const SchemeState& s, const VectorField& dw) const;
  ScalarField temperature_rhs(const SchemeState& s, const ScalarField& dw_theta) const;

  ImplicitSystem& system() noexcept { return system_; }

 private:
  ModelParams params_;
  NoiseModel noise_;
  SolverOptions opts_;
  ImplicitSystem system_;
};

SchemeState euler_step(const SchemeState& state, const VectorField& dw, const ScalarField& dw_theta,
                       const ModelParams& params, const NoiseModel& noise, const SolverOptions& opts,
                       StepInfo* info = nullptr);
SchemeState fully_implicit_step(const SchemeState& state, const VectorField& dw, const ScalarField& dw_theta,
                                const ModelParams& params, const NoiseModel& noise, const SolverOptions& opts,
                                StepInfo* info = nullptr);

/// Standalone linear solve with the frozen advecting field `advecting`.
VectorField solve_implicit_linear(const VectorField& advecting, const VectorField& rhs, double h, double nu,
                                  const SolverOptions& opts, GmresResult* info = nullptr);
ScalarField solve_implicit_linear(const VectorField& advecting, const ScalarField& rhs, double h, double kappa,
                                  const SolverOptions& opts, GmresResult* info = nullptr);

/// Defects of the discrete energy balances of an additive-noise step.
/// `scale_*` is the sum of magnitudes of the individual terms.
struct EnergyResiduals {
  double r_u = 0.0;
  double r_theta = 0.0;
  double scale_u = 0.0;
  double scale_theta = 0.0;
  double relative_u() const { return scale_u > 0.0 ? r_u / scale_u : r_u; }
  double relative_theta() const { return scale_theta > 0.0 ? r_theta / scale_theta : r_theta; }
};

EnergyResiduals energy_identity_residuals(const SchemeState& prev, const SchemeState& next, const VectorField& dw,
                                          const ScalarField& dw_theta, const ModelParams& params);

/// Physical temperature samples on [0, L) x [0, L]: padded x1 nodes and
/// x2 = j L / (2 n2), j = 0 .. 2 n2 (both boundary lines included).
PhysicalField temperature_nodes(const GridPtr& grid);

/// theta = T - T_0 - x2 C_L in the sine basis. Throws ConfigError when the
/// boundary samples differ from T_0 or T_L by more than 1e-8 (relative to the
/// temperature scale) or the sample shape does not match temperature_nodes.
ScalarField benard_transform(const PhysicalField& temperature, const GridPtr& grid, const ModelParams& params);
PhysicalField inverse_benard_transform(const ScalarField& theta, const ModelParams& params);

}  // namespace bsq
