#include "bsq/scheme.hpp"

#include <cmath>

#include "bsq/error.hpp"
#include "bsq/krylov.hpp"

namespace bsq {

namespace {

template <class F>
double real_dot(const F& a, const F& b) {
  auto x = a.data();
  auto y = b.data();
  double s = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) s += x[i].real() * y[i].real() + x[i].imag() * y[i].imag();
  return s;
}

std::vector<double> diagonal(const Grid& g, double hc, auto eigen) {
  std::vector<double> d(g.size(), 1.0);
  for (int i1 = 0; i1 < g.n1(); ++i1)
    for (int i2 = 0; i2 < g.n2(); ++i2) d[g.index(i1, i2)] = 1.0 + hc * eigen(i1, i2);
  return d;
}

}  // namespace

ModelParams ModelParams::make(double nu, double kappa, double length, double horizon, double t0, double tl) {
  ModelParams p;
  p.nu = nu;
  p.kappa = kappa;
  p.length = length;
  p.horizon = horizon;
  p.t0 = t0;
  p.tl = tl;
  p.c_l = (tl - t0) / length;
  return p;
}

void ModelParams::validate() const {
  auto positive = [](double v, const char* what) {
    if (!(v > 0.0) || !std::isfinite(v)) throw ConfigError(std::string("model: ") + what + " must be > 0");
  };
  positive(nu, "nu");
  positive(kappa, "kappa");
  positive(length, "L");
  positive(horizon, "T");
  if (!std::isfinite(t0) || !std::isfinite(tl) || !std::isfinite(c_l))
    throw ConfigError("model: temperatures must be finite");
  const double expect = (tl - t0) / length;
  if (std::abs(c_l - expect) > 1e-14 * std::max(1.0, std::abs(expect)))
    throw ConfigError("model: C_L inconsistent with (T_L - T_0) / L");
}

SchemeState SchemeState::initial(VectorField u0, ScalarField theta0, double horizon, int n_steps) {
  if (n_steps < 1) throw ConfigError("scheme: N must be >= 1");
  const double h = horizon / n_steps;
  if (!(h < 1.0)) throw ConfigError("scheme: time step h = T/N must be < 1");
  require_same_grid(u0.grid(), theta0.grid(), "SchemeState::initial");
  if (divergence_defect(u0) > 1e-10) throw ConfigError("scheme: initial velocity is not divergence-free");
  return SchemeState{0, n_steps, h, std::move(u0), std::move(theta0)};
}

ImplicitSystem::ImplicitSystem(GridPtr grid, ScalarBasis basis)
    : grid_(grid), basis_(basis), ws_(std::move(grid)) {}

void ImplicitSystem::set(double h, double nu, double kappa, const VectorField& advecting, bool advection) {
  const Grid& g = *grid_;
  h_ = h;
  advection_ = advection;
  diag_u_ = diagonal(g, h * nu, [&](int a, int b) { return stokes_eigenvalue(g, a, b); });
  diag_t_ = diagonal(g, h * kappa, [&](int a, int b) { return scalar_eigenvalue(g, basis_, a, b); });
  if (advection) ws_.freeze(advecting);
}

VectorField ImplicitSystem::apply(const VectorField& x) {
  VectorField y = x;
  for (int c = 0; c < 2; ++c) {
    auto v = y.component(c);
    for (std::size_t i = 0; i < v.size(); ++i) v[i] *= diag_u_[i];
  }
  if (!advecting_is_zero()) y.axpy(h_, ws_.advect_velocity(x));
  return y;
}

ScalarField ImplicitSystem::apply(const ScalarField& x) {
  ScalarField y = x;
  auto v = y.data();
  for (std::size_t i = 0; i < v.size(); ++i) v[i] *= diag_t_[i];
  if (!advecting_is_zero()) y.axpy(h_, ws_.advect_scalar(x));
  return y;
}

VectorField ImplicitSystem::precondition(const VectorField& x) const {
  VectorField y = x;
  for (int c = 0; c < 2; ++c) {
    auto v = y.component(c);
    for (std::size_t i = 0; i < v.size(); ++i) v[i] /= diag_u_[i];
  }
  return y;
}

ScalarField ImplicitSystem::precondition(const ScalarField& x) const {
  ScalarField y = x;
  auto v = y.data();
  for (std::size_t i = 0; i < v.size(); ++i) v[i] /= diag_t_[i];
  return y;
}

namespace {
template <class F>
F solve_with(ImplicitSystem& sys, const F& rhs, const SolverOptions& opts, GmresResult* info, const F* guess) {
  GmresResult r;
  F x = guess && !sys.advecting_is_zero() ? *guess : sys.precondition(rhs);
  if (sys.advecting_is_zero()) {
    r.converged = true;
  } else {
    r = gmres<F>([&](const F& v) { return sys.apply(v); }, [&](const F& v) { return sys.precondition(v); },
                 [](const F& a, const F& b) { return real_dot(a, b); }, rhs, x, opts.tol, opts.max_iter,
                 opts.restart);
  }
  if (info) *info = r;
  return x;
}
}  // namespace

VectorField ImplicitSystem::solve(const VectorField& rhs, const SolverOptions& opts, GmresResult* info) {
  return solve_with<VectorField>(*this, rhs, opts, info, nullptr);
}

ScalarField ImplicitSystem::solve(const ScalarField& rhs, const SolverOptions& opts, GmresResult* info) {
  return solve_with<ScalarField>(*this, rhs, opts, info, nullptr);
}

Stepper::Stepper(GridPtr grid, ScalarBasis basis, ModelParams params, NoiseModel noise, SolverOptions opts)
    : params_(params), noise_(noise), opts_(opts), system_(grid, basis) {
  params_.validate();
  if (std::abs(grid->length() - params_.length) > 1e-14 * params_.length)
    throw ConfigError("scheme: grid side length differs from the model length");
  if (basis == ScalarBasis::Periodic && params_.c_l != 0.0)
    throw ConfigError("scheme: a periodic temperature requires C_L = 0");
}

VectorField Stepper::velocity_rhs(const SchemeState& s, const VectorField& dw) const {
  VectorField rhs = s.u;
  rhs.axpy(s.h, buoyancy(s.theta));
  rhs += apply_diffusion(noise_, s.u, dw);
  return rhs;
}

ScalarField Stepper::temperature_rhs(const SchemeState& s, const ScalarField& dw_theta) const {
  ScalarField rhs = s.theta;
  if (params_.c_l != 0.0) rhs.axpy(-s.h * params_.c_l, vertical_component(s.u, s.theta.basis()));
  rhs += apply_diffusion(noise_, s.theta, dw_theta);
  return rhs;
}

namespace {
void check_finite(const SchemeState& s) {
  if (s.u.has_nan() || s.theta.has_nan())
    throw NumericalError("scheme: non-finite state at step " + std::to_string(s.step));
}
}  // namespace

void Stepper::step(SchemeState& state, const VectorField& dw, const ScalarField& dw_theta, StepInfo* info) {
  require_same_grid(state.u.grid(), dw.grid(), "euler_step");
  require_compatible(state.theta, dw_theta, "euler_step");
  VectorField ru = velocity_rhs(state, dw);
  ScalarField rt = temperature_rhs(state, dw_theta);
  system_.set(state.h, params_.nu, params_.kappa, state.u, opts_.advection);
  GmresResult gu, gt;
  VectorField u = system_.solve(ru, opts_, &gu);
  ScalarField t = system_.solve(rt, opts_, &gt);
  leray_project_inplace(u);
  state.u = std::move(u);
  state.theta = std::move(t);
  ++state.step;
  if (info) *info = StepInfo{gu.iterations, gt.iterations, gu.residual, gt.residual, 0};
  check_finite(state);
}

void Stepper::fully_implicit_step(SchemeState& state, const VectorField& dw, const ScalarField& dw_theta,
                                  StepInfo* info) {
  require_same_grid(state.u.grid(), dw.grid(), "fully_implicit_step");
  require_compatible(state.theta, dw_theta, "fully_implicit_step");
  VectorField ru = velocity_rhs(state, dw);
  ScalarField rt = temperature_rhs(state, dw_theta);
  system_.set(state.h, params_.nu, params_.kappa, state.u, opts_.advection);
  GmresResult gu, gt;
  ScalarField t = system_.solve(rt, opts_, &gt);
  VectorField u = system_.solve(ru, opts_, &gu);
  int it = 0;
  double change = 0.0;
  for (; it < opts_.picard_max; ++it) {
    system_.set(state.h, params_.nu, params_.kappa, u, opts_.advection);
    VectorField next = solve_with<VectorField>(system_, ru, opts_, &gu, &u);
    change = norm(next - u, Space::V0);
    const double size = norm(next, Space::V0);
    u = std::move(next);
    if (change <= opts_.picard_tol * std::max(size, 1e-300)) break;
  }
  if (it == opts_.picard_max)
    throw SolverError("fully implicit step: Picard iteration did not contract", it, change);
  leray_project_inplace(u);
  state.u = std::move(u);
  state.theta = std::move(t);
  ++state.step;
  if (info) *info = StepInfo{gu.iterations, gt.iterations, gu.residual, gt.residual, it + 1};
  check_finite(state);
}

SchemeState euler_step(const SchemeState& state, const VectorField& dw, const ScalarField& dw_theta,
                       const ModelParams& params, const NoiseModel& noise, const SolverOptions& opts,
                       StepInfo* info) {
  Stepper s(state.u.grid_ptr(), state.theta.basis(), params, noise, opts);
  SchemeState next = state;
  s.step(next, dw, dw_theta, info);
  return next;
}

SchemeState fully_implicit_step(const SchemeState& state, const VectorField& dw, const ScalarField& dw_theta,
                                const ModelParams& params, const NoiseModel& noise, const SolverOptions& opts,
                                StepInfo* info) {
  Stepper s(state.u.grid_ptr(), state.theta.basis(), params, noise, opts);
  SchemeState next = state;
  s.fully_implicit_step(next, dw, dw_theta, info);
  return next;
}

VectorField solve_implicit_linear(const VectorField& advecting, const VectorField& rhs, double h, double nu,
                                  const SolverOptions& opts, GmresResult* info) {
  if (!(h > 0.0) || !(nu > 0.0)) throw ConfigError("solve_implicit_linear: h and nu must be > 0");
  require_same_grid(advecting.grid(), rhs.grid(), "solve_implicit_linear");
  ImplicitSystem sys(rhs.grid_ptr(), ScalarBasis::Sine);
  sys.set(h, nu, 1.0, advecting, opts.advection);
  return sys.solve(rhs, opts, info);
}

ScalarField solve_implicit_linear(const VectorField& advecting, const ScalarField& rhs, double h, double kappa,
                                  const SolverOptions& opts, GmresResult* info) {
  if (!(h > 0.0) || !(kappa > 0.0)) throw ConfigError("solve_implicit_linear: h and kappa must be > 0");
  require_same_grid(advecting.grid(), rhs.grid(), "solve_implicit_linear");
  ImplicitSystem sys(rhs.grid_ptr(), rhs.basis());
  sys.set(h, 1.0, kappa, advecting, opts.advection);
  return sys.solve(rhs, opts, info);
}

EnergyResiduals energy_identity_residuals(const SchemeState& prev, const SchemeState& next, const VectorField& dw,
                                          const ScalarField& dw_theta, const ModelParams& params) {
  const double h = next.h;
  EnergyResiduals r;
  {
    const double terms[] = {
        norm_squared(next.u, Space::V0),
        -norm_squared(prev.u, Space::V0),
        norm_squared(next.u - prev.u, Space::V0),
        2.0 * h * params.nu * norm_squared(next.u, Space::V1),
        -2.0 * h * inner(buoyancy(prev.theta), next.u),
        -2.0 * inner(dw, next.u),
    };
    double sum = 0.0;
    for (double t : terms) {
      sum += t;
      r.scale_u += std::abs(t);
    }
    r.r_u = std::abs(sum);
  }
  {
    const double terms[] = {
        norm_squared(next.theta, Space::H0),
        -norm_squared(prev.theta, Space::H0),
        norm_squared(next.theta - prev.theta, Space::H0),
        2.0 * h * params.kappa * norm_squared(next.theta, Space::H1),
        params.c_l == 0.0 ? 0.0
                          : 2.0 * params.c_l * h * inner(vertical_component(prev.u, next.theta.basis()), next.theta),
        -2.0 * inner(dw_theta, next.theta),
    };
    double sum = 0.0;
    for (double t : terms) {
      sum += t;
      r.scale_theta += std::abs(t);
    }
    r.r_theta = std::abs(sum);
  }
  return r;
}

PhysicalField temperature_nodes(const GridPtr& grid) {
  PhysicalField p;
  const int m = 2 * grid->n2();
  p.n1 = grid->sine_fft().nx();
  p.n2 = m + 1;
  p.extent1 = grid->length();
  p.extent2 = grid->length() * (m + 1) / m;
  p.values.assign(static_cast<std::size_t>(p.n1) * p.n2, 0.0);
  return p;
}

ScalarField benard_transform(const PhysicalField& temperature, const GridPtr& grid, const ModelParams& params) {
  const PhysicalField shape = temperature_nodes(grid);
  if (temperature.n1 != shape.n1 || temperature.n2 != shape.n2 || temperature.values.size() != shape.values.size())
    throw ConfigError("benard_transform: temperature samples do not match the node layout");
  if (std::abs(grid->length() - params.length) > 1e-14 * params.length)
    throw ConfigError("benard_transform: grid side length differs from the model length");
  const int m = shape.n2 - 1;
  const double tol = 1e-8 * std::max({1.0, std::abs(params.t0), std::abs(params.tl)});
  PhysicalField s = to_physical(ScalarField(grid, ScalarBasis::Sine));
  for (int i1 = 0; i1 < shape.n1; ++i1) {
    for (int j = 0; j <= m; ++j) {
      const double x2 = params.length * j / m;
      const double v = temperature.at(i1, j) - params.t0 - x2 * params.c_l;
      if ((j == 0 || j == m) && std::abs(v) > tol)
        throw ConfigError("benard_transform: boundary temperature differs from " +
                          std::string(j == 0 ? "T_0" : "T_L") + " by " + std::to_string(std::abs(v)));
      s.at(i1, j) = (j == 0 || j == m) ? 0.0 : v;
    }
    for (int j = m + 1; j < s.n2; ++j) s.at(i1, j) = -s.at(i1, s.n2 - j);
  }
  return from_physical(s, grid, ScalarBasis::Sine);
}

PhysicalField inverse_benard_transform(const ScalarField& theta, const ModelParams& params) {
  if (theta.basis() != ScalarBasis::Sine) throw ConfigError("inverse_benard_transform: needs the sine basis");
  PhysicalField out = temperature_nodes(theta.grid_ptr());
  PhysicalField s = to_physical(theta);
  const int m = out.n2 - 1;
  for (int i1 = 0; i1 < out.n1; ++i1)
    for (int j = 0; j <= m; ++j) out.at(i1, j) = s.at(i1, j) + params.t0 + params.length * j / m * params.c_l;
  return out;
}

}  // namespace bsq
