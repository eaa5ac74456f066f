#include "bsq/constants.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "bsq/error.hpp"
#include "bsq/rng.hpp"
#include "bsq/spectral.hpp"

namespace bsq {

namespace {

double inverse(double g) { return std::isinf(g) ? 0.0 : 1.0 / g; }

Threshold make(double value, bool ok, std::string reason = {}) {
  return Threshold{value, ok && std::isfinite(value) && value > 0.0, ok ? std::string{} : std::move(reason)};
}

}  // namespace

ThresholdInputs ThresholdInputs::from(const ModelParams& params, const CovarianceSpec& cov_u,
                                      const CovarianceSpec& cov_theta, double gamma0, double gamma0_tilde) {
  ThresholdInputs in;
  in.params = params;
  in.lambda1 = bsq::lambda1(*cov_u.grid_ptr());
  in.lambda1_tilde = bsq::lambda1_tilde(*cov_theta.grid_ptr(), cov_theta.basis());
  in.trace_q = cov_u.trace();
  in.trace_q_tilde = cov_theta.trace();
  in.gamma0 = gamma0;
  in.gamma0_tilde = gamma0_tilde;
  return in;
}

Thresholds compute_thresholds(const ThresholdInputs& in) {
  const ModelParams& p = in.params;
  if (!(in.gamma0 > 0.0) || !(in.gamma0_tilde > 0.0)) throw ConfigError("thresholds: gamma0 values must be > 0");
  if (!(in.lambda1 > 0.0) || !(in.lambda1_tilde > 0.0)) throw ConfigError("thresholds: eigenvalues must be > 0");
  const double cl = std::abs(p.c_l);
  const double l1 = in.lambda1, l1t = in.lambda1_tilde, tq = in.trace_q, tqt = in.trace_q_tilde;
  const double prod = p.nu * p.kappa * l1 * l1t;
  Thresholds t;
  t.in = in;

  const bool pre = cl < prod / 4.0;
  const double den0 = 4.0 * (l1t * p.kappa * cl * tq + l1 * p.nu * tqt);
  const std::string pre_msg = "requires |C_L| < nu kappa lambda1 lambda1~ / 4";
  t.beta0 = make((prod - 4.0 * cl) / den0, pre && den0 > 0.0, pre ? "zero noise traces" : pre_msg);
  const double den1 = den0 + (prod - 4.0 * cl) * (inverse(in.gamma0_tilde) + cl * inverse(in.gamma0));
  t.beta1 = make((prod - 4.0 * cl) / den1, pre && den1 > 0.0, pre ? "zero noise traces" : pre_msg);

  const bool zero = p.c_l == 0.0;
  const std::string zero_msg = "applies only when C_L = 0";
  t.beta0_tilde = make(p.kappa * l1t / (4.0 * tqt), zero && tqt > 0.0, zero ? "zero temperature trace" : zero_msg);
  const double bt1_den = 4.0 * tqt + p.kappa * l1t * inverse(in.gamma0_tilde);
  t.beta1_tilde = make(p.kappa * l1t / bt1_den, zero && bt1_den > 0.0, zero ? "zero temperature trace" : zero_msg);

  const double a_den = 4.0 * (2.0 * p.horizon * tqt + p.kappa * l1t * tq);
  t.alpha1 = make(prod / a_den, zero && a_den > 0.0, zero ? "zero noise traces" : zero_msg);
  const double at_den = a_den + 2.0 * p.kappa * l1t * p.horizon * inverse(in.gamma0_tilde) + prod * inverse(in.gamma0);
  t.alpha1_tilde = make(prod / at_den, zero && at_den > 0.0, zero ? "zero noise traces" : zero_msg);

  // nu lambda1 b g0 / (2 g0 [T + 2 Tr(Q) b] + nu lambda1 b), b = beta1~; divided through by g0.
  const double b = t.beta1_tilde.value;
  t.alpha1_tilde_factored =
      p.nu * l1 * b / (2.0 * (p.horizon + 2.0 * tq * b) + p.nu * l1 * b * inverse(in.gamma0));
  return t;
}

Thresholds compute_thresholds(const ModelParams& params, const CovarianceSpec& cov_u, const CovarianceSpec& cov_theta,
                              double gamma0, double gamma0_tilde) {
  return compute_thresholds(ThresholdInputs::from(params, cov_u, cov_theta, gamma0, gamma0_tilde));
}

double loc_growth_constant(double m, const ModelParams& params, double c4, double gamma) {
  if (m < 0.0 || !(gamma > 0.0)) throw ConfigError("loc_growth_constant: need M >= 0 and gamma > 0");
  if (m == 0.0) return 0.0;
  const double c44 = std::pow(c4, 4);
  return 9.0 * (1.0 + gamma) * c44 / 8.0 * std::max(5.0 / params.nu, 1.0 / params.kappa) * m;
}

const Condition& ConditionReport::find(const std::string& name) const {
  for (const Condition& c : conditions)
    if (c.name == name) return c;
  throw std::out_of_range("no condition named " + name);
}

ConditionReport check_strong_rate_conditions(const ThresholdInputs& in, double c4) {
  ConditionReport r;
  r.c4 = c4;
  r.thresholds = compute_thresholds(in);
  const Thresholds& t = r.thresholds;
  const ModelParams& p = in.params;
  const double nu = p.nu, ka = p.kappa, cl = std::abs(p.c_l), T = p.horizon;
  const double l1 = in.lambda1, l1t = in.lambda1_tilde, tq = in.trace_q, tqt = in.trace_q_tilde;
  const double c44 = std::pow(c4, 4);
  const double prod = nu * ka * l1 * l1t;

  auto add = [&](std::string name, bool applicable, double lhs, double rhs, std::string note = {}) {
    Condition c{std::move(name), applicable, false, lhs, rhs, rhs - lhs, std::move(note)};
    c.holds = applicable && std::isfinite(lhs) && lhs < rhs;
    r.conditions.push_back(std::move(c));
  };

  const bool pre = cl < prod / 4.0;
  add("coupling_precondition", true, cl, prod / 4.0);

  const bool coupled = cl > 0.0 && pre;
  const std::string coupled_note = cl == 0.0 ? "C_L = 0: the decoupled conditions apply" : "";
  const double k = cl > 0.0 ? c44 / ka * (1.0 / nu + 1.0 / ka + 2.0 * ka / (nu * nu * cl)) : kInfinity;
  add("coupled_deterministic", coupled, l1t * ka * cl * tq + l1 * nu * tqt, (prod - 4.0 * cl) / k, coupled_note);
  add("coupled_random", coupled && t.beta1.defined, k, 4.0 * t.beta1.value, coupled_note);

  const bool decoupled = cl == 0.0;
  const std::string dec_note = decoupled ? "" : "C_L != 0: the coupled conditions apply";
  const double det_temp = c44 * tqt / (ka * nu * l1t) * ((nu + 2.0 * ka) / (ka * ka) + 8.0 * T / (nu * nu * l1));
  add("decoupled_deterministic", decoupled, det_temp + c44 * tq / (nu * nu * nu * l1), 1.0, dec_note);
  add("decoupled_deterministic_derived", decoupled, det_temp + 4.0 * c44 * tq / (nu * nu * nu * l1), 1.0,
      decoupled ? "velocity-trace term as obtained from alpha1" : dec_note);
  const bool rnd = decoupled && t.beta1_tilde.defined && t.alpha1_tilde.defined;
  add("decoupled_random", rnd,
      c44 / (4.0 * ka * t.beta1_tilde.value) * (2.0 / nu + 1.0 / ka) + c44 / (nu * nu * t.alpha1_tilde.value), 1.0,
      dec_note);
  return r;
}

ConditionReport check_strong_rate_conditions(const ModelParams& params, const CovarianceSpec& cov_u,
                                             const CovarianceSpec& cov_theta, double gamma0, double gamma0_tilde,
                                             double c4) {
  return check_strong_rate_conditions(ThresholdInputs::from(params, cov_u, cov_theta, gamma0, gamma0_tilde), c4);
}

double gagliardo_ratio(const VectorField& u) {
  const double l2 = norm(u, Space::V0);
  const double h1 = norm(u, Space::V1);
  if (l2 == 0.0 || h1 == 0.0) return 0.0;
  return norm(u, Space::L4) / std::sqrt(h1 * l2);
}

namespace {

// Keep only |k1|, |k2| < n / 2 (the modes of an n x n grid).
VectorField truncate(const VectorField& u, int n) {
  VectorField out = u;
  const Grid& g = u.grid();
  for (int i1 = 0; i1 < g.n1(); ++i1)
    for (int i2 = 0; i2 < g.n2(); ++i2)
      if (2 * std::abs(g.k1(i1)) >= n || 2 * std::abs(g.k2(i2)) >= n) out(0, i1, i2) = out(1, i1, i2) = 0.0;
  return out;
}

// Velocity of a stream function given by its coefficients: u = (d2 psi, -d1 psi).
VectorField from_stream(const GridPtr& g, const std::vector<cplx>& psi) {
  VectorField u(g);
  const cplx I(0.0, 1.0);
  for (int i1 = 0; i1 < g->n1(); ++i1)
    for (int i2 = 0; i2 < g->n2(); ++i2) {
      if (!g->retained1(i1) || !g->retained2(i2)) continue;
      const cplx c = psi[g->index(i1, i2)];
      u(0, i1, i2) = I * g->wave2(i2) * c;
      u(1, i1, i2) = -I * g->wave1(i1) * c;
    }
  u(0, 0, 0) = u(1, 0, 0) = 0.0;
  return u;
}

// Hermitian coefficients built from a per-mode hash so the field is
// independent of the enumeration order.
VectorField random_spectrum(const GridPtr& g, std::uint64_t key) {
  const double decay = 0.5 + 3.0 * rng::to_unit(rng::derive(key, 1));
  // The band does not depend on the grid, so a coarser grid sees the truncation.
  const int band = std::min(g->n1() / 2 - 1, 1 + static_cast<int>(rng::to_unit(rng::derive(key, 2)) * 63.0));
  std::vector<cplx> psi(g->size());
  for (int i1 = 0; i1 < g->n1(); ++i1)
    for (int i2 = 0; i2 < g->n2(); ++i2) {
      const int k1 = g->k1(i1), k2 = g->k2(i2);
      if (!(k2 > 0 || (k2 == 0 && k1 > 0))) continue;
      if (std::max(std::abs(k1), std::abs(k2)) > band) continue;
      const std::uint64_t mk = rng::derive(key, 1000 + static_cast<std::uint64_t>((k1 + 4096) * 8192 + k2));
      const double amp = std::pow(1.0 + std::hypot(k1, k2), -decay - 1.0);
      const cplx c = amp * cplx(rng::normal(mk, 0, 0), rng::normal(mk, 0, 1));
      psi[g->index(i1, i2)] = c;
      psi[g->index(Grid::slot(-k1, g->n1()), Grid::slot(-k2, g->n2()))] = std::conj(c);
    }
  return from_stream(g, psi);
}

// Periodized Gaussian stream function of width s centred at x0.
VectorField gaussian_vortex(const GridPtr& g, std::uint64_t key) {
  const double L = g->length();
  const double s = L * (0.02 + 0.2 * rng::to_unit(rng::derive(key, 3)));
  const double x1 = L * rng::to_unit(rng::derive(key, 4)), x2 = L * rng::to_unit(rng::derive(key, 5));
  std::vector<cplx> psi(g->size());
  for (int i1 = 0; i1 < g->n1(); ++i1)
    for (int i2 = 0; i2 < g->n2(); ++i2) {
      const double a = g->wave1(i1), b = g->wave2(i2);
      psi[g->index(i1, i2)] = std::exp(-0.5 * s * s * (a * a + b * b)) * std::polar(1.0, -(a * x1 + b * x2));
    }
  return from_stream(g, psi);
}

}  // namespace

GagliardoEstimate estimate_gagliardo_c4(const GridPtr& grid, int trials, std::uint64_t seed) {
  if (trials < 1) throw ConfigError("estimate_gagliardo_c4: trials must be >= 1");
  if (grid->n1() != grid->n2()) throw ConfigError("estimate_gagliardo_c4: needs a square grid");
  GagliardoEstimate out;
  for (int t = 0; t < trials; ++t) {
    const std::uint64_t key = rng::derive(seed, static_cast<std::uint64_t>(t));
    VectorField u = (t % 2 == 0) ? random_spectrum(grid, key) : gaussian_vortex(grid, key);
    double best = 0.0;
    for (int n = 4; n <= grid->n1(); n *= 2) best = std::max(best, gagliardo_ratio(truncate(u, n)));
    out.per_trial.push_back(best);
    out.estimate = std::max(out.estimate, best);
  }
  return out;
}

}  // namespace bsq
