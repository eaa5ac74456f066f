#include "bsq/noise.hpp"

#include <cmath>
#include <numeric>

#include "bsq/error.hpp"
#include "bsq/rng.hpp"
#include "bsq/spectral.hpp"

namespace bsq {

namespace {

constexpr double kQuantum = 0x1.0p-16;
constexpr std::uint64_t kStreamVelocity = 0;
constexpr std::uint64_t kStreamScalar = 1;

void validate(const CovarianceConfig& cfg) {
  if (cfg.law != "power") throw ConfigError("covariance: unknown decay law '" + cfg.law + "'");
  if (!(cfg.amplitude >= 0.0) || !std::isfinite(cfg.amplitude))
    throw ConfigError("covariance: amplitude must be finite and >= 0");
  if (!std::isfinite(cfg.exponent)) throw ConfigError("covariance: exponent must be finite");
  if (cfg.cutoff < 0) throw ConfigError("covariance: cutoff must be >= 0");
  if (!(cfg.trace >= 0.0) || !std::isfinite(cfg.trace)) throw ConfigError("covariance: trace must be >= 0");
  if (cfg.require_admissible && !(cfg.exponent > 2.0))
    throw ConfigError("covariance: admissible noise needs a decay exponent > 2");
}

double law(const CovarianceConfig& cfg, double lam, double lam_first) {
  return cfg.amplitude * std::pow(1.0 + lam / lam_first, -cfg.exponent);
}

bool upper_half(int k1, int k2) { return k2 > 0 || (k2 == 0 && k1 > 0); }

// Round to 21 significant bits, so that scale * (integer below 2^32) is exact.
double round_scale(double s) {
  if (s == 0.0) return 0.0;
  int e = 0;
  const double m = std::frexp(s, &e);
  return std::ldexp(std::nearbyint(std::ldexp(m, 21)), e - 21);
}

std::int64_t quantize(double z) { return std::llround(z / kQuantum); }

}  // namespace

CovarianceSpec CovarianceSpec::velocity(GridPtr grid, const CovarianceConfig& cfg) {
  validate(cfg);
  CovarianceSpec s;
  s.target_ = Target::Velocity;
  s.grid_ = grid;
  s.cfg_ = cfg;
  const Grid& g = *grid;
  s.lambda_first_ = lambda1(g);
  const double c = 1.0 / std::sqrt(2.0 * g.length() * g.length());
  for (int i1 = 0; i1 < g.n1(); ++i1) {
    for (int i2 = 0; i2 < g.n2(); ++i2) {
      if (!g.retained1(i1) || !g.retained2(i2)) continue;
      const int k1 = g.k1(i1), k2 = g.k2(i2);
      if (!upper_half(k1, k2)) continue;
      if (cfg.cutoff > 0 && (std::abs(k1) > cfg.cutoff || std::abs(k2) > cfg.cutoff)) continue;
      const double lam = stokes_eigenvalue(g, i1, i2);
      const double q = law(cfg, lam, s.lambda_first_);
      if (q <= 0.0) continue;
      const double len = std::hypot(k1, k2);
      NoiseMode m;
      m.i1 = i1;
      m.i2 = i2;
      m.mirror1 = Grid::slot(-k1, g.n1());
      m.mirror2 = Grid::slot(-k2, g.n2());
      m.dir1 = -k2 / len;
      m.dir2 = k1 / len;
      m.eigenvalue = lam;
      m.variance = q;
      m.coeff = cplx(c, 0.0);
      s.modes_.push_back(m);
      m.coeff = cplx(0.0, -c);
      s.modes_.push_back(m);
    }
  }
  s.finish();
  return s;
}

CovarianceSpec CovarianceSpec::scalar(GridPtr grid, ScalarBasis basis, const CovarianceConfig& cfg) {
  validate(cfg);
  CovarianceSpec s;
  s.target_ = Target::Scalar;
  s.basis_ = basis;
  s.grid_ = grid;
  s.cfg_ = cfg;
  const Grid& g = *grid;
  s.lambda_first_ = lambda1_tilde(g, basis);
  const double w = ScalarField(grid, basis).weight();
  const double c = 1.0 / std::sqrt(2.0 * w);
  for (int i1 = 0; i1 < g.n1(); ++i1) {
    for (int i2 = 0; i2 < g.n2(); ++i2) {
      if (!g.retained1(i1)) continue;
      const int k1 = g.k1(i1);
      NoiseMode m;
      m.i1 = i1;
      m.i2 = i2;
      m.mirror1 = Grid::slot(-k1, g.n1());
      m.dir1 = 1.0;
      if (basis == ScalarBasis::Sine) {
        const int mode = i2 + 1;
        if (k1 < 0) continue;
        if (cfg.cutoff > 0 && (k1 > cfg.cutoff || mode > 2 * cfg.cutoff)) continue;
        m.mirror2 = i2;
        m.self_conjugate = k1 == 0;
      } else {
        if (!g.retained2(i2)) continue;
        const int k2 = g.k2(i2);
        if (!upper_half(k1, k2)) continue;
        if (cfg.cutoff > 0 && (std::abs(k1) > cfg.cutoff || std::abs(k2) > cfg.cutoff)) continue;
        m.mirror2 = Grid::slot(-k2, g.n2());
      }
      m.eigenvalue = scalar_eigenvalue(g, basis, i1, i2);
      m.variance = law(cfg, m.eigenvalue, s.lambda_first_);
      if (m.variance <= 0.0) continue;
      if (m.self_conjugate) {
        m.coeff = cplx(1.0 / std::sqrt(w), 0.0);
        s.modes_.push_back(m);
        continue;
      }
      m.coeff = cplx(c, 0.0);
      s.modes_.push_back(m);
      m.coeff = cplx(0.0, -c);
      s.modes_.push_back(m);
    }
  }
  s.finish();
  return s;
}

void CovarianceSpec::finish() {
  double tr = 0.0;
  for (const NoiseMode& m : modes_) tr += m.variance;
  if (cfg_.trace > 0.0 && tr > 0.0) {
    const double factor = cfg_.trace / tr;
    for (NoiseMode& m : modes_) m.variance *= factor;
  }
  trace_ = 0.0;
  k0_ = 0.0;
  for (const NoiseMode& m : modes_) {
    trace_ += m.variance;
    k0_ += m.eigenvalue * m.variance;
  }
}

VectorField CovarianceSpec::velocity_field(std::span<const double> coords) const {
  if (target_ != Target::Velocity) throw GridMismatch("velocity_field: covariance describes a scalar");
  if (coords.size() != modes_.size()) throw GridMismatch("velocity_field: coordinate count mismatch");
  VectorField f(grid_);
  for (std::size_t j = 0; j < modes_.size(); ++j) {
    const NoiseMode& m = modes_[j];
    const cplx a = coords[j] * m.coeff;
    f(0, m.i1, m.i2) += a * m.dir1;
    f(1, m.i1, m.i2) += a * m.dir2;
    f(0, m.mirror1, m.mirror2) += std::conj(a) * m.dir1;
    f(1, m.mirror1, m.mirror2) += std::conj(a) * m.dir2;
  }
  return f;
}

ScalarField CovarianceSpec::scalar_field(std::span<const double> coords) const {
  if (target_ != Target::Scalar) throw GridMismatch("scalar_field: covariance describes a velocity");
  if (coords.size() != modes_.size()) throw GridMismatch("scalar_field: coordinate count mismatch");
  ScalarField f(grid_, basis_);
  for (std::size_t j = 0; j < modes_.size(); ++j) {
    const NoiseMode& m = modes_[j];
    const cplx a = coords[j] * m.coeff;
    f(m.i1, m.i2) += a;
    if (!m.self_conjugate) f(m.mirror1, m.mirror2) += std::conj(a);
  }
  return f;
}

WienerPath::WienerPath(std::shared_ptr<const CovarianceSpec> cov_u, std::shared_ptr<const CovarianceSpec> cov_theta,
                       int n_ref, double horizon, std::uint64_t seed)
    : cov_u_(std::move(cov_u)), cov_theta_(std::move(cov_theta)), n_ref_(n_ref), horizon_(horizon), seed_(seed) {
  if (n_ref < 1) throw ConfigError("wiener path: N_ref must be >= 1");
  if (!(horizon > 0.0) || !std::isfinite(horizon)) throw ConfigError("wiener path: horizon must be > 0");
  if (!cov_u_ || !cov_theta_) throw ConfigError("wiener path: missing covariance");
  if (cov_u_->target() != CovarianceSpec::Target::Velocity || cov_theta_->target() != CovarianceSpec::Target::Scalar)
    throw ConfigError("wiener path: expected a velocity and a scalar covariance");
  require_same_grid(*cov_u_->grid_ptr(), *cov_theta_->grid_ptr(), "wiener path");
  const double h = fine_step();
  for (const NoiseMode& m : cov_u_->modes()) scale_u_.push_back(round_scale(std::sqrt(m.variance * h)));
  for (const NoiseMode& m : cov_theta_->modes()) scale_t_.push_back(round_scale(std::sqrt(m.variance * h)));
}

void WienerPath::fine_normals(int step, std::vector<std::int64_t>& u, std::vector<std::int64_t>& theta) const {
  if (step < 0 || step >= n_ref_) throw std::out_of_range("wiener path: fine step out of range");
  const std::uint64_t ku = rng::derive(seed_, kStreamVelocity);
  const std::uint64_t kt = rng::derive(seed_, kStreamScalar);
  u.resize(scale_u_.size());
  theta.resize(scale_t_.size());
  for (std::size_t j = 0; j < u.size(); ++j) u[j] = quantize(rng::normal(ku, j, static_cast<std::uint64_t>(step)));
  for (std::size_t j = 0; j < theta.size(); ++j)
    theta[j] = quantize(rng::normal(kt, j, static_cast<std::uint64_t>(step)));
}

NoiseIncrement WienerPath::from_sums(std::span<const std::int64_t> u, std::span<const std::int64_t> theta) const {
  NoiseIncrement inc;
  inc.u.resize(u.size());
  inc.theta.resize(theta.size());
  for (std::size_t j = 0; j < u.size(); ++j) inc.u[j] = scale_u_[j] * (static_cast<double>(u[j]) * kQuantum);
  for (std::size_t j = 0; j < theta.size(); ++j)
    inc.theta[j] = scale_t_[j] * (static_cast<double>(theta[j]) * kQuantum);
  return inc;
}

NoiseIncrement WienerPath::increment(int first, int last) const {
  if (first < 0 || last > n_ref_ || first > last) throw std::out_of_range("wiener path: invalid step range");
  std::vector<std::int64_t> su(scale_u_.size(), 0), st(scale_t_.size(), 0), u, t;
  for (int step = first; step < last; ++step) {
    fine_normals(step, u, t);
    for (std::size_t j = 0; j < su.size(); ++j) su[j] += u[j];
    for (std::size_t j = 0; j < st.size(); ++j) st[j] += t[j];
  }
  return from_sums(su, st);
}

WienerPath sample_fine_path(std::shared_ptr<const CovarianceSpec> cov_u,
                            std::shared_ptr<const CovarianceSpec> cov_theta, int n_ref, double horizon,
                            std::uint64_t seed) {
  return WienerPath(std::move(cov_u), std::move(cov_theta), n_ref, horizon, seed);
}

IncrementSequence::IncrementSequence(const WienerPath& path, int n) : path_(&path), n_(n) {
  if (n < 1 || path.n_ref() % n != 0)
    throw ConfigError("aggregate_increments: N = " + std::to_string(n) + " does not divide N_ref = " +
                      std::to_string(path.n_ref()));
  block_ = path.n_ref() / n;
}

NoiseIncrement IncrementSequence::get(int l) const {
  if (l < 1 || l > n_) throw std::out_of_range("increment index out of range");
  return path_->increment((l - 1) * block_, l * block_);
}

IncrementSequence aggregate_increments(const WienerPath& path, int n) { return IncrementSequence(path, n); }

std::vector<NoiseIncrement> aggregate(const std::vector<NoiseIncrement>& finer, int n) {
  const int m = static_cast<int>(finer.size());
  if (n < 1 || m % n != 0)
    throw ConfigError("aggregate: N = " + std::to_string(n) + " does not divide " + std::to_string(m));
  const int block = m / n;
  std::vector<NoiseIncrement> out(n);
  for (int l = 0; l < n; ++l) {
    NoiseIncrement acc = finer[l * block];
    for (int b = 1; b < block; ++b) {
      const NoiseIncrement& x = finer[l * block + b];
      for (std::size_t j = 0; j < acc.u.size(); ++j) acc.u[j] += x.u[j];
      for (std::size_t j = 0; j < acc.theta.size(); ++j) acc.theta[j] += x.theta[j];
    }
    out[l] = std::move(acc);
  }
  return out;
}

double Sigma::operator()(double v) const noexcept {
  if (shape == Shape::Lorentzian) return c0 + c1 / (1.0 + v * v);
  return c0 + c1 * v / std::sqrt(1.0 + v * v);
}

double Sigma::lipschitz() const noexcept {
  // max |d/dv (1 + v^2)^-1| is attained at v^2 = 1/3
  if (shape == Shape::Lorentzian) return std::abs(c1) * 3.0 * std::sqrt(3.0) / 8.0;
  return std::abs(c1);
}

double Sigma::bound() const noexcept { return std::abs(c0) + std::abs(c1); }

NoiseModel NoiseModel::additive() { return NoiseModel{}; }

NoiseModel NoiseModel::multiplicative(Sigma u, Sigma theta, double l1, double l1_tilde) {
  NoiseModel m;
  m.kind = NoiseKind::Multiplicative;
  m.sigma_u = u;
  m.sigma_theta = theta;
  const double lu = u.lipschitz() * u.lipschitz(), lt = theta.lipschitz() * theta.lipschitz();
  m.declared_l1 = l1 < 0.0 ? lu : l1;
  m.declared_l1_tilde = l1_tilde < 0.0 ? lt : l1_tilde;
  if (m.declared_l1 < lu || m.declared_l1_tilde < lt)
    throw ConfigError("noise: declared Lipschitz constant below that of sigma");
  return m;
}

namespace {
NoiseModel::Constants constants_of(const Sigma& s, double l1) {
  const double b = s.bound() * s.bound();
  return {b, 0.0, b, s.lipschitz() * s.lipschitz(), l1};
}
}  // namespace

NoiseModel::Constants NoiseModel::velocity_constants() const {
  if (kind == NoiseKind::Additive) return {1.0, 0.0, 1.0, 0.0, 0.0};
  return constants_of(sigma_u, declared_l1);
}

NoiseModel::Constants NoiseModel::temperature_constants() const {
  if (kind == NoiseKind::Additive) return {1.0, 0.0, 1.0, 0.0, 0.0};
  return constants_of(sigma_theta, declared_l1_tilde);
}

std::string_view to_string(NoiseKind kind) {
  return kind == NoiseKind::Additive ? "additive" : "multiplicative";
}

NoiseKind noise_kind_from_string(std::string_view s) {
  if (s == "additive") return NoiseKind::Additive;
  if (s == "multiplicative") return NoiseKind::Multiplicative;
  throw ConfigError("unknown noise kind '" + std::string(s) + "'");
}

std::string_view to_string(Sigma::Shape shape) {
  return shape == Sigma::Shape::Saturating ? "saturating" : "lorentzian";
}

Sigma::Shape sigma_shape_from_string(std::string_view s) {
  if (s == "saturating") return Sigma::Shape::Saturating;
  if (s == "lorentzian") return Sigma::Shape::Lorentzian;
  throw ConfigError("unknown sigma shape '" + std::string(s) + "'");
}

VectorField apply_diffusion(const NoiseModel& model, const VectorField& state, const VectorField& increment) {
  require_same_grid(state.grid(), increment.grid(), "apply_diffusion");
  if (model.kind == NoiseKind::Additive) return leray_project(increment);
  auto s = to_physical(state);
  auto x = to_physical(increment);
  for (int c = 0; c < 2; ++c) {
    for (std::size_t i = 0; i < x[c].values.size(); ++i) x[c].values[i] *= model.sigma_u(s[c].values[i]);
  }
  VectorField out = from_physical(x, state.grid_ptr());
  leray_project_inplace(out);
  return out;
}

ScalarField apply_diffusion(const NoiseModel& model, const ScalarField& state, const ScalarField& increment) {
  require_compatible(state, increment, "apply_diffusion");
  if (model.kind == NoiseKind::Additive) return increment;
  PhysicalField s = to_physical(state);
  PhysicalField x = to_physical(increment);
  if (state.basis() == ScalarBasis::Periodic) {
    for (std::size_t i = 0; i < x.values.size(); ++i) x.values[i] *= model.sigma_theta(s.values[i]);
    return from_physical(x, state.grid_ptr(), state.basis());
  }
  // Product on [0, L], then odd reflection so the projection is a pure sine transform.
  const int half = x.n2 / 2;
  for (int i1 = 0; i1 < x.n1; ++i1) {
    for (int j = 0; j <= half; ++j) x.at(i1, j) *= model.sigma_theta(s.at(i1, j));
    x.at(i1, 0) = 0.0;
    x.at(i1, half) = 0.0;
    for (int j = half + 1; j < x.n2; ++j) x.at(i1, j) = -x.at(i1, x.n2 - j);
  }
  return from_physical(x, state.grid_ptr(), state.basis());
}

}  // namespace bsq
