#include "bsq/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <fstream>
#include <numbers>
#include <numeric>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "bsq/error.hpp"
#include "bsq/rng.hpp"
#include "bsq/spectral.hpp"

namespace bsq {

using nlohmann::json;

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::uint64_t mode_id(int k1, int k2) {
  return static_cast<std::uint64_t>(k1 + 4096) * 8192u + static_cast<std::uint64_t>(k2 + 4096);
}

double phase(int k1, int k2) {
  const double x = 0.6180339887498949 * k1 + 0.4142135623730951 * k2 + 0.1;
  return 2.0 * std::numbers::pi * (x - std::floor(x));
}

// One coordinate pair (or a single real coordinate) of the initial data.
struct InitMode {
  int k1, k2;  // k2 is the sine index m for Dirichlet scalars
  bool pair;   // complex coefficient with a conjugate partner
  double g;    // spectral weight
};

std::vector<InitMode> velocity_modes(int band, double decay) {
  std::vector<InitMode> out;
  for (int k1 = -band; k1 <= band; ++k1)
    for (int k2 = 0; k2 <= band; ++k2)
      if (k2 > 0 || k1 > 0) out.push_back({k1, k2, true, std::pow(1.0 + k1 * k1 + k2 * k2, -decay)});
  return out;
}

std::vector<InitMode> scalar_modes(ScalarBasis basis, int band, double decay) {
  if (basis == ScalarBasis::Periodic) return velocity_modes(band, decay);
  std::vector<InitMode> out;
  for (int k1 = 0; k1 <= band; ++k1)
    for (int m = 1; m <= band; ++m) out.push_back({k1, m, k1 > 0, std::pow(1.0 + k1 * k1 + 0.25 * m * m, -decay)});
  return out;
}

// ||f||^2 = c^2 w sum_j mult_j g_j (X_j^2 + Y_j^2) with mult = 2 for pairs.
// Smooth data has X^2 + Y^2 = 1 (fixed phases); Gaussian data has standard
// normal X, Y, so each real coordinate carries variance mult c^2 w g.
double mode_scale(const std::vector<InitMode>& modes, double amplitude, double w, bool gaussian) {
  double s = 0.0;
  for (const InitMode& m : modes) s += (m.pair ? 2.0 : 1.0) * m.g * ((gaussian && m.pair) ? 2.0 : 1.0);
  return s > 0.0 ? amplitude / std::sqrt(w * s) : 0.0;
}

double max_coordinate_variance(const std::vector<InitMode>& modes, double amplitude, double w) {
  const double c = mode_scale(modes, amplitude, w, true);
  double v = 0.0;
  for (const InitMode& m : modes) v = std::max(v, (m.pair ? 2.0 : 1.0) * c * c * w * m.g);
  return v;
}

cplx coefficient(const InitMode& m, bool gaussian, std::uint64_t key) {
  if (!gaussian) return m.pair ? std::polar(1.0, phase(m.k1, m.k2)) : cplx(1.0, 0.0);
  const std::uint64_t id = mode_id(m.k1, m.k2);
  return m.pair ? cplx(rng::normal(key, id, 0), rng::normal(key, id, 1)) : cplx(rng::normal(key, id, 0), 0.0);
}

double sum_in_order(const std::vector<double>& v) { return std::accumulate(v.begin(), v.end(), 0.0); }

double mean_of(const std::vector<double>& v) { return v.empty() ? kNaN : sum_in_order(v) / v.size(); }

double stderr_of(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  const double m = mean_of(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return std::sqrt(s / (v.size() - 1) / v.size());
}

StepRecord make_record(const SchemeState& s, const StepInfo* info) {
  StepRecord r;
  r.t = s.time();
  r.u_l2 = norm_squared(s.u, Space::V0);
  r.theta_l2 = norm_squared(s.theta, Space::H0);
  r.u_h1 = norm_squared(s.u, Space::V1);
  r.theta_h1 = norm_squared(s.theta, Space::H1);
  if (info) {
    r.iterations_u = info->iterations_u;
    r.iterations_theta = info->iterations_theta;
    r.residual_u = info->residual_u;
    r.residual_theta = info->residual_theta;
  }
  return r;
}

// Advances one state by one step with the configured variant.
void advance(Stepper& stepper, SchemeVariant variant, SchemeState& s, const VectorField& dw, const ScalarField& dwt,
             StepInfo* info) {
  if (variant == SchemeVariant::SemiImplicit)
    stepper.step(s, dw, dwt, info);
  else
    stepper.fully_implicit_step(s, dw, dwt, info);
}

json finite_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

json vec_json(const std::vector<double>& v) {
  json a = json::array();
  for (double x : v) a.push_back(finite_or_null(x));
  return a;
}

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

}  // namespace

std::uint64_t sample_key(std::uint64_t master_seed, int index) {
  return rng::derive(master_seed, 0x100u + static_cast<std::uint64_t>(index));
}

std::pair<VectorField, ScalarField> initial_data(const Problem& problem, int sample) {
  const RunConfig& cfg = problem.cfg;
  const GridPtr& g = problem.grid;
  VectorField u(g);
  ScalarField theta(g, cfg.temperature_basis);
  if (cfg.initial.type == "zero") return {std::move(u), std::move(theta)};
  const bool gaussian = cfg.initial.type == "gaussian";
  const std::uint64_t key = rng::derive(sample_key(cfg.seed, sample), kInitialStream);
  const int n1 = g->n1(), n2 = g->n2();

  const auto vmodes = velocity_modes(cfg.initial.band, cfg.initial.decay);
  const double L = g->length();
  const double cu = mode_scale(vmodes, cfg.initial.amplitude_u, L * L, gaussian);
  const std::uint64_t ku = rng::derive(key, 0);
  for (const InitMode& m : vmodes) {
    const cplx a = cu * std::sqrt(m.g) * coefficient(m, gaussian, ku);
    const double k = std::hypot(m.k1, m.k2);
    const cplx d1 = cplx(0.0, m.k2 / k), d2 = cplx(0.0, -m.k1 / k);
    const int i1 = Grid::slot(m.k1, n1), i2 = Grid::slot(m.k2, n2);
    const int j1 = Grid::slot(-m.k1, n1), j2 = Grid::slot(-m.k2, n2);
    u(0, i1, i2) = a * d1;
    u(1, i1, i2) = a * d2;
    u(0, j1, j2) = std::conj(a * d1);
    u(1, j1, j2) = std::conj(a * d2);
  }

  const auto smodes = scalar_modes(cfg.temperature_basis, cfg.initial.band, cfg.initial.decay);
  const double ct = mode_scale(smodes, cfg.initial.amplitude_theta, theta.weight(), gaussian);
  const std::uint64_t kt = rng::derive(key, 1);
  for (const InitMode& m : smodes) {
    const cplx a = ct * std::sqrt(m.g) * coefficient(m, gaussian, kt);
    if (cfg.temperature_basis == ScalarBasis::Sine) {
      theta(Grid::slot(m.k1, n1), m.k2 - 1) = a;
      if (m.pair) theta(Grid::slot(-m.k1, n1), m.k2 - 1) = std::conj(a);
    } else {
      theta(Grid::slot(m.k1, n1), Grid::slot(m.k2, n2)) = a;
      theta(Grid::slot(-m.k1, n1), Grid::slot(-m.k2, n2)) = std::conj(a);
    }
  }
  return {std::move(u), std::move(theta)};
}

std::pair<double, double> admissible_gamma_rates(const Problem& problem) {
  const RunConfig& cfg = problem.cfg;
  if (cfg.initial.type != "gaussian") return {kInfinity, kInfinity};
  const double L = cfg.model.length;
  const double w_theta = ScalarField(problem.grid, cfg.temperature_basis).weight();
  const double vu = max_coordinate_variance(velocity_modes(cfg.initial.band, cfg.initial.decay),
                                            cfg.initial.amplitude_u, L * L);
  const double vt = max_coordinate_variance(scalar_modes(cfg.temperature_basis, cfg.initial.band, cfg.initial.decay),
                                            cfg.initial.amplitude_theta, w_theta);
  return {vu > 0.0 ? 0.5 / vu : kInfinity, vt > 0.0 ? 0.5 / vt : kInfinity};
}

std::pair<double, double> gamma_rates(const Problem& problem) {
  const auto [au, at] = admissible_gamma_rates(problem);
  const double g0 = problem.cfg.gamma0 > 0.0 ? problem.cfg.gamma0 : 0.5 * au;
  const double g0t = problem.cfg.gamma0_tilde > 0.0 ? problem.cfg.gamma0_tilde : 0.5 * at;
  if (g0 >= au && std::isfinite(au))
    throw ConfigError("constants: gamma0 exceeds the admissible rate of the initial velocity");
  if (g0t >= at && std::isfinite(at))
    throw ConfigError("constants: gamma0_tilde exceeds the admissible rate of the initial temperature");
  return {g0, g0t};
}

ThresholdInputs threshold_inputs(const Problem& problem) {
  const auto [g0, g0t] = gamma_rates(problem);
  return ThresholdInputs::from(problem.cfg.model, *problem.cov_u, *problem.cov_theta, g0, g0t);
}

TrajectoryRecord run_trajectory(const Problem& problem, int sample, int n_steps, const TrajectoryOptions& opts,
                                const StepObserver& observer) {
  const RunConfig& cfg = problem.cfg;
  TrajectoryRecord rec;
  rec.sample = sample;
  rec.n_steps = n_steps;
  rec.h = cfg.model.horizon / n_steps;
  const WienerPath path(problem.cov_u, problem.cov_theta, cfg.n_ref, cfg.model.horizon, sample_key(cfg.seed, sample));
  const IncrementSequence seq = aggregate_increments(path, n_steps);
  auto [u0, theta0] = initial_data(problem, sample);
  std::vector<int> save = opts.save_steps;
  std::sort(save.begin(), save.end());
  auto keep = [&](long step) { return std::binary_search(save.begin(), save.end(), static_cast<int>(step)); };
  const bool energy = opts.energy_residuals && problem.noise.kind == NoiseKind::Additive &&
                      cfg.scheme == SchemeVariant::SemiImplicit;
  try {
    SchemeState s = SchemeState::initial(std::move(u0), std::move(theta0), cfg.model.horizon, n_steps);
    Stepper stepper(problem.grid, cfg.temperature_basis, cfg.model, problem.noise, cfg.solver);
    rec.steps.reserve(n_steps + 1);
    rec.steps.push_back(make_record(s, nullptr));
    if (keep(0)) rec.saved.push_back(s);
    if (observer) observer(s, rec.steps.back());
    for (int l = 1; l <= n_steps; ++l) {
      const NoiseIncrement inc = seq.get(l);
      const VectorField dw = problem.cov_u->velocity_field(inc.u);
      const ScalarField dwt = problem.cov_theta->scalar_field(inc.theta);
      std::optional<SchemeState> prev;
      if (energy) prev = s;
      StepInfo info;
      advance(stepper, cfg.scheme, s, dw, dwt, &info);
      StepRecord r = make_record(s, &info);
      if (energy) {
        const EnergyResiduals e = energy_identity_residuals(*prev, s, dw, dwt, cfg.model);
        r.energy_u = e.relative_u();
        r.energy_theta = e.relative_theta();
      }
      rec.steps.push_back(r);
      if (keep(l)) rec.saved.push_back(s);
      if (observer) observer(s, rec.steps.back());
    }
  } catch (const NumericalError& e) {
    rec.failed = true;
    rec.error = e.what();
  }
  return rec;
}

TrajectoryRecord run_trajectory(const RunConfig& cfg, int sample) {
  const Problem problem(cfg);
  return run_trajectory(problem, sample, cfg.n_list.back());
}

void parallel_for_samples(int samples, int threads, const std::function<void(int)>& f) {
  int workers = threads > 0 ? threads : static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  workers = std::min(workers, samples);
  if (workers <= 1) {
    for (int s = 0; s < samples; ++s) f(s);
    return;
  }
  std::atomic<int> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  for (int w = 0; w < workers; ++w)
    pool.emplace_back([&] {
      for (int s = next++; s < samples; s = next++) {
        try {
          f(s);
        } catch (...) {
          std::lock_guard<std::mutex> lock(error_mutex);
          if (!error) error = std::current_exception();
          next = samples;
        }
      }
    });
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

// ---------------------------------------------------------------------------

const ErrorRow& ErrorTable::at(std::size_t n_index, int sample) const {
  return rows.at(n_index * static_cast<std::size_t>(samples()) + static_cast<std::size_t>(sample));
}

std::vector<ErrorSummary> ErrorTable::summarize() const {
  std::vector<ErrorSummary> out;
  for (std::size_t k = 0; k < n_list.size(); ++k) {
    ErrorSummary s;
    s.n = n_list[k];
    s.h = horizon / s.n;
    std::vector<double> e, d, t;
    for (int i = 0; i < samples(); ++i) {
      const ErrorRow& r = at(k, i);
      if (r.failed) {
        ++s.failed;
        continue;
      }
      e.push_back(r.e_max);
      d.push_back(r.d_sum);
      t.push_back(r.e_max + r.d_sum);
    }
    s.count = static_cast<int>(e.size());
    s.mean_e_max = mean_of(e);
    s.se_e_max = stderr_of(e);
    s.mean_d_sum = mean_of(d);
    s.se_d_sum = stderr_of(d);
    s.mean_total = mean_of(t);
    s.se_total = stderr_of(t);
    out.push_back(s);
  }
  return out;
}

ErrorTable run_convergence_study(const Problem& problem) {
  const RunConfig& cfg = problem.cfg;
  const int S = cfg.samples;
  const int levels = static_cast<int>(cfg.n_list.size());
  ErrorTable table;
  table.horizon = cfg.model.horizon;
  table.n_ref = cfg.n_ref;
  table.n_list = cfg.n_list;
  table.rows.resize(static_cast<std::size_t>(levels) * S);
  table.ref_sup_u_h1.assign(S, 0.0);
  table.ref_sup_theta_h1.assign(S, 0.0);
  table.ref_failed.assign(S, false);

  parallel_for_samples(S, cfg.threads, [&](int sample) {
    // Reference and coarse levels advance in lockstep: level N takes its step
    // j when the reference reaches fine step j N_ref / N, so only one state
    // per level is held.
    const WienerPath path(problem.cov_u, problem.cov_theta, cfg.n_ref, cfg.model.horizon,
                          sample_key(cfg.seed, sample));
    const IncrementSequence fine = aggregate_increments(path, cfg.n_ref);
    std::vector<IncrementSequence> seqs;
    for (int n : cfg.n_list) seqs.push_back(aggregate_increments(path, n));
    auto [u0, theta0] = initial_data(problem, sample);
    Stepper stepper(problem.grid, cfg.temperature_basis, cfg.model, problem.noise, cfg.solver);

    std::vector<ErrorRow> rows(levels);
    for (int k = 0; k < levels; ++k) rows[k] = ErrorRow{cfg.n_list[k], sample, 0.0, 0.0, false};
    double sup_u = 0.0, sup_t = 0.0;
    bool ref_failed = false;
    try {
      SchemeState ref = SchemeState::initial(u0, theta0, cfg.model.horizon, cfg.n_ref);
      std::vector<std::optional<SchemeState>> coarse;
      for (int k = 0; k < levels; ++k)
        coarse.emplace_back(SchemeState::initial(u0, theta0, cfg.model.horizon, cfg.n_list[k]));
      sup_u = norm_squared(ref.u, Space::V1);
      sup_t = norm_squared(ref.theta, Space::H1);
      for (int l = 1; l <= cfg.n_ref; ++l) {
        const NoiseIncrement inc = fine.get(l);
        advance(stepper, cfg.scheme, ref, problem.cov_u->velocity_field(inc.u),
                problem.cov_theta->scalar_field(inc.theta), nullptr);
        sup_u = std::max(sup_u, norm_squared(ref.u, Space::V1));
        sup_t = std::max(sup_t, norm_squared(ref.theta, Space::H1));
        for (int k = 0; k < levels; ++k) {
          const int block = seqs[k].block();
          if (l % block != 0 || rows[k].failed) continue;
          SchemeState& c = *coarse[k];
          try {
            const NoiseIncrement ck = seqs[k].get(l / block);
            advance(stepper, cfg.scheme, c, problem.cov_u->velocity_field(ck.u),
                    problem.cov_theta->scalar_field(ck.theta), nullptr);
          } catch (const NumericalError&) {
            rows[k].failed = true;
            continue;
          }
          VectorField eu = ref.u;
          eu -= c.u;
          ScalarField et = ref.theta;
          et -= c.theta;
          rows[k].e_max =
              std::max(rows[k].e_max, norm_squared(eu, Space::V0) + norm_squared(et, Space::H0));
          rows[k].d_sum += c.h * (norm_squared(eu, Space::V1) + norm_squared(et, Space::H1));
        }
      }
    } catch (const NumericalError&) {
      ref_failed = true;
    }
    for (int k = 0; k < levels; ++k) {
      if (ref_failed) rows[k].failed = true;
      table.rows[static_cast<std::size_t>(k) * S + sample] = rows[k];
    }
    table.ref_sup_u_h1[sample] = sup_u;
    table.ref_sup_theta_h1[sample] = sup_t;
    table.ref_failed[sample] = ref_failed;
  });
  return table;
}

RateFit fit_log_log(const std::vector<double>& h, const std::vector<double>& y) {
  if (h.size() != y.size() || h.size() < 2) throw ConfigError("rate fit: need at least two points");
  const std::size_t n = h.size();
  std::vector<double> x(n), z(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (!(h[i] > 0.0) || !(y[i] > 0.0) || !std::isfinite(y[i]))
      throw ConfigError("rate fit: values must be positive and finite");
    x[i] = std::log(h[i]);
    z[i] = std::log(y[i]);
  }
  const double mx = sum_in_order(x) / n, mz = sum_in_order(z) / n;
  double sxx = 0.0, sxz = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxz += (x[i] - mx) * (z[i] - mz);
  }
  if (sxx == 0.0) throw ConfigError("rate fit: step sizes must be distinct");
  RateFit fit;
  fit.slope = sxz / sxx;
  fit.intercept = mz - fit.slope * mx;
  fit.points = static_cast<int>(n);
  if (n > 2) {
    double ssr = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double r = z[i] - fit.intercept - fit.slope * x[i];
      ssr += r * r;
    }
    fit.stderr_slope = std::sqrt(ssr / (n - 2) / sxx);
  }
  return fit;
}

RateFit estimate_rate(const ErrorTable& table, ErrorMetric which, bool detect_floor) {
  std::vector<double> h, y;
  for (const ErrorSummary& s : table.summarize()) {
    const double m = which == ErrorMetric::EMax ? s.mean_e_max : which == ErrorMetric::DSum ? s.mean_d_sum : s.mean_total;
    if (s.count > 0 && m > 0.0 && std::isfinite(m)) {
      h.push_back(s.h);
      y.push_back(m);
    }
  }
  if (h.size() < 3) throw ConfigError("rate fit: need at least three N values with positive mean error");
  bool dropped = false;
  if (detect_floor && h.size() >= 4) {
    // h decreases along the list; segment slopes in log-log.
    std::vector<double> seg;
    for (std::size_t i = 1; i < h.size(); ++i)
      seg.push_back(std::log(y[i - 1] / y[i]) / std::log(h[i - 1] / h[i]));
    const double last = seg.back();
    const double earlier = std::accumulate(seg.begin(), seg.end() - 1, 0.0) / (seg.size() - 1);
    if (earlier > 0.0 && last < 0.5 * earlier) {
      h.pop_back();
      y.pop_back();
      dropped = true;
    }
  }
  RateFit fit = fit_log_log(h, y);
  fit.floor_dropped = dropped;
  return fit;
}

std::vector<ExceedancePoint> exceedance_probabilities(const ErrorTable& table, double exponent) {
  std::vector<ExceedancePoint> out;
  for (std::size_t k = 0; k < table.n_list.size(); ++k) {
    ExceedancePoint p;
    p.n = table.n_list[k];
    p.threshold = std::pow(static_cast<double>(p.n), -exponent);
    int hits = 0;
    for (int i = 0; i < table.samples(); ++i) {
      const ErrorRow& r = table.at(k, i);
      if (r.failed) continue;
      ++p.count;
      if (r.e_max + r.d_sum >= p.threshold) ++hits;
    }
    p.probability = p.count > 0 ? static_cast<double>(hits) / p.count : kNaN;
    out.push_back(p);
  }
  return out;
}

std::vector<LocalizedReport> localized_statistics(const ErrorTable& table, const Problem& problem,
                                                  const std::vector<double>& m_values) {
  std::vector<double> ms = m_values;
  if (ms.empty()) {
    std::vector<double> sup;
    for (int i = 0; i < table.samples(); ++i)
      if (!table.ref_failed[i]) sup.push_back(std::max(table.ref_sup_u_h1[i], table.ref_sup_theta_h1[i]));
    std::sort(sup.begin(), sup.end());
    ms.push_back(0.0);
    if (!sup.empty())
      for (double q : {0.25, 0.5, 0.75, 1.0}) ms.push_back(sup[static_cast<std::size_t>(q * (sup.size() - 1))]);
    ms.push_back(kInfinity);
  }
  const ModelParams& p = problem.cfg.model;
  std::vector<LocalizedReport> out;
  for (double m : ms) {
    LocalizedReport r;
    r.m = m;
    r.growth_constant = std::isinf(m) ? kInfinity : loc_growth_constant(m, p, problem.cfg.c4, problem.cfg.gamma);
    std::vector<bool> inside(table.samples(), false);
    for (int i = 0; i < table.samples(); ++i) {
      if (table.ref_failed[i]) continue;
      ++r.count;
      inside[i] = table.ref_sup_u_h1[i] <= m && table.ref_sup_theta_h1[i] <= m;
      if (inside[i]) ++r.inside;
    }
    r.probability = r.count > 0 ? static_cast<double>(r.inside) / r.count : kNaN;
    r.empty = r.inside == 0;
    for (std::size_t k = 0; k < table.n_list.size(); ++k) {
      LocalizedLevel lv;
      lv.n = table.n_list[k];
      std::vector<double> v;
      for (int i = 0; i < table.samples(); ++i) {
        const ErrorRow& row = table.at(k, i);
        if (inside[i] && !row.failed) v.push_back(row.e_max + row.d_sum);
      }
      lv.mean_total = mean_of(v);
      const double h = p.horizon / lv.n;
      lv.bound_shape = std::isinf(m) ? kInfinity
                                     : (1.0 + m) * std::exp(r.growth_constant * p.horizon) * std::pow(h, problem.cfg.eta);
      r.levels.push_back(lv);
    }
    out.push_back(r);
  }
  return out;
}

// ---------------------------------------------------------------------------

PathFunctionals path_functionals(const TrajectoryRecord& rec) {
  PathFunctionals f;
  f.failed = rec.failed;
  for (std::size_t l = 0; l < rec.steps.size(); ++l) {
    const StepRecord& s = rec.steps[l];
    f.max_u_l2 = std::max(f.max_u_l2, s.u_l2);
    f.max_theta_l2 = std::max(f.max_theta_l2, s.theta_l2);
    f.max_u_h1 = std::max(f.max_u_h1, s.u_h1);
    f.max_theta_h1 = std::max(f.max_theta_h1, s.theta_h1);
    if (l > 0) {
      f.diss_u += rec.h * s.u_h1;
      f.diss_theta += rec.h * s.theta_h1;
    }
  }
  return f;
}

double power_mean(const std::vector<double>& x, int p) {
  if (x.empty()) return kNaN;
  double s = 0.0;
  for (double v : x) s += std::pow(std::abs(v), 2.0 * p);
  return std::pow(s / x.size(), 1.0 / (2.0 * p));
}

MomentReport estimate_moment_bounds(const Problem& problem) {
  const RunConfig& cfg = problem.cfg;
  const int S = cfg.samples;
  const std::size_t levels = cfg.n_list.size();
  std::vector<PathFunctionals> funcs(levels * S);
  parallel_for_samples(S, cfg.threads, [&](int sample) {
    for (std::size_t k = 0; k < levels; ++k)
      funcs[k * S + sample] = path_functionals(run_trajectory(problem, sample, cfg.n_list[k]));
  });

  MomentReport rep;
  rep.p_list = cfg.p_list;
  for (std::size_t k = 0; k < levels; ++k) {
    MomentLevel lv;
    lv.n = cfg.n_list[k];
    std::vector<const PathFunctionals*> ok;
    for (int i = 0; i < S; ++i)
      if (!funcs[k * S + i].failed) ok.push_back(&funcs[k * S + i]);
    lv.count = static_cast<int>(ok.size());
    for (int p : cfg.p_list) {
      std::vector<double> a, b, c, d, comb;
      for (const PathFunctionals* f : ok) {
        a.push_back(std::pow(f->max_u_l2, p));
        b.push_back(std::pow(f->max_theta_l2, p));
        c.push_back(std::pow(f->max_u_h1, p));
        d.push_back(std::pow(f->max_theta_h1, p));
        comb.push_back(a.back() + b.back());
      }
      lv.u_l2.push_back(mean_of(a));
      lv.theta_l2.push_back(mean_of(b));
      lv.u_h1.push_back(mean_of(c));
      lv.theta_h1.push_back(mean_of(d));
      lv.combined.push_back(mean_of(comb));
      lv.combined_se.push_back(stderr_of(comb));
    }
    std::vector<double> du, dt;
    for (const PathFunctionals* f : ok) {
      du.push_back(f->diss_u);
      dt.push_back(f->diss_theta);
    }
    lv.diss_u = mean_of(du);
    lv.diss_theta = mean_of(dt);
    rep.levels.push_back(lv);
  }

  for (std::size_t j = 0; j < cfg.p_list.size(); ++j) {
    double lo = kInfinity, hi = 0.0;
    std::vector<double> x, y, var;
    for (const MomentLevel& lv : rep.levels) {
      const double m = lv.combined[j];
      if (!(m > 0.0) || !std::isfinite(m)) continue;
      lo = std::min(lo, m);
      hi = std::max(hi, m);
      x.push_back(std::log(static_cast<double>(lv.n)));
      y.push_back(std::log(m));
      var.push_back(std::pow(lv.combined_se[j] / m, 2));
    }
    rep.spread.push_back(hi > 0.0 ? hi / lo : kNaN);
    double slope = 0.0, se = 0.0;
    if (x.size() >= 2) {
      // Weighted sum of the log means; the variance ignores the correlation
      // between levels that share a path.
      const double mx = sum_in_order(x) / x.size();
      double sxx = 0.0;
      for (double v : x) sxx += (v - mx) * (v - mx);
      double v2 = 0.0;
      for (std::size_t i = 0; i < x.size(); ++i) {
        const double w = (x[i] - mx) / sxx;
        slope += w * y[i];
        v2 += w * w * var[i];
      }
      se = std::sqrt(v2);
    }
    rep.growth_slope.push_back(slope);
    rep.growth_stderr.push_back(se);
    rep.growth_flag.push_back(slope > 3.0 * se && slope > 0.0);
  }
  return rep;
}

// ---------------------------------------------------------------------------

std::string_view to_string(ExpFunctional f) {
  switch (f) {
    case ExpFunctional::Coupled: return "coupled";
    case ExpFunctional::Temperature: return "temperature";
    case ExpFunctional::Velocity: return "velocity";
  }
  return "coupled";
}

ExpFunctional resolve_functional(const Problem& problem) {
  const std::string& f = problem.cfg.exp_functional;
  if (f == "coupled") return ExpFunctional::Coupled;
  if (f == "temperature") return ExpFunctional::Temperature;
  if (f == "velocity") return ExpFunctional::Velocity;
  return problem.cfg.model.c_l != 0.0 ? ExpFunctional::Coupled : ExpFunctional::Temperature;
}

double exp_functional_value(const TrajectoryRecord& rec, ExpFunctional f, const ModelParams& p) {
  const double cl = std::abs(p.c_l);
  double sum = 0.0, best = 0.0;
  for (std::size_t n = 0; n < rec.steps.size(); ++n) {
    const StepRecord& s = rec.steps[n];
    double level = 0.0;
    switch (f) {
      case ExpFunctional::Coupled:
        if (n > 0) sum += rec.h * (cl * p.nu * s.u_h1 + p.kappa * s.theta_h1);
        level = cl * s.u_l2 + s.theta_l2;
        break;
      case ExpFunctional::Temperature:
        if (n > 0) sum += rec.h * p.kappa * s.theta_h1;
        level = s.theta_l2;
        break;
      case ExpFunctional::Velocity:
        if (n > 0) sum += rec.h * p.nu * s.u_h1;
        level = s.u_l2;
        break;
    }
    // The coupled functional is maximized over n >= 1, the others over n >= 0.
    if (n > 0 || f != ExpFunctional::Coupled) best = std::max(best, level + sum);
  }
  return best;
}

ExpMomentPoint exp_moment(const std::vector<double>& x, double beta) {
  ExpMomentPoint p;
  p.beta = beta;
  if (x.empty()) {
    p.log_mean = p.estimate = p.max_fraction = kNaN;
    return p;
  }
  if (beta == 0.0) {
    p.log_mean = 0.0;
    p.estimate = 1.0;
    p.max_fraction = 1.0 / x.size();
    return p;
  }
  double m = -kInfinity;
  for (double v : x) m = std::max(m, beta * v);
  double s = 0.0;
  for (double v : x) s += std::exp(beta * v - m);
  p.log_mean = m + std::log(s) - std::log(static_cast<double>(x.size()));
  p.estimate = std::exp(p.log_mean);
  p.max_fraction = 1.0 / s;
  p.heavy_tail = p.max_fraction > 0.5;
  return p;
}

ExpMomentReport estimate_exponential_moments(const Problem& problem) {
  const RunConfig& cfg = problem.cfg;
  if (problem.noise.kind != NoiseKind::Additive)
    throw ConfigError("expmoments: exponential moments are defined for additive noise only");
  ExpMomentReport rep;
  rep.functional = resolve_functional(problem);
  const ThresholdInputs in = threshold_inputs(problem);
  const Thresholds t = compute_thresholds(in);
  const bool deterministic = std::isinf(in.gamma0) && std::isinf(in.gamma0_tilde);
  const Threshold* th = nullptr;
  switch (rep.functional) {
    case ExpFunctional::Coupled:
      th = deterministic ? &t.beta0 : &t.beta1;
      rep.threshold_name = deterministic ? "beta0" : "beta1";
      break;
    case ExpFunctional::Temperature:
      th = deterministic ? &t.beta0_tilde : &t.beta1_tilde;
      rep.threshold_name = deterministic ? "beta0_tilde" : "beta1_tilde";
      break;
    case ExpFunctional::Velocity:
      th = deterministic ? &t.alpha1 : &t.alpha1_tilde;
      rep.threshold_name = deterministic ? "alpha1" : "alpha1_tilde";
      break;
  }
  rep.threshold = th->value;
  rep.threshold_defined = th->defined;
  if (!th->defined)
    throw ConfigError("expmoments: threshold " + rep.threshold_name + " is undefined (" + th->reason + ")");
  for (double f : cfg.beta_factors) rep.betas.push_back(f * rep.threshold);

  const int S = cfg.samples;
  const std::size_t levels = cfg.n_list.size();
  std::vector<double> x(levels * S, kNaN);
  parallel_for_samples(S, cfg.threads, [&](int sample) {
    for (std::size_t k = 0; k < levels; ++k) {
      const TrajectoryRecord rec = run_trajectory(problem, sample, cfg.n_list[k]);
      if (!rec.failed) x[k * S + sample] = exp_functional_value(rec, rep.functional, cfg.model);
    }
  });
  for (std::size_t k = 0; k < levels; ++k) {
    ExpMomentLevel lv;
    lv.n = cfg.n_list[k];
    std::vector<double> ok;
    for (int i = 0; i < S; ++i)
      if (!std::isnan(x[k * S + i])) ok.push_back(x[k * S + i]);
    lv.count = static_cast<int>(ok.size());
    for (double b : rep.betas) lv.points.push_back(exp_moment(ok, b));
    rep.levels.push_back(lv);
  }
  return rep;
}

// ---------------------------------------------------------------------------

IncrementReport increment_order_study(const Problem& problem) {
  const RunConfig& cfg = problem.cfg;
  const int max_lag = *std::max_element(cfg.lags.begin(), cfg.lags.end());
  std::vector<int> anchors;
  for (double a : cfg.anchors) {
    const int s = static_cast<int>(std::lround(a * cfg.n_ref));
    if (s + max_lag > cfg.n_ref) throw ConfigError("increments: anchor + lag exceeds n_ref");
    anchors.push_back(s);
  }
  std::vector<int> save;
  for (int a : anchors) {
    save.push_back(a);
    for (int lag : cfg.lags) save.push_back(a + lag);
  }
  std::sort(save.begin(), save.end());
  save.erase(std::unique(save.begin(), save.end()), save.end());
  auto slot = [&](int step) {
    return static_cast<std::size_t>(std::lower_bound(save.begin(), save.end(), step) - save.begin());
  };

  const int S = cfg.samples;
  const std::size_t L = cfg.lags.size();
  std::vector<double> du(L * S, kNaN), dt(L * S, kNaN);
  parallel_for_samples(S, cfg.threads, [&](int sample) {
    TrajectoryOptions opts;
    opts.save_steps = save;
    const TrajectoryRecord rec = run_trajectory(problem, sample, cfg.n_ref, opts);
    if (rec.failed) return;
    for (std::size_t j = 0; j < L; ++j) {
      double su = 0.0, st = 0.0;
      for (int a : anchors) {
        const SchemeState& s0 = rec.saved[slot(a)];
        const SchemeState& s1 = rec.saved[slot(a + cfg.lags[j])];
        VectorField eu = s1.u;
        eu -= s0.u;
        ScalarField et = s1.theta;
        et -= s0.theta;
        su += norm_squared(eu, Space::V0);
        st += norm_squared(et, Space::H0);
      }
      du[j * S + sample] = su / anchors.size();
      dt[j * S + sample] = st / anchors.size();
    }
  });

  IncrementReport rep;
  std::vector<double> hs, yu, yt;
  for (std::size_t j = 0; j < L; ++j) {
    IncrementPoint p;
    p.lag = cfg.lags[j];
    p.delta = p.lag * cfg.model.horizon / cfg.n_ref;
    std::vector<double> a, b;
    for (int i = 0; i < S; ++i)
      if (!std::isnan(du[j * S + i])) {
        a.push_back(du[j * S + i]);
        b.push_back(dt[j * S + i]);
      }
    rep.count = static_cast<int>(a.size());
    p.mean_u = mean_of(a);
    p.mean_theta = mean_of(b);
    rep.points.push_back(p);
    hs.push_back(p.delta);
    yu.push_back(p.mean_u);
    yt.push_back(p.mean_theta);
  }
  if (hs.size() >= 2) {
    if (std::all_of(yu.begin(), yu.end(), [](double v) { return v > 0.0; })) rep.fit_u = fit_log_log(hs, yu);
    if (std::all_of(yt.begin(), yt.end(), [](double v) { return v > 0.0; })) rep.fit_theta = fit_log_log(hs, yt);
  }
  return rep;
}

// ---------------------------------------------------------------------------

std::string error_table_csv(const ErrorTable& t) {
  std::ostringstream os;
  os << "# bsq error_table version " << kOutputVersion << '\n';
  os << "N,sample,E_max,D_sum,failed\n";
  for (const ErrorRow& r : t.rows)
    os << r.n << ',' << r.sample << ',' << fmt(r.e_max) << ',' << fmt(r.d_sum) << ',' << (r.failed ? 1 : 0) << '\n';
  return os.str();
}

namespace {

json summary_json(const std::vector<ErrorSummary>& sums) {
  json a = json::array();
  for (const ErrorSummary& s : sums)
    a.push_back({{"N", s.n},
                 {"h", s.h},
                 {"count", s.count},
                 {"failed", s.failed},
                 {"E_max", {{"mean", finite_or_null(s.mean_e_max)}, {"stderr", s.se_e_max},
                            {"ci95", {finite_or_null(s.ci_low(s.mean_e_max, s.se_e_max)),
                                      finite_or_null(s.ci_high(s.mean_e_max, s.se_e_max))}}}},
                 {"D_sum", {{"mean", finite_or_null(s.mean_d_sum)}, {"stderr", s.se_d_sum},
                            {"ci95", {finite_or_null(s.ci_low(s.mean_d_sum, s.se_d_sum)),
                                      finite_or_null(s.ci_high(s.mean_d_sum, s.se_d_sum))}}}},
                 {"total", {{"mean", finite_or_null(s.mean_total)}, {"stderr", s.se_total}}}});
  return a;
}

json fit_json(const RateFit& f) {
  return {{"slope", f.slope}, {"intercept", f.intercept}, {"stderr", f.stderr_slope}, {"points", f.points},
          {"floor_dropped", f.floor_dropped}};
}

json threshold_json(const Threshold& t) {
  json j = {{"value", finite_or_null(t.value)}, {"defined", t.defined}};
  if (!t.reason.empty()) j["reason"] = t.reason;
  return j;
}

json report_json(const ConditionReport& r) {
  const Thresholds& t = r.thresholds;
  json j;
  j["version"] = kOutputVersion;
  j["inputs"] = {{"nu", t.in.params.nu},
                 {"kappa", t.in.params.kappa},
                 {"length", t.in.params.length},
                 {"horizon", t.in.params.horizon},
                 {"c_l", t.in.params.c_l},
                 {"lambda1", t.in.lambda1},
                 {"lambda1_tilde", t.in.lambda1_tilde},
                 {"trace_q", t.in.trace_q},
                 {"trace_q_tilde", t.in.trace_q_tilde},
                 {"gamma0", finite_or_null(t.in.gamma0)},
                 {"gamma0_tilde", finite_or_null(t.in.gamma0_tilde)},
                 {"c4", r.c4}};
  j["thresholds"] = {{"beta0", threshold_json(t.beta0)},
                     {"beta1", threshold_json(t.beta1)},
                     {"beta0_tilde", threshold_json(t.beta0_tilde)},
                     {"beta1_tilde", threshold_json(t.beta1_tilde)},
                     {"alpha1", threshold_json(t.alpha1)},
                     {"alpha1_tilde", threshold_json(t.alpha1_tilde)}};
  json conds = json::array();
  for (const Condition& c : r.conditions) {
    json cj = {{"name", c.name},
               {"applicable", c.applicable},
               {"holds", c.holds},
               {"lhs", finite_or_null(c.lhs)},
               {"rhs", finite_or_null(c.rhs)},
               {"margin", finite_or_null(c.margin)}};
    if (!c.note.empty()) cj["note"] = c.note;
    conds.push_back(cj);
  }
  j["conditions"] = conds;
  return j;
}

}  // namespace

std::string error_summary_json(const ErrorTable& t, const Problem& problem) {
  json j;
  j["version"] = kOutputVersion;
  j["n_ref"] = t.n_ref;
  j["samples"] = t.samples();
  j["reference_failed"] = std::count(t.ref_failed.begin(), t.ref_failed.end(), true);
  j["levels"] = summary_json(t.summarize());
  for (auto [name, metric] : {std::pair{"E_max", ErrorMetric::EMax}, {"D_sum", ErrorMetric::DSum},
                              {"total", ErrorMetric::Total}}) {
    try {
      j["fits"][name] = fit_json(estimate_rate(t, metric));
    } catch (const ConfigError& e) {
      j["fits"][name] = {{"error", e.what()}};
    }
  }
  try {
    j["conditions"] = report_json(check_strong_rate_conditions(threshold_inputs(problem), problem.cfg.c4));
  } catch (const ConfigError& e) {
    j["conditions"] = {{"error", e.what()}};
  }
  return j.dump(2);
}

std::string condition_report_json(const ConditionReport& report, const Problem* problem) {
  json j = report_json(report);
  if (problem) {
    j["growth_constant_per_unit_M"] =
        loc_growth_constant(1.0, problem->cfg.model, problem->cfg.c4, problem->cfg.gamma);
    j["gamma"] = problem->cfg.gamma;
  }
  return j.dump(2);
}

std::string trajectory_csv(const TrajectoryRecord& rec) {
  std::ostringstream os;
  os << "# bsq trajectory version " << kOutputVersion << " sample " << rec.sample << " N " << rec.n_steps
     << (rec.failed ? " failed: " + rec.error : std::string()) << '\n';
  os << "step,t,u_l2,theta_l2,u_h1,theta_h1,iterations_u,iterations_theta,residual_u,residual_theta,energy_u,"
        "energy_theta\n";
  for (std::size_t l = 0; l < rec.steps.size(); ++l) {
    const StepRecord& s = rec.steps[l];
    os << l << ',' << fmt(s.t) << ',' << fmt(s.u_l2) << ',' << fmt(s.theta_l2) << ',' << fmt(s.u_h1) << ','
       << fmt(s.theta_h1) << ',' << s.iterations_u << ',' << s.iterations_theta << ',' << fmt(s.residual_u) << ','
       << fmt(s.residual_theta) << ',' << fmt(s.energy_u) << ',' << fmt(s.energy_theta) << '\n';
  }
  return os.str();
}

std::string moment_report_csv(const MomentReport& r) {
  std::ostringstream os;
  os << "# bsq moments version " << kOutputVersion << '\n';
  os << "N,p,count,u_l2,theta_l2,u_h1,theta_h1,combined,combined_stderr,diss_u,diss_theta\n";
  for (const MomentLevel& lv : r.levels)
    for (std::size_t j = 0; j < r.p_list.size(); ++j)
      os << lv.n << ',' << r.p_list[j] << ',' << lv.count << ',' << fmt(lv.u_l2[j]) << ',' << fmt(lv.theta_l2[j])
         << ',' << fmt(lv.u_h1[j]) << ',' << fmt(lv.theta_h1[j]) << ',' << fmt(lv.combined[j]) << ','
         << fmt(lv.combined_se[j]) << ',' << fmt(lv.diss_u) << ',' << fmt(lv.diss_theta) << '\n';
  return os.str();
}

std::string moment_report_json(const MomentReport& r) {
  json j;
  j["version"] = kOutputVersion;
  j["p_list"] = r.p_list;
  j["spread"] = vec_json(r.spread);
  j["growth_slope"] = vec_json(r.growth_slope);
  j["growth_stderr"] = vec_json(r.growth_stderr);
  j["growth_flag"] = r.growth_flag;
  json lv = json::array();
  for (const MomentLevel& l : r.levels)
    lv.push_back({{"N", l.n}, {"count", l.count}, {"combined", vec_json(l.combined)}, {"u_l2", vec_json(l.u_l2)},
                  {"theta_l2", vec_json(l.theta_l2)}, {"u_h1", vec_json(l.u_h1)}, {"theta_h1", vec_json(l.theta_h1)},
                  {"diss_u", finite_or_null(l.diss_u)}, {"diss_theta", finite_or_null(l.diss_theta)}});
  j["levels"] = lv;
  return j.dump(2);
}

std::string exp_moment_report_csv(const ExpMomentReport& r) {
  std::ostringstream os;
  os << "# bsq expmoments version " << kOutputVersion << " functional " << to_string(r.functional) << '\n';
  os << "N,beta,count,log_mean,estimate,max_fraction,heavy_tail\n";
  for (const ExpMomentLevel& lv : r.levels)
    for (const ExpMomentPoint& p : lv.points)
      os << lv.n << ',' << fmt(p.beta) << ',' << lv.count << ',' << fmt(p.log_mean) << ',' << fmt(p.estimate) << ','
         << fmt(p.max_fraction) << ',' << (p.heavy_tail ? 1 : 0) << '\n';
  return os.str();
}

std::string exp_moment_report_json(const ExpMomentReport& r) {
  json j;
  j["version"] = kOutputVersion;
  j["functional"] = std::string(to_string(r.functional));
  j["threshold"] = {{"name", r.threshold_name}, {"value", finite_or_null(r.threshold)},
                    {"defined", r.threshold_defined}};
  j["betas"] = vec_json(r.betas);
  json lv = json::array();
  for (const ExpMomentLevel& l : r.levels) {
    json pts = json::array();
    for (const ExpMomentPoint& p : l.points)
      pts.push_back({{"beta", p.beta}, {"log_mean", finite_or_null(p.log_mean)},
                     {"estimate", finite_or_null(p.estimate)}, {"max_fraction", finite_or_null(p.max_fraction)},
                     {"heavy_tail", p.heavy_tail}});
    lv.push_back({{"N", l.n}, {"count", l.count}, {"points", pts}});
  }
  j["levels"] = lv;
  return j.dump(2);
}

std::string localized_report_json(const std::vector<LocalizedReport>& reports) {
  json a = json::array();
  for (const LocalizedReport& r : reports) {
    json lv = json::array();
    for (const LocalizedLevel& l : r.levels)
      lv.push_back({{"N", l.n}, {"mean_total", finite_or_null(l.mean_total)},
                    {"bound_shape", finite_or_null(l.bound_shape)}});
    a.push_back({{"M", finite_or_null(r.m)}, {"inside", r.inside}, {"count", r.count},
                 {"probability", finite_or_null(r.probability)}, {"empty", r.empty},
                 {"growth_constant", finite_or_null(r.growth_constant)}, {"levels", lv}});
  }
  return json({{"version", kOutputVersion}, {"sets", a}}).dump(2);
}

std::string exceedance_json(const std::vector<ExceedancePoint>& points, double exponent) {
  json a = json::array();
  for (const ExceedancePoint& p : points)
    a.push_back({{"N", p.n}, {"threshold", p.threshold}, {"probability", finite_or_null(p.probability)},
                 {"count", p.count}});
  return json({{"version", kOutputVersion}, {"exponent", exponent}, {"levels", a}}).dump(2);
}

std::string increment_report_json(const IncrementReport& r) {
  json a = json::array();
  for (const IncrementPoint& p : r.points)
    a.push_back({{"lag", p.lag}, {"delta", p.delta}, {"mean_u", finite_or_null(p.mean_u)},
                 {"mean_theta", finite_or_null(p.mean_theta)}});
  return json({{"version", kOutputVersion}, {"count", r.count}, {"points", a}, {"fit_u", fit_json(r.fit_u)},
               {"fit_theta", fit_json(r.fit_theta)}})
      .dump(2);
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  out << text;
  if (text.empty() || text.back() != '\n') out << '\n';
  if (!out) throw ConfigError("output: cannot write " + path.string());
}

}  // namespace bsq
