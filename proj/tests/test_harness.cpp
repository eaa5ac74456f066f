#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <random>

#include "bsq/config.hpp"
#include "bsq/error.hpp"
#include "bsq/harness.hpp"
#include "bsq/snapshot.hpp"
#include "bsq/spectral.hpp"

using namespace bsq;

namespace {

RunConfig small_config() {
  RunConfig c;
  c.model = ModelParams::make(0.5, 0.5, 1.0, 1.0, 0.0, 0.0);
  c.n = 16;
  c.cov_u.amplitude = 0.05;
  c.cov_theta.amplitude = 0.05;
  c.initial.amplitude_u = 0.3;
  c.initial.amplitude_theta = 0.3;
  c.n_list = {4, 8, 16};
  c.n_ref = 64;
  c.samples = 4;
  c.threads = 2;
  c.seed = 11;
  return c;
}

RunConfig noiseless(RunConfig c) {
  c.cov_u.amplitude = 0.0;
  c.cov_theta.amplitude = 0.0;
  return c;
}

// Squared V0 + H0 distance between fields living on grids n and 2n.
double cross_grid_distance(const SchemeState& a, const SchemeState& b) {
  const Grid& ga = a.u.grid();
  const Grid& gb = b.u.grid();
  double d = 0.0;
  for (int i1 = 0; i1 < gb.n1(); ++i1)
    for (int i2 = 0; i2 < gb.n2(); ++i2) {
      const int k1 = gb.k1(i1), k2 = gb.k2(i2);
      const bool common = 2 * std::abs(k1) < ga.n1() && 2 * std::abs(k2) < ga.n2();
      for (int c = 0; c < 2; ++c) {
        const cplx va = common ? a.u(c, Grid::slot(k1, ga.n1()), Grid::slot(k2, ga.n2())) : cplx{};
        d += std::norm(b.u(c, i1, i2) - va);
      }
    }
  d *= ga.length() * ga.length();
  double dt = 0.0;
  for (int i1 = 0; i1 < gb.n1(); ++i1)
    for (int m = 0; m < gb.n2(); ++m) {
      const int k1 = gb.k1(i1);
      const bool common = 2 * std::abs(k1) < ga.n1() && m < ga.n2();
      const cplx va = common ? a.theta(Grid::slot(k1, ga.n1()), m) : cplx{};
      dt += std::norm(b.theta(i1, m) - va);
    }
  return d + dt * b.theta.weight();
}

}  // namespace

TEST(Config, RoundTripAndValidation) {
  RunConfig c = small_config();
  c.cov_u.exponent = 2.5;
  c.sigma_u.c1 = 0.3;
  c.gamma0 = kInfinity;
  const RunConfig back = load_config(to_json(c));
  EXPECT_EQ(to_json(back), to_json(c));
  EXPECT_EQ(back.n_list, c.n_list);
  EXPECT_TRUE(std::isinf(back.gamma0));

  EXPECT_THROW(load_config("{\"model\": {\"nu\": 1, \"viscosity\": 2}}"), ConfigError);
  EXPECT_THROW(load_config("{\"modle\": {}}"), ConfigError);
  EXPECT_THROW(load_config("{\"study\": {\"n_list\": [3], \"n_ref\": 64}}"), ConfigError);
  EXPECT_THROW(load_config("{\"study\": {\"n_list\": [16, 8], \"n_ref\": 64}}"), ConfigError);
  EXPECT_THROW(load_config("{\"model\": {\"horizon\": 8}, \"study\": {\"n_list\": [4, 8], \"n_ref\": 64}}"),
               ConfigError);
  EXPECT_THROW(load_config("{\"study\": {\"samples\": 0}}"), ConfigError);
  EXPECT_THROW(load_config("{\"grid\": {\"temperature_basis\": \"periodic\"}, \"model\": {\"tl\": 1}}"),
               ConfigError);
  EXPECT_THROW(load_config("{\"noise\": {\"kind\": \"white\"}}"), ConfigError);
  EXPECT_THROW(load_config("{\"model\": {\"nu\": \"one\"}}"), ConfigError);
  EXPECT_THROW(load_config("not json"), ConfigError);
  EXPECT_THROW(load_config("{\"moments\": {\"p_list\": [3]}}"), ConfigError);

  const RunConfig cl = load_config("{\"model\": {\"length\": 2, \"c_l\": 0.25}}");
  EXPECT_DOUBLE_EQ(cl.model.tl, 0.5);
  EXPECT_DOUBLE_EQ(cl.model.c_l, 0.25);
}

TEST(Snapshot, RoundTripIsBitwise) {
  const auto dir = std::filesystem::temp_directory_path() / "bsq_snapshot_test";
  std::filesystem::remove_all(dir);
  const Problem p(small_config());
  auto [u, theta] = initial_data(p, 0);
  const SchemeState s = SchemeState::initial(u, theta, 1.0, 8);
  write_checkpoint(dir, "state", s, p.cfg.model, 42, "{\"residual\": 1e-12}");
  const SchemeState back = read_checkpoint(dir, "state", p.grid);
  EXPECT_EQ(back.step, s.step);
  EXPECT_EQ(back.n_steps, 8);
  EXPECT_EQ(back.h, s.h);
  ASSERT_EQ(back.u.data().size(), s.u.data().size());
  for (std::size_t i = 0; i < s.u.data().size(); ++i) EXPECT_EQ(back.u.data()[i], s.u.data()[i]);
  for (std::size_t i = 0; i < s.theta.data().size(); ++i) EXPECT_EQ(back.theta.data()[i], s.theta.data()[i]);
  EXPECT_EQ(back.theta.basis(), ScalarBasis::Sine);

  const VectorField fresh = read_vector_snapshot(dir / "state_u.bsq");
  EXPECT_EQ(fresh.grid().n1(), 16);
  EXPECT_EQ(std::filesystem::file_size(dir / "state_u.bsq"), 32u + 2u * 16u * 16u * 16u);
  EXPECT_THROW(read_scalar_snapshot(dir / "state_u.bsq"), ConfigError);
  write_text(dir / "junk.bsq", "garbage");
  EXPECT_THROW(read_vector_snapshot(dir / "junk.bsq"), ConfigError);
  EXPECT_THROW(read_vector_snapshot(dir / "missing.bsq"), ConfigError);
  std::filesystem::remove_all(dir);
}

TEST(InitialData, NormalizationAndDeterminism) {
  RunConfig c = small_config();
  const Problem p(c);
  auto [u, theta] = initial_data(p, 0);
  EXPECT_NEAR(norm(u, Space::V0), 0.3, 1e-14);
  EXPECT_NEAR(norm(theta, Space::H0), 0.3, 1e-14);
  EXPECT_LE(divergence_defect(u), 1e-13);
  auto [u1, theta1] = initial_data(p, 3);
  EXPECT_EQ(u.data()[17], u1.data()[17]);  // smooth data does not depend on the sample

  c.initial.type = "gaussian";
  c.temperature_basis = ScalarBasis::Periodic;
  const Problem g(c);
  double su = 0.0, st = 0.0;
  const int n = 400;
  for (int s = 0; s < n; ++s) {
    auto [a, b] = initial_data(g, s);
    EXPECT_LE(divergence_defect(a), 1e-13);
    su += norm_squared(a, Space::V0);
    st += norm_squared(b, Space::H0);
  }
  EXPECT_NEAR(su / n, 0.09, 0.09 * 0.15);
  EXPECT_NEAR(st / n, 0.09, 0.09 * 0.15);
  const auto [gu, gt] = admissible_gamma_rates(g);
  EXPECT_TRUE(std::isfinite(gu) && gu > 0.0);
  EXPECT_TRUE(std::isinf(admissible_gamma_rates(p).first));
  EXPECT_DOUBLE_EQ(gamma_rates(g).first, 0.5 * gu);
}

TEST(Trajectory, ZeroDataZeroNoiseStaysZero) {
  RunConfig c = noiseless(small_config());
  c.initial.type = "zero";
  const Problem p(c);
  const TrajectoryRecord r = run_trajectory(p, 0, 16);
  ASSERT_FALSE(r.failed);
  ASSERT_EQ(r.steps.size(), 17u);
  for (const StepRecord& s : r.steps) {
    EXPECT_EQ(s.u_l2, 0.0);
    EXPECT_EQ(s.theta_l2, 0.0);
  }
}

TEST(Trajectory, DeterministicGivenSeedAndIndex) {
  const Problem p(small_config());
  TrajectoryOptions o;
  o.energy_residuals = true;
  const TrajectoryRecord a = run_trajectory(p, 2, 16, o);
  const TrajectoryRecord b = run_trajectory(p, 2, 16, o);
  EXPECT_EQ(trajectory_csv(a), trajectory_csv(b));
  const TrajectoryRecord other = run_trajectory(p, 3, 16, o);
  EXPECT_NE(trajectory_csv(a), trajectory_csv(other));
  for (std::size_t l = 1; l < a.steps.size(); ++l) {
    EXPECT_LE(a.steps[l].energy_u, 1e-9);
    EXPECT_LE(a.steps[l].energy_theta, 1e-9);
  }
}

TEST(Trajectory, ResolutionDoublingOnSmoothData) {
  RunConfig c = noiseless(small_config());
  c.initial.amplitude_u = 0.05;
  c.initial.amplitude_theta = 0.05;
  c.model = ModelParams::make(1.0, 1.0, 1.0, 0.25, 0.0, 0.0);
  c.solver.tol = 1e-13;
  c.n_list = {16};
  const Problem coarse(c);
  c.n = 32;
  const Problem fine(c);
  TrajectoryOptions o;
  o.save_steps = {16};
  const TrajectoryRecord a = run_trajectory(coarse, 0, 16, o);
  const TrajectoryRecord b = run_trajectory(fine, 0, 16, o);
  ASSERT_EQ(a.saved.size(), 1u);
  EXPECT_LT(std::sqrt(cross_grid_distance(a.saved[0], b.saved[0])), 1e-8);
  EXPECT_GT(a.steps.back().u_l2, 0.0);
}

TEST(Trajectory, FailureIsRecorded) {
  RunConfig c = small_config();
  c.solver.max_iter = 1;
  c.solver.restart = 1;
  c.solver.tol = 1e-15;
  c.initial.amplitude_u = 5.0;
  const Problem p(c);
  const TrajectoryRecord r = run_trajectory(p, 0, 4);
  EXPECT_TRUE(r.failed);
  EXPECT_FALSE(r.error.empty());
}

TEST(Parallel, ThreadCountDoesNotChangeResults) {
  RunConfig c = small_config();
  c.threads = 1;
  const ErrorTable one = run_convergence_study(Problem(c));
  c.threads = 3;
  const ErrorTable three = run_convergence_study(Problem(c));
  EXPECT_EQ(error_table_csv(one), error_table_csv(three));
}

TEST(Convergence, FinestLevelEqualsReference) {
  RunConfig c = small_config();
  c.n_list = {8, 16, 64};
  const ErrorTable t = run_convergence_study(Problem(c));
  for (int s = 0; s < t.samples(); ++s) {
    EXPECT_EQ(t.at(2, s).e_max, 0.0);
    EXPECT_EQ(t.at(2, s).d_sum, 0.0);
    EXPECT_GT(t.at(0, s).e_max, 0.0);
  }
}

TEST(Convergence, CoarseRunMatchesStandaloneTrajectory) {
  // The lockstep driver and run_trajectory consume the same increments.
  const Problem p(small_config());
  TrajectoryOptions o;
  o.save_steps = {8};
  const TrajectoryRecord coarse = run_trajectory(p, 1, 8, o);
  o.save_steps = {64};
  const TrajectoryRecord ref = run_trajectory(p, 1, 64, o);
  VectorField e = ref.saved[0].u;
  e -= coarse.saved[0].u;
  ScalarField et = ref.saved[0].theta;
  et -= coarse.saved[0].theta;
  const double final_err = norm_squared(e, Space::V0) + norm_squared(et, Space::H0);
  const ErrorTable t = run_convergence_study(p);
  EXPECT_GE(t.at(1, 1).e_max, final_err);
}

TEST(Convergence, DeterministicErrorDecreasesWithN) {
  // Asymptotic regime h nu lambda < 1 for the resolved data (band 1 modes);
  // with h nu lambda >> 1 the stiff decay makes the error non-monotone in h.
  RunConfig c = noiseless(small_config());
  c.model = ModelParams::make(0.05, 0.05, 1.0, 1.0, 0.0, 0.0);
  c.initial.band = 1;
  c.n_list = {8, 16, 32, 64};
  c.n_ref = 1024;
  c.samples = 1;
  const ErrorTable t = run_convergence_study(Problem(c));
  const auto s = t.summarize();
  for (std::size_t k = 1; k < s.size(); ++k) EXPECT_LT(s[k].mean_e_max, s[k - 1].mean_e_max);
  const RateFit f = estimate_rate(t, ErrorMetric::EMax, false);
  EXPECT_GT(f.slope, 1.5);  // deterministic Euler: squared error ~ h^2
}

TEST(Convergence, SmallerNoiseLowersError) {
  RunConfig c = small_config();
  c.initial.type = "zero";
  c.samples = 6;
  const ErrorTable big = run_convergence_study(Problem(c));
  c.cov_u.amplitude *= 0.5;
  c.cov_theta.amplitude *= 0.5;
  const ErrorTable small = run_convergence_study(Problem(c));
  const auto a = big.summarize(), b = small.summarize();
  for (std::size_t k = 0; k < a.size(); ++k) EXPECT_LT(b[k].mean_e_max, a[k].mean_e_max) << k;
}

TEST(Convergence, OutputIsReproducible) {
  const Problem p(small_config());
  const ErrorTable a = run_convergence_study(p);
  const ErrorTable b = run_convergence_study(p);
  EXPECT_EQ(error_table_csv(a), error_table_csv(b));
  EXPECT_EQ(error_summary_json(a, p), error_summary_json(b, p));
}

TEST(Rate, SyntheticExactFit) {
  ErrorTable t;
  t.horizon = 1.0;
  t.n_list = {8, 16, 32, 64};
  t.ref_failed = {false};
  t.ref_sup_u_h1 = t.ref_sup_theta_h1 = {0.0};
  for (int n : t.n_list) t.rows.push_back(ErrorRow{n, 0, 3.0 / n, 0.5 / n, false});
  const RateFit f = estimate_rate(t, ErrorMetric::EMax);
  EXPECT_NEAR(f.slope, 1.0, 1e-12);
  EXPECT_NEAR(f.intercept, std::log(3.0), 1e-12);
  EXPECT_FALSE(f.floor_dropped);
  EXPECT_NEAR(estimate_rate(t, ErrorMetric::Total).slope, 1.0, 1e-12);
}

TEST(Rate, SyntheticJitteredFit) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> jitter(-0.01, 0.01);
  std::vector<double> h, y;
  for (int n : {8, 16, 32, 64, 128, 256}) {
    h.push_back(1.0 / n);
    y.push_back(2.0 * std::pow(1.0 / n, 0.9) * (1.0 + jitter(rng)));
  }
  const RateFit f = fit_log_log(h, y);
  EXPECT_GE(f.slope, 0.85);
  EXPECT_LE(f.slope, 0.95);
}

TEST(Rate, FloorIsDropped) {
  ErrorTable t;
  t.horizon = 1.0;
  t.n_list = {8, 16, 32, 64};
  t.ref_failed = {false};
  t.ref_sup_u_h1 = t.ref_sup_theta_h1 = {0.0};
  for (int n : {8, 16, 32}) t.rows.push_back(ErrorRow{n, 0, 1.0 / n, 0.0, false});
  t.rows.push_back(ErrorRow{64, 0, 1.0 / 33.0, 0.0, false});
  const RateFit f = estimate_rate(t, ErrorMetric::EMax);
  EXPECT_TRUE(f.floor_dropped);
  EXPECT_NEAR(f.slope, 1.0, 1e-12);
  EXPECT_EQ(f.points, 3);
}

TEST(Rate, DegenerateTablesThrow) {
  ErrorTable t;
  t.horizon = 1.0;
  t.n_list = {8, 16, 32};
  t.ref_failed = {false};
  t.ref_sup_u_h1 = t.ref_sup_theta_h1 = {0.0};
  for (int n : t.n_list) t.rows.push_back(ErrorRow{n, 0, 0.0, 0.0, false});
  EXPECT_THROW(estimate_rate(t, ErrorMetric::EMax), ConfigError);
  EXPECT_THROW(fit_log_log({0.1}, {1.0}), ConfigError);
}

TEST(Localize, SentinelsAndMonotonicity) {
  RunConfig c = small_config();
  c.samples = 6;
  const Problem p(c);
  const ErrorTable t = run_convergence_study(p);
  const auto reps = localized_statistics(t, p, {0.0, 1.0, 3.0, 10.0, 100.0, kInfinity});
  EXPECT_TRUE(reps.front().empty);
  EXPECT_EQ(reps.front().inside, 0);
  const auto sums = t.summarize();
  for (std::size_t k = 0; k < sums.size(); ++k)
    EXPECT_DOUBLE_EQ(reps.back().levels[k].mean_total, sums[k].mean_total);
  EXPECT_EQ(reps.back().probability, 1.0);
  for (std::size_t i = 1; i < reps.size(); ++i) EXPECT_GE(reps[i].probability, reps[i - 1].probability);
  EXPECT_DOUBLE_EQ(reps[2].growth_constant, loc_growth_constant(3.0, c.model, c.c4, c.gamma));

  const auto auto_ladder = localized_statistics(t, p, {});
  for (std::size_t i = 1; i < auto_ladder.size(); ++i)
    EXPECT_GE(auto_ladder[i].probability, auto_ladder[i - 1].probability);
}

TEST(Exceedance, CountsAgainstThreshold) {
  ErrorTable t;
  t.horizon = 1.0;
  t.n_list = {4};
  t.ref_failed = {false, false, false, false};
  t.ref_sup_u_h1 = t.ref_sup_theta_h1 = {0, 0, 0, 0};
  t.rows = {{4, 0, 0.5, 0.0, false}, {4, 1, 0.1, 0.0, false}, {4, 2, 0.9, 0.0, true}, {4, 3, 0.4, 0.0, false}};
  const auto pts = exceedance_probabilities(t, 0.5);  // threshold 0.5
  EXPECT_EQ(pts[0].count, 3);
  EXPECT_DOUBLE_EQ(pts[0].probability, 1.0 / 3.0);
}

TEST(Moments, ZeroCaseAndPowerMeans) {
  RunConfig z = noiseless(small_config());
  z.initial.type = "zero";
  const MomentReport zr = estimate_moment_bounds(Problem(z));
  for (const MomentLevel& lv : zr.levels)
    for (double m : lv.combined) EXPECT_EQ(m, 0.0);

  RunConfig c = small_config();
  c.p_list = {1, 2, 4};
  const Problem p(c);
  const MomentReport r = estimate_moment_bounds(p);
  ASSERT_EQ(r.levels.size(), 3u);
  std::vector<double> maxima;
  for (int s = 0; s < c.samples; ++s) {
    const PathFunctionals f = path_functionals(run_trajectory(p, s, 8));
    EXPECT_FALSE(f.failed);
    maxima.push_back(std::sqrt(f.max_u_l2));
  }
  EXPECT_LE(power_mean(maxima, 1), power_mean(maxima, 2));
  EXPECT_LE(power_mean(maxima, 2), power_mean(maxima, 4));
  EXPECT_NEAR(std::pow(power_mean(maxima, 2), 4), r.levels[1].u_l2[1], 1e-12 * r.levels[1].u_l2[1]);
  EXPECT_EQ(r.spread.size(), 3u);
  EXPECT_GE(r.spread[0], 1.0);
}

TEST(ExpMoments, ZeroBetaAndMonotonicity) {
  std::vector<double> x{0.5, 2.0, 1.0, 1e4};
  EXPECT_EQ(exp_moment(x, 0.0).estimate, 1.0);
  const ExpMomentPoint big = exp_moment(x, 1.0);
  EXPECT_TRUE(std::isinf(big.estimate));
  EXPECT_NEAR(big.log_mean, 1e4 - std::log(4.0), 1e-9);
  EXPECT_TRUE(big.heavy_tail);

  RunConfig c = small_config();
  c.beta_factors = {0.0, 0.1, 0.25, 0.5};
  const ExpMomentReport r = estimate_exponential_moments(Problem(c));
  EXPECT_EQ(r.functional, ExpFunctional::Temperature);
  EXPECT_EQ(r.threshold_name, "beta0_tilde");
  for (const ExpMomentLevel& lv : r.levels) {
    EXPECT_EQ(lv.points[0].estimate, 1.0);
    for (std::size_t i = 1; i < lv.points.size(); ++i) EXPECT_GE(lv.points[i].estimate, lv.points[i - 1].estimate);
  }

  c.exp_functional = "velocity";
  EXPECT_EQ(estimate_exponential_moments(Problem(c)).threshold_name, "alpha1");
  c.initial.type = "gaussian";
  EXPECT_EQ(estimate_exponential_moments(Problem(c)).threshold_name, "alpha1_tilde");
  c.noise_kind = NoiseKind::Multiplicative;
  EXPECT_THROW(estimate_exponential_moments(Problem(c)), ConfigError);
}

TEST(ExpMoments, FunctionalValues) {
  TrajectoryRecord rec;
  rec.h = 0.5;
  StepRecord a, b, d;
  a.u_l2 = 1.0;
  a.theta_l2 = 2.0;
  b.u_l2 = 0.5;
  b.theta_l2 = 1.0;
  b.u_h1 = 4.0;
  b.theta_h1 = 6.0;
  rec.steps = {a, b};
  ModelParams p = ModelParams::make(1.0, 2.0, 1.0, 1.0, 0.0, 0.5);
  // coupled, n = 1: 0.5 * 0.5 + 1 + 0.5 * (0.5 * 1 * 4 + 2 * 6)
  EXPECT_DOUBLE_EQ(exp_functional_value(rec, ExpFunctional::Coupled, p), 0.25 + 1.0 + 7.0);
  // temperature: max(2, 1 + 0.5 * 2 * 6)
  EXPECT_DOUBLE_EQ(exp_functional_value(rec, ExpFunctional::Temperature, p), 7.0);
  // velocity: max(1, 0.5 + 0.5 * 1 * 4)
  EXPECT_DOUBLE_EQ(exp_functional_value(rec, ExpFunctional::Velocity, p), 2.5);
}

TEST(Increments, SmallLagScaling) {
  RunConfig c = small_config();
  c.initial.type = "zero";
  c.samples = 8;
  c.n_ref = 256;
  c.n_list = {8};
  c.lags = {1, 2, 4, 8, 16};
  const IncrementReport r = increment_order_study(Problem(c));
  ASSERT_EQ(r.points.size(), 5u);
  for (std::size_t i = 1; i < r.points.size(); ++i) EXPECT_GT(r.points[i].mean_u, r.points[i - 1].mean_u);
  EXPECT_GT(r.fit_u.slope, 0.8);
  c.anchors = {0.99};
  EXPECT_THROW(increment_order_study(Problem(c)), ConfigError);
}
