// Command-line driver for the Boussinesq experiments.
//
// Exit codes: 0 success, 2 configuration error, 3 numerical failure (a
// trajectory broke down; outputs are still written, failed samples flagged).

#include <cmath>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "bsq/config.hpp"
#include "bsq/constants.hpp"
#include "bsq/error.hpp"
#include "bsq/harness.hpp"
#include "bsq/snapshot.hpp"

namespace {

using namespace bsq;

constexpr int kExitConfig = 2;
constexpr int kExitNumerical = 3;

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<int> samples;
  std::optional<int> threads;
  std::optional<std::string> out;
};

void add_common(CLI::App* app, Common& c) {
  app->add_option("--config", c.config, "JSON configuration file (defaults apply when omitted)");
  app->add_option("--seed", c.seed, "master seed");
  app->add_option("--samples", c.samples, "Monte Carlo sample count");
  app->add_option("--threads", c.threads, "worker threads (0: all cores)");
  app->add_option("--out", c.out, "output directory");
}

RunConfig make_config(const Common& c) {
  RunConfig cfg = c.config.empty() ? RunConfig{} : load_config_file(c.config);
  if (c.seed) cfg.seed = *c.seed;
  if (c.samples) cfg.samples = *c.samples;
  if (c.threads) cfg.threads = *c.threads;
  if (c.out) cfg.output = *c.out;
  cfg.validate();
  return cfg;
}

void emit(const std::filesystem::path& dir, const std::string& name, const std::string& text) {
  write_text(dir / name, text);
  std::cerr << "wrote " << (dir / name).string() << '\n';
}

int failures_exit(int failed) {
  if (failed > 0) {
    std::cerr << failed << " sample run(s) failed numerically\n";
    return kExitNumerical;
  }
  return 0;
}

int count_failed(const ErrorTable& t) {
  int n = 0;
  for (const ErrorRow& r : t.rows) n += r.failed ? 1 : 0;
  return n;
}

int cmd_constants(const Common& c, int c4_trials) {
  const RunConfig cfg = make_config(c);
  const Problem problem(cfg);
  const ConditionReport report = check_strong_rate_conditions(threshold_inputs(problem), cfg.c4);
  std::string text = condition_report_json(report, &problem);
  if (c4_trials > 0) {
    const GagliardoEstimate est = estimate_gagliardo_c4(problem.grid, c4_trials, cfg.seed);
    std::cerr << "Gagliardo-Nirenberg lower bound: " << est.estimate << " (configured c4 = " << cfg.c4 << ")\n";
    if (est.estimate > cfg.c4) std::cerr << "warning: estimated lower bound exceeds the configured c4\n";
  }
  std::cout << text << '\n';
  if (c.out) emit(cfg.output, "constants.json", text);
  return 0;
}

int cmd_simulate(const Common& c, bool checkpoints) {
  const RunConfig cfg = make_config(c);
  const Problem problem(cfg);
  const int n = cfg.n_list.back();
  int failed = 0;
  for (int s = 0; s < cfg.samples; ++s) {
    TrajectoryOptions opts;
    opts.energy_residuals = true;
    if (checkpoints) opts.save_steps = {n};
    const TrajectoryRecord rec = run_trajectory(problem, s, n, opts);
    emit(cfg.output, "trajectory_" + std::to_string(s) + ".csv", trajectory_csv(rec));
    if (rec.failed) {
      ++failed;
      std::cerr << "sample " << s << ": " << rec.error << '\n';
    } else if (checkpoints) {
      const StepRecord& last = rec.steps.back();
      const std::string extra = "{\"residual_u\": " + std::to_string(last.residual_u) +
                                ", \"residual_theta\": " + std::to_string(last.residual_theta) + "}";
      write_checkpoint(cfg.output, "final_" + std::to_string(s), rec.saved.back(), cfg.model,
                       sample_key(cfg.seed, s), extra);
    }
  }
  return failures_exit(failed);
}

int cmd_converge(const Common& c) {
  const RunConfig cfg = make_config(c);
  const Problem problem(cfg);
  const ErrorTable table = run_convergence_study(problem);
  emit(cfg.output, "error_table.csv", error_table_csv(table));
  const std::string summary = error_summary_json(table, problem);
  emit(cfg.output, "convergence.json", summary);
  emit(cfg.output, "exceedance.json",
       exceedance_json(exceedance_probabilities(table, cfg.probability_exponent), cfg.probability_exponent));
  std::cout << summary << '\n';
  return failures_exit(count_failed(table));
}

int cmd_localize(const Common& c) {
  const RunConfig cfg = make_config(c);
  const Problem problem(cfg);
  const ErrorTable table = run_convergence_study(problem);
  const std::string text = localized_report_json(localized_statistics(table, problem, cfg.m_list));
  emit(cfg.output, "error_table.csv", error_table_csv(table));
  emit(cfg.output, "localized.json", text);
  std::cout << text << '\n';
  return failures_exit(count_failed(table));
}

int cmd_moments(const Common& c) {
  const RunConfig cfg = make_config(c);
  const MomentReport rep = estimate_moment_bounds(Problem(cfg));
  emit(cfg.output, "moments.csv", moment_report_csv(rep));
  const std::string text = moment_report_json(rep);
  emit(cfg.output, "moments.json", text);
  std::cout << text << '\n';
  int failed = 0;
  for (const MomentLevel& lv : rep.levels) failed += cfg.samples - lv.count;
  return failures_exit(failed);
}

int cmd_expmoments(const Common& c) {
  const RunConfig cfg = make_config(c);
  const ExpMomentReport rep = estimate_exponential_moments(Problem(cfg));
  emit(cfg.output, "expmoments.csv", exp_moment_report_csv(rep));
  const std::string text = exp_moment_report_json(rep);
  emit(cfg.output, "expmoments.json", text);
  std::cout << text << '\n';
  int failed = 0;
  for (const ExpMomentLevel& lv : rep.levels) failed += cfg.samples - lv.count;
  for (const ExpMomentLevel& lv : rep.levels)
    for (const ExpMomentPoint& p : lv.points)
      if (p.heavy_tail)
        std::cerr << "warning: N = " << lv.n << ", beta = " << p.beta
                  << ": a single sample dominates the estimate (" << p.max_fraction << ")\n";
  return failures_exit(failed);
}

int cmd_increments(const Common& c) {
  const RunConfig cfg = make_config(c);
  const IncrementReport rep = increment_order_study(Problem(cfg));
  const std::string text = increment_report_json(rep);
  emit(cfg.output, "increments.json", text);
  std::cout << text << '\n';
  return failures_exit(cfg.samples - rep.count);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Stochastic 2D Boussinesq: semi-implicit Euler experiments"};
  app.require_subcommand(1);
  Common common;
  int c4_trials = 0;
  bool checkpoints = false;

  auto* constants = app.add_subcommand("constants", "print thresholds and strong-rate conditions as JSON");
  add_common(constants, common);
  constants->add_option("--c4-trials", c4_trials, "also estimate a lower bound for C4 from this many fields");
  auto* simulate = app.add_subcommand("simulate", "run trajectories at the largest N and write diagnostics");
  add_common(simulate, common);
  simulate->add_flag("--checkpoint", checkpoints, "write the final state of each sample");
  auto* converge = app.add_subcommand("converge", "coupled convergence study against the N_ref surrogate");
  add_common(converge, common);
  auto* moments = app.add_subcommand("moments", "moments of the scheme, uniformity in N");
  add_common(moments, common);
  auto* expmoments = app.add_subcommand("expmoments", "exponential moments for a ladder of beta");
  add_common(expmoments, common);
  auto* localize = app.add_subcommand("localize", "error statistics on the sets Omega_M");
  add_common(localize, common);
  auto* increments = app.add_subcommand("increments", "moments of time increments along reference paths");
  add_common(increments, common);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  try {
    if (*constants) return cmd_constants(common, c4_trials);
    if (*simulate) return cmd_simulate(common, checkpoints);
    if (*converge) return cmd_converge(common);
    if (*moments) return cmd_moments(common);
    if (*expmoments) return cmd_expmoments(common);
    if (*localize) return cmd_localize(common);
    if (*increments) return cmd_increments(common);
  } catch (const ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return kExitNumerical;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitConfig;
  }
  return 0;
}
