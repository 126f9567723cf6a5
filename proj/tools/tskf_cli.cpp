// Command-line driver. Talks to the library only through tskf.h.

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <memory>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "tskf/tskf.h"

namespace {

enum Exit { kOk = 0, kOther = 1, kConfig = 2, kDivergence = 3, kOracle = 4 };

int exit_code(tskf_status s) {
  switch (s) {
    case TSKF_OK: return kOk;
    case TSKF_ERR_CONFIG:
    case TSKF_ERR_UNKNOWN_NAME: return kConfig;
    case TSKF_ERR_NUMERIC_DIVERGENCE: return kDivergence;
    case TSKF_ERR_ORACLE_MISMATCH: return kOracle;
    default: return kOther;
  }
}

int report(tskf_status s, const char* what) {
  if (s == TSKF_OK) return kOk;
  std::fprintf(stderr, "tskf %s: %s: %s\n", what, tskf_status_name(s), tskf_last_error());
  if (s == TSKF_ERR_NUMERIC_DIVERGENCE) {
    double t = 0, mu = 0;
    if (tskf_last_divergence(&t, &mu) == TSKF_OK) {
      std::fprintf(stderr, "  diverged at t = %.17g, mu = %.17g\n", t, mu);
    }
  }
  return exit_code(s);
}

struct ScenarioDeleter {
  void operator()(tskf_scenario* s) const { tskf_scenario_free(s); }
};
using ScenarioPtr = std::unique_ptr<tskf_scenario, ScenarioDeleter>;

struct ScenarioArgs {
  std::string scenario;
  std::vector<std::string> overrides;
  std::string out_dir;
};

void add_scenario_args(CLI::App* cmd, ScenarioArgs& a) {
  cmd->add_option("scenario", a.scenario, "Built-in scenario name or JSON config path")->required();
  cmd->add_option("-o,--override", a.overrides, "block.key=value, repeatable");
  cmd->add_option("--out", a.out_dir, "Output directory (default: $TSKF_OUTPUT_DIR/<name>)");
}

// Loads and applies overrides; returns an exit code and fills `out`.
int load(const ScenarioArgs& a, ScenarioPtr& out) {
  tskf_scenario* raw = nullptr;
  if (int rc = report(tskf_scenario_load(a.scenario.c_str(), &raw), "load")) return rc;
  out.reset(raw);
  for (const auto& o : a.overrides) {
    if (int rc = report(tskf_scenario_override(out.get(), o.c_str()), "override")) return rc;
  }
  return kOk;
}

const char* out_dir(const ScenarioArgs& a) { return a.out_dir.empty() ? nullptr : a.out_dir.c_str(); }

void print_summary(const tskf_error_summary& s, const std::vector<tskf_spike_row>& spikes,
                   bool monte_carlo) {
  std::printf("points               %zu\n", s.points);
  std::printf("mean |est_error|     %.6g\n", s.mean_abs_est_error);
  std::printf("mean |meas_error|    %.6g\n", s.mean_abs_meas_error);
  std::printf("max |est_error|      %.6g\n", s.max_abs_est_error);
  std::printf("max |meas_error|     %.6g\n", s.max_abs_meas_error);
  if (monte_carlo) {
    std::printf("max |est_error| any  %.6g\n", s.max_abs_est_error_any);
    std::printf("max |meas_error| any %.6g\n", s.max_abs_meas_error_any);
  }
  if (spikes.empty()) return;
  std::printf("jumps %zu, flagged %zu, median |est_error| %.6g, spearman(J, spike) %.4f\n", s.jumps,
              s.flagged_spikes, s.baseline_median_error, s.rank_correlation);
  std::printf("%10s %6s %14s %10s %8s %9s\n", "t", "J", "|est_error|", "x median", "flagged",
              "recovery");
  for (const auto& r : spikes) {
    std::printf("%10g %6g %14.6g %10.2f %8s %9zu%s\n", r.t_successor, r.jump, r.abs_est_error,
                r.abs_est_error / s.baseline_median_error, r.flagged ? "yes" : "no", r.recovery_steps,
                r.recovered ? "" : " (not recovered)");
  }
}

int cmd_run(const ScenarioArgs& a, const std::vector<unsigned long long>& seed) {
  ScenarioPtr sc;
  if (int rc = load(a, sc)) return rc;
  if (!seed.empty()) {
    const std::string o = "run.seed=" + std::to_string(seed.front());
    if (int rc = report(tskf_scenario_override(sc.get(), o.c_str()), "override")) return rc;
  }
  tskf_error_summary summary{};
  std::vector<tskf_spike_row> spikes(256);
  size_t n = 0;
  const tskf_status s =
      tskf_scenario_run(sc.get(), out_dir(a), &summary, spikes.data(), spikes.size(), &n);
  // Spike rows past the buffer are dropped from the console listing only.
  if (s != TSKF_ERR_BUFFER_TOO_SMALL) {
    if (int rc = report(s, "run")) return rc;
  }
  spikes.resize(std::min(n, spikes.size()));
  print_summary(summary, spikes, false);
  return kOk;
}

int cmd_mc(const ScenarioArgs& a, unsigned replicates, const std::vector<unsigned long long>& seed,
           bool same_seed) {
  ScenarioPtr sc;
  if (int rc = load(a, sc)) return rc;
  uint64_t base = 0;
  if (!seed.empty()) {
    base = seed.front();
  } else if (int rc = report(tskf_scenario_seed(sc.get(), &base), "mc")) {
    return rc;
  }
  tskf_error_summary summary{};
  std::vector<tskf_spike_row> spikes(256);
  size_t n = 0;
  const tskf_status s = tskf_scenario_monte_carlo(sc.get(), replicates, base, same_seed ? 1 : 0,
                                                  out_dir(a), &summary, spikes.data(), spikes.size(), &n);
  if (s != TSKF_ERR_BUFFER_TOO_SMALL) {
    if (int rc = report(s, "mc")) return rc;
  }
  spikes.resize(std::min(n, spikes.size()));
  print_summary(summary, spikes, true);
  return kOk;
}

int cmd_sweep(const ScenarioArgs& a, double lo, double hi, double res, size_t horizon) {
  ScenarioPtr sc;
  if (int rc = load(a, sc)) return rc;
  tskf_bound b{};
  if (int rc = report(tskf_scenario_sweep(sc.get(), lo, hi, res, horizon, out_dir(a), &b), "sweep")) {
    return rc;
  }
  std::printf("mu_bar %.6g  bracket [%.6g, %.6g]\n", b.mu_bar, b.lo, b.hi);
  return kOk;
}

int cmd_oracle(const ScenarioArgs& a) {
  ScenarioPtr sc;
  if (int rc = load(a, sc)) return rc;
  int passed = 0;
  size_t needed = 0;
  if (int rc = report(tskf_scenario_oracle_check(sc.get(), &passed, nullptr, 0, &needed), "oracle-check")) {
    return rc;
  }
  std::string text(needed, '\0');
  if (int rc = report(tskf_scenario_oracle_check(sc.get(), &passed, text.data(), text.size(), &needed),
                      "oracle-check")) {
    return rc;
  }
  std::fputs(text.c_str(), stdout);
  if (!passed) {
    std::fprintf(stderr, "tskf oracle-check: OracleMismatch: at least one comparison exceeded its tolerance\n");
    return kOracle;
  }
  return kOk;
}

int cmd_extract(const std::string& csv, size_t min_run) {
  tskf_timescale* ts = nullptr;
  if (int rc = report(tskf_timescale_extract_csv(csv.c_str(), min_run, &ts), "extract-ts")) return rc;
  size_t needed = 0;
  tskf_timescale_to_spec(ts, nullptr, 0, &needed);
  std::string text(needed, '\0');
  const tskf_status s = tskf_timescale_to_spec(ts, text.data(), text.size(), &needed);
  tskf_timescale_free(ts);
  if (int rc = report(s, "extract-ts")) return rc;
  std::printf("%s\n", text.c_str());
  return kOk;
}

int cmd_plot(const std::string& csv, const std::vector<std::string>& modes,
             const std::vector<std::string>& formats, const std::string& dir, const std::string& stem,
             size_t component) {
  tskf_trace* tr = nullptr;
  if (int rc = report(tskf_trace_read_csv(csv.c_str(), &tr), "plot")) return rc;
  int rc = kOk;
  for (const auto& m : modes) {
    for (const auto& f : formats) {
      const auto mode = m == "iteration" ? TSKF_PLOT_ITERATION : TSKF_PLOT_TIMESCALE;
      const auto format = f == "svg" ? TSKF_PLOT_SVG : TSKF_PLOT_DATA;
      rc = report(tskf_trace_emit_plots(tr, mode, format, dir.c_str(), stem.c_str(), component), "plot");
      if (rc) break;
    }
    if (rc) break;
  }
  tskf_trace_free(tr);
  return rc;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Kalman filtering on time scales: simulation, Monte Carlo, oracle checks and plots"};
  app.set_version_flag("--version", std::string(tskf_version()));
  app.require_subcommand(1);
  int rc = kOk;

  ScenarioArgs run_args;
  std::vector<unsigned long long> run_seed;
  auto* run = app.add_subcommand("run", "Simulate one realization and write trace, summary and plots");
  add_scenario_args(run, run_args);
  run->add_option("--seed", run_seed, "Seed (default: run.seed)")->expected(1);
  run->callback([&] { rc = cmd_run(run_args, run_seed); });

  ScenarioArgs mc_args;
  unsigned replicates = 200;
  std::vector<unsigned long long> mc_seed;
  bool same_seed = false;
  auto* mc = app.add_subcommand("mc", "Monte Carlo replicates with seeds base+i");
  add_scenario_args(mc, mc_args);
  mc->add_option("-n,--replicates", replicates, "Replicate count")->check(CLI::Range(2u, 1000000u));
  mc->add_option("--seed", mc_seed, "Base seed (default: run.seed)")->expected(1);
  mc->add_flag("--same-seed", same_seed, "Use the base seed for every replicate");
  mc->callback([&] { rc = cmd_mc(mc_args, replicates, mc_seed, same_seed); });

  ScenarioArgs sweep_args;
  double lo = 0, hi = 0, res = 0.05;
  size_t horizon = 0;
  auto* sweep = app.add_subcommand("sweep", "Bisect the graininess bound of the scenario's model");
  add_scenario_args(sweep, sweep_args);
  sweep->add_option("mu_lo", lo, "Lower end of the bracket")->required();
  sweep->add_option("mu_hi", hi, "Upper end of the bracket")->required();
  sweep->add_option("--res", res, "Bisection resolution");
  sweep->add_option("--horizon", horizon, "Recursion steps per probe (default 1000)");
  sweep->callback([&] { rc = cmd_sweep(sweep_args, lo, hi, res, horizon); });

  ScenarioArgs oracle_args;
  auto* oracle = app.add_subcommand("oracle-check", "Compare the filter with the discrete and Riccati oracles");
  add_scenario_args(oracle, oracle_args);
  oracle->callback([&] { rc = cmd_oracle(oracle_args); });

  std::string validity_csv;
  size_t min_run = 3;
  auto* extract = app.add_subcommand("extract-ts", "Build a time scale from a t,valid CSV");
  extract->add_option("csv", validity_csv, "Validity CSV")->required()->check(CLI::ExistingFile);
  extract->add_option("--min-run", min_run, "Shortest valid run kept as an interval")
      ->check(CLI::PositiveNumber);
  extract->callback([&] { rc = cmd_extract(validity_csv, min_run); });

  std::string trace_path, plot_dir = ".", stem = "plot";
  std::vector<std::string> modes{"iteration", "timescale"}, formats{"svg", "data"};
  size_t component = 0;
  auto* plot = app.add_subcommand("plot", "Render plots from a trace CSV");
  plot->add_option("trace", trace_path, "trace.csv written by run")->required()->check(CLI::ExistingFile);
  plot->add_option("--mode", modes, "iteration and/or timescale")
      ->check(CLI::IsMember({"iteration", "timescale"}));
  plot->add_option("--format", formats, "svg and/or data")->check(CLI::IsMember({"svg", "data"}));
  plot->add_option("--out", plot_dir, "Output directory");
  plot->add_option("--stem", stem, "File name prefix");
  plot->add_option("--component", component, "State component to plot");
  plot->callback([&] { rc = cmd_plot(trace_path, modes, formats, plot_dir, stem, component); });

  ScenarioArgs show_args;
  auto* show = app.add_subcommand("show", "Print the resolved scenario config as JSON");
  add_scenario_args(show, show_args);
  show->callback([&] {
    ScenarioPtr sc;
    if ((rc = load(show_args, sc))) return;
    size_t needed = 0;
    tskf_scenario_to_json(sc.get(), nullptr, 0, &needed);
    std::string text(needed, '\0');
    rc = report(tskf_scenario_to_json(sc.get(), text.data(), text.size(), &needed), "show");
    if (!rc) std::printf("%s\n", text.c_str());
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfig;
  }
  return rc;
}
