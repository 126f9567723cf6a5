#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <fstream>
#include <thread>

#include <fmt/format.h>

#include "tskf/driver.hpp"
#include "tskf/error.hpp"

namespace tskf {

using json = nlohmann::json;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

// Collects output files for one run directory and records their checksums.
class OutputWriter {
 public:
  explicit OutputWriter(std::filesystem::path dir) : dir_(std::move(dir)) {
    std::error_code ec;
    std::filesystem::create_directories(dir_, ec);
    if (ec) {
      throw Error(ErrorCode::IoError,
                  fmt::format("cannot create output directory '{}': {}", dir_.string(), ec.message()));
    }
  }

  void write(const std::string& name, const std::string& body) {
    const auto path = dir_ / name;
    std::ofstream out(path, std::ios::binary);
    out << body;
    out.close();
    if (!out) throw Error(ErrorCode::IoError, fmt::format("cannot write '{}'", path.string()));
    record(path);
  }

  void record(const std::filesystem::path& path) {
    files_.push_back({path.filename().string(), sha256_file(path), std::filesystem::file_size(path)});
  }

  const std::filesystem::path& dir() const { return dir_; }
  std::vector<OutputFile> files() const { return files_; }

 private:
  std::filesystem::path dir_;
  std::vector<OutputFile> files_;
};

std::string num(double v) { return fmt::format("{:.17g}", v); }

std::string summary_rows(const ErrorSummary& s) {
  return fmt::format(
      "points,{}\nmean_abs_est_error,{}\nmax_abs_est_error,{}\nmean_abs_meas_error,{}\n"
      "max_abs_meas_error,{}\n",
      s.points, num(s.mean_abs_est_error), num(s.max_abs_est_error), num(s.mean_abs_meas_error),
      num(s.max_abs_meas_error));
}

std::string spike_rows(const owc::SpikeReport& r) {
  std::string out =
      "t_successor,jump,index,abs_est_error,abs_meas_error,ratio_to_median,flagged,recovery_steps,"
      "recovered\n";
  for (const auto& e : r.entries) {
    out += fmt::format("{},{},{},{},{},{},{},{},{}\n", num(e.t_successor), num(e.jump), e.index,
                       num(e.abs_est_error), num(e.abs_meas_error),
                       num(e.abs_est_error / r.baseline_median_error), e.flagged ? 1 : 0,
                       e.recovery_steps, e.recovered ? 1 : 0);
  }
  return out;
}

std::string spike_summary_rows(const owc::SpikeReport& r) {
  const auto flagged = std::count_if(r.entries.begin(), r.entries.end(),
                                     [](const owc::SpikeEntry& e) { return e.flagged; });
  return fmt::format("jumps,{}\nflagged_spikes,{}\nbaseline_median_abs_est_error,{}\nspike_factor,{}\n"
                     "rank_correlation_jump_vs_error,{}\n",
                     r.entries.size(), flagged, num(r.baseline_median_error), num(r.spike_factor),
                     num(r.rank_correlation_j_vs_error));
}

RunManifest base_manifest(const ScenarioConfig& config, std::string command) {
  RunManifest m;
  m.command = std::move(command);
  m.tool_version = TSKF_VERSION_STRING;
  m.config = config.to_json();
  m.config_hash = sha256_hex(m.config.dump());
  return m;
}

std::vector<GridPoint> lattice_grid(double c, std::size_t steps) {
  std::vector<GridPoint> grid(steps + 1);
  for (std::size_t k = 0; k <= steps; ++k) {
    grid[k].t = static_cast<double>(k) * c;
    if (k < steps) grid[k].mu = c;
  }
  return grid;
}

unsigned worker_count(const ScenarioConfig& config, std::size_t jobs) {
  unsigned n = config.run.threads;
  if (n == 0) n = std::max(1u, std::thread::hardware_concurrency());
  return static_cast<unsigned>(std::min<std::size_t>(n, std::max<std::size_t>(jobs, 1)));
}

}  // namespace

ErrorSummary summarize(const owc::ErrorSeries& series) {
  ErrorSummary s;
  s.points = series.t.size();
  if (s.points == 0) return s;
  for (std::size_t i = 0; i < s.points; ++i) {
    s.mean_abs_est_error += series.abs_est_error[i];
    s.mean_abs_meas_error += series.abs_meas_error[i];
    s.max_abs_est_error = std::max(s.max_abs_est_error, series.abs_est_error[i]);
    s.max_abs_meas_error = std::max(s.max_abs_meas_error, series.abs_meas_error[i]);
  }
  s.mean_abs_est_error /= static_cast<double>(s.points);
  s.mean_abs_meas_error /= static_cast<double>(s.points);
  return s;
}

Realization simulate_scenario(const ScenarioConfig& config, const TimeScale& timescale,
                              std::span<const GridPoint> grid, std::uint64_t seed) {
  const auto input = config.input();
  Realization r{timescale, {grid.begin(), grid.end()}, {}, {}};
  r.truth = simulate_truth(config.model.model, grid, input, seed, config.truth_options());
  r.trace = run_filter(config.model.model, grid, r.truth, input, config.filter_options());
  r.trace.scenario = config.name;
  r.trace.seed = seed;
  return r;
}

Realization simulate_scenario(const ScenarioConfig& config, std::uint64_t seed) {
  const TimeScale ts = config.build_timescale();
  const auto grid = sample_grid(ts, {config.sampling.h});
  return simulate_scenario(config, ts, grid, seed);
}

json RunManifest::to_json() const {
  json outs = json::array();
  for (const auto& f : outputs) outs.push_back({{"file", f.name}, {"sha256", f.sha256}, {"bytes", f.bytes}});
  return {{"command", command},
          {"tool_version", tool_version},
          {"config_hash", config_hash},
          {"config", config},
          {"seeds", seeds},
          {"outputs", outs},
          {"wall_clock_seconds", wall_clock_seconds}};
}

void write_manifest(const RunManifest& manifest, const std::filesystem::path& directory) {
  const auto final_path = directory / "manifest.json";
  const auto tmp_path = directory / "manifest.json.tmp";
  {
    std::ofstream out(tmp_path, std::ios::binary);
    out << manifest.to_json().dump(2) << '\n';
    out.close();
    if (!out) throw Error(ErrorCode::IoError, fmt::format("cannot write '{}'", tmp_path.string()));
  }
  std::error_code ec;
  std::filesystem::rename(tmp_path, final_path, ec);
  if (ec) {
    throw Error(ErrorCode::IoError,
                fmt::format("cannot move manifest into place: {}", ec.message()));
  }
}

RunOutcome run_scenario(const ScenarioConfig& config, bool write_files) {
  const auto start = Clock::now();
  RunOutcome out{.realization = simulate_scenario(config, config.run.seed)};
  const auto component = static_cast<Eigen::Index>(config.analysis.component);
  const auto series = owc::error_series(out.realization.trace, component);
  out.summary = summarize(series);
  out.spikes = owc::analyze_spikes(series, out.realization.timescale, config.analysis.spike_factor);
  out.manifest = base_manifest(config, "run");
  out.manifest.seeds = {config.run.seed};
  if (write_files) {
    OutputWriter w(config.output_directory());
    w.write("trace.csv", trace_csv(out.realization.trace));
    w.write("summary.csv",
            "statistic,value\n" + summary_rows(out.summary) + spike_summary_rows(out.spikes));
    w.write("spikes.csv", spike_rows(out.spikes));
    for (auto format : config.output.formats) {
      for (auto mode : config.output.plot_modes) {
        for (const auto& p : emit_plots(out.realization.trace, mode, format, w.dir(), "plot", component)) {
          w.record(p);
        }
      }
    }
    out.directory = w.dir();
    out.manifest.outputs = w.files();
    out.manifest.wall_clock_seconds = seconds_since(start);
    write_manifest(out.manifest, w.dir());
  } else {
    out.manifest.wall_clock_seconds = seconds_since(start);
  }
  return out;
}

McOutcome monte_carlo(const ScenarioConfig& config, const McOptions& options) {
  if (options.replicates < 2) throw Error(ErrorCode::BadParameter, "Monte Carlo needs at least 2 replicates");
  const auto start = Clock::now();
  McOutcome out{.timescale = config.build_timescale()};
  const auto grid = sample_grid(out.timescale, {config.sampling.h});
  const auto component = static_cast<Eigen::Index>(config.analysis.component);
  const std::size_t n_rep = options.replicates;
  for (std::size_t i = 0; i < n_rep; ++i) {
    out.seeds.push_back(options.same_seed ? options.base_seed : options.base_seed + i);
  }

  struct Replicate {
    owc::ErrorSeries series;
    double max_any = 0.0;
    std::string digest;
    std::exception_ptr error;
  };
  std::vector<Replicate> reps(n_rep);
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t i = next++; i < n_rep; i = next++) {
      try {
        const auto r = simulate_scenario(config, out.timescale, grid, out.seeds[i]);
        reps[i].series = owc::error_series(r.trace, component);
        for (const auto& rec : r.trace.records) {
          reps[i].max_any = std::max(reps[i].max_any, rec.est_error.cwiseAbs().maxCoeff());
        }
        reps[i].digest = sha256_hex(trace_csv(r.trace));
      } catch (...) {
        reps[i].error = std::current_exception();
      }
    }
  };
  const unsigned workers = worker_count(config, n_rep);
  if (workers <= 1) {
    work();
  } else {
    std::vector<std::jthread> pool;
    for (unsigned k = 0; k < workers; ++k) pool.emplace_back(work);
  }

  for (std::size_t i = 0; i < n_rep; ++i) {
    if (!reps[i].error) continue;
    const std::string where = fmt::format("replicate {} (seed {})", i, out.seeds[i]);
    try {
      std::rethrow_exception(reps[i].error);
    } catch (const DivergenceError& e) {
      throw DivergenceError(e.t(), e.mu(), fmt::format("{}: {}", where, e.what()));
    } catch (const Error& e) {
      throw Error(e.code(), fmt::format("{}: {}", where, e.what()));
    }
  }

  const std::size_t n_pts = grid.size();
  out.t = reps.front().series.t;
  out.mean.t = out.t;
  out.mean.abs_est_error.assign(n_pts, 0.0);
  out.mean.abs_meas_error.assign(n_pts, 0.0);
  out.std_abs_est_error.assign(n_pts, 0.0);
  out.std_abs_meas_error.assign(n_pts, 0.0);
  for (const auto& r : reps) {
    for (std::size_t k = 0; k < n_pts; ++k) {
      out.mean.abs_est_error[k] += r.series.abs_est_error[k];
      out.mean.abs_meas_error[k] += r.series.abs_meas_error[k];
      out.max_abs_meas_error_any = std::max(out.max_abs_meas_error_any, r.series.abs_meas_error[k]);
    }
    out.max_abs_est_error_any = std::max(out.max_abs_est_error_any, r.max_any);
    out.replicate_digests.push_back(r.digest);
  }
  const double n = static_cast<double>(n_rep);
  for (std::size_t k = 0; k < n_pts; ++k) {
    out.mean.abs_est_error[k] /= n;
    out.mean.abs_meas_error[k] /= n;
  }
  for (const auto& r : reps) {
    for (std::size_t k = 0; k < n_pts; ++k) {
      const double de = r.series.abs_est_error[k] - out.mean.abs_est_error[k];
      const double dm = r.series.abs_meas_error[k] - out.mean.abs_meas_error[k];
      out.std_abs_est_error[k] += de * de;
      out.std_abs_meas_error[k] += dm * dm;
    }
  }
  for (std::size_t k = 0; k < n_pts; ++k) {
    out.std_abs_est_error[k] = std::sqrt(out.std_abs_est_error[k] / (n - 1.0));
    out.std_abs_meas_error[k] = std::sqrt(out.std_abs_meas_error[k] / (n - 1.0));
  }
  out.summary_of_means = summarize(out.mean);
  out.spikes = owc::analyze_spikes(out.mean, out.timescale, config.analysis.spike_factor);

  out.manifest = base_manifest(config, "mc");
  out.manifest.seeds = out.seeds;
  if (options.write_files) {
    OutputWriter w(config.output_directory());
    std::string agg = "t,mean_abs_est_error,std_abs_est_error,mean_abs_meas_error,std_abs_meas_error\n";
    for (std::size_t k = 0; k < n_pts; ++k) {
      agg += fmt::format("{},{},{},{},{}\n", num(out.t[k]), num(out.mean.abs_est_error[k]),
                         num(out.std_abs_est_error[k]), num(out.mean.abs_meas_error[k]),
                         num(out.std_abs_meas_error[k]));
    }
    w.write("mc_aggregate.csv", agg);
    w.write("mc_summary.csv",
            fmt::format("statistic,value\nreplicates,{}\n", n_rep) + summary_rows(out.summary_of_means) +
                fmt::format("max_abs_est_error_any_replicate,{}\nmax_abs_meas_error_any_replicate,{}\n",
                            num(out.max_abs_est_error_any), num(out.max_abs_meas_error_any)) +
                spike_summary_rows(out.spikes));
    w.write("mc_spikes.csv", spike_rows(out.spikes));
    std::string reps_csv = "replicate,seed,trace_sha256\n";
    for (std::size_t i = 0; i < n_rep; ++i) {
      reps_csv += fmt::format("{},{},{}\n", i, out.seeds[i], out.replicate_digests[i]);
    }
    w.write("mc_replicates.csv", reps_csv);
    out.directory = w.dir();
    out.manifest.outputs = w.files();
    out.manifest.wall_clock_seconds = seconds_since(start);
    write_manifest(out.manifest, w.dir());
  } else {
    out.manifest.wall_clock_seconds = seconds_since(start);
  }
  return out;
}

SweepOutcome sweep_bound(const ScenarioConfig& config, double mu_lo, double mu_hi,
                         const oracles::BoundOptions& options, bool write_files,
                         std::size_t scan_points) {
  const auto start = Clock::now();
  const auto& model = config.model.model;
  model.validate();
  if (!(mu_lo > 0.0) || !(mu_hi > mu_lo)) {
    throw Error(ErrorCode::BadParameter, "graininess range must satisfy 0 < lo < hi");
  }
  SweepOutcome out;
  out.manifest = base_manifest(config, "sweep");
  scan_points = std::max<std::size_t>(scan_points, 2);
  out.probes.resize(scan_points);
  {
    std::atomic<std::size_t> next{0};
    auto work = [&] {
      for (std::size_t i = next++; i < scan_points; i = next++) {
        const double c = mu_lo + (mu_hi - mu_lo) * static_cast<double>(i) /
                                     static_cast<double>(scan_points - 1);
        out.probes[i] = oracles::probe_graininess(model, c, options);
      }
    };
    std::vector<std::jthread> pool;
    const unsigned workers = worker_count(config, scan_points);
    for (unsigned k = 1; k < workers; ++k) pool.emplace_back(work);
    work();
  }

  std::optional<OutputWriter> w;
  if (write_files) {
    w.emplace(config.output_directory());
    std::string scan = "c,steps,final_trace,max_trace,diverges\n";
    for (const auto& p : out.probes) {
      scan += fmt::format("{},{},{},{},{}\n", num(p.c), p.steps, num(p.final_trace), num(p.max_trace),
                          p.diverges ? 1 : 0);
    }
    w->write("bound_scan.csv", scan);
  }
  auto finish = [&] {
    if (!w) return;
    out.directory = w->dir();
    out.manifest.outputs = w->files();
    out.manifest.wall_clock_seconds = seconds_since(start);
    write_manifest(out.manifest, w->dir());
  };

  try {
    out.estimate = oracles::estimate_graininess_bound(model, mu_lo, mu_hi, options);
  } catch (const Error& e) {
    if (e.code() == ErrorCode::NoSignChange) finish();
    throw;
  }
  if (w) {
    w->write("bound.csv",
             fmt::format("mu_bar,lo,hi,resolution,horizon_steps,criterion\n{},{},{},{},{},\"{}\"\n",
                         num(out.estimate.mu_bar), num(out.estimate.lo), num(out.estimate.hi),
                         num(options.resolution), options.horizon_steps, out.estimate.criterion));
    const json report = {{"mu_bar", out.estimate.mu_bar},
                         {"bracket", {out.estimate.lo, out.estimate.hi}},
                         {"resolution", options.resolution},
                         {"horizon_steps", options.horizon_steps},
                         {"ceiling_factor", options.ceiling_factor},
                         {"tail_fraction", options.tail_fraction},
                         {"tail_min_growth", options.tail_min_growth},
                         {"criterion", out.estimate.criterion}};
    w->write("bound.json", report.dump(2) + "\n");
  }
  finish();
  return out;
}

double continuous_limit_error(const StateSpaceModel& model, double t1, double h, double ode_step) {
  const TimeSegment seg = Interval{0.0, t1};
  const TimeScale ts = TimeScale::canonicalize({&seg, 1});
  const auto grid = sample_grid(ts, {h});
  const auto P = covariance_sequence(model, grid);
  const auto ref = oracles::riccati_ode_reference(model, 0.0, t1, model.P0, ode_step);
  double diff = 0.0;
  double scale = 0.0;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const Matrix Pr = ref.at(grid[i].t);
    diff = std::max(diff, (P[i] - Pr).cwiseAbs().maxCoeff());
    scale = std::max(scale, Pr.cwiseAbs().maxCoeff());
  }
  return diff / scale;
}

bool OracleReport::pass() const {
  return !lines.empty() && std::all_of(lines.begin(), lines.end(), [](const auto& l) { return l.pass; });
}

std::string OracleReport::to_text() const {
  std::string out = "check,value,tolerance,result\n";
  for (const auto& l : lines) {
    out += fmt::format("{},{:.6e},{:.1e},{}\n", l.name, l.value, l.tolerance, l.pass ? "ok" : "MISMATCH");
  }
  return out;
}

OracleReport oracle_check(const ScenarioConfig& config, const OracleCheckOptions& options) {
  const auto& model = config.model.model;
  model.validate();
  const auto input = config.input();
  const Vector u = config.model.u.size() ? config.model.u : Vector::Zero(model.input_dim());
  OracleReport report;
  for (double c : options.graininess) {
    const auto grid = lattice_grid(c, options.steps);
    const auto truth = simulate_truth(model, grid, input, config.run.seed);
    const auto trace = run_filter(model, grid, truth, input);
    std::vector<Vector> ys;
    ys.reserve(truth.size());
    for (const auto& p : truth) ys.push_back(p.y);
    const auto ref = oracles::discrete_kf_equivalent(model, c, options.steps, ys, u);
    double dx = 0.0, dp = 0.0;
    for (std::size_t k = 0; k < ref.size(); ++k) {
      // Relative to max(1, |ref|): an unstable Phi makes the state grow geometrically.
      const double sx = std::max(1.0, ref[k].x_hat.cwiseAbs().maxCoeff());
      const double sp = std::max(1.0, ref[k].P.cwiseAbs().maxCoeff());
      dx = std::max(dx, (trace.records[k].x_hat - ref[k].x_hat).cwiseAbs().maxCoeff() / sx);
      dp = std::max(dp, (trace.records[k].P - ref[k].P).cwiseAbs().maxCoeff() / sp);
    }
    report.lines.push_back({fmt::format("discrete_equivalence_x_hat_c={:g}", c), dx,
                            options.equivalence_tolerance, dx <= options.equivalence_tolerance});
    report.lines.push_back({fmt::format("discrete_equivalence_P_c={:g}", c), dp,
                            options.equivalence_tolerance, dp <= options.equivalence_tolerance});
  }
  // Stiff models need a finer step before the first-order error is small;
  // halve h up to three times.
  double h = options.limit_h;
  double rel = continuous_limit_error(model, options.limit_t1, h);
  for (int i = 0; i < 3 && rel > options.limit_tolerance; ++i) {
    h *= 0.5;
    rel = continuous_limit_error(model, options.limit_t1, h);
  }
  report.lines.push_back({fmt::format("riccati_limit_h={:g}", h), rel,
                          options.limit_tolerance, rel <= options.limit_tolerance});
  return report;
}

}  // namespace tskf
