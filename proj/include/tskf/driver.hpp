#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "tskf/config.hpp"
#include "tskf/kalman.hpp"
#include "tskf/oracles.hpp"
#include "tskf/owc.hpp"
#include "tskf/timescale.hpp"

namespace tskf {

// ---- trace CSV -------------------------------------------------------------

void write_trace_csv(std::ostream& out, const FilterTrace& trace);
std::string trace_csv(const FilterTrace& trace);
// Reads a file written by write_trace_csv. Throws IoError or UnsupportedFormat.
FilterTrace read_trace_csv(std::istream& in);
FilterTrace read_trace_csv(const std::filesystem::path& path);

// Rebuilds the time scale a trace was sampled on from its segment and origin
// columns. Interval samples of one segment become [first, last].
TimeScale timescale_from_trace(const FilterTrace& trace);

// ---- plots -----------------------------------------------------------------

struct PlotSeries {
  std::string name;
  std::vector<double> values;
};

// truth and estimate of the state component, then the output-space
// estimation error C (x - x_hat) and the measurement error of output 0.
std::vector<PlotSeries> plot_series(const FilterTrace& trace, Eigen::Index component = 0);

// Abscissae for a plot mode: 0..N-1, or t.
std::vector<double> plot_abscissa(const FilterTrace& trace, PlotMode mode);

// Indices i where no line is drawn from point i to i+1. Empty in iteration
// mode; in time-scale mode these are the jumps of the underlying scale.
std::vector<std::size_t> plot_breaks(const FilterTrace& trace, PlotMode mode);

std::string render_svg(const FilterTrace& trace, PlotMode mode, std::string_view chart,
                       Eigen::Index component = 0);

// `x,value` rows; in time-scale mode a blank line separates pieces.
std::string render_series_data(const FilterTrace& trace, PlotMode mode, const PlotSeries& series);

// Writes <stem>_<mode>_state.svg and _error.svg, or one
// <stem>_<mode>_<series>.csv per series. Returns the written paths.
std::vector<std::filesystem::path> emit_plots(const FilterTrace& trace, PlotMode mode,
                                              PlotFormat format,
                                              const std::filesystem::path& directory,
                                              std::string_view stem = "plot",
                                              Eigen::Index component = 0);

// ---- checksums -------------------------------------------------------------

std::string sha256_hex(std::string_view bytes);
std::string sha256_file(const std::filesystem::path& path);

// ---- runs ------------------------------------------------------------------

struct ErrorSummary {
  std::size_t points = 0;
  double mean_abs_est_error = 0.0;
  double max_abs_est_error = 0.0;
  double mean_abs_meas_error = 0.0;
  double max_abs_meas_error = 0.0;
};

ErrorSummary summarize(const owc::ErrorSeries& series);

struct Realization {
  TimeScale timescale;
  std::vector<GridPoint> grid;
  Trajectory truth;
  FilterTrace trace;
};

// Truth simulation plus filter for one seed; no files are written.
Realization simulate_scenario(const ScenarioConfig& config, std::uint64_t seed);
Realization simulate_scenario(const ScenarioConfig& config, const TimeScale& timescale,
                              std::span<const GridPoint> grid, std::uint64_t seed);

struct OutputFile {
  std::string name;
  std::string sha256;
  std::uintmax_t bytes = 0;
};

struct RunManifest {
  std::string command;
  std::string tool_version;
  std::string config_hash;
  nlohmann::json config;
  std::vector<std::uint64_t> seeds;
  std::vector<OutputFile> outputs;
  double wall_clock_seconds = 0.0;

  nlohmann::json to_json() const;
};

// Writes manifest.json through a temporary file and a rename.
void write_manifest(const RunManifest& manifest, const std::filesystem::path& directory);

struct RunOutcome {
  Realization realization;
  ErrorSummary summary{};
  owc::SpikeReport spikes{};
  RunManifest manifest{};
  std::filesystem::path directory{};
};

// Uses config.run.seed. With write_files the trace, summary, spikes, plots
// and manifest land in config.output_directory().
RunOutcome run_scenario(const ScenarioConfig& config, bool write_files = true);

struct McOptions {
  std::uint32_t replicates = 200;
  std::uint64_t base_seed = 1;
  // Every replicate uses base_seed; a determinism check.
  bool same_seed = false;
  bool write_files = true;
};

struct McOutcome {
  TimeScale timescale;
  std::vector<double> t{};
  // Point-wise means over replicates.
  owc::ErrorSeries mean{};
  std::vector<double> std_abs_est_error{};
  std::vector<double> std_abs_meas_error{};
  ErrorSummary summary_of_means{};
  // Largest |est_error| over every replicate, point and state component.
  double max_abs_est_error_any = 0.0;
  // Largest |meas_error| over every replicate and point.
  double max_abs_meas_error_any = 0.0;
  std::vector<std::uint64_t> seeds{};
  // SHA-256 of each replicate's trace CSV.
  std::vector<std::string> replicate_digests{};
  owc::SpikeReport spikes{};
  RunManifest manifest{};
  std::filesystem::path directory{};
};

// Replicates run on config.run.threads workers; results are reduced in
// replicate order so the outcome does not depend on scheduling. A failing
// replicate is rethrown with its index.
McOutcome monte_carlo(const ScenarioConfig& config, const McOptions& options);

struct SweepOutcome {
  oracles::BoundEstimate estimate;
  std::vector<oracles::CovarianceProbe> probes;
  RunManifest manifest;
  std::filesystem::path directory;
};

// Scans `scan_points` evenly spaced c values over [mu_lo, mu_hi] (written to
// bound_scan.csv), then bisects. NoSignChange propagates after the scan is
// written.
SweepOutcome sweep_bound(const ScenarioConfig& config, double mu_lo, double mu_hi,
                         const oracles::BoundOptions& options, bool write_files = true,
                         std::size_t scan_points = 21);

// Max |P_filter - P_ode| over a uniform interval grid on [0, t1] divided by
// max |P_ode|. Process noise draws play no part in P.
double continuous_limit_error(const StateSpaceModel& model, double t1, double h,
                              double ode_step = 1e-4);

struct OracleCheckLine {
  std::string name;
  double value = 0.0;
  double tolerance = 0.0;
  bool pass = false;
};

struct OracleReport {
  std::vector<OracleCheckLine> lines;
  bool pass() const;
  std::string to_text() const;
};

struct OracleCheckOptions {
  std::vector<double> graininess{0.1, 0.5, 2.0};
  std::size_t steps = 200;
  double equivalence_tolerance = 1e-9;
  double limit_t1 = 5.0;
  double limit_h = 1e-3;
  double limit_tolerance = 1e-2;
};

// Compares the time-scale filter for the scenario's model with the discrete
// predictor at constant graininess and with the Riccati ODE on [0, limit_t1].
OracleReport oracle_check(const ScenarioConfig& config, const OracleCheckOptions& options = {});

}  // namespace tskf
