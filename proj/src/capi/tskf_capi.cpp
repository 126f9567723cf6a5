#include "tskf/tskf.h"

#include <cmath>
#include <algorithm>
#include <cstring>
#include <fstream>
#include <limits>
#include <string>

#include "tskf/config.hpp"
#include "tskf/driver.hpp"
#include "tskf/error.hpp"
#include "tskf/timescale.hpp"

struct tskf_timescale {
  tskf::TimeScale ts;
};

struct tskf_scenario {
  tskf::ScenarioConfig config;
};

struct tskf_trace {
  tskf::FilterTrace trace;
};

namespace {

thread_local std::string g_last_error;
thread_local double g_div_t = std::numeric_limits<double>::quiet_NaN();
thread_local double g_div_mu = std::numeric_limits<double>::quiet_NaN();
thread_local bool g_has_divergence = false;

tskf_status from_code(tskf::ErrorCode code) {
  return static_cast<tskf_status>(static_cast<int>(code) + 1);
}

tskf_status fail(tskf_status status, std::string message) {
  g_last_error = std::move(message);
  return status;
}

template <typename F>
tskf_status guarded(F&& f) {
  g_last_error.clear();
  try {
    return f();
  } catch (const tskf::DivergenceError& e) {
    g_has_divergence = true;
    g_div_t = e.t();
    g_div_mu = e.mu();
    return fail(from_code(e.code()), e.what());
  } catch (const tskf::Error& e) {
    return fail(from_code(e.code()), e.what());
  } catch (const std::bad_alloc&) {
    return fail(TSKF_ERR_INTERNAL, "out of memory");
  } catch (const std::exception& e) {
    return fail(TSKF_ERR_INTERNAL, e.what());
  } catch (...) {
    return fail(TSKF_ERR_INTERNAL, "unknown failure");
  }
}

tskf_status null_arg(const char* name) {
  return fail(TSKF_ERR_NULL_ARGUMENT, std::string(name) + " is NULL");
}

tskf_status copy_string(const std::string& s, char* buffer, size_t capacity, size_t* needed) {
  if (needed) *needed = s.size() + 1;
  if (!buffer) return TSKF_OK;
  if (capacity < s.size() + 1) {
    if (capacity > 0) {
      std::memcpy(buffer, s.data(), capacity - 1);
      buffer[capacity - 1] = '\0';
    }
    return fail(TSKF_ERR_BUFFER_TOO_SMALL, "buffer too small");
  }
  std::memcpy(buffer, s.c_str(), s.size() + 1);
  return TSKF_OK;
}

void fill_summary(tskf_error_summary* out, const tskf::ErrorSummary& s,
                  const tskf::owc::SpikeReport& spikes) {
  if (!out) return;
  *out = {};
  out->points = s.points;
  out->mean_abs_est_error = s.mean_abs_est_error;
  out->max_abs_est_error = s.max_abs_est_error;
  out->mean_abs_meas_error = s.mean_abs_meas_error;
  out->max_abs_meas_error = s.max_abs_meas_error;
  out->max_abs_est_error_any = std::numeric_limits<double>::quiet_NaN();
  out->max_abs_meas_error_any = std::numeric_limits<double>::quiet_NaN();
  out->jumps = spikes.entries.size();
  for (const auto& e : spikes.entries) out->flagged_spikes += e.flagged ? 1 : 0;
  out->baseline_median_error = spikes.baseline_median_error;
  out->rank_correlation = spikes.rank_correlation_j_vs_error;
}

tskf_status fill_spikes(const tskf::owc::SpikeReport& spikes, tskf_spike_row* rows, size_t capacity,
                        size_t* count) {
  if (count) *count = spikes.entries.size();
  if (!rows) return TSKF_OK;
  const size_t n = std::min(capacity, spikes.entries.size());
  for (size_t i = 0; i < n; ++i) {
    const auto& e = spikes.entries[i];
    rows[i] = {e.t_successor, e.jump,           e.index,    e.abs_est_error, e.abs_meas_error,
               e.recovery_steps, e.recovered ? 1 : 0, e.flagged ? 1 : 0};
  }
  if (capacity < spikes.entries.size()) return fail(TSKF_ERR_BUFFER_TOO_SMALL, "spike buffer too small");
  return TSKF_OK;
}

tskf::ScenarioConfig with_dir(const tskf_scenario* s, const char* out_dir) {
  tskf::ScenarioConfig cfg = s->config;
  if (out_dir) cfg.output.directory = out_dir;
  return cfg;
}

}  // namespace

extern "C" {

const char* tskf_version(void) { return TSKF_VERSION_STRING; }

const char* tskf_status_name(tskf_status status) {
  switch (status) {
    case TSKF_OK: return "ok";
    case TSKF_ERR_NULL_ARGUMENT: return "NullArgument";
    case TSKF_ERR_BUFFER_TOO_SMALL: return "BufferTooSmall";
    case TSKF_ERR_INTERNAL: return "Internal";
    default: break;
  }
  const int code = static_cast<int>(status) - 1;
  if (code >= 0 && code <= static_cast<int>(tskf::ErrorCode::OracleMismatch)) {
    return tskf::to_string(static_cast<tskf::ErrorCode>(code)).data();
  }
  return "Unknown";
}

const char* tskf_last_error(void) { return g_last_error.c_str(); }

tskf_status tskf_last_divergence(double* t, double* mu) {
  if (!g_has_divergence) return fail(TSKF_ERR_EMPTY_INPUT, "no divergence recorded on this thread");
  if (t) *t = g_div_t;
  if (mu) *mu = g_div_mu;
  return TSKF_OK;
}

tskf_status tskf_timescale_parse(const char* spec, tskf_timescale** out) {
  if (!spec) return null_arg("spec");
  if (!out) return null_arg("out");
  return guarded([&] {
    *out = new tskf_timescale{tskf::build_named_timescale(spec)};
    return TSKF_OK;
  });
}

tskf_status tskf_timescale_extract_csv(const char* path, size_t min_continuous_run,
                                       tskf_timescale** out) {
  if (!path) return null_arg("path");
  if (!out) return null_arg("out");
  return guarded([&] {
    const auto samples = tskf::read_validity_csv(path);
    *out = new tskf_timescale{tskf::extract_from_measurements(samples, {min_continuous_run})};
    return TSKF_OK;
  });
}

void tskf_timescale_free(tskf_timescale* ts) { delete ts; }

tskf_status tskf_timescale_bounds(const tskf_timescale* ts, double* min_time, double* max_time) {
  if (!ts) return null_arg("ts");
  if (min_time) *min_time = ts->ts.min_time();
  if (max_time) *max_time = ts->ts.max_time();
  return TSKF_OK;
}

tskf_status tskf_timescale_max_graininess(const tskf_timescale* ts, double* out) {
  if (!ts) return null_arg("ts");
  if (!out) return null_arg("out");
  return guarded([&] {
    *out = ts->ts.max_graininess();
    return TSKF_OK;
  });
}

tskf_status tskf_timescale_contains(const tskf_timescale* ts, double t, int* out) {
  if (!ts) return null_arg("ts");
  if (!out) return null_arg("out");
  *out = ts->ts.contains(t) ? 1 : 0;
  return TSKF_OK;
}

tskf_status tskf_timescale_sigma(const tskf_timescale* ts, double t, double* out) {
  if (!ts) return null_arg("ts");
  if (!out) return null_arg("out");
  return guarded([&] {
    *out = ts->ts.sigma(t);
    return TSKF_OK;
  });
}

tskf_status tskf_timescale_graininess(const tskf_timescale* ts, double t, double* out) {
  if (!ts) return null_arg("ts");
  if (!out) return null_arg("out");
  return guarded([&] {
    *out = ts->ts.graininess(t);
    return TSKF_OK;
  });
}

tskf_status tskf_timescale_jumps(const tskf_timescale* ts, double* from, double* to, size_t capacity,
                                 size_t* count) {
  if (!ts) return null_arg("ts");
  return guarded([&] {
    const auto jumps = ts->ts.jumps();
    if (count) *count = jumps.size();
    if (!from && !to) return TSKF_OK;
    const size_t n = std::min(capacity, jumps.size());
    for (size_t i = 0; i < n; ++i) {
      if (from) from[i] = jumps[i].from;
      if (to) to[i] = jumps[i].to;
    }
    return capacity < jumps.size() ? fail(TSKF_ERR_BUFFER_TOO_SMALL, "jump buffer too small") : TSKF_OK;
  });
}

tskf_status tskf_timescale_grid(const tskf_timescale* ts, double h, double* t, size_t capacity,
                                size_t* count) {
  if (!ts) return null_arg("ts");
  return guarded([&] {
    const auto grid = tskf::sample_grid(ts->ts, {h});
    if (count) *count = grid.size();
    if (!t) return TSKF_OK;
    const size_t n = std::min(capacity, grid.size());
    for (size_t i = 0; i < n; ++i) t[i] = grid[i].t;
    return capacity < grid.size() ? fail(TSKF_ERR_BUFFER_TOO_SMALL, "grid buffer too small") : TSKF_OK;
  });
}

tskf_status tskf_timescale_to_spec(const tskf_timescale* ts, char* buffer, size_t capacity,
                                   size_t* needed) {
  if (!ts) return null_arg("ts");
  return guarded([&] { return copy_string(ts->ts.to_spec(), buffer, capacity, needed); });
}

tskf_status tskf_scenario_load(const char* name_or_path, tskf_scenario** out) {
  if (!name_or_path) return null_arg("name_or_path");
  if (!out) return null_arg("out");
  return guarded([&] {
    *out = new tskf_scenario{tskf::load_scenario(name_or_path)};
    return TSKF_OK;
  });
}

tskf_status tskf_scenario_parse_json(const char* text, tskf_scenario** out) {
  if (!text) return null_arg("text");
  if (!out) return null_arg("out");
  return guarded([&] {
    *out = new tskf_scenario{tskf::parse_scenario_text(text)};
    return TSKF_OK;
  });
}

void tskf_scenario_free(tskf_scenario* scenario) { delete scenario; }

tskf_status tskf_scenario_override(tskf_scenario* scenario, const char* assignment) {
  if (!scenario) return null_arg("scenario");
  if (!assignment) return null_arg("assignment");
  return guarded([&] {
    tskf::apply_override(scenario->config, assignment);
    return TSKF_OK;
  });
}

tskf_status tskf_scenario_to_json(const tskf_scenario* scenario, char* buffer, size_t capacity,
                                  size_t* needed) {
  if (!scenario) return null_arg("scenario");
  return guarded(
      [&] { return copy_string(scenario->config.to_json().dump(2), buffer, capacity, needed); });
}

tskf_status tskf_scenario_seed(const tskf_scenario* scenario, uint64_t* out) {
  if (!scenario) return null_arg("scenario");
  if (!out) return null_arg("out");
  *out = scenario->config.run.seed;
  return TSKF_OK;
}

tskf_status tskf_scenario_timescale(const tskf_scenario* scenario, tskf_timescale** out) {
  if (!scenario) return null_arg("scenario");
  if (!out) return null_arg("out");
  return guarded([&] {
    *out = new tskf_timescale{scenario->config.build_timescale()};
    return TSKF_OK;
  });
}

tskf_status tskf_scenario_simulate(const tskf_scenario* scenario, uint64_t seed, tskf_trace** out) {
  if (!scenario) return null_arg("scenario");
  if (!out) return null_arg("out");
  return guarded([&] {
    *out = new tskf_trace{tskf::simulate_scenario(scenario->config, seed).trace};
    return TSKF_OK;
  });
}

tskf_status tskf_scenario_run(const tskf_scenario* scenario, const char* out_dir,
                              tskf_error_summary* summary, tskf_spike_row* spikes,
                              size_t spike_capacity, size_t* spike_count) {
  if (!scenario) return null_arg("scenario");
  return guarded([&] {
    const auto result = tskf::run_scenario(with_dir(scenario, out_dir));
    fill_summary(summary, result.summary, result.spikes);
    return fill_spikes(result.spikes, spikes, spike_capacity, spike_count);
  });
}

tskf_status tskf_scenario_monte_carlo(const tskf_scenario* scenario, uint32_t replicates,
                                      uint64_t base_seed, int same_seed, const char* out_dir,
                                      tskf_error_summary* summary, tskf_spike_row* spikes,
                                      size_t spike_capacity, size_t* spike_count) {
  if (!scenario) return null_arg("scenario");
  return guarded([&] {
    tskf::McOptions opt;
    opt.replicates = replicates;
    opt.base_seed = base_seed;
    opt.same_seed = same_seed != 0;
    const auto result = tskf::monte_carlo(with_dir(scenario, out_dir), opt);
    fill_summary(summary, result.summary_of_means, result.spikes);
    if (summary) {
      summary->max_abs_est_error_any = result.max_abs_est_error_any;
      summary->max_abs_meas_error_any = result.max_abs_meas_error_any;
    }
    return fill_spikes(result.spikes, spikes, spike_capacity, spike_count);
  });
}

tskf_status tskf_scenario_sweep(const tskf_scenario* scenario, double mu_lo, double mu_hi,
                                double resolution, size_t horizon_steps, const char* out_dir,
                                tskf_bound* out) {
  if (!scenario) return null_arg("scenario");
  return guarded([&] {
    tskf::oracles::BoundOptions opt;
    opt.resolution = resolution;
    if (horizon_steps > 0) opt.horizon_steps = horizon_steps;
    const auto result = tskf::sweep_bound(with_dir(scenario, out_dir), mu_lo, mu_hi, opt);
    if (out) *out = {result.estimate.mu_bar, result.estimate.lo, result.estimate.hi};
    return TSKF_OK;
  });
}

tskf_status tskf_scenario_oracle_check(const tskf_scenario* scenario, int* passed, char* report,
                                       size_t capacity, size_t* needed) {
  if (!scenario) return null_arg("scenario");
  if (!passed) return null_arg("passed");
  return guarded([&] {
    const auto result = tskf::oracle_check(scenario->config);
    *passed = result.pass() ? 1 : 0;
    return copy_string(result.to_text(), report, capacity, needed);
  });
}

tskf_status tskf_trace_read_csv(const char* path, tskf_trace** out) {
  if (!path) return null_arg("path");
  if (!out) return null_arg("out");
  return guarded([&] {
    *out = new tskf_trace{tskf::read_trace_csv(std::filesystem::path(path))};
    return TSKF_OK;
  });
}

tskf_status tskf_trace_write_csv(const tskf_trace* trace, const char* path) {
  if (!trace) return null_arg("trace");
  if (!path) return null_arg("path");
  return guarded([&] {
    std::ofstream out(path, std::ios::binary);
    tskf::write_trace_csv(out, trace->trace);
    out.close();
    if (!out) throw tskf::Error(tskf::ErrorCode::IoError, std::string("cannot write ") + path);
    return TSKF_OK;
  });
}

void tskf_trace_free(tskf_trace* trace) { delete trace; }

tskf_status tskf_trace_dims(const tskf_trace* trace, size_t* points, size_t* state_dim,
                            size_t* output_dim) {
  if (!trace) return null_arg("trace");
  const auto& recs = trace->trace.records;
  if (points) *points = recs.size();
  if (state_dim) *state_dim = recs.empty() ? 0 : static_cast<size_t>(recs.front().x_hat.size());
  if (output_dim) *output_dim = recs.empty() ? 0 : static_cast<size_t>(recs.front().y.size());
  return TSKF_OK;
}

tskf_status tskf_trace_point(const tskf_trace* trace, size_t index, double* t, double* mu,
                             double* x_hat, double* P, double* est_error, double* meas_error) {
  if (!trace) return null_arg("trace");
  const auto& recs = trace->trace.records;
  if (index >= recs.size()) return fail(TSKF_ERR_BAD_PARAMETER, "point index out of range");
  const auto& r = recs[index];
  if (t) *t = r.t;
  if (mu) *mu = r.mu ? *r.mu : std::numeric_limits<double>::quiet_NaN();
  auto copy = [](const auto& m, double* dst) {
    if (!dst) return;
    // Row-major regardless of Eigen's storage order.
    Eigen::Index k = 0;
    for (Eigen::Index i = 0; i < m.rows(); ++i)
      for (Eigen::Index j = 0; j < m.cols(); ++j) dst[k++] = m(i, j);
  };
  copy(r.x_hat, x_hat);
  copy(r.P, P);
  copy(r.est_error, est_error);
  copy(r.meas_error, meas_error);
  return TSKF_OK;
}

tskf_status tskf_trace_emit_plots(const tskf_trace* trace, tskf_plot_mode mode,
                                  tskf_plot_format format, const char* directory, const char* stem,
                                  size_t component) {
  if (!trace) return null_arg("trace");
  if (!directory) return null_arg("directory");
  return guarded([&] {
    if (mode != TSKF_PLOT_ITERATION && mode != TSKF_PLOT_TIMESCALE) {
      throw tskf::Error(tskf::ErrorCode::UnsupportedFormat, "unknown plot mode");
    }
    if (format != TSKF_PLOT_SVG && format != TSKF_PLOT_DATA) {
      throw tskf::Error(tskf::ErrorCode::UnsupportedFormat, "unknown plot format");
    }
    tskf::emit_plots(trace->trace,
                     mode == TSKF_PLOT_ITERATION ? tskf::PlotMode::Iteration : tskf::PlotMode::TimeScale,
                     format == TSKF_PLOT_SVG ? tskf::PlotFormat::Svg : tskf::PlotFormat::Data,
                     directory, stem ? stem : "plot", static_cast<Eigen::Index>(component));
    return TSKF_OK;
  });
}

}  // extern "C"
