/* C interface to the time-scale Kalman filter library.
 *
 * Objects are opaque handles created by *_parse / *_load / *_read functions
 * and released with the matching *_free. Every call returns a tskf_status;
 * on failure tskf_last_error() describes the problem for the calling thread.
 * Buffers passed with a capacity are filled up to that capacity, and the
 * required size is always reported so callers can retry. */
#ifndef TSKF_H
#define TSKF_H

#include <stddef.h>
#include <stdint.h>

#if defined(TSKF_BUILDING_LIBRARY)
#define TSKF_API __attribute__((visibility("default")))
#else
#define TSKF_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum tskf_status {
  TSKF_OK = 0,
  TSKF_ERR_EMPTY_INPUT,
  TSKF_ERR_NON_FINITE,
  TSKF_ERR_INVALID_SEGMENT,
  TSKF_ERR_NOT_IN_TIME_SCALE,
  TSKF_ERR_STEP_TOO_LARGE,
  TSKF_ERR_UNKNOWN_NAME,
  TSKF_ERR_BAD_PARAMETER,
  TSKF_ERR_NO_VALID_SAMPLES,
  TSKF_ERR_NON_MONOTONE_TIMESTAMPS,
  TSKF_ERR_DIMENSION_MISMATCH,
  TSKF_ERR_NOT_POSITIVE_DEFINITE,
  TSKF_ERR_EMPTY_GRID,
  TSKF_ERR_SINGULAR_INNOVATION,
  TSKF_ERR_NON_POSITIVE_MU,
  TSKF_ERR_GRID_TRAJECTORY_MISMATCH,
  TSKF_ERR_NUMERIC_DIVERGENCE,
  TSKF_ERR_NO_SIGN_CHANGE,
  TSKF_ERR_TRACE_SCALE_MISMATCH,
  TSKF_ERR_UNSUPPORTED_FORMAT,
  TSKF_ERR_CONFIG,
  TSKF_ERR_IO,
  TSKF_ERR_ORACLE_MISMATCH,
  TSKF_ERR_NULL_ARGUMENT,
  TSKF_ERR_BUFFER_TOO_SMALL,
  TSKF_ERR_INTERNAL
} tskf_status;

typedef struct tskf_timescale tskf_timescale;
typedef struct tskf_scenario tskf_scenario;
typedef struct tskf_trace tskf_trace;

typedef enum tskf_plot_mode { TSKF_PLOT_ITERATION = 0, TSKF_PLOT_TIMESCALE = 1 } tskf_plot_mode;
typedef enum tskf_plot_format { TSKF_PLOT_SVG = 0, TSKF_PLOT_DATA = 1 } tskf_plot_format;

typedef struct tskf_error_summary {
  size_t points;
  double mean_abs_est_error;
  double max_abs_est_error;
  double mean_abs_meas_error;
  double max_abs_meas_error;
  /* Monte Carlo only: largest |est_error| over every replicate and state
   * component, and largest |meas_error| over every replicate. */
  double max_abs_est_error_any;
  double max_abs_meas_error_any;
  size_t jumps;
  size_t flagged_spikes;
  double baseline_median_error;
  double rank_correlation;
} tskf_error_summary;

typedef struct tskf_spike_row {
  double t_successor;
  double jump;
  size_t index;
  double abs_est_error;
  double abs_meas_error;
  size_t recovery_steps;
  int recovered;
  int flagged;
} tskf_spike_row;

typedef struct tskf_bound {
  double mu_bar;
  double lo;
  double hi;
} tskf_bound;

TSKF_API const char* tskf_version(void);
TSKF_API const char* tskf_status_name(tskf_status status);
/* Message of the last failed call on this thread; "" when none. */
TSKF_API const char* tskf_last_error(void);
/* Location of the last TSKF_ERR_NUMERIC_DIVERGENCE on this thread. */
TSKF_API tskf_status tskf_last_divergence(double* t, double* mu);

/* ---- time scales ---- */
TSKF_API tskf_status tskf_timescale_parse(const char* spec, tskf_timescale** out);
TSKF_API tskf_status tskf_timescale_extract_csv(const char* path, size_t min_continuous_run,
                                                tskf_timescale** out);
TSKF_API void tskf_timescale_free(tskf_timescale* ts);
TSKF_API tskf_status tskf_timescale_bounds(const tskf_timescale* ts, double* min_time,
                                           double* max_time);
TSKF_API tskf_status tskf_timescale_max_graininess(const tskf_timescale* ts, double* out);
TSKF_API tskf_status tskf_timescale_contains(const tskf_timescale* ts, double t, int* out);
TSKF_API tskf_status tskf_timescale_sigma(const tskf_timescale* ts, double t, double* out);
TSKF_API tskf_status tskf_timescale_graininess(const tskf_timescale* ts, double t, double* out);
TSKF_API tskf_status tskf_timescale_jumps(const tskf_timescale* ts, double* from, double* to,
                                          size_t capacity, size_t* count);
TSKF_API tskf_status tskf_timescale_grid(const tskf_timescale* ts, double h, double* t,
                                         size_t capacity, size_t* count);
/* Writes the explicit spec string including the terminating NUL. */
TSKF_API tskf_status tskf_timescale_to_spec(const tskf_timescale* ts, char* buffer,
                                            size_t capacity, size_t* needed);

/* ---- scenarios ---- */
/* Built-in name (owc-td, ref-t1 .. ref-t4, ref-td) or JSON config path. */
TSKF_API tskf_status tskf_scenario_load(const char* name_or_path, tskf_scenario** out);
TSKF_API tskf_status tskf_scenario_parse_json(const char* text, tskf_scenario** out);
TSKF_API void tskf_scenario_free(tskf_scenario* scenario);
/* "block.key=value", e.g. "sampling.h=0.5" or "run.seed=7". */
TSKF_API tskf_status tskf_scenario_override(tskf_scenario* scenario, const char* assignment);
TSKF_API tskf_status tskf_scenario_to_json(const tskf_scenario* scenario, char* buffer,
                                           size_t capacity, size_t* needed);
TSKF_API tskf_status tskf_scenario_seed(const tskf_scenario* scenario, uint64_t* out);
TSKF_API tskf_status tskf_scenario_timescale(const tskf_scenario* scenario, tskf_timescale** out);

/* Simulates truth and filter without writing files. */
TSKF_API tskf_status tskf_scenario_simulate(const tskf_scenario* scenario, uint64_t seed,
                                            tskf_trace** out);

/* The out_dir arguments override output.directory; pass NULL to keep it.
 * Spike rows are copied up to spike_capacity; spike_count gets the total. */
TSKF_API tskf_status tskf_scenario_run(const tskf_scenario* scenario, const char* out_dir,
                                       tskf_error_summary* summary, tskf_spike_row* spikes,
                                       size_t spike_capacity, size_t* spike_count);
TSKF_API tskf_status tskf_scenario_monte_carlo(const tskf_scenario* scenario, uint32_t replicates,
                                               uint64_t base_seed, int same_seed,
                                               const char* out_dir, tskf_error_summary* summary,
                                               tskf_spike_row* spikes, size_t spike_capacity,
                                               size_t* spike_count);
/* horizon_steps of 0 keeps the default (1000). */
TSKF_API tskf_status tskf_scenario_sweep(const tskf_scenario* scenario, double mu_lo, double mu_hi,
                                         double resolution, size_t horizon_steps,
                                         const char* out_dir, tskf_bound* out);
/* Runs the oracle comparisons. Returns TSKF_OK with *passed = 0 on a
 * mismatch; the report is a CSV table. */
TSKF_API tskf_status tskf_scenario_oracle_check(const tskf_scenario* scenario, int* passed,
                                                char* report, size_t capacity, size_t* needed);

/* ---- traces ---- */
TSKF_API tskf_status tskf_trace_read_csv(const char* path, tskf_trace** out);
TSKF_API tskf_status tskf_trace_write_csv(const tskf_trace* trace, const char* path);
TSKF_API void tskf_trace_free(tskf_trace* trace);
TSKF_API tskf_status tskf_trace_dims(const tskf_trace* trace, size_t* points, size_t* state_dim,
                                     size_t* output_dim);
/* Any output pointer may be NULL. mu is NaN on the final point. Arrays need
 * state_dim, state_dim^2 (row-major), state_dim and output_dim entries. */
TSKF_API tskf_status tskf_trace_point(const tskf_trace* trace, size_t index, double* t, double* mu,
                                      double* x_hat, double* P, double* est_error,
                                      double* meas_error);
TSKF_API tskf_status tskf_trace_emit_plots(const tskf_trace* trace, tskf_plot_mode mode,
                                           tskf_plot_format format, const char* directory,
                                           const char* stem, size_t component);

#ifdef __cplusplus
}
#endif

#endif /* TSKF_H */
