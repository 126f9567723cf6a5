#include <math.h>
#include <stdio.h>
#include <stdlib.h>
#include <string.h>

#include "tskf/tskf.h"

static int failures = 0;

#define EXPECT(cond)                                              \
  do {                                                            \
    if (!(cond)) {                                                \
      fprintf(stderr, "%s:%d: %s\n", __FILE__, __LINE__, #cond);  \
      ++failures;                                                 \
    }                                                             \
  } while (0)

static void timescales(void) {
  tskf_timescale* ts = NULL;
  EXPECT(tskf_timescale_parse("td", &ts) == TSKF_OK);
  double lo = 0, hi = 0, v = 0;
  EXPECT(tskf_timescale_bounds(ts, &lo, &hi) == TSKF_OK && lo == 1 && hi == 300);
  EXPECT(tskf_timescale_max_graininess(ts, &v) == TSKF_OK && v == 6);
  EXPECT(tskf_timescale_sigma(ts, 30, &v) == TSKF_OK && v == 32);
  EXPECT(tskf_timescale_graininess(ts, 218, &v) == TSKF_OK && v == 6);
  int in = -1;
  EXPECT(tskf_timescale_contains(ts, 127, &in) == TSKF_OK && in == 0);

  double from[8], to[8];
  size_t count = 0;
  EXPECT(tskf_timescale_jumps(ts, from, to, 8, &count) == TSKF_OK && count == 5);
  EXPECT(to[4] - from[4] == 6);
  EXPECT(tskf_timescale_jumps(ts, from, to, 2, &count) == TSKF_ERR_BUFFER_TOO_SMALL && count == 5);

  size_t needed = 0;
  EXPECT(tskf_timescale_to_spec(ts, NULL, 0, &needed) == TSKF_OK && needed > 10);
  char* spec = malloc(needed);
  EXPECT(tskf_timescale_to_spec(ts, spec, needed, &needed) == TSKF_OK);
  tskf_timescale* back = NULL;
  EXPECT(tskf_timescale_parse(spec, &back) == TSKF_OK);
  EXPECT(tskf_timescale_sigma(back, 131, &v) == TSKF_OK && v == 135);
  free(spec);
  tskf_timescale_free(back);

  EXPECT(tskf_timescale_sigma(ts, 127, &v) == TSKF_ERR_NOT_IN_TIME_SCALE);
  EXPECT(strlen(tskf_last_error()) > 0);
  tskf_timescale_free(ts);

  EXPECT(tskf_timescale_parse("pab(a=1, b=2, k=1)", &ts) == TSKF_OK);
  double t[16];
  EXPECT(tskf_timescale_grid(ts, 0.5, t, 16, &count) == TSKF_OK && count == 6);
  EXPECT(t[2] == 1 && t[3] == 3);
  tskf_timescale_free(ts);

  EXPECT(tskf_timescale_parse("nonsense(", &ts) == TSKF_ERR_UNKNOWN_NAME ||
         tskf_timescale_parse("nonsense(", &ts) == TSKF_ERR_BAD_PARAMETER);
  EXPECT(tskf_timescale_parse(NULL, &ts) == TSKF_ERR_NULL_ARGUMENT);
  tskf_timescale_free(NULL);
}

static void scenarios(void) {
  tskf_scenario* sc = NULL;
  EXPECT(tskf_scenario_load("owc-td", &sc) == TSKF_OK);
  EXPECT(tskf_scenario_override(sc, "run.seed=3") == TSKF_OK);
  uint64_t seed = 0;
  EXPECT(tskf_scenario_seed(sc, &seed) == TSKF_OK && seed == 3);
  EXPECT(tskf_scenario_override(sc, "sampling.bogus=1") == TSKF_ERR_CONFIG);

  tskf_error_summary sum;
  tskf_spike_row rows[8];
  size_t n = 0;
  EXPECT(tskf_scenario_run(sc, "capi_run", &sum, rows, 8, &n) == TSKF_OK);
  EXPECT(n == 5 && sum.jumps == 5);
  EXPECT(rows[4].t_successor == 224 && rows[4].jump == 6);
  EXPECT(sum.points > 3000);

  tskf_trace* tr = NULL;
  EXPECT(tskf_trace_read_csv("capi_run/trace.csv", &tr) == TSKF_OK);
  size_t points = 0, nx = 0, ny = 0;
  EXPECT(tskf_trace_dims(tr, &points, &nx, &ny) == TSKF_OK);
  EXPECT(points == sum.points && nx == 1 && ny == 1);
  double t = 0, mu = 0, x = 0, P = 0, e = 0, m = 0;
  EXPECT(tskf_trace_point(tr, points - 1, &t, &mu, &x, &P, &e, &m) == TSKF_OK);
  EXPECT(t == 300 && isnan(mu));
  EXPECT(tskf_trace_point(tr, points, &t, NULL, NULL, NULL, NULL, NULL) == TSKF_ERR_BAD_PARAMETER);
  EXPECT(tskf_trace_emit_plots(tr, TSKF_PLOT_TIMESCALE, TSKF_PLOT_SVG, "capi_plots", "c", 0) == TSKF_OK);
  tskf_trace_free(tr);

  tskf_trace* sim = NULL;
  EXPECT(tskf_scenario_simulate(sc, 3, &sim) == TSKF_OK);
  EXPECT(tskf_trace_write_csv(sim, "capi_sim.csv") == TSKF_OK);
  tskf_trace_free(sim);

  int passed = 0;
  size_t needed = 0;
  EXPECT(tskf_scenario_oracle_check(sc, &passed, NULL, 0, &needed) == TSKF_OK && passed == 1);
  tskf_scenario_free(sc);

  EXPECT(tskf_scenario_parse_json("{\"name\": 3}", &sc) == TSKF_ERR_CONFIG);
  EXPECT(tskf_scenario_load("no-such-scenario", &sc) != TSKF_OK);

  /* A stable scalar model never diverges. */
  const char* stable =
      "{\"name\": \"stable\", \"model\": {\"A\": -1, \"C\": 1, \"G\": 0, \"Q\": 0, \"R\": 1,"
      " \"x0\": 0, \"P0\": 1}, \"timescale\": {\"spec\": \"uniform(c=1, end=10)\"}}";
  EXPECT(tskf_scenario_parse_json(stable, &sc) == TSKF_OK);
  tskf_bound b;
  EXPECT(tskf_scenario_sweep(sc, 0.1, 1.9, 0.05, 0, "capi_sweep", &b) == TSKF_ERR_NO_SIGN_CHANGE);
  tskf_scenario_free(sc);
}

int main(void) {
  EXPECT(strlen(tskf_version()) > 0);
  EXPECT(strcmp(tskf_status_name(TSKF_OK), "ok") == 0 || strlen(tskf_status_name(TSKF_OK)) > 0);
  timescales();
  scenarios();
  if (failures) {
    fprintf(stderr, "%d failure(s)\n", failures);
    return 1;
  }
  printf("C API: all checks passed\n");
  return 0;
}
