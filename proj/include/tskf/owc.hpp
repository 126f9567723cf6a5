#pragma once

#include <span>
#include <vector>

#include "tskf/kalman.hpp"
#include "tskf/linsys.hpp"
#include "tskf/timescale.hpp"

namespace tskf::owc {

// Linear window of the received-power vs misalignment-angle curve.
struct OwcLinearFit {
  double slope = -637.35;     // mW / rad
  double intercept = 511.97;  // mW
  double angle_lo = 0.4141;   // rad
  double angle_hi = 0.6729;   // rad
};

struct PowerReading {
  double milliwatts = 0.0;
  bool out_of_fit = false;
};

PowerReading power_from_angle(const OwcLinearFit& fit, double theta);
double angle_from_power(const OwcLinearFit& fit, double milliwatts);

// Scalar link model: x^Delta = x + w, y = slope x + intercept + v, with
// w ~ N(0, 1) and v ~ N(0, 100).
StateSpaceModel owc_model(double x0_mean = 0.5, double p0 = 0.01);

// Second-order reference system with A = [[0, 1], [-1, -2]], G = [0; 1],
// C = [1, 0], Q = 1, R = 2, x0 = [1; 1], P0 = diag(2, 3).
StateSpaceModel reference_model();

using tskf::td_timescale;

struct SpikeEntry {
  double t_successor = 0.0;
  double jump = 0.0;
  std::size_t index = 0;
  double abs_est_error = 0.0;
  double abs_meas_error = 0.0;
  // Grid points after the successor until the error is back under the
  // threshold; counted to the end of the trace when it never is.
  std::size_t recovery_steps = 0;
  bool recovered = false;
  bool flagged = false;
};

struct SpikeReport {
  std::vector<SpikeEntry> entries;
  double baseline_median_error = 0.0;
  double spike_factor = 3.0;
  // Spearman correlation between jump lengths and spike magnitudes; NaN with
  // fewer than two entries.
  double rank_correlation_j_vs_error = 0.0;
};

// Per-point |est_error| series used by the analysis.
struct ErrorSeries {
  std::vector<double> t;
  std::vector<double> abs_est_error;
  std::vector<double> abs_meas_error;
};

ErrorSeries error_series(const FilterTrace& trace, Eigen::Index component = 0);
// Point-wise Monte Carlo mean over traces generated on the same grid.
ErrorSeries mean_error_series(std::span<const FilterTrace> traces, Eigen::Index component = 0);

SpikeReport analyze_spikes(const ErrorSeries& series, const TimeScale& ts, double spike_factor = 3.0);
SpikeReport analyze_spikes(const FilterTrace& trace, const TimeScale& ts, double spike_factor = 3.0,
                           Eigen::Index component = 0);

// Spearman rank correlation with average ranks for ties.
double spearman(std::span<const double> x, std::span<const double> y);

}  // namespace tskf::owc
