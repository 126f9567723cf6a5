#include "tskf/owc.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <fmt/format.h>

#include "tskf/error.hpp"

namespace tskf::owc {

PowerReading power_from_angle(const OwcLinearFit& fit, double theta) {
  return {fit.slope * theta + fit.intercept, theta < fit.angle_lo || theta > fit.angle_hi};
}

double angle_from_power(const OwcLinearFit& fit, double milliwatts) {
  return (milliwatts - fit.intercept) / fit.slope;
}

StateSpaceModel owc_model(double x0_mean, double p0) {
  const OwcLinearFit fit;
  StateSpaceModel m;
  m.A = Matrix::Constant(1, 1, 1.0);
  m.B = Matrix::Zero(1, 1);
  m.C = Matrix::Constant(1, 1, fit.slope);
  m.D = Vector::Constant(1, fit.intercept);
  m.G = Matrix::Constant(1, 1, 1.0);
  m.Q = Matrix::Constant(1, 1, 1.0);
  m.R = Matrix::Constant(1, 1, 100.0);
  m.x0_mean = Vector::Constant(1, x0_mean);
  m.P0 = Matrix::Constant(1, 1, p0);
  return m;
}

StateSpaceModel reference_model() {
  StateSpaceModel m;
  m.A.resize(2, 2);
  m.A << 0.0, 1.0, -1.0, -2.0;
  m.B = Matrix::Zero(2, 2);
  m.C.resize(1, 2);
  m.C << 1.0, 0.0;
  m.D = Vector::Zero(1);
  m.G.resize(2, 1);
  m.G << 0.0, 1.0;
  m.Q = Matrix::Constant(1, 1, 1.0);
  m.R = Matrix::Constant(1, 1, 2.0);
  m.x0_mean = Vector::Ones(2);
  m.P0 = Vector(Eigen::Vector2d(2.0, 3.0)).asDiagonal();
  return m;
}

ErrorSeries error_series(const FilterTrace& trace, Eigen::Index component) {
  ErrorSeries s;
  for (const auto& rec : trace.records) {
    if (component < 0 || component >= rec.est_error.size()) {
      throw Error(ErrorCode::DimensionMismatch,
                  fmt::format("state component {} out of range", component));
    }
    s.t.push_back(rec.t);
    s.abs_est_error.push_back(std::abs(rec.est_error(component)));
    s.abs_meas_error.push_back(std::abs(rec.meas_error(0)));
  }
  return s;
}

ErrorSeries mean_error_series(std::span<const FilterTrace> traces, Eigen::Index component) {
  if (traces.empty()) throw Error(ErrorCode::EmptyInput, "no traces to average");
  ErrorSeries mean = error_series(traces.front(), component);
  for (std::size_t r = 1; r < traces.size(); ++r) {
    const ErrorSeries s = error_series(traces[r], component);
    if (s.t.size() != mean.t.size()) {
      throw Error(ErrorCode::TraceScaleMismatch, "traces have different lengths");
    }
    for (std::size_t i = 0; i < s.t.size(); ++i) {
      mean.abs_est_error[i] += s.abs_est_error[i];
      mean.abs_meas_error[i] += s.abs_meas_error[i];
    }
  }
  const double n = static_cast<double>(traces.size());
  for (std::size_t i = 0; i < mean.t.size(); ++i) {
    mean.abs_est_error[i] /= n;
    mean.abs_meas_error[i] /= n;
  }
  return mean;
}

namespace {

std::vector<double> average_ranks(std::span<const double> v) {
  std::vector<std::size_t> order(v.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> ranks(v.size());
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    while (j + 1 < order.size() && v[order[j + 1]] == v[order[i]]) ++j;
    const double r = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = r;
    i = j + 1;
  }
  return ranks;
}

double median(std::vector<double> v) {
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  const std::size_t mid = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid), v.end());
  const double upper = v[mid];
  if (v.size() % 2 == 1) return upper;
  const double lower = *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid));
  return 0.5 * (lower + upper);
}

}  // namespace

double spearman(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw Error(ErrorCode::DimensionMismatch, "spearman needs equal lengths");
  if (x.size() < 2) return std::numeric_limits<double>::quiet_NaN();
  const auto rx = average_ranks(x);
  const auto ry = average_ranks(y);
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(rx.begin(), rx.end(), 0.0) / n;
  const double my = std::accumulate(ry.begin(), ry.end(), 0.0) / n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < rx.size(); ++i) {
    sxy += (rx[i] - mx) * (ry[i] - my);
    sxx += (rx[i] - mx) * (rx[i] - mx);
    syy += (ry[i] - my) * (ry[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0) return std::numeric_limits<double>::quiet_NaN();
  return sxy / std::sqrt(sxx * syy);
}

SpikeReport analyze_spikes(const ErrorSeries& series, const TimeScale& ts, double spike_factor) {
  if (!(spike_factor > 1.0)) throw Error(ErrorCode::BadParameter, "spike_factor must exceed 1");
  const auto& t = series.t;
  if (t.empty()) throw Error(ErrorCode::TraceScaleMismatch, "empty trace");
  if (std::abs(t.front() - ts.min_time()) > kTimeTolerance ||
      std::abs(t.back() - ts.max_time()) > kTimeTolerance) {
    throw Error(ErrorCode::TraceScaleMismatch, "trace does not span the time scale");
  }
  for (double ti : t) {
    if (!ts.contains(ti)) {
      throw Error(ErrorCode::TraceScaleMismatch,
                  fmt::format("trace point t = {} is not in the time scale", ti));
    }
  }

  SpikeReport report;
  report.spike_factor = spike_factor;
  std::vector<bool> successor(t.size(), false);
  for (const Jump& j : ts.jumps()) {
    auto it = std::lower_bound(t.begin(), t.end(), j.to - kTimeTolerance);
    if (it == t.end() || std::abs(*it - j.to) > kTimeTolerance) {
      throw Error(ErrorCode::TraceScaleMismatch,
                  fmt::format("jump successor t = {} missing from the trace", j.to));
    }
    SpikeEntry e;
    e.t_successor = j.to;
    e.jump = j.length();
    e.index = static_cast<std::size_t>(std::distance(t.begin(), it));
    successor[e.index] = true;
    report.entries.push_back(e);
  }

  std::vector<double> baseline;
  for (std::size_t i = 0; i < t.size(); ++i) {
    if (!successor[i]) baseline.push_back(series.abs_est_error[i]);
  }
  report.baseline_median_error = median(std::move(baseline));
  const double threshold = spike_factor * report.baseline_median_error;

  std::vector<double> jumps, magnitudes;
  for (auto& e : report.entries) {
    e.abs_est_error = series.abs_est_error[e.index];
    e.abs_meas_error = series.abs_meas_error[e.index];
    e.flagged = e.abs_est_error >= threshold;
    std::size_t k = e.index;
    while (k < t.size() && series.abs_est_error[k] >= threshold) ++k;
    e.recovered = k < t.size();
    e.recovery_steps = k - e.index;
    jumps.push_back(e.jump);
    magnitudes.push_back(e.abs_est_error);
  }
  report.rank_correlation_j_vs_error = spearman(jumps, magnitudes);
  return report;
}

SpikeReport analyze_spikes(const FilterTrace& trace, const TimeScale& ts, double spike_factor,
                           Eigen::Index component) {
  return analyze_spikes(error_series(trace, component), ts, spike_factor);
}

}  // namespace tskf::owc
