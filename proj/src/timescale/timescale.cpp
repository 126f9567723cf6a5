#include "tskf/timescale.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <fmt/format.h>

#include "tskf/error.hpp"

namespace tskf {

std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::EmptyInput: return "EmptyInput";
    case ErrorCode::NonFinite: return "NonFinite";
    case ErrorCode::InvalidSegment: return "InvalidSegment";
    case ErrorCode::NotInTimeScale: return "NotInTimeScale";
    case ErrorCode::StepTooLarge: return "StepTooLarge";
    case ErrorCode::UnknownName: return "UnknownName";
    case ErrorCode::BadParameter: return "BadParameter";
    case ErrorCode::NoValidSamples: return "NoValidSamples";
    case ErrorCode::NonMonotoneTimestamps: return "NonMonotoneTimestamps";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::NotPositiveDefinite: return "NotPositiveDefinite";
    case ErrorCode::EmptyGrid: return "EmptyGrid";
    case ErrorCode::SingularInnovationCovariance: return "SingularInnovationCovariance";
    case ErrorCode::NonPositiveMu: return "NonPositiveMu";
    case ErrorCode::GridTrajectoryMismatch: return "GridTrajectoryMismatch";
    case ErrorCode::NumericDivergence: return "NumericDivergence";
    case ErrorCode::NoSignChange: return "NoSignChange";
    case ErrorCode::TraceScaleMismatch: return "TraceScaleMismatch";
    case ErrorCode::UnsupportedFormat: return "UnsupportedFormat";
    case ErrorCode::ConfigError: return "ConfigError";
    case ErrorCode::IoError: return "IoError";
    case ErrorCode::OracleMismatch: return "OracleMismatch";
  }
  return "Unknown";
}

std::string_view to_string(PointOrigin origin) noexcept {
  switch (origin) {
    case PointOrigin::IntervalSample: return "interval";
    case PointOrigin::DiscretePoint: return "discrete";
    case PointOrigin::IntervalEndpoint: return "endpoint";
  }
  return "discrete";
}

PointOrigin point_origin_from_string(std::string_view text) {
  if (text == "interval") return PointOrigin::IntervalSample;
  if (text == "discrete") return PointOrigin::DiscretePoint;
  if (text == "endpoint") return PointOrigin::IntervalEndpoint;
  throw Error(ErrorCode::BadParameter, fmt::format("unknown grid point origin '{}'", text));
}

namespace {

double segment_min(const TimeSegment& s) {
  if (const auto* iv = std::get_if<Interval>(&s)) return iv->lo;
  return std::get<Points>(s).values.front();
}

double segment_max(const TimeSegment& s) {
  if (const auto* iv = std::get_if<Interval>(&s)) return iv->hi;
  return std::get<Points>(s).values.back();
}

void check_finite(double v) {
  if (!std::isfinite(v)) {
    throw Error(ErrorCode::NonFinite, "time scale bound is not a finite real");
  }
}

std::string format_time(double v) {
  if (v == std::floor(v) && std::abs(v) < 1e15) return fmt::format("{}", static_cast<long long>(v));
  return fmt::format("{}", v);
}

bool is_unit_integer_run(const std::vector<double>& values) {
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (values[i] != std::floor(values[i])) return false;
    if (i > 0 && values[i] - values[i - 1] != 1.0) return false;
  }
  return values.size() >= 2;
}

}  // namespace

TimeScale::TimeScale(std::vector<TimeSegment> segments) : segments_(std::move(segments)) {}

TimeScale TimeScale::canonicalize(std::span<const TimeSegment> segments) {
  if (segments.empty()) throw Error(ErrorCode::EmptyInput, "no time segments given");

  std::vector<Interval> intervals;
  std::vector<double> points;
  for (const auto& seg : segments) {
    if (const auto* iv = std::get_if<Interval>(&seg)) {
      check_finite(iv->lo);
      check_finite(iv->hi);
      if (iv->lo > iv->hi) {
        throw Error(ErrorCode::InvalidSegment,
                    fmt::format("interval [{}, {}] has lo > hi", iv->lo, iv->hi));
      }
      if (iv->hi - iv->lo <= kTimeTolerance) {
        points.push_back(iv->lo);
      } else {
        intervals.push_back(*iv);
      }
    } else {
      const auto& pts = std::get<Points>(seg).values;
      if (pts.empty()) throw Error(ErrorCode::InvalidSegment, "empty point set");
      for (std::size_t i = 0; i < pts.size(); ++i) {
        check_finite(pts[i]);
        if (i > 0 && !(pts[i] > pts[i - 1])) {
          throw Error(ErrorCode::InvalidSegment, "point set is not strictly increasing");
        }
      }
      points.insert(points.end(), pts.begin(), pts.end());
    }
  }

  std::sort(intervals.begin(), intervals.end(),
            [](const Interval& a, const Interval& b) { return a.lo < b.lo; });
  std::vector<Interval> merged;
  for (const auto& iv : intervals) {
    if (!merged.empty() && iv.lo <= merged.back().hi + kTimeTolerance) {
      merged.back().hi = std::max(merged.back().hi, iv.hi);
    } else {
      merged.push_back(iv);
    }
  }

  std::sort(points.begin(), points.end());
  std::vector<double> isolated;
  {
    std::size_t k = 0;
    for (double p : points) {
      while (k < merged.size() && merged[k].hi + kTimeTolerance < p) ++k;
      const bool absorbed = k < merged.size() && merged[k].lo - kTimeTolerance <= p;
      if (absorbed) continue;
      if (!isolated.empty() && p - isolated.back() <= kTimeTolerance) continue;
      isolated.push_back(p);
    }
  }

  // Interleave: every run of isolated points between two intervals is one
  // Points segment.
  std::vector<TimeSegment> out;
  std::size_t pi = 0;
  for (const auto& iv : merged) {
    Points run;
    while (pi < isolated.size() && isolated[pi] < iv.lo) run.values.push_back(isolated[pi++]);
    if (!run.values.empty()) out.emplace_back(std::move(run));
    out.emplace_back(iv);
  }
  if (pi < isolated.size()) {
    out.emplace_back(Points{std::vector<double>(isolated.begin() + static_cast<std::ptrdiff_t>(pi),
                                                isolated.end())});
  }
  return TimeScale(std::move(out));
}

double TimeScale::min_time() const { return segment_min(segments_.front()); }

double TimeScale::max_time() const { return segment_max(segments_.back()); }

double TimeScale::max_graininess() const {
  double best = 0.0;
  for (std::size_t i = 0; i < segments_.size(); ++i) {
    if (const auto* pts = std::get_if<Points>(&segments_[i])) {
      for (std::size_t j = 1; j < pts->values.size(); ++j) {
        best = std::max(best, pts->values[j] - pts->values[j - 1]);
      }
    }
    if (i + 1 < segments_.size()) {
      best = std::max(best, segment_min(segments_[i + 1]) - segment_max(segments_[i]));
    }
  }
  return best;
}

std::size_t TimeScale::segment_of(double t) const {
  // Last segment whose minimum is not beyond t.
  auto it = std::upper_bound(segments_.begin(), segments_.end(), t + kTimeTolerance,
                             [](double v, const TimeSegment& s) { return v < segment_min(s); });
  if (it != segments_.begin()) {
    const auto idx = static_cast<std::size_t>(std::distance(segments_.begin(), it) - 1);
    const auto& seg = segments_[idx];
    if (const auto* iv = std::get_if<Interval>(&seg)) {
      if (t <= iv->hi + kTimeTolerance) return idx;
    } else {
      const auto& v = std::get<Points>(seg).values;
      auto p = std::lower_bound(v.begin(), v.end(), t - kTimeTolerance);
      if (p != v.end() && std::abs(*p - t) <= kTimeTolerance) return idx;
    }
  }
  throw Error(ErrorCode::NotInTimeScale, fmt::format("t = {} is not in the time scale", t));
}

bool TimeScale::contains(double t) const {
  if (!std::isfinite(t)) return false;
  try {
    (void)segment_of(t);
    return true;
  } catch (const Error&) {
    return false;
  }
}

double TimeScale::sigma(double t) const {
  const std::size_t idx = segment_of(t);
  const auto& seg = segments_[idx];
  auto next_segment_start = [&]() {
    return idx + 1 < segments_.size() ? segment_min(segments_[idx + 1]) : segment_max(seg);
  };
  if (const auto* iv = std::get_if<Interval>(&seg)) {
    if (t < iv->hi - kTimeTolerance) return t;
    return next_segment_start();
  }
  const auto& v = std::get<Points>(seg).values;
  auto p = std::lower_bound(v.begin(), v.end(), t - kTimeTolerance);
  if (p + 1 != v.end()) return *(p + 1);
  return next_segment_start();
}

bool TimeScale::right_dense(double t) const {
  const std::size_t idx = segment_of(t);
  // The maximum maps to itself under sigma.
  if (std::abs(t - max_time()) <= kTimeTolerance) return true;
  if (const auto* iv = std::get_if<Interval>(&segments_[idx])) return t < iv->hi - kTimeTolerance;
  return false;
}

std::vector<Jump> TimeScale::jumps() const {
  double base = std::numeric_limits<double>::infinity();
  for (const auto& seg : segments_) {
    if (const auto* pts = std::get_if<Points>(&seg)) {
      for (std::size_t j = 1; j < pts->values.size(); ++j) {
        base = std::min(base, pts->values[j] - pts->values[j - 1]);
      }
    }
  }
  if (!std::isfinite(base)) base = 0.0;

  std::vector<Jump> out;
  auto consider = [&](double from, double to) {
    if (to - from > base + kTimeTolerance) out.push_back({from, to});
  };
  for (std::size_t i = 0; i < segments_.size(); ++i) {
    if (const auto* pts = std::get_if<Points>(&segments_[i])) {
      for (std::size_t j = 1; j < pts->values.size(); ++j) {
        consider(pts->values[j - 1], pts->values[j]);
      }
    }
    if (i + 1 < segments_.size()) consider(segment_max(segments_[i]), segment_min(segments_[i + 1]));
  }
  return out;
}

std::string TimeScale::to_spec() const {
  std::string out = "explicit: [";
  for (std::size_t i = 0; i < segments_.size(); ++i) {
    if (i > 0) out += ", ";
    if (const auto* iv = std::get_if<Interval>(&segments_[i])) {
      out += fmt::format("[{}, {}]", format_time(iv->lo), format_time(iv->hi));
      continue;
    }
    const auto& v = std::get<Points>(segments_[i]).values;
    if (is_unit_integer_run(v)) {
      out += fmt::format("{{{}..{}}}", format_time(v.front()), format_time(v.back()));
    } else {
      out += "{";
      for (std::size_t j = 0; j < v.size(); ++j) {
        if (j > 0) out += ", ";
        out += format_time(v[j]);
      }
      out += "}";
    }
  }
  out += "]";
  return out;
}

std::vector<GridPoint> sample_grid(const TimeScale& ts, SamplingPolicy policy) {
  if (!(policy.h > 0.0) || !std::isfinite(policy.h)) {
    throw Error(ErrorCode::BadParameter, "sampling step h must be a positive finite number");
  }
  const auto& segs = ts.segments();
  for (const auto& seg : segs) {
    if (const auto* iv = std::get_if<Interval>(&seg)) {
      const double len = iv->hi - iv->lo;
      if (policy.h > len + kTimeTolerance) {
        throw Error(ErrorCode::StepTooLarge,
                    fmt::format("sampling step h = {} exceeds the interval [{}, {}] of length {}",
                                policy.h, iv->lo, iv->hi, len));
      }
    }
  }

  std::vector<GridPoint> grid;
  for (std::size_t s = 0; s < segs.size(); ++s) {
    if (const auto* iv = std::get_if<Interval>(&segs[s])) {
      const double len = iv->hi - iv->lo;
      // Number of sub-steps; a trailing remainder below the tolerance is
      // folded into the previous step instead of creating a sliver.
      const auto steps = static_cast<std::size_t>(
          std::max(1.0, std::ceil(len / policy.h - kTimeTolerance / policy.h)));
      grid.push_back({iv->lo, std::nullopt, PointOrigin::IntervalEndpoint, s});
      for (std::size_t k = 1; k < steps; ++k) {
        grid.push_back({iv->lo + static_cast<double>(k) * policy.h, std::nullopt,
                        PointOrigin::IntervalSample, s});
      }
      grid.push_back({iv->hi, std::nullopt, PointOrigin::IntervalEndpoint, s});
    } else {
      for (double v : std::get<Points>(segs[s]).values) {
        grid.push_back({v, std::nullopt, PointOrigin::DiscretePoint, s});
      }
    }
  }
  for (std::size_t i = 0; i + 1 < grid.size(); ++i) grid[i].mu = grid[i + 1].t - grid[i].t;
  return grid;
}

}  // namespace tskf
