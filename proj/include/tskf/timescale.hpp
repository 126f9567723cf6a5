#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace tskf {

// Absolute tolerance, in seconds, for membership and coincidence tests.
inline constexpr double kTimeTolerance = 1e-9;

// Closed interval [lo, hi].
struct Interval {
  double lo = 0.0;
  double hi = 0.0;

  friend bool operator==(const Interval&, const Interval&) = default;
};

// Finite, strictly increasing set of isolated instants.
struct Points {
  std::vector<double> values;

  friend bool operator==(const Points&, const Points&) = default;
};

using TimeSegment = std::variant<Interval, Points>;

// A gap in the time scale that is longer than its native discrete spacing.
struct Jump {
  double from = 0.0;
  double to = 0.0;

  double length() const { return to - from; }
};

// A time scale stored as a finite union of closed intervals and isolated
// points, kept in canonical form:
//   - segments sorted ascending and pairwise disjoint;
//   - intervals are nondegenerate and never touch each other;
//   - every isolated point lies strictly between intervals, and all isolated
//     points inside one gap between intervals form a single Points segment.
// Two sets that are equal as subsets of the reals have identical segments.
class TimeScale {
 public:
  // Builds the canonical form. Throws EmptyInput, NonFinite or InvalidSegment.
  static TimeScale canonicalize(std::span<const TimeSegment> segments);

  const std::vector<TimeSegment>& segments() const { return segments_; }

  double min_time() const;
  double max_time() const;
  // sup of mu over [min_time, max_time).
  double max_graininess() const;

  bool contains(double t) const;
  bool right_dense(double t) const;

  // Forward jump operator. At max_time the point maps to itself.
  double sigma(double t) const;
  double graininess(double t) const { return sigma(t) - t; }

  // Index of the segment holding t. Throws NotInTimeScale.
  std::size_t segment_of(double t) const;

  // Gaps exceeding the base discrete spacing of the scale: the smallest gap
  // between two consecutive isolated points, or zero when no two isolated
  // points are adjacent. Gaps inside an evenly spaced run are therefore not
  // jumps, while every gap between two intervals is.
  std::vector<Jump> jumps() const;

  // Serializes into the `explicit: [...]` scale-spec form.
  std::string to_spec() const;

  friend bool operator==(const TimeScale&, const TimeScale&) = default;

 private:
  explicit TimeScale(std::vector<TimeSegment> segments);

  std::vector<TimeSegment> segments_;
};

enum class PointOrigin { IntervalSample, DiscretePoint, IntervalEndpoint };

std::string_view to_string(PointOrigin origin) noexcept;
PointOrigin point_origin_from_string(std::string_view text);

struct GridPoint {
  double t = 0.0;
  // Gap to the next grid point; empty on the final point.
  std::optional<double> mu;
  PointOrigin origin = PointOrigin::DiscretePoint;
  std::size_t segment = 0;
};

struct SamplingPolicy {
  double h = 0.05;
};

// Materializes a finite evaluation grid. Interval interiors are sampled at
// step h with the last sub-step shortened so the right endpoint is hit.
// Throws BadParameter for h <= 0 and StepTooLarge when h exceeds the shortest
// interval.
std::vector<GridPoint> sample_grid(const TimeScale& ts, SamplingPolicy policy);

// Named scales.
TimeScale uniform_lattice(double spacing, double t_end);
TimeScale harmonic(int n_max);
TimeScale p_ab(double a, double b, int k_max);
// cZ lattice with spacing 2 on [0, 8], then 8 + H_n for 8 + H_n <= t_end.
TimeScale hybrid_t3(double t_end);
// Time scale recovered from the intermittent optical link recording.
TimeScale td_timescale();

// Parses the scale-spec grammar:
//   uniform(c=2, end=40) | harmonic(n=200) | pab(a=1, b=2, k=10)
//   | hybrid_t3(end=20) | td | explicit: [[1,15], {16..20}, {3, 4.5}]
TimeScale build_named_timescale(std::string_view spec);

struct ValiditySample {
  double t = 0.0;
  bool valid = false;
};

struct ExtractionParams {
  // Valid runs with at least this many samples become intervals.
  std::size_t min_continuous_run = 3;
};

TimeScale extract_from_measurements(std::span<const ValiditySample> samples,
                                    ExtractionParams params = {});

// Reads a two-column `t,valid` CSV with header.
std::vector<ValiditySample> read_validity_csv(const std::filesystem::path& path);

}  // namespace tskf
