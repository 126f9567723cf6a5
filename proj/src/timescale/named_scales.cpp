#include <cctype>
#include <charconv>
#include <cmath>
#include <map>
#include <string>

#include <fmt/format.h>

#include "tskf/error.hpp"
#include "tskf/timescale.hpp"

namespace tskf {

namespace {

void require_positive(double v, const char* what) {
  if (!(v > 0.0) || !std::isfinite(v)) {
    throw Error(ErrorCode::BadParameter, fmt::format("{} must be positive, got {}", what, v));
  }
}

Points integer_run(int first, int last) {
  Points p;
  for (int k = first; k <= last; ++k) p.values.push_back(k);
  return p;
}

}  // namespace

TimeScale uniform_lattice(double spacing, double t_end) {
  require_positive(spacing, "lattice spacing c");
  require_positive(t_end, "lattice end");
  Points p;
  for (long k = 0;; ++k) {
    const double t = static_cast<double>(k) * spacing;
    if (t > t_end + kTimeTolerance) break;
    p.values.push_back(t);
  }
  const TimeSegment seg = std::move(p);
  return TimeScale::canonicalize({&seg, 1});
}

TimeScale harmonic(int n_max) {
  if (n_max < 1) throw Error(ErrorCode::BadParameter, "harmonic scale needs n >= 1");
  Points p;
  double h = 0.0;
  p.values.push_back(h);
  for (int k = 1; k <= n_max; ++k) {
    h += 1.0 / k;
    p.values.push_back(h);
  }
  const TimeSegment seg = std::move(p);
  return TimeScale::canonicalize({&seg, 1});
}

TimeScale p_ab(double a, double b, int k_max) {
  require_positive(a, "interval length a");
  require_positive(b, "gap length b");
  if (k_max < 0) throw Error(ErrorCode::BadParameter, "pab needs k >= 0");
  std::vector<TimeSegment> segs;
  for (int k = 0; k <= k_max; ++k) {
    const double lo = k * (a + b);
    segs.emplace_back(Interval{lo, lo + a});
  }
  return TimeScale::canonicalize(segs);
}

TimeScale hybrid_t3(double t_end) {
  require_positive(t_end, "hybrid end");
  constexpr double kSwitch = 8.0;
  Points p;
  for (int k = 0; 2.0 * k <= std::min(t_end, kSwitch) + kTimeTolerance; ++k) p.values.push_back(2.0 * k);
  double h = 0.0;
  for (int k = 1;; ++k) {
    h += 1.0 / k;
    if (kSwitch + h > t_end + kTimeTolerance) break;
    p.values.push_back(kSwitch + h);
  }
  const TimeSegment seg = std::move(p);
  return TimeScale::canonicalize({&seg, 1});
}

TimeScale td_timescale() {
  // Recorded at 1 Hz over [1, 300]. Open interval ends in the recording
  // notation mark piece boundaries, so every piece is stored closed.
  const std::vector<TimeSegment> pieces = {
      Interval{1, 15},    integer_run(15, 21),   Interval{21, 30},   Interval{32, 62},
      integer_run(62, 67), Interval{67, 75},     integer_run(75, 81), Interval{81, 83},
      integer_run(83, 86), Interval{86, 126},    Interval{128, 131}, integer_run(135, 154),
      Interval{154, 173}, integer_run(173, 204), Interval{204, 209}, Interval{212, 218},
      integer_run(224, 238), Interval{238, 273}, integer_run(273, 285), Interval{285, 300},
  };
  return TimeScale::canonicalize(pieces);
}

// ---------------------------------------------------------------------------
// Scale-spec grammar

namespace {

class SpecParser {
 public:
  explicit SpecParser(std::string_view text) : text_(text) {}

  TimeScale parse() {
    skip_ws();
    const std::string name = identifier();
    skip_ws();
    TimeScale ts = dispatch(name);
    skip_ws();
    if (pos_ != text_.size()) fail("trailing characters");
    return ts;
  }

 private:
  TimeScale dispatch(const std::string& name) {
    if (name == "td") {
      return td_timescale();
    }
    if (name == "explicit") {
      expect(':');
      return parse_explicit();
    }
    if (name != "uniform" && name != "harmonic" && name != "pab" && name != "hybrid_t3") {
      throw Error(ErrorCode::UnknownName, fmt::format("unknown time scale '{}'", name));
    }
    const auto args = arguments();
    auto get = [&](const char* key) {
      auto it = args.find(key);
      if (it == args.end()) fail(fmt::format("missing argument '{}' for {}", key, name));
      return it->second;
    };
    auto check_keys = [&](std::initializer_list<const char*> allowed) {
      for (const auto& [k, v] : args) {
        bool ok = false;
        for (const char* a : allowed) ok = ok || k == a;
        if (!ok) fail(fmt::format("unknown argument '{}' for {}", k, name));
      }
    };
    if (name == "uniform") {
      check_keys({"c", "end"});
      return uniform_lattice(get("c"), get("end"));
    }
    if (name == "harmonic") {
      check_keys({"n"});
      return harmonic(as_int(get("n"), "n"));
    }
    if (name == "pab") {
      check_keys({"a", "b", "k"});
      return p_ab(get("a"), get("b"), as_int(get("k"), "k"));
    }
    if (name == "hybrid_t3") {
      check_keys({"end"});
      return hybrid_t3(get("end"));
    }
    throw Error(ErrorCode::UnknownName, fmt::format("unknown time scale '{}'", name));
  }

  std::map<std::string, double> arguments() {
    std::map<std::string, double> out;
    expect('(');
    skip_ws();
    if (peek() == ')') {
      ++pos_;
      return out;
    }
    for (;;) {
      skip_ws();
      std::string key = identifier();
      skip_ws();
      expect('=');
      skip_ws();
      out[key] = number();
      skip_ws();
      if (peek() == ',') {
        ++pos_;
        continue;
      }
      expect(')');
      return out;
    }
  }

  TimeScale parse_explicit() {
    skip_ws();
    expect('[');
    std::vector<TimeSegment> segs;
    skip_ws();
    while (peek() != ']') {
      skip_ws();
      if (peek() == '[') {
        ++pos_;
        skip_ws();
        const double lo = number();
        skip_ws();
        expect(',');
        skip_ws();
        const double hi = number();
        skip_ws();
        expect(']');
        segs.emplace_back(Interval{lo, hi});
      } else if (peek() == '{') {
        ++pos_;
        skip_ws();
        Points p;
        const double first = number();
        skip_ws();
        if (text_.substr(pos_, 2) == "..") {
          pos_ += 2;
          skip_ws();
          const double last = number();
          if (first != std::floor(first) || last != std::floor(last) || last < first) {
            fail("range {a..b} needs integers with a <= b");
          }
          for (double v = first; v <= last; v += 1.0) p.values.push_back(v);
          skip_ws();
        } else {
          p.values.push_back(first);
          while (peek() == ',') {
            ++pos_;
            skip_ws();
            p.values.push_back(number());
            skip_ws();
          }
        }
        expect('}');
        segs.emplace_back(std::move(p));
      } else {
        fail("expected '[' or '{'");
      }
      skip_ws();
      if (peek() == ',') ++pos_;
      skip_ws();
    }
    expect(']');
    return TimeScale::canonicalize(segs);
  }

  std::string identifier() {
    const std::size_t start = pos_;
    while (pos_ < text_.size() &&
           (std::isalnum(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '_')) {
      ++pos_;
    }
    if (start == pos_) fail("expected a name");
    return std::string(text_.substr(start, pos_ - start));
  }

  double number() {
    const char* begin = text_.data() + pos_;
    const char* end = text_.data() + text_.size();
    // from_chars rejects a leading '+'.
    if (begin != end && *begin == '+') {
      ++begin;
      ++pos_;
    }
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(begin, end, v);
    if (ec != std::errc() || ptr == begin) fail("expected a number");
    // from_chars stops before a ".." range marker only if the number has no
    // fractional part, e.g. "15..21" parses "15." as 15; step back.
    if (ptr - begin >= 1 && *(ptr - 1) == '.' && ptr < end && *ptr == '.') --ptr;
    pos_ += static_cast<std::size_t>(ptr - begin);
    return v;
  }

  int as_int(double v, const char* key) {
    if (v != std::floor(v) || std::abs(v) > 1e9) fail(fmt::format("argument '{}' must be an integer", key));
    return static_cast<int>(v);
  }

  char peek() const { return pos_ < text_.size() ? text_[pos_] : '\0'; }

  void expect(char c) {
    if (peek() != c) fail(fmt::format("expected '{}'", c));
    ++pos_;
  }

  void skip_ws() {
    while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
  }

  [[noreturn]] void fail(const std::string& what) const {
    throw Error(ErrorCode::BadParameter,
                fmt::format("scale spec '{}': {} at offset {}", text_, what, pos_));
  }

  std::string_view text_;
  std::size_t pos_ = 0;
};

}  // namespace

TimeScale build_named_timescale(std::string_view spec) { return SpecParser(spec).parse(); }

}  // namespace tskf
