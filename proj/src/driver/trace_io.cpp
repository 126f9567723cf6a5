#include <charconv>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>

#include <fmt/format.h>

#include "tskf/driver.hpp"
#include "tskf/error.hpp"

namespace tskf {

namespace {

void put(std::string& line, double v) {
  line += ',';
  fmt::format_to(std::back_inserter(line), "{:.17g}", v);
}

void put_vector(std::string& line, const Vector& v) {
  for (Eigen::Index i = 0; i < v.size(); ++i) put(line, v(i));
}

void put_matrix(std::string& line, const Matrix& m, Eigen::Index rows, Eigen::Index cols) {
  if (m.size() == 0) {
    for (Eigen::Index i = 0; i < rows * cols; ++i) line += ',';
    return;
  }
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) put(line, m(i, j));
  }
}

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    out.push_back(line.substr(start, comma == std::string::npos ? std::string::npos : comma - start));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return out;
}

double parse_double(const std::string& text, std::size_t row, const std::string& column) {
  double v = 0.0;
  const auto* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, v);
  if (ec != std::errc() || ptr != end) {
    throw Error(ErrorCode::UnsupportedFormat,
                fmt::format("row {}, column {}: '{}' is not a number", row, column, text));
  }
  return v;
}

}  // namespace

void write_trace_csv(std::ostream& out, const FilterTrace& trace) {
  if (trace.records.empty()) throw Error(ErrorCode::EmptyInput, "trace has no records");
  const auto& first = trace.records.front();
  const Eigen::Index n = first.x_hat.size();
  const Eigen::Index p = first.y.size();

  std::string line = "t,mu,segment,origin";
  for (Eigen::Index i = 0; i < p; ++i) line += fmt::format(",y_{}", i);
  for (Eigen::Index i = 0; i < n; ++i) line += fmt::format(",x_hat_{}", i);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) line += fmt::format(",P_{}_{}", i, j);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < p; ++j) line += fmt::format(",K_{}_{}", i, j);
  for (Eigen::Index i = 0; i < p; ++i) line += fmt::format(",innovation_{}", i);
  for (Eigen::Index i = 0; i < n; ++i) line += fmt::format(",est_error_{}", i);
  for (Eigen::Index i = 0; i < p; ++i) line += fmt::format(",meas_error_{}", i);
  line += '\n';
  out << line;

  for (const auto& r : trace.records) {
    line.clear();
    fmt::format_to(std::back_inserter(line), "{:.17g},", r.t);
    if (r.mu) fmt::format_to(std::back_inserter(line), "{:.17g}", *r.mu);
    fmt::format_to(std::back_inserter(line), ",{},{}", r.segment, to_string(r.origin));
    put_vector(line, r.y);
    put_vector(line, r.x_hat);
    put_matrix(line, r.P, n, n);
    put_matrix(line, r.K, n, p);
    put_vector(line, r.innovation);
    put_vector(line, r.est_error);
    put_vector(line, r.meas_error);
    line += '\n';
    out << line;
  }
}

std::string trace_csv(const FilterTrace& trace) {
  std::ostringstream out;
  write_trace_csv(out, trace);
  return out.str();
}

FilterTrace read_trace_csv(std::istream& in) {
  std::string header;
  if (!std::getline(in, header)) throw Error(ErrorCode::UnsupportedFormat, "trace CSV is empty");
  const auto columns = split(header);
  if (columns.size() < 4 || columns[0] != "t" || columns[1] != "mu" || columns[2] != "segment" ||
      columns[3] != "origin") {
    throw Error(ErrorCode::UnsupportedFormat, "trace CSV header must start with t,mu,segment,origin");
  }
  std::map<std::string, std::size_t> count;
  for (std::size_t c = 4; c < columns.size(); ++c) {
    const auto& name = columns[c];
    for (const char* prefix : {"y_", "x_hat_", "P_", "K_", "innovation_", "est_error_", "meas_error_"}) {
      if (name.rfind(prefix, 0) == 0) {
        ++count[prefix];
        break;
      }
    }
  }
  const auto n = static_cast<Eigen::Index>(count["x_hat_"]);
  const auto p = static_cast<Eigen::Index>(count["y_"]);
  const std::size_t expected = 4 + static_cast<std::size_t>(p + n + n * n + n * p + p + n + p);
  if (n == 0 || p == 0 || columns.size() != expected ||
      count["P_"] != static_cast<std::size_t>(n * n) || count["K_"] != static_cast<std::size_t>(n * p)) {
    throw Error(ErrorCode::UnsupportedFormat, "trace CSV header has an unexpected column layout");
  }

  FilterTrace trace;
  std::string line;
  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty()) continue;
    const auto cells = split(line);
    if (cells.size() != columns.size()) {
      throw Error(ErrorCode::UnsupportedFormat,
                  fmt::format("row {} has {} cells, expected {}", row, cells.size(), columns.size()));
    }
    std::size_t c = 0;
    auto next = [&] {
      const std::size_t idx = c++;
      return parse_double(cells[idx], row, columns[idx]);
    };
    auto read_vector = [&](Eigen::Index size) {
      Vector v(size);
      for (Eigen::Index i = 0; i < size; ++i) v(i) = next();
      return v;
    };
    auto read_matrix = [&](Eigen::Index rows, Eigen::Index cols) {
      Matrix m(rows, cols);
      for (Eigen::Index i = 0; i < rows; ++i)
        for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = next();
      return m;
    };
    FilterStepRecord r;
    r.t = next();
    if (cells[c].empty()) {
      ++c;
    } else {
      r.mu = next();
    }
    r.segment = static_cast<std::size_t>(next());
    try {
      r.origin = point_origin_from_string(cells[c++]);
    } catch (const Error& e) {
      throw Error(ErrorCode::UnsupportedFormat, fmt::format("row {}: {}", row, e.what()));
    }
    r.y = read_vector(p);
    r.x_hat = read_vector(n);
    r.P = read_matrix(n, n);
    if (cells[c].empty()) {
      c += static_cast<std::size_t>(n * p);
    } else {
      r.K = read_matrix(n, p);
    }
    r.innovation = read_vector(p);
    r.est_error = read_vector(n);
    r.meas_error = read_vector(p);
    trace.records.push_back(std::move(r));
  }
  if (trace.records.empty()) throw Error(ErrorCode::UnsupportedFormat, "trace CSV has no rows");
  return trace;
}

FilterTrace read_trace_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, fmt::format("cannot open '{}'", path.string()));
  return read_trace_csv(in);
}

TimeScale timescale_from_trace(const FilterTrace& trace) {
  if (trace.records.empty()) throw Error(ErrorCode::EmptyInput, "trace has no records");
  std::vector<TimeSegment> pieces;
  std::map<std::size_t, Interval> intervals;
  std::vector<double> points;
  for (const auto& r : trace.records) {
    if (r.origin == PointOrigin::DiscretePoint) {
      points.push_back(r.t);
      continue;
    }
    auto [it, inserted] = intervals.try_emplace(r.segment, Interval{r.t, r.t});
    if (!inserted) {
      it->second.lo = std::min(it->second.lo, r.t);
      it->second.hi = std::max(it->second.hi, r.t);
    }
  }
  for (const auto& [seg, iv] : intervals) pieces.emplace_back(iv);
  if (!points.empty()) pieces.emplace_back(Points{points});
  return TimeScale::canonicalize(pieces);
}

}  // namespace tskf
