#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <string>

#include <fmt/format.h>

#include "tskf/error.hpp"
#include "tskf/timescale.hpp"

namespace tskf {

TimeScale extract_from_measurements(std::span<const ValiditySample> samples, ExtractionParams params) {
  if (params.min_continuous_run < 1) {
    throw Error(ErrorCode::BadParameter, "min_continuous_run must be at least 1");
  }
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (!std::isfinite(samples[i].t)) throw Error(ErrorCode::NonFinite, "sample time is not finite");
    if (i > 0 && !(samples[i].t > samples[i - 1].t)) {
      throw Error(ErrorCode::NonMonotoneTimestamps,
                  fmt::format("sample {} at t = {} does not follow t = {}", i, samples[i].t,
                              samples[i - 1].t));
    }
  }

  std::vector<TimeSegment> segs;
  std::size_t i = 0;
  while (i < samples.size()) {
    if (!samples[i].valid) {
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j < samples.size() && samples[j].valid) ++j;
    const std::size_t run = j - i;
    if (run >= params.min_continuous_run) {
      segs.emplace_back(Interval{samples[i].t, samples[j - 1].t});
    } else {
      Points p;
      for (std::size_t k = i; k < j; ++k) p.values.push_back(samples[k].t);
      segs.emplace_back(std::move(p));
    }
    i = j;
  }
  if (segs.empty()) throw Error(ErrorCode::NoValidSamples, "no valid samples in the series");
  return TimeScale::canonicalize(segs);
}

namespace {

std::string trim(std::string s) {
  auto not_space = [](unsigned char c) { return !std::isspace(c); };
  s.erase(s.begin(), std::find_if(s.begin(), s.end(), not_space));
  s.erase(std::find_if(s.rbegin(), s.rend(), not_space).base(), s.end());
  return s;
}

bool parse_validity(const std::string& field, std::size_t line) {
  std::string f;
  for (char c : field) f.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  if (f == "1" || f == "true" || f == "yes") return true;
  if (f == "0" || f == "false" || f == "no") return false;
  throw Error(ErrorCode::IoError, fmt::format("line {}: cannot read validity flag '{}'", line, field));
}

}  // namespace

std::vector<ValiditySample> read_validity_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, fmt::format("cannot open '{}'", path.string()));
  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorCode::IoError, "validity CSV is empty");
  if (trim(line) != "t,valid") {
    throw Error(ErrorCode::IoError, fmt::format("expected header 't,valid', got '{}'", trim(line)));
  }
  std::vector<ValiditySample> out;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    line = trim(line);
    if (line.empty()) continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos) {
      throw Error(ErrorCode::IoError, fmt::format("line {}: expected two columns", lineno));
    }
    const std::string tfield = trim(line.substr(0, comma));
    double t = 0.0;
    auto [ptr, ec] = std::from_chars(tfield.data(), tfield.data() + tfield.size(), t);
    if (ec != std::errc() || ptr != tfield.data() + tfield.size()) {
      throw Error(ErrorCode::IoError, fmt::format("line {}: bad time '{}'", lineno, tfield));
    }
    out.push_back({t, parse_validity(trim(line.substr(comma + 1)), lineno)});
  }
  return out;
}

}  // namespace tskf
