#include "tskf/config.hpp"

#include <cstdlib>
#include <fstream>
#include <sstream>

#include <fmt/format.h>

#include "tskf/error.hpp"
#include "tskf/owc.hpp"

namespace tskf {

using json = nlohmann::json;

std::string_view to_string(PlotMode mode) noexcept {
  return mode == PlotMode::Iteration ? "iteration" : "timescale";
}

std::string_view to_string(PlotFormat format) noexcept {
  return format == PlotFormat::Svg ? "svg" : "data";
}

PlotMode plot_mode_from_string(std::string_view text) {
  if (text == "iteration") return PlotMode::Iteration;
  if (text == "timescale") return PlotMode::TimeScale;
  throw Error(ErrorCode::UnsupportedFormat, fmt::format("unknown plot mode '{}'", text));
}

PlotFormat plot_format_from_string(std::string_view text) {
  if (text == "svg") return PlotFormat::Svg;
  if (text == "data") return PlotFormat::Data;
  throw Error(ErrorCode::UnsupportedFormat, fmt::format("unknown plot format '{}'", text));
}

namespace {

[[noreturn]] void config_error(const std::string& field, const std::string& what) {
  throw Error(ErrorCode::ConfigError, fmt::format("{}: {}", field, what));
}

std::string_view to_string(NoiseScaling s) { return s == NoiseScaling::SqrtMu ? "sqrt_mu" : "per_step"; }

std::string_view to_string(BoundaryMode b) {
  switch (b) {
    case BoundaryMode::Reflect: return "reflect";
    case BoundaryMode::Clamp: return "clamp";
    case BoundaryMode::Free: break;
  }
  return "free";
}

json matrix_to_json(const Matrix& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

json vector_to_json(const Vector& v) {
  json out = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v(i));
  return out;
}

double number_at(const json& j, const std::string& field) {
  if (!j.is_number()) config_error(field, "expected a number");
  return j.get<double>();
}

// Scalar is promoted to 1x1; otherwise a non-ragged array of arrays.
Matrix matrix_from_json(const json& j, const std::string& field) {
  if (j.is_number()) return Matrix::Constant(1, 1, j.get<double>());
  if (!j.is_array() || j.empty()) config_error(field, "expected a number or a nested array");
  const auto rows = static_cast<Eigen::Index>(j.size());
  if (!j[0].is_array()) config_error(field, "expected rows as arrays, e.g. [[1, 0], [0, 1]]");
  const auto cols = static_cast<Eigen::Index>(j[0].size());
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    const json& row = j[static_cast<std::size_t>(i)];
    if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != cols) {
      config_error(field, fmt::format("row {} has a different length", i));
    }
    for (Eigen::Index k = 0; k < cols; ++k) {
      m(i, k) = number_at(row[static_cast<std::size_t>(k)], fmt::format("{}[{}][{}]", field, i, k));
    }
  }
  return m;
}

Vector vector_from_json(const json& j, const std::string& field) {
  if (j.is_number()) return Vector::Constant(1, j.get<double>());
  if (!j.is_array()) config_error(field, "expected a number or an array");
  Vector v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) v(static_cast<Eigen::Index>(i)) = number_at(j[i], fmt::format("{}[{}]", field, i));
  return v;
}

void reject_unknown(const json& obj, const std::string& block,
                    std::initializer_list<std::string_view> allowed) {
  if (!obj.is_object()) config_error(block, "expected an object");
  for (const auto& [key, value] : obj.items()) {
    bool ok = false;
    for (auto a : allowed) ok = ok || key == a;
    if (!ok) config_error(block.empty() ? key : block + "." + key, "unknown key");
  }
}

const json* find(const json& obj, const char* key) {
  auto it = obj.find(key);
  return it == obj.end() ? nullptr : &*it;
}

bool matrices_equal(const Matrix& a, const Matrix& b) {
  return a.rows() == b.rows() && a.cols() == b.cols() && (a.size() == 0 || a == b);
}

bool vectors_equal(const Vector& a, const Vector& b) {
  return a.size() == b.size() && (a.size() == 0 || a == b);
}

}  // namespace

json ScenarioConfig::to_json() const {
  const auto& m = model.model;
  json j;
  j["name"] = name;
  j["model"] = {
      {"A", matrix_to_json(m.A)},   {"B", matrix_to_json(m.B)},   {"C", matrix_to_json(m.C)},
      {"D", vector_to_json(m.D)},   {"G", matrix_to_json(m.G)},   {"Q", matrix_to_json(m.Q)},
      {"R", matrix_to_json(m.R)},   {"x0", vector_to_json(m.x0_mean)},
      {"P0", matrix_to_json(m.P0)}, {"u", vector_to_json(model.u)},
  };
  j["timescale"] = {{"spec", timescale.spec},
                    {"validity_csv", timescale.validity_csv},
                    {"min_continuous_run", timescale.min_continuous_run}};
  json bounds = json::array();
  for (const auto& [lo, hi] : sampling.truth_bounds) bounds.push_back({lo, hi});
  j["sampling"] = {{"h", sampling.h},
                   {"noise_scaling", to_string(sampling.noise_scaling)},
                   {"truth_boundary", to_string(sampling.truth_boundary)},
                   {"truth_bounds", bounds},
                   {"random_init", sampling.random_init},
                   {"clamp_mu", sampling.clamp_mu ? json(*sampling.clamp_mu) : json(nullptr)}};
  j["run"] = {{"seed", run.seed}, {"replicates", run.replicates}, {"threads", run.threads}};
  json formats = json::array();
  for (auto f : output.formats) formats.push_back(to_string(f));
  json modes = json::array();
  for (auto m2 : output.plot_modes) modes.push_back(to_string(m2));
  j["output"] = {{"directory", output.directory}, {"formats", formats}, {"plot_modes", modes}};
  j["analysis"] = {{"spike_factor", analysis.spike_factor}, {"component", analysis.component}};
  return j;
}

ScenarioConfig ScenarioConfig::from_json(const json& j, const std::filesystem::path& base_dir) {
  reject_unknown(j, "", {"name", "model", "timescale", "sampling", "run", "output", "analysis"});
  ScenarioConfig cfg;
  cfg.base_dir = base_dir;
  if (const json* v = find(j, "name")) {
    if (!v->is_string()) config_error("name", "expected a string");
    cfg.name = v->get<std::string>();
  }

  const json* mj = find(j, "model");
  if (!mj) config_error("model", "block is required");
  reject_unknown(*mj, "model", {"A", "B", "C", "D", "G", "Q", "R", "x0", "P0", "u"});
  auto& m = cfg.model.model;
  auto required = [&](const char* key) -> const json& {
    const json* v = find(*mj, key);
    if (!v) config_error(fmt::format("model.{}", key), "is required");
    return *v;
  };
  m.A = matrix_from_json(required("A"), "model.A");
  m.C = matrix_from_json(required("C"), "model.C");
  m.G = matrix_from_json(required("G"), "model.G");
  m.Q = matrix_from_json(required("Q"), "model.Q");
  m.R = matrix_from_json(required("R"), "model.R");
  m.x0_mean = vector_from_json(required("x0"), "model.x0");
  m.P0 = matrix_from_json(required("P0"), "model.P0");
  const Eigen::Index n = m.A.rows();
  m.B = find(*mj, "B") ? matrix_from_json(*find(*mj, "B"), "model.B") : Matrix::Zero(n, 1);
  m.D = find(*mj, "D") ? vector_from_json(*find(*mj, "D"), "model.D") : Vector::Zero(m.C.rows());
  if (const json* u = find(*mj, "u")) cfg.model.u = vector_from_json(*u, "model.u");
  try {
    m.validate();
  } catch (const Error& e) {
    config_error("model", e.what());
  }
  if (cfg.model.u.size() != 0 && cfg.model.u.size() != m.input_dim()) {
    config_error("model.u", fmt::format("length {} does not match B with {} columns",
                                        cfg.model.u.size(), m.input_dim()));
  }

  if (const json* tj = find(j, "timescale")) {
    reject_unknown(*tj, "timescale", {"spec", "validity_csv", "min_continuous_run"});
    if (const json* v = find(*tj, "spec")) {
      if (!v->is_string()) config_error("timescale.spec", "expected a string");
      cfg.timescale.spec = v->get<std::string>();
    }
    if (const json* v = find(*tj, "validity_csv")) {
      if (!v->is_string()) config_error("timescale.validity_csv", "expected a string");
      cfg.timescale.validity_csv = v->get<std::string>();
    }
    if (const json* v = find(*tj, "min_continuous_run")) {
      if (!v->is_number_unsigned() || v->get<std::size_t>() < 1) {
        config_error("timescale.min_continuous_run", "expected a positive integer");
      }
      cfg.timescale.min_continuous_run = v->get<std::size_t>();
    }
  }
  if (cfg.timescale.validity_csv.empty()) {
    try {
      (void)build_named_timescale(cfg.timescale.spec);
    } catch (const Error& e) {
      config_error("timescale.spec", e.what());
    }
  }

  if (const json* sj = find(j, "sampling")) {
    reject_unknown(*sj, "sampling",
                   {"h", "noise_scaling", "truth_boundary", "truth_bounds", "random_init", "clamp_mu"});
    if (const json* v = find(*sj, "h")) cfg.sampling.h = number_at(*v, "sampling.h");
    if (const json* v = find(*sj, "noise_scaling")) {
      const std::string s = v->is_string() ? v->get<std::string>() : "";
      if (s == "per_step") cfg.sampling.noise_scaling = NoiseScaling::PerStep;
      else if (s == "sqrt_mu") cfg.sampling.noise_scaling = NoiseScaling::SqrtMu;
      else config_error("sampling.noise_scaling", "expected \"per_step\" or \"sqrt_mu\"");
    }
    if (const json* v = find(*sj, "truth_boundary")) {
      const std::string s = v->is_string() ? v->get<std::string>() : "";
      if (s == "free") cfg.sampling.truth_boundary = BoundaryMode::Free;
      else if (s == "reflect") cfg.sampling.truth_boundary = BoundaryMode::Reflect;
      else if (s == "clamp") cfg.sampling.truth_boundary = BoundaryMode::Clamp;
      else config_error("sampling.truth_boundary", "expected \"free\", \"reflect\" or \"clamp\"");
    }
    if (const json* v = find(*sj, "truth_bounds")) {
      if (!v->is_array()) config_error("sampling.truth_bounds", "expected [[lo, hi], ...]");
      for (std::size_t i = 0; i < v->size(); ++i) {
        const json& pair = (*v)[i];
        const std::string field = fmt::format("sampling.truth_bounds[{}]", i);
        if (!pair.is_array() || pair.size() != 2) config_error(field, "expected [lo, hi]");
        const double lo = number_at(pair[0], field);
        const double hi = number_at(pair[1], field);
        if (!(lo < hi)) config_error(field, "needs lo < hi");
        cfg.sampling.truth_bounds.emplace_back(lo, hi);
      }
    }
    if (const json* v = find(*sj, "random_init")) {
      if (!v->is_boolean()) config_error("sampling.random_init", "expected true or false");
      cfg.sampling.random_init = v->get<bool>();
    }
    if (const json* v = find(*sj, "clamp_mu"); v && !v->is_null()) {
      cfg.sampling.clamp_mu = number_at(*v, "sampling.clamp_mu");
      if (!(*cfg.sampling.clamp_mu > 0.0)) config_error("sampling.clamp_mu", "must be positive");
    }
  }
  if (!(cfg.sampling.h > 0.0)) config_error("sampling.h", "must be positive");
  if (cfg.sampling.truth_boundary != BoundaryMode::Free &&
      static_cast<Eigen::Index>(cfg.sampling.truth_bounds.size()) != n) {
    config_error("sampling.truth_bounds",
                 fmt::format("needs one [lo, hi] pair per state component ({})", n));
  }

  if (const json* rj = find(j, "run")) {
    reject_unknown(*rj, "run", {"seed", "replicates", "threads"});
    if (const json* v = find(*rj, "seed")) {
      if (!v->is_number_unsigned()) config_error("run.seed", "expected a non-negative integer");
      cfg.run.seed = v->get<std::uint64_t>();
    }
    if (const json* v = find(*rj, "replicates")) {
      if (!v->is_number_unsigned() || v->get<std::uint64_t>() < 1 ||
          v->get<std::uint64_t>() > 1000000) {
        config_error("run.replicates", "expected an integer in [1, 1000000]");
      }
      cfg.run.replicates = v->get<std::uint32_t>();
    }
    if (const json* v = find(*rj, "threads")) {
      if (!v->is_number_unsigned()) config_error("run.threads", "expected a non-negative integer");
      cfg.run.threads = v->get<std::uint32_t>();
    }
  }

  if (const json* oj = find(j, "output")) {
    reject_unknown(*oj, "output", {"directory", "formats", "plot_modes"});
    if (const json* v = find(*oj, "directory")) {
      if (!v->is_string()) config_error("output.directory", "expected a string");
      cfg.output.directory = v->get<std::string>();
    }
    auto string_list = [&](const json& arr, const char* field, auto convert) {
      if (!arr.is_array()) config_error(field, "expected an array of strings");
      using T = decltype(convert(std::string_view{}));
      std::vector<T> out;
      for (const auto& item : arr) {
        if (!item.is_string()) config_error(field, "expected an array of strings");
        try {
          out.push_back(convert(item.get<std::string>()));
        } catch (const Error& e) {
          config_error(field, e.what());
        }
      }
      return out;
    };
    if (const json* v = find(*oj, "formats")) {
      cfg.output.formats = string_list(*v, "output.formats", plot_format_from_string);
    }
    if (const json* v = find(*oj, "plot_modes")) {
      cfg.output.plot_modes = string_list(*v, "output.plot_modes", plot_mode_from_string);
    }
  }

  if (const json* aj = find(j, "analysis")) {
    reject_unknown(*aj, "analysis", {"spike_factor", "component"});
    if (const json* v = find(*aj, "spike_factor")) {
      cfg.analysis.spike_factor = number_at(*v, "analysis.spike_factor");
    }
    if (const json* v = find(*aj, "component")) {
      if (!v->is_number_unsigned()) config_error("analysis.component", "expected a non-negative integer");
      cfg.analysis.component = v->get<std::size_t>();
    }
  }
  if (!(cfg.analysis.spike_factor > 1.0)) config_error("analysis.spike_factor", "must exceed 1");
  if (static_cast<Eigen::Index>(cfg.analysis.component) >= n) {
    config_error("analysis.component", fmt::format("must be below the state dimension {}", n));
  }
  return cfg;
}

bool operator==(const ScenarioConfig& a, const ScenarioConfig& b) {
  const auto& ma = a.model.model;
  const auto& mb = b.model.model;
  return a.name == b.name && matrices_equal(ma.A, mb.A) && matrices_equal(ma.B, mb.B) &&
         matrices_equal(ma.C, mb.C) && vectors_equal(ma.D, mb.D) && matrices_equal(ma.G, mb.G) &&
         matrices_equal(ma.Q, mb.Q) && matrices_equal(ma.R, mb.R) &&
         vectors_equal(ma.x0_mean, mb.x0_mean) && matrices_equal(ma.P0, mb.P0) &&
         vectors_equal(a.model.u, b.model.u) && a.timescale.spec == b.timescale.spec &&
         a.timescale.validity_csv == b.timescale.validity_csv &&
         a.timescale.min_continuous_run == b.timescale.min_continuous_run &&
         a.sampling.h == b.sampling.h && a.sampling.noise_scaling == b.sampling.noise_scaling &&
         a.sampling.truth_boundary == b.sampling.truth_boundary &&
         a.sampling.truth_bounds == b.sampling.truth_bounds &&
         a.sampling.random_init == b.sampling.random_init &&
         a.sampling.clamp_mu == b.sampling.clamp_mu && a.run.seed == b.run.seed &&
         a.run.replicates == b.run.replicates && a.run.threads == b.run.threads &&
         a.output.directory == b.output.directory && a.output.formats == b.output.formats &&
         a.output.plot_modes == b.output.plot_modes &&
         a.analysis.spike_factor == b.analysis.spike_factor &&
         a.analysis.component == b.analysis.component;
}

TimeScale ScenarioConfig::build_timescale() const {
  if (!timescale.validity_csv.empty()) {
    std::filesystem::path p = timescale.validity_csv;
    if (p.is_relative() && !base_dir.empty()) p = base_dir / p;
    const auto samples = read_validity_csv(p);
    return extract_from_measurements(samples, {timescale.min_continuous_run});
  }
  return build_named_timescale(timescale.spec);
}

TruthOptions ScenarioConfig::truth_options() const {
  TruthOptions opt;
  opt.noise_scaling = sampling.noise_scaling;
  opt.boundary = sampling.truth_boundary;
  opt.random_init = sampling.random_init;
  if (!sampling.truth_bounds.empty()) {
    const auto n = static_cast<Eigen::Index>(sampling.truth_bounds.size());
    opt.lower.resize(n);
    opt.upper.resize(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      opt.lower(i) = sampling.truth_bounds[static_cast<std::size_t>(i)].first;
      opt.upper(i) = sampling.truth_bounds[static_cast<std::size_t>(i)].second;
    }
  }
  return opt;
}

FilterOptions ScenarioConfig::filter_options() const { return FilterOptions{sampling.clamp_mu}; }

InputSignal ScenarioConfig::input() const {
  if (model.u.size() == 0) return zero_input(model.model.input_dim());
  return constant_input(model.u);
}

std::filesystem::path ScenarioConfig::output_directory() const {
  if (!output.directory.empty()) return output.directory;
  const std::string leaf = name.empty() ? "scenario" : name;
  if (const char* env = std::getenv("TSKF_OUTPUT_DIR"); env && *env) {
    return std::filesystem::path(env) / leaf;
  }
  return std::filesystem::path("tskf-out") / leaf;
}

// ---------------------------------------------------------------------------

std::vector<std::string> builtin_scenario_names() {
  return {"owc-td", "ref-t1", "ref-t2", "ref-t3", "ref-t4", "ref-td"};
}

std::optional<ScenarioConfig> builtin_scenario(std::string_view name) {
  ScenarioConfig cfg;
  cfg.name = std::string(name);
  if (name == "owc-td") {
    const owc::OwcLinearFit fit;
    cfg.model.model = owc::owc_model();
    cfg.timescale.spec = "td";
    cfg.sampling.truth_boundary = BoundaryMode::Reflect;
    cfg.sampling.truth_bounds = {{fit.angle_lo, fit.angle_hi}};
    return cfg;
  }
  cfg.model.model = owc::reference_model();
  if (name == "ref-t1") {
    cfg.timescale.spec = "uniform(c=2, end=40)";
  } else if (name == "ref-t2") {
    cfg.timescale.spec = "harmonic(n=200)";
  } else if (name == "ref-t3") {
    cfg.timescale.spec = "hybrid_t3(end=10)";
  } else if (name == "ref-t4") {
    cfg.timescale.spec = "pab(a=1, b=2, k=10)";
  } else if (name == "ref-td") {
    cfg.timescale.spec = "td";
  } else {
    return std::nullopt;
  }
  return cfg;
}

ScenarioConfig parse_scenario_text(std::string_view text, const std::filesystem::path& base_dir) {
  json j;
  try {
    j = json::parse(text.begin(), text.end());
  } catch (const json::parse_error& e) {
    // Convert the byte offset into line and column.
    std::size_t line = 1, col = 1;
    for (std::size_t i = 0; i + 1 < e.byte && i < text.size(); ++i) {
      if (text[i] == '\n') {
        ++line;
        col = 1;
      } else {
        ++col;
      }
    }
    throw Error(ErrorCode::ConfigError,
                fmt::format("line {}, column {}: malformed JSON ({})", line, col, e.what()));
  }
  return ScenarioConfig::from_json(j, base_dir);
}

ScenarioConfig load_scenario(std::string_view name_or_path) {
  if (auto builtin = builtin_scenario(name_or_path)) return *builtin;
  const std::filesystem::path path(name_or_path);
  std::ifstream in(path);
  if (!in) {
    throw Error(ErrorCode::ConfigError,
                fmt::format("'{}' is neither a built-in scenario ({}) nor a readable file",
                            name_or_path, fmt::join(builtin_scenario_names(), ", ")));
  }
  std::stringstream buf;
  buf << in.rdbuf();
  ScenarioConfig cfg = parse_scenario_text(buf.str(), path.parent_path());
  if (cfg.name.empty()) cfg.name = path.stem().string();
  return cfg;
}

void apply_override(ScenarioConfig& config, std::string_view assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string_view::npos || eq == 0) {
    throw Error(ErrorCode::ConfigError,
                fmt::format("override '{}' must look like block.key=value", assignment));
  }
  const std::string key(assignment.substr(0, eq));
  const std::string raw(assignment.substr(eq + 1));
  json value;
  try {
    value = json::parse(raw);
  } catch (const json::parse_error&) {
    value = raw;
  }
  json j = config.to_json();
  json* node = &j;
  std::size_t start = 0;
  while (true) {
    const auto dot = key.find('.', start);
    const std::string part = key.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (part.empty()) throw Error(ErrorCode::ConfigError, fmt::format("bad override key '{}'", key));
    if (dot == std::string::npos) {
      if (!node->is_object() || !node->contains(part)) {
        throw Error(ErrorCode::ConfigError, fmt::format("{}: unknown key", key));
      }
      (*node)[part] = value;
      break;
    }
    if (!node->is_object() || !node->contains(part)) {
      throw Error(ErrorCode::ConfigError, fmt::format("{}: unknown block '{}'", key, part));
    }
    node = &(*node)[part];
    start = dot + 1;
  }
  config = ScenarioConfig::from_json(j, config.base_dir);
}

}  // namespace tskf
