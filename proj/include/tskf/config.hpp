#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "tskf/kalman.hpp"
#include "tskf/linsys.hpp"
#include "tskf/timescale.hpp"

namespace tskf {

enum class PlotMode { Iteration, TimeScale };
enum class PlotFormat { Svg, Data };

std::string_view to_string(PlotMode mode) noexcept;
std::string_view to_string(PlotFormat format) noexcept;
PlotMode plot_mode_from_string(std::string_view text);
PlotFormat plot_format_from_string(std::string_view text);

// Declarative description of one experiment. Every field has a documented
// default and is echoed back by to_json().
struct ScenarioConfig {
  std::string name;

  struct ModelBlock {
    StateSpaceModel model;
    // Constant input u; empty means zero.
    Vector u;
  } model;

  struct TimescaleBlock {
    // Scale spec; ignored when validity_csv is set.
    std::string spec = "td";
    std::string validity_csv;
    std::size_t min_continuous_run = 3;
  } timescale;

  struct SamplingBlock {
    double h = 0.05;
    NoiseScaling noise_scaling = NoiseScaling::PerStep;
    BoundaryMode truth_boundary = BoundaryMode::Free;
    // One [lo, hi] pair per state component; required unless boundary is free.
    std::vector<std::pair<double, double>> truth_bounds;
    bool random_init = false;
    std::optional<double> clamp_mu;
  } sampling;

  struct RunBlock {
    std::uint64_t seed = 1;
    std::uint32_t replicates = 200;
    // Worker threads for Monte Carlo and bisection; 0 picks the hardware count.
    std::uint32_t threads = 0;
  } run;

  struct OutputBlock {
    // Empty: $TSKF_OUTPUT_DIR/<name>, or tskf-out/<name> when unset.
    std::string directory;
    std::vector<PlotFormat> formats{PlotFormat::Svg, PlotFormat::Data};
    std::vector<PlotMode> plot_modes{PlotMode::Iteration, PlotMode::TimeScale};
  } output;

  struct AnalysisBlock {
    double spike_factor = 3.0;
    // State component compared against the measurement error.
    std::size_t component = 0;
  } analysis;

  // Directory used to resolve a relative validity_csv path.
  std::filesystem::path base_dir;

  nlohmann::json to_json() const;
  // Validates fully; throws ConfigError naming the offending field.
  static ScenarioConfig from_json(const nlohmann::json& j,
                                  const std::filesystem::path& base_dir = {});

  TimeScale build_timescale() const;
  TruthOptions truth_options() const;
  FilterOptions filter_options() const;
  InputSignal input() const;
  std::filesystem::path output_directory() const;

  friend bool operator==(const ScenarioConfig& a, const ScenarioConfig& b);
};

// Names of the built-in scenarios: owc-td, ref-t1 .. ref-t4, ref-td.
std::vector<std::string> builtin_scenario_names();
std::optional<ScenarioConfig> builtin_scenario(std::string_view name);

// Accepts a built-in name or a path to a JSON config file.
ScenarioConfig load_scenario(std::string_view name_or_path);
ScenarioConfig parse_scenario_text(std::string_view text, const std::filesystem::path& base_dir = {});

// Applies `block.key=value`; value is read as JSON, falling back to a string.
void apply_override(ScenarioConfig& config, std::string_view assignment);

}  // namespace tskf
