#include <algorithm>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "tskf/driver.hpp"
#include "tskf/error.hpp"

using namespace tskf;

namespace {

std::filesystem::path scratch(std::string_view name) {
  auto dir = std::filesystem::path(TSKF_TEST_DATA_DIR) / "driver_case" / name;
  std::filesystem::remove_all(dir);
  return dir;
}

ScenarioConfig scenario(std::string_view name, std::string_view dir) {
  auto cfg = *builtin_scenario(name);
  cfg.output.directory = scratch(dir).string();
  cfg.run.threads = 2;
  return cfg;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

}  // namespace

TEST_CASE("trace CSV round trip") {
  const auto r = simulate_scenario(*builtin_scenario("ref-t4"), 3);
  const std::string text = trace_csv(r.trace);
  CHECK(text.rfind("t,mu,segment,origin,y_0,x_hat_0,x_hat_1,P_0_0,P_0_1,P_1_0,P_1_1,K_0_0,K_1_0,"
                   "innovation_0,est_error_0,est_error_1,meas_error_0\n",
                   0) == 0);
  std::istringstream in(text);
  const auto back = read_trace_csv(in);
  REQUIRE(back.records.size() == r.trace.records.size());
  for (std::size_t i = 0; i < back.records.size(); ++i) {
    const auto& a = r.trace.records[i];
    const auto& b = back.records[i];
    CHECK(a.t == b.t);
    CHECK(a.mu == b.mu);
    CHECK(a.origin == b.origin);
    CHECK(a.segment == b.segment);
    CHECK(a.x_hat == b.x_hat);
    CHECK(a.P == b.P);
    CHECK(a.K == b.K);
    CHECK(a.est_error == b.est_error);
    CHECK(a.meas_error == b.meas_error);
  }
  CHECK(trace_csv(back) == text);
  CHECK(timescale_from_trace(back) == r.timescale);

  std::istringstream junk("a,b,c\n1,2,3\n");
  CHECK_THROWS_AS(read_trace_csv(junk), Error);
}

TEST_CASE("plot modes") {
  const auto r4 = simulate_scenario(*builtin_scenario("ref-t4"), 1);
  const auto& trace = r4.trace;
  const auto n = trace.records.size();

  const auto it = plot_abscissa(trace, PlotMode::Iteration);
  for (std::size_t i = 0; i < n; ++i) CHECK(it[i] == static_cast<double>(i));
  CHECK(plot_breaks(trace, PlotMode::Iteration).empty());

  // P_{1,2}: every break spans a gap of width 2.
  const auto breaks = plot_breaks(trace, PlotMode::TimeScale);
  CHECK(breaks.size() == 10);
  for (auto b : breaks) CHECK(trace.records[b + 1].t - trace.records[b].t == doctest::Approx(2.0));

  // Ordinates are identical between modes.
  for (const auto& s : plot_series(trace)) {
    auto values = [&](PlotMode mode) {
      std::istringstream in(render_series_data(trace, mode, s));
      std::string line;
      std::getline(in, line);
      std::vector<std::string> v;
      while (std::getline(in, line))
        if (!line.empty()) v.push_back(line.substr(line.find(',') + 1));
      std::sort(v.begin(), v.end());
      return v;
    };
    CHECK(values(PlotMode::Iteration) == values(PlotMode::TimeScale));
  }

  const auto owc = simulate_scenario(*builtin_scenario("owc-td"), 1);
  const auto ob = plot_breaks(owc.trace, PlotMode::TimeScale);
  REQUIRE(ob.size() == 5);
  const double widths[] = {2, 2, 4, 3, 6};
  for (std::size_t i = 0; i < 5; ++i) {
    CHECK(owc.trace.records[ob[i] + 1].t - owc.trace.records[ob[i]].t == widths[i]);
  }
  const auto svg = render_svg(owc.trace, PlotMode::TimeScale, "error");
  CHECK(svg.find("<svg") == 0);
  CHECK(std::count(svg.begin(), svg.end(), '\n') > 100);
  // Six polyline pieces per series.
  std::size_t lines = 0;
  for (auto p = svg.find("<polyline"); p != std::string::npos; p = svg.find("<polyline", p + 1)) ++lines;
  CHECK(lines == 12);
  CHECK(svg.find("<circle") != std::string::npos);
  CHECK_THROWS_AS(render_svg(owc.trace, PlotMode::TimeScale, "pie"), Error);

  const auto dir = scratch("plots");
  const auto files = emit_plots(owc.trace, PlotMode::Iteration, PlotFormat::Data, dir, "p");
  CHECK(files.size() == 4);
  CHECK(std::filesystem::exists(dir / "p_iteration_est_error.csv"));
}

TEST_CASE("run_scenario writes a reproducible set of files") {
  const auto a = run_scenario(scenario("owc-td", "run_a"));
  const auto b = run_scenario(scenario("owc-td", "run_b"));
  REQUIRE(a.manifest.outputs.size() == b.manifest.outputs.size());
  CHECK(a.manifest.outputs.size() == 3 + 4 + 8);
  for (std::size_t i = 0; i < a.manifest.outputs.size(); ++i) {
    CHECK(a.manifest.outputs[i].name == b.manifest.outputs[i].name);
    CHECK(a.manifest.outputs[i].sha256 == b.manifest.outputs[i].sha256);
    CHECK(sha256_file(a.directory / a.manifest.outputs[i].name) == a.manifest.outputs[i].sha256);
  }
  CHECK(a.manifest.seeds == std::vector<std::uint64_t>{1});

  const auto manifest = nlohmann::json::parse(slurp(a.directory / "manifest.json"));
  CHECK(manifest["command"] == "run");
  CHECK(manifest["config"]["name"] == "owc-td");
  CHECK(manifest.contains("wall_clock_seconds"));
  CHECK(manifest["outputs"].size() == a.manifest.outputs.size());

  CHECK(a.spikes.entries.size() == 5);
  const auto summary = slurp(a.directory / "summary.csv");
  CHECK(summary.rfind("statistic,value\n", 0) == 0);
  CHECK(summary.find("flagged_spikes,") != std::string::npos);
}

TEST_CASE("h is inert on a purely discrete scale") {
  auto a = *builtin_scenario("ref-t1");
  auto b = a;
  apply_override(a, "sampling.h=0.5");
  apply_override(b, "sampling.h=0.25");
  CHECK(trace_csv(simulate_scenario(a, 9).trace) == trace_csv(simulate_scenario(b, 9).trace));
}

TEST_CASE("sha256") {
  CHECK(sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  CHECK(sha256_hex("") == "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
}

TEST_CASE("Monte Carlo") {
  auto cfg = scenario("ref-t2", "mc_same");
  McOptions opt;
  opt.replicates = 2;
  opt.base_seed = 5;
  opt.same_seed = true;
  const auto same = monte_carlo(cfg, opt);
  REQUIRE(same.replicate_digests.size() == 2);
  CHECK(same.replicate_digests[0] == same.replicate_digests[1]);
  CHECK(same.seeds == std::vector<std::uint64_t>{5, 5});
  for (double s : same.std_abs_est_error) CHECK(s == 0);

  cfg.output.directory = scratch("mc_ladder").string();
  opt.replicates = 8;
  opt.same_seed = false;
  const auto ladder = monte_carlo(cfg, opt);
  CHECK(ladder.seeds.front() == 5);
  CHECK(ladder.seeds.back() == 12);
  CHECK(ladder.replicate_digests[0] != ladder.replicate_digests[1]);
  CHECK(std::filesystem::exists(ladder.directory / "mc_aggregate.csv"));
  CHECK(std::filesystem::exists(ladder.directory / "mc_replicates.csv"));

  // Thread count does not change the result.
  cfg.run.threads = 1;
  cfg.output.directory = scratch("mc_serial").string();
  const auto serial = monte_carlo(cfg, opt);
  CHECK(serial.replicate_digests == ladder.replicate_digests);
  CHECK(serial.mean.abs_est_error == ladder.mean.abs_est_error);

  opt.replicates = 1;
  CHECK_THROWS_AS(monte_carlo(cfg, opt), Error);
}

TEST_CASE("sweep reports NoSignChange after writing the scan") {
  auto cfg = scenario("ref-t1", "sweep");
  cfg.model.model.A = Matrix::Constant(1, 1, -1.0);
  cfg.model.model.B = Matrix::Zero(1, 1);
  cfg.model.model.C = Matrix::Constant(1, 1, 1.0);
  cfg.model.model.G = Matrix::Zero(1, 1);
  cfg.model.model.Q = Matrix::Zero(1, 1);
  cfg.model.model.R = Matrix::Constant(1, 1, 1.0);
  cfg.model.model.x0_mean = Vector::Zero(1);
  cfg.model.model.P0 = Matrix::Constant(1, 1, 1.0);
  try {
    sweep_bound(cfg, 0.1, 1.9, {});
    FAIL("expected NoSignChange");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::NoSignChange);
  }
  CHECK(std::filesystem::exists(cfg.output_directory() / "bound_scan.csv"));
  CHECK(std::filesystem::exists(cfg.output_directory() / "manifest.json"));
}

TEST_CASE("oracle_check") {
  for (const char* name : {"ref-t1", "owc-td"}) {
    const auto report = oracle_check(*builtin_scenario(name));
    CHECK(report.lines.size() == 7);
    CHECK(report.pass());
    CHECK(report.to_text().find("check,value,tolerance,result") == 0);
  }
}

TEST_CASE("divergence carries t and mu") {
  auto cfg = *builtin_scenario("owc-td");
  cfg.sampling.truth_boundary = BoundaryMode::Free;
  cfg.timescale.spec = "uniform(c=1000, end=1000000)";
  try {
    simulate_scenario(cfg, 1);
    FAIL("expected divergence");
  } catch (const DivergenceError& e) {
    CHECK(e.mu() == 1000);
    CHECK(e.t() >= 0);
  }
}
