#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>

#include "flexarray/harness.hpp"

using namespace flexarray;
namespace fs = std::filesystem;

namespace {

Scenario headline() {
  Scenario s;
  s.aoa_rad = deg_to_rad(10.0);
  return s;
}

fs::path scratch_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("flexarray_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

fs::path write_scenario(const fs::path& dir, const Scenario& s) {
  const fs::path p = dir / "scenario.json";
  std::ofstream(p) << serialize(s);
  return p;
}

// phase-only optimum per element, rounded to the nearest code
std::vector<int> rounded_phase_codes(const Scenario& s) {
  const double k = 2 * M_PI * s.geometry.freq_rf_hz / 299792458.0;
  std::vector<int> out;
  for (std::size_t e = 1; e <= s.loops.size(); ++e) {
    const double phi = static_cast<double>(e % 2) * s.geometry.spacing_m / s.trajectory.r0_m;
    const double delta = s.trajectory.r0_m * (std::cos(s.aoa_rad - phi) - std::cos(s.aoa_rad));
    const long c = std::lround(-k * delta / (2 * M_PI / 256));
    out.push_back(static_cast<int>(((c % 256) + 256) % 256));
  }
  return out;
}

}  // namespace

TEST_CASE("per-loop oracle on a flat broadside array") {
  Scenario s;
  s.trajectory.r0_m = std::numeric_limits<double>::infinity();
  const std::vector<int> zero{0, 0, 0};
  for (std::size_t i = 0; i < 3; ++i) {
    const auto o = oracle_exhaustive(s, i, zero);
    CHECK(o.best_code == 0);
    CHECK(o.curve[0] == doctest::Approx(28.0));
    for (int c = 1; c < 128; ++c) CHECK(o.curve[static_cast<std::size_t>(c)] == doctest::Approx(o.curve[static_cast<std::size_t>(256 - c)]));
    // single-element swing: |3 + e^{j pi}| = 2 of 4
    CHECK(o.curve[128] == doctest::Approx(14.0));
  }
}

TEST_CASE("joint oracle agrees with per-element phase rounding") {
  for (double deg : {-40.0, -10.0, 0.0, 10.0, 35.0}) {
    for (double r : {0.3, 0.38, 0.7}) {
      Scenario s = headline();
      s.aoa_rad = deg_to_rad(deg);
      s.trajectory.r0_m = r;
      const auto joint = oracle_joint(s);
      const auto rounded = rounded_phase_codes(s);
      CAPTURE(deg);
      CAPTURE(r);
      for (std::size_t i = 0; i < 3; ++i) CHECK(code_distance(joint.codes[i], rounded[i]) <= 1);
      CHECK(joint.objective >= objective_at(s, rounded, r) - 1e-12);
      CHECK(joint.objective <= 28.0 + 1e-9);
    }
  }
}

TEST_CASE("oracle optimum points the main beam at the source") {
  const Scenario s = headline();
  const auto joint = oracle_joint(s);
  CHECK(pointing_error_deg(s, joint.codes, s.trajectory.r0_m) < 0.5);
  const auto p = pattern_sweep(s, channel_settings_for(s, joint.codes), 0.1);
  const double peak = *std::max_element(p.magnitude.begin(), p.magnitude.end());
  // everything 40 degrees away from the source sits well below the peak
  for (std::size_t i = 0; i < p.angles_rad.size(); ++i) {
    if (std::abs(rad_to_deg(p.angles_rad[i]) - 10.0) > 40.0) CHECK(p.magnitude[i] < 0.9 * peak);
  }
}

TEST_CASE("oracle preconditions") {
  Scenario s = headline();
  s.noise.enabled = true;
  CHECK_THROWS(oracle_joint(s));
  s = headline();
  s.trajectory.kind = TrajectoryKind::Step;
  CHECK_THROWS(oracle_exhaustive(s, 0));
  s = headline();
  CHECK_THROWS(oracle_exhaustive(s, 3));
}

TEST_CASE("trace CSV round trip") {
  Scenario s = headline();
  s.tick_budget = 700;
  s.noise = {true, 20.0, 3};
  const auto r = simulate(s);
  std::stringstream buf;
  write_trace_csv(buf, r);
  std::string header;
  std::getline(std::istringstream(buf.str()) >> std::ws, header);
  CHECK(header.rfind("tick,R_m,code_1,code_2,code_3,perturbed_code_1", 0) == 0);
  const auto rows = read_trace_csv(buf);
  REQUIRE(rows.size() == r.trace.size());
  for (std::size_t i = 0; i < rows.size(); ++i) REQUIRE(rows[i] == r.trace[i]);

  std::istringstream bad("tock,R_m\n");
  CHECK_THROWS(read_trace_csv(bad));
  std::istringstream ragged("tick,R_m,objective_q,error_deg\n1,2\n");
  CHECK_THROWS(read_trace_csv(ragged));
}

TEST_CASE("summary JSON echoes the configuration") {
  const Scenario s = headline();
  RunSummary sum;
  sum.final_codes = {1, 2, 3};
  const auto j = summary_to_json(s, sum);
  CHECK(j["final_codes"] == nlohmann::json({1, 2, 3}));
  CHECK(j["ticks_to_converge"].is_null());
  CHECK(scenario_from_json(j["config"]) == s);
}

TEST_CASE("overrides") {
  nlohmann::json doc = to_json(headline());
  apply_override(doc, "trajectory.r0_m=0.5");
  apply_override(doc, "loops.1.a_phi=12");
  apply_override(doc, "name=bent tile");
  apply_override(doc, "noise.enabled=true");
  apply_override(doc, "trajectory.r1_m=inf");
  const Scenario s = scenario_from_json(doc);
  CHECK(s.trajectory.r0_m == 0.5);
  CHECK(s.loops[1].a_phi == 12.0);
  CHECK(s.name == "bent tile");
  CHECK(s.noise.enabled);
  CHECK(std::isinf(s.trajectory.r1_m));
  CHECK_THROWS_AS(apply_override(doc, "novalue"), ConfigError);
  CHECK_THROWS_AS(apply_override(doc, "loops.7.a_phi=1"), ConfigError);
  CHECK_THROWS_AS(apply_override(doc, "loops.x.a_phi=1"), ConfigError);
  CHECK_THROWS_AS(apply_override(doc, "run..seed=1"), ConfigError);
  apply_override(doc, "bogus=1");
  CHECK_THROWS_AS(scenario_from_json(doc), ConfigError);
}

TEST_CASE("mode names") {
  CHECK(parse_mode("sweep") == RunMode::Sweep);
  CHECK(parse_mode("selftest") == RunMode::Selftest);
  CHECK_THROWS_AS(parse_mode("walk"), ConfigError);
}

TEST_CASE("selftest passes") {
  for (const auto& r : run_selftest()) {
    CAPTURE(r.name);
    CHECK(r.passed);
  }
}

TEST_CASE("cli exit codes") {
  std::ostringstream log;
  const fs::path dir = scratch_dir("exit");
  RunManifest m;
  m.output_dir = dir / "out";

  CHECK(cli_run(m, log) == kExitConfig);  // no scenario
  m.scenario_path = (dir / "missing.json").string();
  CHECK(cli_run(m, log) == kExitConfig);
  std::ofstream(dir / "broken.json") << "{ not json";
  m.scenario_path = (dir / "broken.json").string();
  CHECK(cli_run(m, log) == kExitConfig);

  Scenario s = headline();
  m.scenario_path = write_scenario(dir, s).string();
  m.overrides = {"geometry.spacing_m=-1"};
  CHECK(cli_run(m, log) == kExitConfig);

  m.overrides = {"run.tick_budget=600"};
  CHECK(cli_run(m, log) == kExitOk);
  m.require_converged = true;
  CHECK(cli_run(m, log) == kExitNotConverged);

  // output directory collides with a regular file
  std::ofstream(dir / "blocker") << "x";
  m.output_dir = dir / "blocker" / "out";
  m.require_converged = false;
  CHECK(cli_run(m, log) == kExitIo);
}

TEST_CASE("cli run writes trace and summary") {
  std::ostringstream log;
  const fs::path dir = scratch_dir("run");
  RunManifest m;
  m.scenario_path = write_scenario(dir, headline()).string();
  m.output_dir = dir / "out";
  m.seed = 9;
  m.require_converged = true;
  REQUIRE(cli_run(m, log) == kExitOk);
  std::ifstream trace(m.output_dir / "trace.csv");
  const auto rows = read_trace_csv(trace);
  CHECK(!rows.empty());
  std::ifstream js(m.output_dir / "summary.json");
  const auto j = nlohmann::json::parse(js);
  CHECK(j["converged"] == true);
  CHECK(j["config"]["run"]["seed"] == 9);
  CHECK(j["final_error_deg"].get<double>() < 1.5);
  CHECK(rows.size() == j["ticks_run"].get<std::size_t>());
}

TEST_CASE("cli sweep: bending error falls as the radius grows") {
  std::ostringstream log;
  const fs::path dir = scratch_dir("sweep");
  RunManifest m;
  m.mode = RunMode::Sweep;
  m.scenario_path = write_scenario(dir, headline()).string();
  m.output_dir = dir / "out";
  REQUIRE(cli_run(m, log) == kExitOk);
  std::ifstream in(m.output_dir / "sweep.csv");
  std::string line;
  std::getline(in, line);
  double prev_r = 0.0, prev_err = 1e9;
  int rows = 0;
  while (std::getline(in, line)) {
    std::istringstream f(line);
    std::string r, unc, fin;
    std::getline(f, r, ',');
    std::getline(f, unc, ',');
    std::getline(f, fin, ',');
    CHECK(std::stod(r) > prev_r);
    CHECK(std::stod(unc) <= prev_err);
    CHECK(std::stod(fin) < 1.5);
    prev_r = std::stod(r);
    prev_err = std::stod(unc);
    ++rows;
  }
  CHECK(rows == 4);
  for (const char* tag : {"R0.3", "R0.38", "R0.5", "R1"}) {
    CHECK(fs::exists(m.output_dir / (std::string("summary_") + tag + ".json")));
  }
}

TEST_CASE("cli oracle and pattern modes") {
  std::ostringstream log;
  const fs::path dir = scratch_dir("oracle");
  RunManifest m;
  m.scenario_path = write_scenario(dir, headline()).string();
  m.output_dir = dir / "out";
  m.mode = RunMode::Oracle;
  REQUIRE(cli_run(m, log) == kExitOk);
  std::ifstream js(m.output_dir / "oracle.json");
  const auto j = nlohmann::json::parse(js);
  CHECK(j["joint_codes"].size() == 3);
  CHECK(j["pointing_error_deg"].get<double>() < 0.5);

  m.mode = RunMode::Pattern;
  REQUIRE(cli_run(m, log) == kExitOk);
  std::ifstream pat(m.output_dir / "pattern.csv");
  std::string line;
  std::getline(pat, line);
  CHECK(line == "angle_deg,flat,deformed_uncompensated,deformed_corrected");
  int rows = 0;
  while (std::getline(pat, line)) ++rows;
  CHECK(rows == 1801);

  m.mode = RunMode::Oracle;
  m.overrides = {"noise.enabled=true"};
  CHECK(cli_run(m, log) == kExitConfig);
}

TEST_CASE("cli selftest") {
  std::ostringstream log;
  RunManifest m;
  m.mode = RunMode::Selftest;
  m.output_dir = scratch_dir("selftest");
  CHECK(cli_run(m, log) == kExitOk);
  CHECK(fs::exists(m.output_dir / "selftest.json"));
  CHECK(log.str().find("FAIL") == std::string::npos);
}
