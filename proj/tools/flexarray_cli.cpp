// Command-line front end for the conformal-array calibration simulator.

#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "flexarray/harness.hpp"

int main(int argc, char** argv) {
  using namespace flexarray;

  CLI::App app{"Conformal phased-array deformation and extremum-seeking calibration simulator"};
  RunManifest manifest;
  std::string mode = "run";
  std::string out_dir = "out";
  std::uint64_t seed = 0;

  app.add_option("--scenario", manifest.scenario_path, "Scenario JSON document");
  app.add_option("--out", out_dir, "Output directory")->capture_default_str();
  app.add_option("--mode", mode, "run | sweep | oracle | pattern | selftest")->capture_default_str();
  app.add_option("--set", manifest.overrides, "Override a scenario field, e.g. trajectory.r0_m=0.5");
  auto* seed_opt = app.add_option("--seed", seed, "Seed for the scenario and noise streams");
  app.add_flag("--require-converged", manifest.require_converged,
               "Exit with status 3 when a run does not converge");
  app.add_option("--radii", manifest.sweep_radii_m, "Radii in meters for sweep mode")
      ->delimiter(',')
      ->capture_default_str();

  try {
    app.parse(argc, argv);
    manifest.mode = parse_mode(mode);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kExitOk : kExitConfig;
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitConfig;
  }
  manifest.output_dir = out_dir;
  if (*seed_opt) manifest.seed = seed;

  return cli_run(manifest, std::cerr);
}
