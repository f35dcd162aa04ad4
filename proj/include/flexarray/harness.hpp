#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "flexarray/scenario.hpp"

namespace flexarray {

// --- oracles ---------------------------------------------------------------

struct OracleCurve {
  int best_code = 0;
  std::vector<double> curve;  // 256 normalized objective values
};

/// Sweeps all 256 codes of one loop with the others frozen at `frozen`
/// (initial codes when empty). Requires a static, noise-free scenario.
OracleCurve oracle_exhaustive(const Scenario& scn, std::size_t loop_index,
                              std::span<const int> frozen = {});

struct JointOptimum {
  std::vector<int> codes;
  double objective = 0.0;
};

/// Stride-16 grid over every loop code, then exhaustive refinement within
/// +-8 codes per axis around the best grid point. Ties go to the
/// lexicographically smallest tuple.
JointOptimum oracle_joint(const Scenario& scn);

// --- artifacts -------------------------------------------------------------

/// tick, R_m, code_i, perturbed_code_i, objective_q, error_deg, then demod_i
/// and accumulator_i. Doubles use 17 significant digits.
void write_trace_csv(std::ostream& out, const RunResult& result);
std::vector<TraceRow> read_trace_csv(std::istream& in);

nlohmann::json summary_to_json(const Scenario& scn, const RunSummary& summary);

/// Applies a dotted-path override ("trajectory.r0_m=0.5") to a scenario
/// document. The value is parsed as JSON when possible, else kept as a string.
void apply_override(nlohmann::json& doc, const std::string& assignment);

// --- command line ----------------------------------------------------------

enum class RunMode { Run, Sweep, Oracle, Pattern, Selftest };

RunMode parse_mode(const std::string& text);

struct RunManifest {
  std::string scenario_path;
  std::filesystem::path output_dir = "out";
  RunMode mode = RunMode::Run;
  std::vector<std::string> overrides;
  std::optional<std::uint64_t> seed;
  bool require_converged = false;
  std::vector<double> sweep_radii_m = {0.3, 0.38, 0.5, 1.0};
};

enum ExitCode : int {
  kExitOk = 0,
  kExitConfig = 1,
  kExitIo = 2,
  kExitNotConverged = 3,
  kExitSelftestFailed = 4,
};

/// Executes one manifest, writing artifacts under output_dir. Diagnostics go
/// to `log`.
int cli_run(const RunManifest& manifest, std::ostream& log);

struct SelftestResult {
  std::string name;
  bool passed = false;
  std::string detail;
};

/// Quick invariant checks that need no scenario file.
std::vector<SelftestResult> run_selftest();

}  // namespace flexarray
