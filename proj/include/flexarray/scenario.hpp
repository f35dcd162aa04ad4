#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "flexarray/beamformer.hpp"
#include "flexarray/escal.hpp"
#include "flexarray/geometry.hpp"
#include "flexarray/signal_model.hpp"

namespace flexarray {

/// Raised for scenario documents that fail to parse or validate.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class TrajectoryKind { Static, Step, Sinusoidal };

struct DeformationTrajectory {
  TrajectoryKind kind = TrajectoryKind::Static;
  double r0_m = 0.38;  // +inf means flat
  double r1_m = 0.38;
  std::uint64_t step_tick = 0;
  double vib_amplitude_m = 0.0;
  double vib_freq_hz = 0.0;

  void validate() const;
  bool is_static() const { return kind == TrajectoryKind::Static; }
  bool operator==(const DeformationTrajectory&) const = default;
};

double radius_at(const DeformationTrajectory& traj, std::uint64_t tick, double tick_period_s);

struct GeometryTemplate {
  std::size_t arc_elements = 2;
  std::size_t columns = 2;
  double spacing_m = 0.0928;
  double freq_rf_hz = 2.1e9;

  std::size_t n_elements() const { return arc_elements * columns; }
  ArrayGeometry build(double radius_m) const;
  bool operator==(const GeometryTemplate&) const = default;
};

struct BeamformerConfig {
  ObjectiveKind objective = ObjectiveKind::Magnitude;
  double full_scale_target = BfNormalizer::kDefaultTarget;
  int dwell_samples = 16;

  bool operator==(const BeamformerConfig&) const = default;
};

/// Where the loops start.
enum class InitMode {
  Auto,          // coarse stride-16 search
  FlatSteering,  // codes that steer the undeformed array to the source
  Explicit,      // `initial_codes`
};

struct Scenario {
  std::string name = "scenario";
  GeometryTemplate geometry;
  DeformationTrajectory trajectory;
  /// The carrier comes from `geometry.freq_rf_hz`.
  double aoa_rad = 0.0;
  double amplitude = 1.0;
  ReceiverConfig receiver;
  int gain_code = 7;
  BeamformerConfig beamformer;
  std::vector<LoopConfig> loops = default_loop_configs(3);
  InitMode init = InitMode::Auto;
  std::vector<int> initial_codes;
  NoiseConfig noise;
  std::uint64_t tick_budget = 40000;
  std::uint64_t seed = 1;
  bool stop_on_converge = true;
  double pattern_grid_deg = 0.1;

  PlaneWaveSource source() const;
  double tick_period_s() const;
  void validate() const;
  bool operator==(const Scenario&) const = default;
};

nlohmann::json to_json(const Scenario& scn);
Scenario scenario_from_json(const nlohmann::json& doc);
std::string serialize(const Scenario& scn);
Scenario parse_scenario(const std::string& text);
Scenario load_scenario(const std::string& path);

/// Channel settings with the loop codes on elements 1..loops.
std::vector<ChannelSettings> channel_settings_for(const Scenario& scn,
                                                  std::span<const int> loop_codes);

/// Loop codes that steer the undeformed array to the source.
std::vector<int> flat_steering_codes(const Scenario& scn);

/// Starting codes per `scn.init`, for the geometry at tick 0.
std::vector<int> initial_loop_codes(const Scenario& scn);

/// |bf_out| over angle of arrival with codes frozen, at radius `radius_m`
/// (tick-0 radius when unset). Grid must be at most 1 degree.
Pattern pattern_sweep(const Scenario& scn, std::span<const ChannelSettings> codes,
                      double grid_deg, std::optional<double> radius_m = std::nullopt);

/// Pointing error of frozen loop codes at a radius, on the scenario grid.
double pointing_error_deg(const Scenario& scn, std::span<const int> loop_codes, double radius_m);

/// Noise-free normalized objective for frozen loop codes at a radius.
double objective_at(const Scenario& scn, std::span<const int> loop_codes, double radius_m);

struct TraceRow {
  std::uint64_t tick = 0;
  double radius_m = 0.0;
  std::vector<int> codes;
  std::vector<int> perturbed_codes;
  QWord objective;
  std::vector<double> demod;
  std::vector<double> accumulator;
  double error_deg = 0.0;

  bool operator==(const TraceRow&) const = default;
};

struct RunSummary {
  double final_error_deg = 0.0;
  double uncompensated_error_deg = 0.0;
  bool converged = false;
  std::optional<std::uint64_t> ticks_to_converge;
  std::vector<std::uint64_t> convergence_ticks;
  std::uint64_t saturation_count = 0;
  std::uint64_t ticks_run = 0;
  std::vector<int> initial_codes;
  std::vector<int> final_codes;
  double final_objective = 0.0;
};

struct RunResult {
  std::vector<TraceRow> trace;
  RunSummary summary;
};

/// Tick-driven closed-loop run. Throws ConfigError before tick 0 when the
/// scenario is invalid.
RunResult simulate(const Scenario& scn);

}  // namespace flexarray
