#pragma once

// Extremum-seeking phase calibration.
//
// Each loop owns one phase shifter. Per tick it dithers the code with a sine
// read from a shared LUT, high-passes the digitized beamformer output, mixes
// it with the same sine and integrates the product into the code estimate:
//
//   P[n]  = P_hat[n] + a * sin[n]
//   P_hat = P_init + a * A_v * sum_n HPF(BF_q[n]) * sin[n + psi]
//
// All arithmetic after the 16-bit BF word is integer:
//   LUT        17-bit sign-magnitude, unit at 2^15
//   HPF/demod  Q.20 in 32 bits
//   accumulator Q11.20 in 32 bits, saturating
//   code word  16 bits, phase code in the top 8

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "flexarray/beamformer.hpp"
#include "flexarray/geometry.hpp"
#include "flexarray/signal_model.hpp"

namespace flexarray {

/// What happens when the internal code word leaves its range. The 16-bit word
/// spans exactly one turn of the 8-bit phase shifter, so Wrap keeps the phase
/// continuous; Saturate pins the code at 0 or 0xFFFF.
enum class CodeBounds { Wrap, Saturate };

struct LoopConfig {
  double omega_p_rad_s = 30.0;
  int lut_len = 128;
  int lut_entry_bits = 17;
  double hpf_cutoff_rad_s = 5.0;
  double a_phi = 15.0;
  double a_v = 1.0;
  double psi_rad = 0.0;
  int code_bits_internal = 16;
  int code_bits_output = 8;
  /// Dither runs at freq_multiplier * omega_p; the tick rate is set by
  /// omega_p alone.
  double freq_multiplier = 1.0;
  CodeBounds bounds = CodeBounds::Wrap;

  /// One LUT entry per tick: 2 pi / (omega_p * lut_len).
  double tick_period_s() const;
  double hpf_alpha() const;
  int code_frac_bits() const { return code_bits_internal - code_bits_output; }
  void validate() const;

  bool operator==(const LoopConfig&) const = default;
};

/// Default gains of the three hardware loops.
std::vector<LoopConfig> default_loop_configs(std::size_t count, bool distinct_frequencies = true);

// Fixed-point scalings.
inline constexpr int kLoopFracBits = 20;
inline constexpr std::int64_t kLoopOne = std::int64_t{1} << kLoopFracBits;
inline constexpr std::int64_t kAccumulatorMax = (std::int64_t{1} << 31) - 1;
inline constexpr std::int64_t kAccumulatorMin = -(std::int64_t{1} << 31);

/// One LUT entry: signed value in units of 2^-(lut_entry_bits - 2).
struct LutWord {
  std::int32_t value = 0;
  int frac_bits = 15;

  double as_double() const { return static_cast<double>(value) / static_cast<double>(1 << frac_bits); }
  /// Sign bit followed by the magnitude, packed into lut_entry_bits.
  std::uint32_t sign_magnitude_bits() const;
};

/// sin(2 pi index / lut_len), rounded to the LUT format.
LutWord lut_sine(const LoopConfig& cfg, int index);

struct HpfState {
  std::int32_t prev_in = 0;   // QWord LSBs
  std::int64_t prev_out = 0;  // Q.20

  bool operator==(const HpfState&) const = default;
};

/// y[n] = alpha (y[n-1] + x[n] - x[n-1]); returns y in Q.20.
std::int32_t hpf_step(const LoopConfig& cfg, HpfState& state, QWord x);

/// HPF output times the LUT sine at index + psi (in LUT entries); Q.20.
std::int32_t demodulate(const LoopConfig& cfg, std::int32_t hpf_out, int index);

/// Rounds an internal code word to an output code (wraps unless saturating).
int export_code(const LoopConfig& cfg, std::uint16_t word);

struct LoopState {
  std::uint32_t lut_phase = 0;  // LUT position, Q.8 entries
  HpfState hpf;
  bool primed = false;
  std::int64_t accumulator = 0;  // Q11.20
  std::uint16_t initial_code = 0;
  std::uint16_t code_estimate = 0;
  std::uint64_t iteration = 0;
  std::uint64_t saturations = 0;

  static LoopState reset(const LoopConfig& cfg, int initial_phase_code);

  int lut_index(const LoopConfig& cfg) const;
  /// Phase code driven when no dither is applied (top bits of the estimate).
  int exported_code(const LoopConfig& cfg) const;
  double accumulator_value() const {
    return static_cast<double>(accumulator) / static_cast<double>(kLoopOne);
  }

  bool operator==(const LoopState&) const = default;
};

/// Adds one demodulated product to the accumulator and recomputes the code
/// estimate. Returns the new estimate.
std::uint16_t accumulate(const LoopConfig& cfg, LoopState& state, std::int32_t demod);

struct LoopStepResult {
  int applied_code = 0;
  std::int32_t hpf_out = 0;
  std::int32_t demod = 0;
};

/// One tick: high-pass `bf_word` (measured under the code applied on the
/// previous tick), demodulate, accumulate, advance the LUT and emit the next
/// dithered code.
LoopStepResult loop_step(const LoopConfig& cfg, LoopState& state, QWord bf_word);

/// Dithered phase code for the current LUT position.
int perturbed_code(const LoopConfig& cfg, const LoopState& state);

/// Ticks after which every loop's dither returns to its starting phase.
std::uint64_t common_dither_period(std::span<const LoopConfig> cfgs);

/// Declares convergence once every loop's windowed mean demod stays below
/// `threshold` for `required_windows` consecutive windows.
class ConvergenceMonitor {
 public:
  static constexpr double kDefaultThreshold = 1.0 / 256.0;
  static constexpr int kDefaultWindows = 5;

  ConvergenceMonitor(std::size_t loops, std::uint64_t window_ticks,
                     double threshold = kDefaultThreshold,
                     int required_windows = kDefaultWindows);

  /// Feed one tick of demod values. Returns true when a window closes.
  bool observe(std::span<const std::int32_t> demods);
  bool converged() const { return quiet_windows_ >= required_windows_; }
  /// First tick of the current run of quiet windows.
  std::uint64_t quiet_since() const { return quiet_since_; }
  std::uint64_t window_ticks() const { return window_ticks_; }
  /// Largest |mean demod| in the last closed window.
  double last_window_peak() const { return last_peak_; }

 private:
  std::uint64_t window_ticks_;
  std::int64_t threshold_sum_;
  int required_windows_;
  std::vector<std::int64_t> sums_;
  std::uint64_t ticks_ = 0;
  std::uint64_t in_window_ = 0;
  int quiet_windows_ = 0;
  std::uint64_t quiet_since_ = 0;
  double last_peak_ = 0.0;
};

struct CalibrationTick {
  std::uint64_t tick = 0;
  std::vector<int> applied_codes;   // driven while BF_out was measured
  QWord objective;
  std::vector<int> code_estimates;  // after this tick's update
  std::vector<std::int32_t> demod;  // Q.20
  std::vector<double> accumulator;
  bool converged = false;
};

struct CalibrationTrace {
  std::vector<CalibrationTick> ticks;
  std::vector<int> final_codes;
  bool converged = false;
  std::optional<std::uint64_t> ticks_to_converge;
  /// Start tick of each convergence episode.
  std::vector<std::uint64_t> convergence_ticks;
  std::uint64_t saturations = 0;
};

/// Digitized objective for the given applied codes at a tick.
using ObjectiveProbe = std::function<QWord(std::uint64_t tick, std::span<const int> applied_codes)>;

struct CalibrationOptions {
  std::uint64_t tick_budget = 40000;
  /// Stop at the first convergence; otherwise run the full budget and log
  /// every episode.
  bool stop_on_converge = true;
  double convergence_threshold = ConvergenceMonitor::kDefaultThreshold;
  int convergence_windows = ConvergenceMonitor::kDefaultWindows;
};

/// Runs the loops in tick lockstep against one shared objective.
class LoopBank {
 public:
  LoopBank(std::vector<LoopConfig> cfgs, std::span<const int> initial_codes);

  std::size_t size() const { return cfgs_.size(); }
  const std::vector<LoopConfig>& configs() const { return cfgs_; }
  const std::vector<LoopState>& states() const { return states_; }
  const std::vector<int>& applied_codes() const { return applied_; }
  /// Exported codes: estimate averaged over the last full common dither
  /// period (the raw estimate ripples by about a code at the dither rate).
  /// Instantaneous until the first period completes.
  std::vector<int> code_estimates() const;
  std::uint64_t dither_period() const { return period_; }
  std::uint64_t saturations() const;

  /// Feeds one measured word to every loop; returns the per-loop results.
  std::vector<LoopStepResult> step(QWord bf_word);

 private:
  std::vector<LoopConfig> cfgs_;
  std::vector<LoopState> states_;
  std::vector<int> applied_;
  std::uint64_t period_ = 1;
  std::uint64_t in_period_ = 0;
  std::vector<std::uint16_t> period_ref_;
  std::vector<std::int64_t> period_sum_;
  std::vector<std::optional<std::uint16_t>> averaged_;
};

CalibrationTrace run_calibration(const std::vector<LoopConfig>& cfgs,
                                 std::span<const int> initial_codes,
                                 const ObjectiveProbe& probe,
                                 const CalibrationOptions& options = {});

/// Circular distance between two 8-bit phase codes.
int code_distance(int a, int b);

/// Starting codes for loops driving elements 1..loops, chosen inside the main
/// lobe so the loops do not climb a side lobe. Evaluates the noise-free
/// beamformer magnitude on a stride-16 grid over all loop codes jointly (or
/// coordinate-wise when the joint grid would exceed 65536 points); the
/// reference element and any element without a loop keep `base` settings.
std::vector<int> init_phase_codes(const ArrayGeometry& geom, const PlaneWaveSource& src,
                                  std::size_t loops, const ReceiverConfig& rx = {},
                                  std::span<const ChannelSettings> base = {});

}  // namespace flexarray
