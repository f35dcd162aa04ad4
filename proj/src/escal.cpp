#include "flexarray/escal.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

namespace flexarray {

namespace {

constexpr int kPhaseFracBits = 8;  // LUT position resolution, in entries

/// Arithmetic right shift with rounding half away from zero.
std::int64_t round_shift(std::int64_t v, int shift) {
  if (shift <= 0) return v << -shift;
  const std::int64_t half = std::int64_t{1} << (shift - 1);
  return v >= 0 ? (v + half) >> shift : -((-v + half) >> shift);
}

std::int32_t saturate_i32(std::int64_t v) {
  return static_cast<std::int32_t>(
      std::clamp<std::int64_t>(v, INT32_MIN, INT32_MAX));
}

std::int64_t alpha_q30(const LoopConfig& cfg) {
  return std::llround(cfg.hpf_alpha() * static_cast<double>(std::int64_t{1} << 30));
}

std::uint32_t phase_stride(const LoopConfig& cfg) {
  return static_cast<std::uint32_t>(std::llround(cfg.freq_multiplier * (1 << kPhaseFracBits)));
}

std::uint32_t phase_modulus(const LoopConfig& cfg) {
  return static_cast<std::uint32_t>(cfg.lut_len) << kPhaseFracBits;
}

int wrap_index(int index, int len) { return ((index % len) + len) % len; }

}  // namespace

double LoopConfig::tick_period_s() const {
  return 2.0 * kPi / (omega_p_rad_s * static_cast<double>(lut_len));
}

double LoopConfig::hpf_alpha() const {
  return 1.0 / (1.0 + hpf_cutoff_rad_s * tick_period_s());
}

void LoopConfig::validate() const {
  if (!(omega_p_rad_s > 0.0)) throw std::invalid_argument("omega_p must be positive");
  if (!(hpf_cutoff_rad_s > 0.0)) throw std::invalid_argument("HPF cut-off must be positive");
  if (!(omega_p_rad_s * freq_multiplier > hpf_cutoff_rad_s)) {
    throw std::invalid_argument("dither frequency must lie above the HPF cut-off");
  }
  if (lut_len < 4 || lut_len > 4096) throw std::invalid_argument("LUT length must be in 4..4096");
  if (lut_entry_bits < 3 || lut_entry_bits > 30) {
    throw std::invalid_argument("LUT entry width must be in 3..30 bits");
  }
  if (code_bits_output < 1 || code_bits_output > code_bits_internal || code_bits_internal > 16) {
    throw std::invalid_argument("code widths must satisfy 1 <= output <= internal <= 16");
  }
  if (!(a_phi >= 0.0) || !std::isfinite(a_phi)) throw std::invalid_argument("a_phi must be finite and >= 0");
  if (!std::isfinite(a_v)) throw std::invalid_argument("a_v must be finite");
  if (!std::isfinite(psi_rad)) throw std::invalid_argument("psi must be finite");
  if (!(freq_multiplier > 0.0) || freq_multiplier * (1 << kPhaseFracBits) < 1.0) {
    throw std::invalid_argument("dither frequency multiplier must be positive");
  }
}

std::vector<LoopConfig> default_loop_configs(std::size_t count, bool distinct_frequencies) {
  static constexpr double kGains[] = {15.0, 20.0, 25.0};
  static constexpr double kMultipliers[] = {1.0, 1.25, 1.5};
  std::vector<LoopConfig> out(count);
  for (std::size_t i = 0; i < count; ++i) {
    out[i].a_phi = kGains[i % 3];
    out[i].freq_multiplier = distinct_frequencies ? kMultipliers[i % 3] : 1.0;
  }
  return out;
}

std::uint32_t LutWord::sign_magnitude_bits() const {
  const auto magnitude = static_cast<std::uint32_t>(value < 0 ? -value : value);
  const std::uint32_t sign = value < 0 ? 1u : 0u;
  return (sign << (frac_bits + 1)) | magnitude;
}

LutWord lut_sine(const LoopConfig& cfg, int index) {
  if (index < 0 || index >= cfg.lut_len) {
    throw std::out_of_range("lut_sine: index " + std::to_string(index) + " out of range");
  }
  LutWord w;
  w.frac_bits = cfg.lut_entry_bits - 2;
  const double unit = static_cast<double>(std::int64_t{1} << w.frac_bits);
  const double s = std::sin(2.0 * kPi * index / static_cast<double>(cfg.lut_len));
  w.value = static_cast<std::int32_t>(std::llround(s * unit));
  return w;
}

std::int32_t hpf_step(const LoopConfig& cfg, HpfState& state, QWord x) {
  const std::int32_t x_lsbs = x.signed_lsbs();
  const std::int64_t diff =
      static_cast<std::int64_t>(x_lsbs - state.prev_in) << (kLoopFracBits - QWord::kFracBits);
  const std::int64_t y = round_shift(alpha_q30(cfg) * (state.prev_out + diff), 30);
  state.prev_in = x_lsbs;
  state.prev_out = saturate_i32(y);
  return static_cast<std::int32_t>(state.prev_out);
}

std::int32_t demodulate(const LoopConfig& cfg, std::int32_t hpf_out, int index) {
  const auto psi_entries = static_cast<int>(
      std::llround(cfg.psi_rad / (2.0 * kPi) * static_cast<double>(cfg.lut_len)));
  const LutWord s = lut_sine(cfg, wrap_index(index + psi_entries, cfg.lut_len));
  return saturate_i32(round_shift(static_cast<std::int64_t>(hpf_out) * s.value, s.frac_bits));
}

LoopState LoopState::reset(const LoopConfig& cfg, int initial_phase_code) {
  cfg.validate();
  const int max_code = (1 << cfg.code_bits_output) - 1;
  if (initial_phase_code < 0 || initial_phase_code > max_code) {
    throw std::out_of_range("initial phase code out of range");
  }
  LoopState s;
  s.initial_code = static_cast<std::uint16_t>(initial_phase_code << cfg.code_frac_bits());
  s.code_estimate = s.initial_code;
  return s;
}

int LoopState::lut_index(const LoopConfig& cfg) const {
  return static_cast<int>(lut_phase >> kPhaseFracBits) % cfg.lut_len;
}

// round to nearest; wraps past the top code unless saturating
int export_code(const LoopConfig& cfg, std::uint16_t word) {
  const int frac = cfg.code_frac_bits();
  const int max_code = (1 << cfg.code_bits_output) - 1;
  const int code = (static_cast<int>(word) + (1 << (frac - 1))) >> frac;
  if (cfg.bounds == CodeBounds::Saturate) return std::min(code, max_code);
  return code & max_code;
}

int LoopState::exported_code(const LoopConfig& cfg) const {
  return export_code(cfg, code_estimate);
}

std::uint16_t accumulate(const LoopConfig& cfg, LoopState& state, std::int32_t demod) {
  std::int64_t acc = state.accumulator + demod;
  if (acc > kAccumulatorMax || acc < kAccumulatorMin) {
    acc = std::clamp(acc, kAccumulatorMin, kAccumulatorMax);
    ++state.saturations;
  }
  const std::int64_t gain_q16 = std::llround(cfg.a_phi * cfg.a_v * 65536.0);
  const std::int64_t offset = round_shift(acc * gain_q16, kLoopFracBits + 16);
  const std::int64_t word_mask = (std::int64_t{1} << cfg.code_bits_internal) - 1;
  std::int64_t estimate = state.initial_code + offset;

  if (cfg.bounds == CodeBounds::Saturate && (estimate < 0 || estimate > word_mask)) {
    // Conditional integration: hold the accumulator so it cannot wind up.
    ++state.saturations;
    estimate = std::clamp<std::int64_t>(estimate, 0, word_mask);
    acc = state.accumulator;
  } else {
    estimate &= word_mask;
  }
  state.accumulator = acc;
  state.code_estimate = static_cast<std::uint16_t>(estimate);
  return state.code_estimate;
}

int perturbed_code(const LoopConfig& cfg, const LoopState& state) {
  const LutWord s = lut_sine(cfg, state.lut_index(cfg));
  const std::int64_t a_q8 = std::llround(cfg.a_phi * 256.0);
  const int frac = cfg.code_frac_bits();
  const std::int64_t dither = round_shift(a_q8 * s.value * (std::int64_t{1} << frac), s.frac_bits + 8);
  // half-LSB offset: applied codes are unbiased w.r.t. the estimate
  const std::int64_t word =
      static_cast<std::int64_t>(state.code_estimate) + dither + (std::int64_t{1} << (frac - 1));
  const std::int64_t code_mask = (std::int64_t{1} << cfg.code_bits_output) - 1;
  if (cfg.bounds == CodeBounds::Saturate) {
    return static_cast<int>(std::clamp<std::int64_t>(word >> frac, 0, code_mask));
  }
  return static_cast<int>((word >> frac) & code_mask);
}

LoopStepResult loop_step(const LoopConfig& cfg, LoopState& state, QWord bf_word) {
  if (!state.primed) {
    state.hpf.prev_in = bf_word.signed_lsbs();
    state.primed = true;
  }
  LoopStepResult r;
  const int index = state.lut_index(cfg);
  r.hpf_out = hpf_step(cfg, state.hpf, bf_word);
  r.demod = demodulate(cfg, r.hpf_out, index);
  accumulate(cfg, state, r.demod);
  state.lut_phase = (state.lut_phase + phase_stride(cfg)) % phase_modulus(cfg);
  ++state.iteration;
  r.applied_code = perturbed_code(cfg, state);
  return r;
}

std::uint64_t common_dither_period(std::span<const LoopConfig> cfgs) {
  std::uint64_t period = 1;
  for (const auto& cfg : cfgs) {
    const std::uint64_t modulus = phase_modulus(cfg);
    const std::uint64_t ticks = modulus / std::gcd<std::uint64_t>(modulus, phase_stride(cfg));
    period = std::lcm(period, ticks);
  }
  return period;
}

ConvergenceMonitor::ConvergenceMonitor(std::size_t loops, std::uint64_t window_ticks,
                                       double threshold, int required_windows)
    : window_ticks_(window_ticks),
      threshold_sum_(std::llround(threshold * static_cast<double>(kLoopOne) *
                                  static_cast<double>(window_ticks))),
      required_windows_(required_windows),
      sums_(loops, 0) {
  if (window_ticks == 0 || required_windows < 1) {
    throw std::invalid_argument("convergence window must be non-empty");
  }
}

bool ConvergenceMonitor::observe(std::span<const std::int32_t> demods) {
  for (std::size_t i = 0; i < sums_.size(); ++i) sums_[i] += demods[i];
  ++ticks_;
  if (++in_window_ < window_ticks_) return false;

  std::int64_t peak = 0;
  for (auto& s : sums_) {
    peak = std::max<std::int64_t>(peak, s < 0 ? -s : s);
    s = 0;
  }
  in_window_ = 0;
  last_peak_ = static_cast<double>(peak) / static_cast<double>(kLoopOne) /
               static_cast<double>(window_ticks_);
  if (peak < threshold_sum_) {
    if (quiet_windows_ == 0) quiet_since_ = ticks_ - window_ticks_;
    ++quiet_windows_;
  } else {
    quiet_windows_ = 0;
  }
  return true;
}

LoopBank::LoopBank(std::vector<LoopConfig> cfgs, std::span<const int> initial_codes)
    : cfgs_(std::move(cfgs)) {
  if (initial_codes.size() != cfgs_.size()) {
    throw std::invalid_argument("one initial code per loop is required");
  }
  states_.reserve(cfgs_.size());
  for (std::size_t i = 0; i < cfgs_.size(); ++i) {
    states_.push_back(LoopState::reset(cfgs_[i], initial_codes[i]));
    applied_.push_back(perturbed_code(cfgs_[i], states_.back()));
  }
  period_ = common_dither_period(cfgs_);
  for (const auto& st : states_) period_ref_.push_back(st.code_estimate);
  period_sum_.assign(cfgs_.size(), 0);
  averaged_.assign(cfgs_.size(), std::nullopt);
}

std::vector<int> LoopBank::code_estimates() const {
  std::vector<int> out(cfgs_.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = averaged_[i] ? export_code(cfgs_[i], *averaged_[i]) : states_[i].exported_code(cfgs_[i]);
  }
  return out;
}

std::uint64_t LoopBank::saturations() const {
  std::uint64_t n = 0;
  for (const auto& s : states_) n += s.saturations;
  return n;
}

std::vector<LoopStepResult> LoopBank::step(QWord bf_word) {
  std::vector<LoopStepResult> out(cfgs_.size());
  for (std::size_t i = 0; i < cfgs_.size(); ++i) {
    out[i] = loop_step(cfgs_[i], states_[i], bf_word);
    applied_[i] = out[i].applied_code;
    // offsets from the period start; int16 keeps wrapped words continuous
    const std::uint16_t diff = static_cast<std::uint16_t>(states_[i].code_estimate - period_ref_[i]);
    period_sum_[i] += cfgs_[i].bounds == CodeBounds::Wrap ? static_cast<std::int16_t>(diff)
                                                          : std::int64_t{states_[i].code_estimate} - period_ref_[i];
  }
  if (++in_period_ == period_) {
    const auto n = static_cast<std::int64_t>(period_);
    for (std::size_t i = 0; i < cfgs_.size(); ++i) {
      const std::int64_t mean_off = (2 * period_sum_[i] + (period_sum_[i] >= 0 ? n : -n)) / (2 * n);
      std::int64_t word = std::int64_t{period_ref_[i]} + mean_off;
      const std::int64_t mask = (std::int64_t{1} << cfgs_[i].code_bits_internal) - 1;
      word = cfgs_[i].bounds == CodeBounds::Wrap ? (word & mask) : std::clamp<std::int64_t>(word, 0, mask);
      averaged_[i] = static_cast<std::uint16_t>(word);
      period_ref_[i] = states_[i].code_estimate;
      period_sum_[i] = 0;
    }
    in_period_ = 0;
  }
  return out;
}

CalibrationTrace run_calibration(const std::vector<LoopConfig>& cfgs,
                                 std::span<const int> initial_codes,
                                 const ObjectiveProbe& probe,
                                 const CalibrationOptions& options) {
  if (cfgs.empty()) throw std::invalid_argument("run_calibration: no loops");
  if (options.tick_budget == 0) throw std::invalid_argument("run_calibration: empty tick budget");

  LoopBank bank(cfgs, initial_codes);
  ConvergenceMonitor monitor(cfgs.size(), common_dither_period(cfgs),
                             options.convergence_threshold, options.convergence_windows);
  CalibrationTrace trace;
  trace.ticks.reserve(static_cast<std::size_t>(options.tick_budget));
  std::vector<std::int32_t> demods(cfgs.size());
  bool was_converged = false;

  for (std::uint64_t tick = 0; tick < options.tick_budget; ++tick) {
    CalibrationTick rec;
    rec.tick = tick;
    rec.applied_codes = bank.applied_codes();
    rec.objective = probe(tick, rec.applied_codes);

    const auto results = bank.step(rec.objective);
    for (std::size_t i = 0; i < results.size(); ++i) demods[i] = results[i].demod;
    monitor.observe(demods);

    rec.code_estimates = bank.code_estimates();
    rec.demod = demods;
    for (const auto& s : bank.states()) rec.accumulator.push_back(s.accumulator_value());
    rec.converged = monitor.converged();
    if (rec.converged && !was_converged) trace.convergence_ticks.push_back(monitor.quiet_since());
    was_converged = rec.converged;
    trace.ticks.push_back(std::move(rec));

    if (was_converged && options.stop_on_converge) break;
  }

  trace.final_codes = bank.code_estimates();
  trace.converged = was_converged;
  if (!trace.convergence_ticks.empty()) trace.ticks_to_converge = trace.convergence_ticks.front();
  trace.saturations = bank.saturations();
  return trace;
}

int code_distance(int a, int b) {
  const int d = wrap_index(a - b, 256);
  return std::min(d, 256 - d);
}

}  // namespace flexarray
