#pragma once

#include <complex>
#include <cstdint>
#include <span>

namespace flexarray {

/// 16-bit sign-magnitude word: MSB sign, 5 integer bits, 10 fractional bits.
/// Representable magnitudes run from 0 to 32767 / 1024.
struct QWord {
  static constexpr int kFracBits = 10;
  static constexpr std::uint16_t kSignBit = 0x8000;
  static constexpr std::uint16_t kMagnitudeMask = 0x7FFF;
  static constexpr double kLsb = 1.0 / 1024.0;
  static constexpr double kMax = 32767.0 / 1024.0;

  std::uint16_t raw = 0;

  bool negative() const { return (raw & kSignBit) != 0; }
  std::uint16_t magnitude() const { return raw & kMagnitudeMask; }
  /// Two's-complement count of LSBs.
  std::int32_t signed_lsbs() const {
    return negative() ? -static_cast<std::int32_t>(magnitude()) : magnitude();
  }
  double value() const { return static_cast<double>(signed_lsbs()) * kLsb; }

  bool operator==(const QWord&) const = default;
};

/// Round to nearest LSB (ties away from zero), saturating at +-kMax.
/// NaN is a contract violation.
QWord quantize(double x);

struct BfSample {
  double i_component = 0.0;
  double q_component = 0.0;
  double t_s = 0.0;

  std::complex<double> value() const { return {i_component, q_component}; }
};

/// Complex sum of the per-channel samples.
std::complex<double> bf_out(std::span<const std::complex<double>> samples);

/// What the calibration loop maximizes.
enum class ObjectiveKind { Magnitude, Power, InPhase };

double objective(const BfSample& bf, ObjectiveKind kind = ObjectiveKind::Magnitude);
/// Mean of objective() over a dwell window.
double objective(std::span<const BfSample> window,
                 ObjectiveKind kind = ObjectiveKind::Magnitude);

/// Maps analog BF_out onto the 16-bit loop input. The scale is chosen so the
/// noise-free coherent maximum lands on `target` (default 28, leaving headroom
/// below the +32 ceiling).
class BfNormalizer {
 public:
  static constexpr double kDefaultTarget = 28.0;

  BfNormalizer() = default;
  BfNormalizer(double coherent_max, double target = kDefaultTarget);

  double scale() const { return scale_; }
  QWord digitize(double objective_value) const { return quantize(objective_value * scale_); }

 private:
  double scale_ = 1.0;
};

}  // namespace flexarray
