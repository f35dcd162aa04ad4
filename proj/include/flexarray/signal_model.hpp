#pragma once

#include <complex>
#include <cstddef>
#include <cstdint>
#include <random>
#include <vector>

#include "flexarray/geometry.hpp"

namespace flexarray {

inline constexpr int kPhaseCodeMax = 255;
inline constexpr int kDelayCodeMax = 63;
inline constexpr int kGainCodeMax = 7;
inline constexpr double kDelayStepS = 76e-12;
inline constexpr double kGainMinDb = 7.0;
inline constexpr double kGainMaxDb = 10.0;

/// Control words of one receive channel.
struct ChannelSettings {
  int phase_code = 0;  // 8-bit phase shifter
  int delay_code = 0;  // 6-bit phase interpolator
  int gain_code = 0;   // 3-bit gain

  void validate() const;
  bool operator==(const ChannelSettings&) const = default;
};

/// How a phase code maps to radians. Uniform256 spreads 256 codes over 2 pi;
/// Quadrant64 uses a 5.625 degree step (16 codes per quadrant) and wraps.
enum class PhaseMapping { Uniform256, Quadrant64 };

double phase_lsb_rad(PhaseMapping mapping);
double phase_from_code(int phase_code, PhaseMapping mapping = PhaseMapping::Uniform256);
double delay_from_code(int delay_code);
double gain_from_code(int gain_code);
/// Amplitude ratio for gain_from_code(gain_code).
double gain_linear(int gain_code);

struct NoiseConfig {
  bool enabled = false;
  double snr_db = 30.0;
  std::uint64_t seed = 1;

  void validate() const;
  bool operator==(const NoiseConfig&) const = default;
};

/// Complex white Gaussian noise with one independent stream per element.
///
/// Streams are mt19937_64 seeded through splitmix64 from (seed, element), and
/// normals come from Box-Muller on 53-bit uniforms, so the sequence depends on
/// nothing implementation-defined.
class NoiseSource {
 public:
  NoiseSource(const NoiseConfig& cfg, std::size_t n_elements);

  /// Draw for one element; `signal_amplitude` sets the per-element SNR.
  std::complex<double> draw(std::size_t element, double signal_amplitude);
  bool enabled() const { return cfg_.enabled; }

 private:
  double uniform(std::size_t element);

  NoiseConfig cfg_;
  std::vector<std::mt19937_64> streams_;
};

/// Receiver front-end settings shared by all channels.
struct ReceiverConfig {
  /// Homodyne when equal to the carrier.
  double f_lo_hz = 2.1e9;
  PhaseMapping phase_mapping = PhaseMapping::Uniform256;

  bool operator==(const ReceiverConfig&) const = default;
};

/// A_n g exp(j 2 pi (f_RF - f_LO)(t - tau)) exp(j phi_ant,n) exp(j phi_n),
/// plus noise when a source is given and enabled.
std::complex<double> channel_sample(const ArrayGeometry& geom,
                                    const PlaneWaveSource& src,
                                    std::size_t element,
                                    const ChannelSettings& settings,
                                    const ReceiverConfig& rx, double t_s,
                                    NoiseSource* noise = nullptr);

/// Same as channel_sample but with the geometric phase supplied by the
/// caller, for loops that evaluate many samples under one geometry.
std::complex<double> channel_sample_with_phase(const PlaneWaveSource& src,
                                               std::size_t element,
                                               double geometric_phase_rad,
                                               const ChannelSettings& settings,
                                               const ReceiverConfig& rx,
                                               double t_s,
                                               NoiseSource* noise = nullptr);

}  // namespace flexarray
