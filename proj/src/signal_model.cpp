#include "flexarray/signal_model.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace flexarray {

namespace {

void check_range(const char* what, int code, int max) {
  if (code < 0 || code > max) {
    throw std::out_of_range(std::string(what) + " " + std::to_string(code) +
                            " outside 0.." + std::to_string(max));
  }
}

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

}  // namespace

void ChannelSettings::validate() const {
  check_range("phase code", phase_code, kPhaseCodeMax);
  check_range("delay code", delay_code, kDelayCodeMax);
  check_range("gain code", gain_code, kGainCodeMax);
}

double phase_lsb_rad(PhaseMapping mapping) {
  switch (mapping) {
    case PhaseMapping::Uniform256:
      return 2.0 * kPi / 256.0;
    case PhaseMapping::Quadrant64:
      return 2.0 * kPi / 64.0;
  }
  return 2.0 * kPi / 256.0;
}

double phase_from_code(int phase_code, PhaseMapping mapping) {
  check_range("phase code", phase_code, kPhaseCodeMax);
  if (mapping == PhaseMapping::Quadrant64) {
    return static_cast<double>(phase_code % 64) * phase_lsb_rad(mapping);
  }
  return static_cast<double>(phase_code) * phase_lsb_rad(mapping);
}

double delay_from_code(int delay_code) {
  check_range("delay code", delay_code, kDelayCodeMax);
  return static_cast<double>(delay_code) * kDelayStepS;
}

double gain_from_code(int gain_code) {
  check_range("gain code", gain_code, kGainCodeMax);
  return kGainMinDb + static_cast<double>(gain_code) * (kGainMaxDb - kGainMinDb) /
                          static_cast<double>(kGainCodeMax);
}

double gain_linear(int gain_code) {
  return std::pow(10.0, gain_from_code(gain_code) / 20.0);
}

void NoiseConfig::validate() const {
  if (enabled && !std::isfinite(snr_db)) {
    throw std::domain_error("noise SNR must be finite when noise is enabled");
  }
}

NoiseSource::NoiseSource(const NoiseConfig& cfg, std::size_t n_elements)
    : cfg_(cfg) {
  cfg_.validate();
  streams_.reserve(n_elements);
  for (std::size_t e = 0; e < n_elements; ++e) {
    streams_.emplace_back(splitmix64(cfg.seed ^ splitmix64(e + 1)));
  }
}

double NoiseSource::uniform(std::size_t element) {
  // (0, 1], so log() below stays finite.
  const std::uint64_t bits = streams_.at(element)() >> 11;
  return (static_cast<double>(bits) + 1.0) * 0x1.0p-53;
}

std::complex<double> NoiseSource::draw(std::size_t element,
                                       double signal_amplitude) {
  if (!cfg_.enabled) return {0.0, 0.0};
  const double u1 = uniform(element);
  const double u2 = uniform(element);
  const double radius = std::sqrt(-2.0 * std::log(u1));
  const double angle = 2.0 * kPi * u2;
  // Per-component sigma so that E|n|^2 = A^2 / SNR.
  const double sigma = signal_amplitude *
                       std::pow(10.0, -cfg_.snr_db / 20.0) / std::sqrt(2.0);
  return {sigma * radius * std::cos(angle), sigma * radius * std::sin(angle)};
}

std::complex<double> channel_sample_with_phase(const PlaneWaveSource& src,
                                               std::size_t element,
                                               double geometric_phase_rad,
                                               const ChannelSettings& settings,
                                               const ReceiverConfig& rx,
                                               double t_s, NoiseSource* noise) {
  settings.validate();
  const double amplitude = src.amplitude_of(element) * gain_linear(settings.gain_code);
  const double t_sample = t_s - delay_from_code(settings.delay_code);
  const double baseband = 2.0 * kPi * (src.freq_rf_hz - rx.f_lo_hz) * t_sample;
  const double phase = baseband + geometric_phase_rad +
                       phase_from_code(settings.phase_code, rx.phase_mapping);
  std::complex<double> s = std::polar(amplitude, phase);
  if (noise != nullptr && noise->enabled()) s += noise->draw(element, amplitude);
  return s;
}

std::complex<double> channel_sample(const ArrayGeometry& geom,
                                    const PlaneWaveSource& src,
                                    std::size_t element,
                                    const ChannelSettings& settings,
                                    const ReceiverConfig& rx, double t_s,
                                    NoiseSource* noise) {
  if (element >= geom.n_elements()) {
    throw std::out_of_range("channel_sample: element index out of range");
  }
  const double delta = geom.is_flat()
                           ? geom.arc_position_m(element) * std::sin(src.aoa_rad)
                           : path_delta(geom.radius_m(), src.aoa_rad,
                                        geom.element_angle(element));
  return channel_sample_with_phase(src, element, src.wavenumber() * delta,
                                   settings, rx, t_s, noise);
}

}  // namespace flexarray
