#include "flexarray/beamformer.hpp"

#include <cmath>
#include <stdexcept>

namespace flexarray {

QWord quantize(double x) {
  if (std::isnan(x)) throw std::invalid_argument("quantize: NaN input");
  const double lsbs = std::round(std::abs(x) * 1024.0);
  const auto magnitude = lsbs >= static_cast<double>(QWord::kMagnitudeMask)
                             ? QWord::kMagnitudeMask
                             : static_cast<std::uint16_t>(lsbs);
  QWord q;
  q.raw = magnitude;
  if (x < 0.0 && magnitude != 0) q.raw |= QWord::kSignBit;
  return q;
}

std::complex<double> bf_out(std::span<const std::complex<double>> samples) {
  if (samples.empty()) throw std::invalid_argument("bf_out: no channel samples");
  std::complex<double> sum{0.0, 0.0};
  for (const auto& s : samples) sum += s;
  return sum;
}

double objective(const BfSample& bf, ObjectiveKind kind) {
  switch (kind) {
    case ObjectiveKind::Magnitude:
      return std::hypot(bf.i_component, bf.q_component);
    case ObjectiveKind::Power:
      return bf.i_component * bf.i_component + bf.q_component * bf.q_component;
    case ObjectiveKind::InPhase:
      return bf.i_component;
  }
  return 0.0;
}

double objective(std::span<const BfSample> window, ObjectiveKind kind) {
  if (window.empty()) return 0.0;
  double sum = 0.0;
  for (const auto& s : window) sum += objective(s, kind);
  return sum / static_cast<double>(window.size());
}

BfNormalizer::BfNormalizer(double coherent_max, double target) {
  if (!(coherent_max > 0.0) || !(target > 0.0)) {
    throw std::invalid_argument("BfNormalizer: full scale must be positive");
  }
  scale_ = target / coherent_max;
}

}  // namespace flexarray
