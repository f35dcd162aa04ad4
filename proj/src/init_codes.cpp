#include <cmath>
#include <complex>
#include <stdexcept>

#include "flexarray/escal.hpp"

namespace flexarray {

namespace {

constexpr int kCoarseStride = 16;
constexpr std::size_t kJointGridLimit = 65536;

class CoarseObjective {
 public:
  CoarseObjective(const ArrayGeometry& geom, const PlaneWaveSource& src,
                  const ReceiverConfig& rx, std::span<const ChannelSettings> base)
      : rx_(rx), phases_(geometric_phases(geom, src)), settings_(geom.n_elements()) {
    for (std::size_t e = 0; e < settings_.size() && e < base.size(); ++e) settings_[e] = base[e];
    amplitudes_.resize(settings_.size());
    for (std::size_t e = 0; e < settings_.size(); ++e) {
      amplitudes_[e] = src.amplitude_of(e) * gain_linear(settings_[e].gain_code);
    }
  }

  double operator()(std::span<const int> loop_codes) const {
    std::complex<double> sum{0.0, 0.0};
    for (std::size_t e = 0; e < phases_.size(); ++e) {
      const int code = (e >= 1 && e - 1 < loop_codes.size()) ? loop_codes[e - 1]
                                                             : settings_[e].phase_code;
      sum += std::polar(amplitudes_[e], phases_[e] + phase_from_code(code, rx_.phase_mapping));
    }
    return std::abs(sum);
  }

  int nominal(std::size_t loop) const { return settings_[loop + 1].phase_code; }

 private:
  ReceiverConfig rx_;
  std::vector<double> phases_;
  std::vector<ChannelSettings> settings_;
  std::vector<double> amplitudes_;
};

}  // namespace

std::vector<int> init_phase_codes(const ArrayGeometry& geom, const PlaneWaveSource& src,
                                  std::size_t loops, const ReceiverConfig& rx,
                                  std::span<const ChannelSettings> base) {
  if (loops + 1 > geom.n_elements()) {
    throw std::invalid_argument("init_phase_codes: at most n_elements - 1 loops");
  }
  const CoarseObjective f(geom, src, rx, base);
  constexpr int kSteps = 256 / kCoarseStride;
  std::vector<int> best(loops);
  for (std::size_t i = 0; i < loops; ++i) best[i] = f.nominal(i);
  if (loops == 0) return best;

  std::size_t grid = 1;
  for (std::size_t i = 0; i < loops && grid <= kJointGridLimit; ++i) grid *= kSteps;

  if (grid <= kJointGridLimit) {
    std::vector<int> codes(loops, 0);
    double best_value = -1.0;
    for (std::size_t point = 0; point < grid; ++point) {
      std::size_t rest = point;
      for (std::size_t i = loops; i-- > 0;) {
        codes[i] = static_cast<int>(rest % kSteps) * kCoarseStride;
        rest /= kSteps;
      }
      const double v = f(codes);
      if (v > best_value) {
        best_value = v;
        best = codes;
      }
    }
    return best;
  }

  // Coordinate sweeps from the nominal codes until nothing moves.
  double best_value = f(best);
  for (bool moved = true; moved;) {
    moved = false;
    for (std::size_t i = 0; i < loops; ++i) {
      std::vector<int> trial = best;
      for (int c = 0; c < 256; c += kCoarseStride) {
        trial[i] = c;
        const double v = f(trial);
        if (v > best_value) {
          best_value = v;
          best[i] = c;
          moved = true;
        }
      }
    }
  }
  return best;
}

}  // namespace flexarray
