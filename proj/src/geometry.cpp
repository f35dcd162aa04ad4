#include "flexarray/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace flexarray {

ArrayGeometry::ArrayGeometry(std::size_t arc_elements, double spacing_m,
                             double radius_m, std::size_t columns)
    : arc_elements_(arc_elements),
      columns_(columns),
      spacing_m_(spacing_m),
      radius_m_(radius_m),
      arc_angles_(arc_elements, 0.0) {
  if (arc_elements == 0 || columns == 0) {
    throw std::invalid_argument("array needs at least one element");
  }
  if (!(spacing_m > 0.0) || !std::isfinite(spacing_m)) {
    throw std::invalid_argument("element spacing must be positive");
  }
  if (!(radius_m > 0.0)) {
    throw std::domain_error("curvature radius must be positive");
  }
  if (std::isfinite(radius_m)) {
    if (static_cast<double>(arc_elements - 1) * spacing_m / radius_m >= 2.0 * kPi) {
      throw std::invalid_argument("arc is longer than the cylinder circumference");
    }
    for (std::size_t n = 0; n < arc_elements; ++n) {
      arc_angles_[n] = static_cast<double>(n) * spacing_m / radius_m;
    }
  }
}

ArrayGeometry ArrayGeometry::conformal(std::size_t arc_elements,
                                       double spacing_m, double radius_m,
                                       std::size_t columns) {
  return ArrayGeometry(arc_elements, spacing_m, radius_m, columns);
}

ArrayGeometry ArrayGeometry::flat(std::size_t arc_elements, double spacing_m,
                                  std::size_t columns) {
  return ArrayGeometry(arc_elements, spacing_m,
                       std::numeric_limits<double>::infinity(), columns);
}

bool ArrayGeometry::is_flat() const { return std::isinf(radius_m_); }

double ArrayGeometry::element_angle(std::size_t element) const {
  if (element >= n_elements()) {
    throw std::out_of_range("element index " + std::to_string(element) +
                            " out of range");
  }
  return arc_angles_[element % arc_elements_];
}

double ArrayGeometry::arc_position_m(std::size_t element) const {
  if (element >= n_elements()) {
    throw std::out_of_range("element index " + std::to_string(element) +
                            " out of range");
  }
  return static_cast<double>(element % arc_elements_) * spacing_m_;
}

double PlaneWaveSource::amplitude_of(std::size_t element) const {
  if (element_amplitudes.empty()) return amplitude;
  return element_amplitudes.at(element);
}

void PlaneWaveSource::validate() const {
  if (!(std::abs(aoa_rad) <= kPi / 2.0)) {
    throw std::domain_error("angle of arrival must lie in [-pi/2, pi/2]");
  }
  if (!(freq_rf_hz > 0.0)) throw std::domain_error("carrier must be positive");
  if (!(amplitude >= 0.0)) throw std::domain_error("amplitude must be >= 0");
  for (double a : element_amplitudes) {
    if (!(a >= 0.0)) throw std::domain_error("amplitude must be >= 0");
  }
}

double chord_length(double radius_m, double phi_rad) {
  if (!(radius_m > 0.0)) {
    throw std::domain_error("chord_length: radius must be positive");
  }
  if (!(phi_rad >= 0.0 && phi_rad <= 2.0 * kPi)) {
    throw std::domain_error("chord_length: phi must lie in [0, 2 pi]");
  }
  return 2.0 * radius_m * std::sin(0.5 * phi_rad);
}

double path_delta(double radius_m, double theta_rad, double phi_n_rad) {
  if (!(radius_m > 0.0)) {
    throw std::domain_error("path_delta: radius must be positive");
  }
  // Product form of R cos(theta - phi) - R cos(theta); the difference of two
  // nearly equal cosines loses all precision once R >> d.
  return 2.0 * radius_m * std::sin(0.5 * phi_n_rad) *
         std::sin(theta_rad - 0.5 * phi_n_rad);
}

std::vector<double> path_deltas(const ArrayGeometry& geom, double theta_rad) {
  std::vector<double> out(geom.n_elements());
  const double sin_theta = std::sin(theta_rad);
  for (std::size_t e = 0; e < out.size(); ++e) {
    if (geom.is_flat()) {
      out[e] = geom.arc_position_m(e) * sin_theta;
    } else {
      out[e] = path_delta(geom.radius_m(), theta_rad, geom.element_angle(e));
    }
  }
  return out;
}

std::vector<double> geometric_phases(const ArrayGeometry& geom,
                                     const PlaneWaveSource& src) {
  auto phases = path_deltas(geom, src.aoa_rad);
  const double k = src.wavenumber();
  for (double& p : phases) p *= k;
  return phases;
}

std::complex<double> array_factor(const ArrayGeometry& geom,
                                  const PlaneWaveSource& src,
                                  std::span<const std::complex<double>> weights) {
  if (weights.size() != geom.n_elements()) {
    throw std::invalid_argument("array_factor: expected " +
                                std::to_string(geom.n_elements()) +
                                " weights, got " +
                                std::to_string(weights.size()));
  }
  const auto phases = geometric_phases(geom, src);
  std::complex<double> sum{0.0, 0.0};
  for (std::size_t e = 0; e < phases.size(); ++e) {
    sum += weights[e] * src.amplitude_of(e) * std::polar(1.0, phases[e]);
  }
  return sum;
}

namespace {

std::size_t peak_index(const Pattern& pattern, double target_theta_rad) {
  if (pattern.magnitude.empty() ||
      pattern.magnitude.size() != pattern.angles_rad.size()) {
    throw std::invalid_argument("pattern is empty or malformed");
  }
  const auto& mag = pattern.magnitude;
  const double top = *std::max_element(mag.begin(), mag.end());
  // Lobes within kLobeTieTolerance of the top are the same height up to grid
  // sampling (grating lobes); take the one nearest the target.
  const double floor = top * (1.0 - kLobeTieTolerance);
  std::size_t best = mag.size();
  for (std::size_t i = 0; i < mag.size(); ++i) {
    const bool local_max = (i == 0 || mag[i] >= mag[i - 1]) && (i + 1 == mag.size() || mag[i] >= mag[i + 1]);
    if (!local_max || mag[i] < floor) continue;
    if (best == mag.size() || std::abs(pattern.angles_rad[i] - target_theta_rad) <
                                  std::abs(pattern.angles_rad[best] - target_theta_rad)) {
      best = i;
    }
  }
  return best;
}

}  // namespace

double pattern_peak_rad(const Pattern& pattern, double target_theta_rad) {
  return pattern.angles_rad[peak_index(pattern, target_theta_rad)];
}

double beam_pointing_error(const Pattern& pattern, double target_theta_rad) {
  return rad_to_deg(
      std::abs(pattern_peak_rad(pattern, target_theta_rad) - target_theta_rad));
}

double main_lobe_width_deg(const Pattern& pattern, double drop_db) {
  const std::size_t peak = peak_index(pattern, 0.0);
  const double floor = pattern.magnitude[peak] * std::pow(10.0, -drop_db / 20.0);
  std::size_t lo = peak;
  std::size_t hi = peak;
  while (lo > 0 && pattern.magnitude[lo - 1] >= floor) --lo;
  while (hi + 1 < pattern.magnitude.size() && pattern.magnitude[hi + 1] >= floor) ++hi;
  return rad_to_deg(pattern.angles_rad[hi] - pattern.angles_rad[lo]);
}

}  // namespace flexarray
