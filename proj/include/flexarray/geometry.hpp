#pragma once

#include <complex>
#include <cstddef>
#include <span>
#include <vector>

namespace flexarray {

inline constexpr double kSpeedOfLight = 299792458.0;
inline constexpr double kPi = 3.14159265358979323846;

inline constexpr double deg_to_rad(double deg) { return deg * kPi / 180.0; }
inline constexpr double rad_to_deg(double rad) { return rad * 180.0 / kPi; }

/// Receive array printed on a sheet that is bent over a cylinder of radius R.
///
/// Elements along the bent axis ("arc") sit at angular positions
/// phi_n = n * d / R, so arc length is preserved under bending. An optional
/// number of columns replicates the arc along the cylinder axis; those copies
/// see the same path lengths for a source in the bending plane. Element e maps
/// to arc position e % arc_elements and column e / arc_elements, so element 0
/// is always the reference.
class ArrayGeometry {
 public:
  static ArrayGeometry conformal(std::size_t arc_elements, double spacing_m,
                                 double radius_m, std::size_t columns = 1);
  static ArrayGeometry flat(std::size_t arc_elements, double spacing_m,
                            std::size_t columns = 1);

  std::size_t n_elements() const { return arc_elements_ * columns_; }
  std::size_t arc_elements() const { return arc_elements_; }
  std::size_t columns() const { return columns_; }
  double spacing_m() const { return spacing_m_; }
  /// +inf when flat.
  double radius_m() const { return radius_m_; }
  bool is_flat() const;

  /// Angular positions of the arc elements; strictly increasing from 0 when
  /// curved, all zero when flat.
  const std::vector<double>& arc_angles() const { return arc_angles_; }
  double element_angle(std::size_t element) const;
  /// Undeformed distance of the element from the reference along the sheet.
  double arc_position_m(std::size_t element) const;

 private:
  ArrayGeometry(std::size_t arc_elements, double spacing_m, double radius_m,
                std::size_t columns);

  std::size_t arc_elements_;
  std::size_t columns_;
  double spacing_m_;
  double radius_m_;
  std::vector<double> arc_angles_;
};

struct PlaneWaveSource {
  double aoa_rad = 0.0;
  double freq_rf_hz = 2.1e9;
  double amplitude = 1.0;
  /// Per-element override of `amplitude`; empty means uniform.
  std::vector<double> element_amplitudes;

  double amplitude_of(std::size_t element) const;
  double wavenumber() const { return 2.0 * kPi * freq_rf_hz / kSpeedOfLight; }
  void validate() const;
};

/// Chord between two points of a circle separated by angle phi: 2 R sin(phi/2).
double chord_length(double radius_m, double phi_rad);

/// Extra path to an element at angular position phi_n relative to the
/// reference, R cos(theta - phi_n) - R cos(theta).
double path_delta(double radius_m, double theta_rad, double phi_n_rad);

/// Per-element path deltas for the whole array; the flat case uses the
/// linear-array projection s_n sin(theta).
std::vector<double> path_deltas(const ArrayGeometry& geom, double theta_rad);

/// Geometric phase k * delta_d_n of every element.
std::vector<double> geometric_phases(const ArrayGeometry& geom,
                                     const PlaneWaveSource& src);

/// Sum_n w_n A_n exp(j k delta_d_n). The common exp(-j k R cos theta) term is
/// dropped; it only rotates the result.
std::complex<double> array_factor(const ArrayGeometry& geom,
                                  const PlaneWaveSource& src,
                                  std::span<const std::complex<double>> weights);

/// Magnitude sampled on an angular grid.
struct Pattern {
  std::vector<double> angles_rad;
  std::vector<double> magnitude;
};

/// Relative height within which two lobes count as tied. Grating lobes of a
/// wide-pitch array differ from the main lobe only by grid sampling.
inline constexpr double kLobeTieTolerance = 1e-3;

/// |argmax angle - target| in degrees. Local maxima within
/// kLobeTieTolerance of the top resolve to the one closest to the target.
double beam_pointing_error(const Pattern& pattern, double target_theta_rad);

/// Angle of the pattern maximum (same tie rule as beam_pointing_error).
double pattern_peak_rad(const Pattern& pattern, double target_theta_rad);

/// Width in degrees of the contiguous region around the peak that stays
/// within `drop_db` of the peak.
double main_lobe_width_deg(const Pattern& pattern, double drop_db = 3.0);

}  // namespace flexarray
