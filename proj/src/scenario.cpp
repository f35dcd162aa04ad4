#include "flexarray/scenario.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

namespace flexarray {

using nlohmann::json;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// --- enum <-> string -------------------------------------------------------

template <typename E>
struct EnumName {
  E value;
  const char* name;
};

constexpr EnumName<TrajectoryKind> kTrajectoryNames[] = {
    {TrajectoryKind::Static, "static"},
    {TrajectoryKind::Step, "step"},
    {TrajectoryKind::Sinusoidal, "sinusoidal"},
};
constexpr EnumName<PhaseMapping> kMappingNames[] = {
    {PhaseMapping::Uniform256, "uniform256"},
    {PhaseMapping::Quadrant64, "quadrant64"},
};
constexpr EnumName<ObjectiveKind> kObjectiveNames[] = {
    {ObjectiveKind::Magnitude, "magnitude"},
    {ObjectiveKind::Power, "power"},
    {ObjectiveKind::InPhase, "in_phase"},
};
constexpr EnumName<InitMode> kInitNames[] = {
    {InitMode::Auto, "auto"},
    {InitMode::FlatSteering, "flat_steering"},
    {InitMode::Explicit, "explicit"},
};
constexpr EnumName<CodeBounds> kBoundsNames[] = {
    {CodeBounds::Wrap, "wrap"},
    {CodeBounds::Saturate, "saturate"},
};

template <typename E, std::size_t N>
std::string enum_to_string(const EnumName<E> (&table)[N], E value) {
  for (const auto& entry : table) {
    if (entry.value == value) return entry.name;
  }
  throw ConfigError("unnamed enum value");
}

template <typename E, std::size_t N>
E enum_from_string(const EnumName<E> (&table)[N], const std::string& text, const char* field) {
  for (const auto& entry : table) {
    if (text == entry.name) return entry.value;
  }
  throw ConfigError(std::string(field) + ": unknown value '" + text + "'");
}

// --- field readers ---------------------------------------------------------

/// Infinite radii are written as the string "inf".
json radius_to_json(double r) { return std::isinf(r) ? json("inf") : json(r); }

double radius_from_json(const json& v, const char* field) {
  if (v.is_string()) {
    const auto s = v.get<std::string>();
    if (s == "inf" || s == "flat") return kInf;
    throw ConfigError(std::string(field) + ": expected a number or \"inf\"");
  }
  if (!v.is_number()) throw ConfigError(std::string(field) + ": expected a number");
  return v.get<double>();
}

class Section {
 public:
  Section(const json& doc, std::string path) : doc_(doc), path_(std::move(path)) {
    if (!doc.is_object()) throw ConfigError(path_ + ": expected an object");
  }

  ~Section() noexcept(false) {
    if (std::uncaught_exceptions() > 0) return;
    for (const auto& [key, _] : doc_.items()) {
      if (!seen_.count(key)) throw ConfigError(path_ + ": unknown field '" + key + "'");
    }
  }

  const json* find(const std::string& key) {
    seen_.insert(key);
    auto it = doc_.find(key);
    return it == doc_.end() ? nullptr : &*it;
  }

  template <typename T>
  void read(const std::string& key, T& out) {
    if (const json* v = find(key)) {
      try {
        out = v->get<T>();
      } catch (const json::exception& e) {
        throw ConfigError(path_ + "." + key + ": " + e.what());
      }
    }
  }

  std::string child(const std::string& key) const { return path_ + "." + key; }

 private:
  const json& doc_;
  std::string path_;
  std::set<std::string> seen_;
};

template <typename E, std::size_t N>
void read_enum(Section& s, const std::string& key, const EnumName<E> (&table)[N], E& out) {
  if (const json* v = s.find(key)) {
    if (!v->is_string()) throw ConfigError(s.child(key) + ": expected a string");
    out = enum_from_string(table, v->get<std::string>(), s.child(key).c_str());
  }
}

json loop_to_json(const LoopConfig& c) {
  return json{{"omega_p_rad_s", c.omega_p_rad_s},
              {"lut_len", c.lut_len},
              {"lut_entry_bits", c.lut_entry_bits},
              {"hpf_cutoff_rad_s", c.hpf_cutoff_rad_s},
              {"a_phi", c.a_phi},
              {"a_v", c.a_v},
              {"psi_rad", c.psi_rad},
              {"code_bits_internal", c.code_bits_internal},
              {"code_bits_output", c.code_bits_output},
              {"freq_multiplier", c.freq_multiplier},
              {"bounds", enum_to_string(kBoundsNames, c.bounds)}};
}

LoopConfig loop_from_json(const json& doc, const std::string& path) {
  LoopConfig c;
  Section s(doc, path);
  s.read("omega_p_rad_s", c.omega_p_rad_s);
  s.read("lut_len", c.lut_len);
  s.read("lut_entry_bits", c.lut_entry_bits);
  s.read("hpf_cutoff_rad_s", c.hpf_cutoff_rad_s);
  s.read("a_phi", c.a_phi);
  s.read("a_v", c.a_v);
  s.read("psi_rad", c.psi_rad);
  s.read("code_bits_internal", c.code_bits_internal);
  s.read("code_bits_output", c.code_bits_output);
  s.read("freq_multiplier", c.freq_multiplier);
  read_enum(s, "bounds", kBoundsNames, c.bounds);
  return c;
}

double coherent_maximum(const Scenario& scn) {
  const PlaneWaveSource src = scn.source();
  double sum = 0.0;
  for (std::size_t e = 0; e < scn.geometry.n_elements(); ++e) {
    sum += src.amplitude_of(e) * gain_linear(scn.gain_code);
  }
  switch (scn.beamformer.objective) {
    case ObjectiveKind::Power:
      return sum * sum;
    case ObjectiveKind::Magnitude:
    case ObjectiveKind::InPhase:
      return sum;
  }
  return sum;
}

/// Noise-free beamformer output for fixed settings at one radius.
std::complex<double> noiseless_bf(const Scenario& scn, std::span<const ChannelSettings> settings,
                                  const ArrayGeometry& geom, const PlaneWaveSource& src) {
  const auto phases = geometric_phases(geom, src);
  std::complex<double> sum{0.0, 0.0};
  for (std::size_t e = 0; e < phases.size(); ++e) {
    sum += channel_sample_with_phase(src, e, phases[e], settings[e], scn.receiver, 0.0);
  }
  return sum;
}

/// The scenario seed and the noise seed together select the noise streams.
NoiseConfig noise_config(const Scenario& scn) {
  NoiseConfig cfg = scn.noise;
  cfg.seed = scn.noise.seed ^ (scn.seed * 0x9E3779B97F4A7C15ull);
  return cfg;
}

/// The analog front end plus digitizer, evaluated once per loop tick.
class TileFrontEnd {
 public:
  explicit TileFrontEnd(const Scenario& scn)
      : scn_(scn),
        src_(scn.source()),
        normalizer_(coherent_maximum(scn), scn.beamformer.full_scale_target),
        noise_(noise_config(scn), scn.geometry.n_elements()),
        settings_(channel_settings_for(scn, std::vector<int>(scn.loops.size(), 0))),
        samples_(scn.geometry.n_elements()),
        window_(static_cast<std::size_t>(scn.beamformer.dwell_samples)) {}

  QWord measure(std::uint64_t tick, std::span<const int> codes) {
    set_radius(radius_at(scn_.trajectory, tick, scn_.tick_period_s()));
    for (std::size_t i = 0; i < codes.size(); ++i) settings_[i + 1].phase_code = codes[i];

    const double ts = scn_.tick_period_s();
    const double dwell = static_cast<double>(window_.size());
    for (std::size_t k = 0; k < window_.size(); ++k) {
      const double t = (static_cast<double>(tick) + static_cast<double>(k) / dwell) * ts;
      for (std::size_t e = 0; e < samples_.size(); ++e) {
        samples_[e] = channel_sample_with_phase(src_, e, phases_[e], settings_[e], scn_.receiver,
                                                t, &noise_);
      }
      const auto bf = bf_out(samples_);
      window_[k] = BfSample{bf.real(), bf.imag(), t};
    }
    return normalizer_.digitize(objective(window_, scn_.beamformer.objective));
  }

  double radius() const { return radius_; }

 private:
  void set_radius(double r) {
    if (r == radius_ && !phases_.empty()) return;
    radius_ = r;
    phases_ = geometric_phases(scn_.geometry.build(r), src_);
  }

  const Scenario& scn_;
  PlaneWaveSource src_;
  BfNormalizer normalizer_;
  NoiseSource noise_;
  std::vector<ChannelSettings> settings_;
  std::vector<std::complex<double>> samples_;
  std::vector<BfSample> window_;
  std::vector<double> phases_;
  double radius_ = 0.0;
};

/// Pointing error for frozen codes, recomputed only when codes or R change.
class PointingErrorCache {
 public:
  explicit PointingErrorCache(const Scenario& scn) : scn_(scn) {}

  double operator()(const std::vector<int>& codes, double radius_m) {
    if (!valid_ || codes != codes_ || radius_m != radius_) {
      codes_ = codes;
      radius_ = radius_m;
      value_ = pointing_error_deg(scn_, codes, radius_m);
      valid_ = true;
    }
    return value_;
  }

 private:
  const Scenario& scn_;
  bool valid_ = false;
  std::vector<int> codes_;
  double radius_ = 0.0;
  double value_ = 0.0;
};

}  // namespace

void DeformationTrajectory::validate() const {
  auto positive = [](double r, const char* what) {
    if (!(r > 0.0)) throw ConfigError(std::string("trajectory: ") + what + " must be positive");
  };
  positive(r0_m, "r0_m");
  if (kind == TrajectoryKind::Step) positive(r1_m, "r1_m");
  if (kind == TrajectoryKind::Sinusoidal) {
    if (!(vib_amplitude_m >= 0.0) || !(vib_amplitude_m < r0_m)) {
      throw ConfigError("trajectory: vib_amplitude_m must lie in [0, r0_m)");
    }
    if (!(vib_freq_hz >= 0.0) || !std::isfinite(vib_freq_hz)) {
      throw ConfigError("trajectory: vib_freq_hz must be finite and >= 0");
    }
    if (std::isinf(r0_m)) throw ConfigError("trajectory: vibration needs a finite r0_m");
  }
}

double radius_at(const DeformationTrajectory& traj, std::uint64_t tick, double tick_period_s) {
  switch (traj.kind) {
    case TrajectoryKind::Static:
      return traj.r0_m;
    case TrajectoryKind::Step:
      return tick < traj.step_tick ? traj.r0_m : traj.r1_m;
    case TrajectoryKind::Sinusoidal:
      return traj.r0_m + traj.vib_amplitude_m *
                             std::sin(2.0 * kPi * traj.vib_freq_hz *
                                      static_cast<double>(tick) * tick_period_s);
  }
  return traj.r0_m;
}

ArrayGeometry GeometryTemplate::build(double radius_m) const {
  if (std::isinf(radius_m)) return ArrayGeometry::flat(arc_elements, spacing_m, columns);
  return ArrayGeometry::conformal(arc_elements, spacing_m, radius_m, columns);
}

PlaneWaveSource Scenario::source() const {
  PlaneWaveSource src;
  src.aoa_rad = aoa_rad;
  src.freq_rf_hz = geometry.freq_rf_hz;
  src.amplitude = amplitude;
  return src;
}

double Scenario::tick_period_s() const {
  return loops.empty() ? LoopConfig{}.tick_period_s() : loops.front().tick_period_s();
}

void Scenario::validate() const {
  try {
    if (geometry.arc_elements == 0 || geometry.columns == 0) {
      throw ConfigError("geometry: at least one element is required");
    }
    if (!(geometry.spacing_m > 0.0)) throw ConfigError("geometry: spacing_m must be positive");
    if (!(geometry.freq_rf_hz > 0.0)) throw ConfigError("geometry: freq_rf_hz must be positive");
    trajectory.validate();
    source().validate();
    ChannelSettings{0, 0, gain_code}.validate();
    noise.validate();
    if (beamformer.dwell_samples < 1) throw ConfigError("beamformer: dwell_samples must be >= 1");
    if (!(beamformer.full_scale_target > 0.0) || beamformer.full_scale_target > QWord::kMax) {
      throw ConfigError("beamformer: full_scale_target must lie in (0, 32)");
    }
    if (loops.size() + 1 > geometry.n_elements()) {
      throw ConfigError("loops: at most n_elements - 1 loops (element 0 is the reference)");
    }
    for (const auto& l : loops) l.validate();
    for (std::size_t i = 1; i < loops.size(); ++i) {
      if (loops[i].omega_p_rad_s != loops[0].omega_p_rad_s || loops[i].lut_len != loops[0].lut_len) {
        throw ConfigError("loops: all loops share one LUT and tick rate");
      }
    }
    if (init == InitMode::Explicit) {
      if (initial_codes.size() != loops.size()) {
        throw ConfigError("initial_codes: one code per loop is required");
      }
      for (int c : initial_codes) {
        if (c < 0 || c > kPhaseCodeMax) throw ConfigError("initial_codes: code out of range");
      }
    }
    if (tick_budget == 0) throw ConfigError("tick_budget must be positive");
    if (!(pattern_grid_deg > 0.0) || pattern_grid_deg > 1.0) {
      throw ConfigError("pattern_grid_deg must lie in (0, 1]");
    }
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    throw ConfigError(e.what());
  }
}

json to_json(const Scenario& scn) {
  json loops = json::array();
  for (const auto& l : scn.loops) loops.push_back(loop_to_json(l));
  const auto& t = scn.trajectory;
  return json{
      {"name", scn.name},
      {"geometry",
       {{"arc_elements", scn.geometry.arc_elements},
        {"columns", scn.geometry.columns},
        {"spacing_m", scn.geometry.spacing_m},
        {"freq_rf_hz", scn.geometry.freq_rf_hz}}},
      {"trajectory",
       {{"kind", enum_to_string(kTrajectoryNames, t.kind)},
        {"r0_m", radius_to_json(t.r0_m)},
        {"r1_m", radius_to_json(t.r1_m)},
        {"step_tick", t.step_tick},
        {"vib_amplitude_m", t.vib_amplitude_m},
        {"vib_freq_hz", t.vib_freq_hz}}},
      {"source", {{"aoa_rad", scn.aoa_rad}, {"amplitude", scn.amplitude}}},
      {"receiver",
       {{"f_lo_hz", scn.receiver.f_lo_hz},
        {"phase_mapping", enum_to_string(kMappingNames, scn.receiver.phase_mapping)},
        {"gain_code", scn.gain_code}}},
      {"beamformer",
       {{"objective", enum_to_string(kObjectiveNames, scn.beamformer.objective)},
        {"full_scale_target", scn.beamformer.full_scale_target},
        {"dwell_samples", scn.beamformer.dwell_samples}}},
      {"loops", loops},
      {"init", {{"mode", enum_to_string(kInitNames, scn.init)}, {"codes", scn.initial_codes}}},
      {"noise", {{"enabled", scn.noise.enabled}, {"snr_db", scn.noise.snr_db}, {"seed", scn.noise.seed}}},
      {"run",
       {{"tick_budget", scn.tick_budget},
        {"seed", scn.seed},
        {"stop_on_converge", scn.stop_on_converge},
        {"pattern_grid_deg", scn.pattern_grid_deg}}},
  };
}

Scenario scenario_from_json(const json& doc) {
  Scenario scn;
  {
    Section root(doc, "scenario");
    root.read("name", scn.name);
    if (const json* g = root.find("geometry")) {
      Section s(*g, "geometry");
      s.read("arc_elements", scn.geometry.arc_elements);
      s.read("columns", scn.geometry.columns);
      s.read("spacing_m", scn.geometry.spacing_m);
      s.read("freq_rf_hz", scn.geometry.freq_rf_hz);
      scn.receiver.f_lo_hz = scn.geometry.freq_rf_hz;
    }
    if (const json* t = root.find("trajectory")) {
      Section s(*t, "trajectory");
      read_enum(s, "kind", kTrajectoryNames, scn.trajectory.kind);
      if (const json* v = s.find("r0_m")) scn.trajectory.r0_m = radius_from_json(*v, "trajectory.r0_m");
      scn.trajectory.r1_m = scn.trajectory.r0_m;
      if (const json* v = s.find("r1_m")) scn.trajectory.r1_m = radius_from_json(*v, "trajectory.r1_m");
      s.read("step_tick", scn.trajectory.step_tick);
      s.read("vib_amplitude_m", scn.trajectory.vib_amplitude_m);
      s.read("vib_freq_hz", scn.trajectory.vib_freq_hz);
    }
    if (const json* v = root.find("source")) {
      Section s(*v, "source");
      s.read("aoa_rad", scn.aoa_rad);
      s.read("amplitude", scn.amplitude);
    }
    if (const json* v = root.find("receiver")) {
      Section s(*v, "receiver");
      s.read("f_lo_hz", scn.receiver.f_lo_hz);
      read_enum(s, "phase_mapping", kMappingNames, scn.receiver.phase_mapping);
      s.read("gain_code", scn.gain_code);
    }
    if (const json* v = root.find("beamformer")) {
      Section s(*v, "beamformer");
      read_enum(s, "objective", kObjectiveNames, scn.beamformer.objective);
      s.read("full_scale_target", scn.beamformer.full_scale_target);
      s.read("dwell_samples", scn.beamformer.dwell_samples);
    }
    if (const json* v = root.find("loops")) {
      if (!v->is_array()) throw ConfigError("loops: expected an array");
      scn.loops.clear();
      for (std::size_t i = 0; i < v->size(); ++i) {
        scn.loops.push_back(loop_from_json((*v)[i], "loops[" + std::to_string(i) + "]"));
      }
    }
    if (const json* v = root.find("init")) {
      Section s(*v, "init");
      read_enum(s, "mode", kInitNames, scn.init);
      s.read("codes", scn.initial_codes);
    }
    if (const json* v = root.find("noise")) {
      Section s(*v, "noise");
      s.read("enabled", scn.noise.enabled);
      s.read("snr_db", scn.noise.snr_db);
      s.read("seed", scn.noise.seed);
    }
    if (const json* v = root.find("run")) {
      Section s(*v, "run");
      s.read("tick_budget", scn.tick_budget);
      s.read("seed", scn.seed);
      s.read("stop_on_converge", scn.stop_on_converge);
      s.read("pattern_grid_deg", scn.pattern_grid_deg);
    }
  }
  scn.validate();
  return scn;
}

std::string serialize(const Scenario& scn) { return to_json(scn).dump(2); }

Scenario parse_scenario(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("scenario is not valid JSON: ") + e.what());
  }
  return scenario_from_json(doc);
}

Scenario load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open scenario file '" + path + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_scenario(buf.str());
}

std::vector<ChannelSettings> channel_settings_for(const Scenario& scn,
                                                  std::span<const int> loop_codes) {
  std::vector<ChannelSettings> out(scn.geometry.n_elements(), ChannelSettings{0, 0, scn.gain_code});
  for (std::size_t i = 0; i < loop_codes.size() && i + 1 < out.size(); ++i) {
    out[i + 1].phase_code = loop_codes[i];
  }
  return out;
}

std::vector<int> flat_steering_codes(const Scenario& scn) {
  const ArrayGeometry flat =
      ArrayGeometry::flat(scn.geometry.arc_elements, scn.geometry.spacing_m, scn.geometry.columns);
  const auto phases = geometric_phases(flat, scn.source());
  const double lsb = phase_lsb_rad(scn.receiver.phase_mapping);
  const int modulus = scn.receiver.phase_mapping == PhaseMapping::Quadrant64 ? 64 : 256;
  std::vector<int> codes(scn.loops.size());
  for (std::size_t i = 0; i < codes.size(); ++i) {
    const auto steps = static_cast<int>(std::lround(-phases[i + 1] / lsb));
    codes[i] = ((steps % modulus) + modulus) % modulus;
  }
  return codes;
}

std::vector<int> initial_loop_codes(const Scenario& scn) {
  switch (scn.init) {
    case InitMode::Explicit:
      return scn.initial_codes;
    case InitMode::FlatSteering:
      return flat_steering_codes(scn);
    case InitMode::Auto: {
      const auto geom = scn.geometry.build(radius_at(scn.trajectory, 0, scn.tick_period_s()));
      const auto base = channel_settings_for(scn, {});
      return init_phase_codes(geom, scn.source(), scn.loops.size(), scn.receiver, base);
    }
  }
  return {};
}

Pattern pattern_sweep(const Scenario& scn, std::span<const ChannelSettings> codes, double grid_deg,
                      std::optional<double> radius_m) {
  if (!(grid_deg > 0.0) || grid_deg > 1.0) {
    throw std::invalid_argument("pattern_sweep: grid must lie in (0, 1] degrees");
  }
  if (codes.size() != scn.geometry.n_elements()) {
    throw std::invalid_argument("pattern_sweep: one ChannelSettings per element is required");
  }
  const double r = radius_m.value_or(radius_at(scn.trajectory, 0, scn.tick_period_s()));
  const ArrayGeometry geom = scn.geometry.build(r);
  PlaneWaveSource src = scn.source();

  const auto steps = static_cast<long>(std::floor(180.0 / grid_deg + 1e-9));
  Pattern p;
  p.angles_rad.reserve(static_cast<std::size_t>(steps + 1));
  p.magnitude.reserve(static_cast<std::size_t>(steps + 1));
  for (long i = 0; i <= steps; ++i) {
    const double deg = -90.0 + static_cast<double>(i) * grid_deg;
    src.aoa_rad = deg_to_rad(deg);
    p.angles_rad.push_back(src.aoa_rad);
    p.magnitude.push_back(std::abs(noiseless_bf(scn, codes, geom, src)));
  }
  return p;
}

double pointing_error_deg(const Scenario& scn, std::span<const int> loop_codes, double radius_m) {
  const auto settings = channel_settings_for(scn, loop_codes);
  return beam_pointing_error(pattern_sweep(scn, settings, scn.pattern_grid_deg, radius_m), scn.aoa_rad);
}

double objective_at(const Scenario& scn, std::span<const int> loop_codes, double radius_m) {
  const auto settings = channel_settings_for(scn, loop_codes);
  const auto bf = noiseless_bf(scn, settings, scn.geometry.build(radius_m), scn.source());
  return objective(BfSample{bf.real(), bf.imag(), 0.0}, scn.beamformer.objective) *
         BfNormalizer(coherent_maximum(scn), scn.beamformer.full_scale_target).scale();
}

RunResult simulate(const Scenario& scn) {
  scn.validate();
  RunResult result;
  TileFrontEnd front_end(scn);
  PointingErrorCache error_of(scn);
  const double ts = scn.tick_period_s();
  auto& summary = result.summary;
  summary.initial_codes = initial_loop_codes(scn);

  if (scn.loops.empty()) {
    // Open loop: codes stay where they started.
    for (std::uint64_t tick = 0; tick < scn.tick_budget; ++tick) {
      TraceRow row;
      row.tick = tick;
      row.objective = front_end.measure(tick, summary.initial_codes);
      row.radius_m = front_end.radius();
      row.error_deg = error_of(summary.initial_codes, row.radius_m);
      result.trace.push_back(std::move(row));
    }
    summary.final_codes = summary.initial_codes;
    summary.ticks_run = scn.tick_budget;
  } else {
    std::vector<double> radii;
    const ObjectiveProbe probe = [&](std::uint64_t tick, std::span<const int> codes) {
      const QWord q = front_end.measure(tick, codes);
      radii.push_back(front_end.radius());
      return q;
    };
    CalibrationOptions options;
    options.tick_budget = scn.tick_budget;
    options.stop_on_converge = scn.stop_on_converge && scn.trajectory.is_static();
    auto cal = run_calibration(scn.loops, summary.initial_codes, probe, options);

    result.trace.reserve(cal.ticks.size());
    for (std::size_t i = 0; i < cal.ticks.size(); ++i) {
      auto& t = cal.ticks[i];
      TraceRow row;
      row.tick = t.tick;
      row.radius_m = radii[i];
      row.codes = std::move(t.code_estimates);
      row.perturbed_codes = std::move(t.applied_codes);
      row.objective = t.objective;
      for (auto d : t.demod) row.demod.push_back(static_cast<double>(d) / static_cast<double>(kLoopOne));
      row.accumulator = std::move(t.accumulator);
      row.error_deg = error_of(row.codes, row.radius_m);
      result.trace.push_back(std::move(row));
    }
    summary.final_codes = cal.final_codes;
    summary.converged = cal.converged;
    summary.ticks_to_converge = cal.ticks_to_converge;
    summary.convergence_ticks = cal.convergence_ticks;
    summary.saturation_count = cal.saturations;
    summary.ticks_run = cal.ticks.size();
  }

  const double final_radius = radius_at(scn.trajectory, summary.ticks_run == 0 ? 0 : summary.ticks_run - 1, ts);
  summary.final_error_deg = pointing_error_deg(scn, summary.final_codes, final_radius);
  summary.uncompensated_error_deg = pointing_error_deg(scn, flat_steering_codes(scn), final_radius);
  summary.final_objective = objective_at(scn, summary.final_codes, final_radius);
  if (scn.loops.empty() && scn.trajectory.is_static()) {
    summary.converged = true;
    summary.ticks_to_converge = 0;
  }
  return result;
}

}  // namespace flexarray
