#include "flexarray/harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <future>
#include <istream>
#include <limits>
#include <ostream>
#include <random>
#include <sstream>
#include <stdexcept>

namespace flexarray {

using nlohmann::json;

namespace {

void require_oracle_preconditions(const Scenario& scn) {
  if (!scn.trajectory.is_static()) throw std::invalid_argument("oracle needs a static scenario");
  if (scn.noise.enabled) throw std::invalid_argument("oracle needs noise disabled");
  if (scn.loops.empty()) throw std::invalid_argument("oracle needs at least one loop");
}

double static_radius(const Scenario& scn) { return scn.trajectory.r0_m; }

std::string fmt_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream in(line);
  while (std::getline(in, field, sep)) out.push_back(field);
  if (!line.empty() && line.back() == sep) out.emplace_back();
  return out;
}

double parse_double(const std::string& s) {
  std::size_t pos = 0;
  const double v = std::stod(s, &pos);
  if (pos != s.size()) throw std::invalid_argument("bad number '" + s + "'");
  return v;
}

std::ofstream open_output(const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::filesystem::filesystem_error("cannot write", path, std::make_error_code(std::errc::io_error));
  return out;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  auto out = open_output(path);
  out << text;
  if (!out) throw std::filesystem::filesystem_error("write failed", path, std::make_error_code(std::errc::io_error));
}

void write_pattern_csv(const std::filesystem::path& path, const std::vector<std::string>& names,
                       const std::vector<Pattern>& patterns) {
  auto out = open_output(path);
  out << "angle_deg";
  for (const auto& n : names) out << ',' << n;
  out << '\n';
  for (std::size_t i = 0; i < patterns.front().angles_rad.size(); ++i) {
    out << fmt_double(rad_to_deg(patterns.front().angles_rad[i]));
    for (const auto& p : patterns) out << ',' << fmt_double(p.magnitude[i]);
    out << '\n';
  }
}

}  // namespace

OracleCurve oracle_exhaustive(const Scenario& scn, std::size_t loop_index, std::span<const int> frozen) {
  require_oracle_preconditions(scn);
  if (loop_index >= scn.loops.size()) throw std::out_of_range("oracle: loop index out of range");
  std::vector<int> codes = frozen.empty() ? initial_loop_codes(scn)
                                          : std::vector<int>(frozen.begin(), frozen.end());
  if (codes.size() != scn.loops.size()) throw std::invalid_argument("oracle: one frozen code per loop");

  OracleCurve out;
  out.curve.resize(256);
  for (int c = 0; c < 256; ++c) {
    codes[loop_index] = c;
    out.curve[static_cast<std::size_t>(c)] = objective_at(scn, codes, static_radius(scn));
  }
  for (int c = 1; c < 256; ++c) {
    if (out.curve[static_cast<std::size_t>(c)] > out.curve[static_cast<std::size_t>(out.best_code)]) {
      out.best_code = c;
    }
  }
  return out;
}

JointOptimum oracle_joint(const Scenario& scn) {
  require_oracle_preconditions(scn);
  const std::size_t loops = scn.loops.size();
  if (loops > 4) throw std::invalid_argument("oracle_joint: at most 4 loops");
  const double r = static_radius(scn);

  // Visits every tuple of `axes` (each a list of codes) in lexicographic
  // order; strict improvement keeps the first of equal maxima.
  auto search = [&](const std::vector<std::vector<int>>& axes) {
    JointOptimum best;
    best.objective = -1.0;
    std::vector<std::size_t> idx(loops, 0);
    std::vector<int> codes(loops);
    while (true) {
      for (std::size_t i = 0; i < loops; ++i) codes[i] = axes[i][idx[i]];
      const double v = objective_at(scn, codes, r);
      if (v > best.objective) {
        best.objective = v;
        best.codes = codes;
      }
      std::size_t i = loops;
      while (i > 0) {
        --i;
        if (++idx[i] < axes[i].size()) break;
        idx[i] = 0;
        if (i == 0) return best;
      }
    }
  };

  std::vector<std::vector<int>> coarse(loops);
  for (auto& axis : coarse) {
    for (int c = 0; c < 256; c += 16) axis.push_back(c);
  }
  const JointOptimum grid = search(coarse);

  std::vector<std::vector<int>> local(loops);
  for (std::size_t i = 0; i < loops; ++i) {
    // Sorted so the tie rule stays lexicographic in code value.
    for (int d = -8; d <= 8; ++d) local[i].push_back(((grid.codes[i] + d) % 256 + 256) % 256);
    std::sort(local[i].begin(), local[i].end());
  }
  return search(local);
}

void write_trace_csv(std::ostream& out, const RunResult& result) {
  const std::size_t loops = result.summary.final_codes.size();
  out << "tick,R_m";
  for (std::size_t i = 1; i <= loops; ++i) out << ",code_" << i;
  for (std::size_t i = 1; i <= loops; ++i) out << ",perturbed_code_" << i;
  out << ",objective_q,error_deg";
  for (std::size_t i = 1; i <= loops; ++i) out << ",demod_" << i;
  for (std::size_t i = 1; i <= loops; ++i) out << ",accumulator_" << i;
  out << '\n';
  for (const auto& row : result.trace) {
    out << row.tick << ',' << fmt_double(row.radius_m);
    auto ints = [&](const std::vector<int>& v) {
      for (std::size_t i = 0; i < loops; ++i) out << ',' << (i < v.size() ? v[i] : 0);
    };
    auto doubles = [&](const std::vector<double>& v) {
      for (std::size_t i = 0; i < loops; ++i) out << ',' << fmt_double(i < v.size() ? v[i] : 0.0);
    };
    ints(row.codes);
    ints(row.perturbed_codes);
    out << ',' << row.objective.raw << ',' << fmt_double(row.error_deg);
    doubles(row.demod);
    doubles(row.accumulator);
    out << '\n';
  }
}

std::vector<TraceRow> read_trace_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("trace CSV: missing header");
  const auto header = split(line, ',');
  if (header.size() < 4 || header[0] != "tick" || header[1] != "R_m") {
    throw std::runtime_error("trace CSV: unexpected header");
  }
  const std::size_t loops = (header.size() - 4) / 4;
  if (header.size() != 4 + 4 * loops) throw std::runtime_error("trace CSV: bad column count");

  std::vector<TraceRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto f = split(line, ',');
    if (f.size() != header.size()) throw std::runtime_error("trace CSV: ragged row");
    TraceRow row;
    std::size_t k = 0;
    row.tick = std::stoull(f[k++]);
    row.radius_m = parse_double(f[k++]);
    for (std::size_t i = 0; i < loops; ++i) row.codes.push_back(std::stoi(f[k++]));
    for (std::size_t i = 0; i < loops; ++i) row.perturbed_codes.push_back(std::stoi(f[k++]));
    row.objective.raw = static_cast<std::uint16_t>(std::stoul(f[k++]));
    row.error_deg = parse_double(f[k++]);
    for (std::size_t i = 0; i < loops; ++i) row.demod.push_back(parse_double(f[k++]));
    for (std::size_t i = 0; i < loops; ++i) row.accumulator.push_back(parse_double(f[k++]));
    rows.push_back(std::move(row));
  }
  return rows;
}

json summary_to_json(const Scenario& scn, const RunSummary& s) {
  json j{
      {"final_error_deg", s.final_error_deg},
      {"uncompensated_error_deg", s.uncompensated_error_deg},
      {"converged", s.converged},
      {"ticks_to_converge", s.ticks_to_converge ? json(*s.ticks_to_converge) : json(nullptr)},
      {"convergence_ticks", s.convergence_ticks},
      {"saturation_count", s.saturation_count},
      {"ticks_run", s.ticks_run},
      {"tick_period_s", scn.tick_period_s()},
      {"initial_codes", s.initial_codes},
      {"final_codes", s.final_codes},
      {"final_objective", s.final_objective},
      {"config", to_json(scn)},
  };
  return j;
}

void apply_override(json& doc, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) {
    throw ConfigError("override '" + assignment + "' must look like key=value");
  }
  const std::string path = assignment.substr(0, eq);
  const std::string text = assignment.substr(eq + 1);
  json value;
  try {
    value = json::parse(text);
  } catch (const json::parse_error&) {
    value = text;
  }

  json* node = &doc;
  std::size_t start = 0;
  while (true) {
    const auto dot = path.find('.', start);
    std::string key = path.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (key.empty()) throw ConfigError("override '" + assignment + "' has an empty path segment");
    json* next = nullptr;
    if (node->is_array()) {
      std::size_t idx = 0;
      try {
        idx = std::stoul(key);
      } catch (const std::exception&) {
        throw ConfigError("override '" + assignment + "': '" + key + "' is not an array index");
      }
      if (idx >= node->size()) throw ConfigError("override '" + assignment + "': index out of range");
      next = &(*node)[idx];
    } else {
      if (!node->is_object()) *node = json::object();
      next = &(*node)[key];
    }
    node = next;
    if (dot == std::string::npos) break;
    start = dot + 1;
  }
  *node = value;
}

RunMode parse_mode(const std::string& text) {
  if (text == "run") return RunMode::Run;
  if (text == "sweep") return RunMode::Sweep;
  if (text == "oracle") return RunMode::Oracle;
  if (text == "pattern") return RunMode::Pattern;
  if (text == "selftest") return RunMode::Selftest;
  throw ConfigError("unknown mode '" + text + "'");
}

std::vector<SelftestResult> run_selftest() {
  std::vector<SelftestResult> out;
  auto check = [&](std::string name, bool ok, std::string detail = {}) {
    out.push_back({std::move(name), ok, std::move(detail)});
  };

  {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> r_dist(0.1, 10.0), t_dist(0.0, kPi / 2.0), u(0.0, 1.0);
    double worst = 0.0;
    for (int i = 0; i < 10000; ++i) {
      const double r = r_dist(rng), theta = t_dist(rng), phi = u(rng) * theta;
      const double chord_route = chord_length(r, phi) * std::cos(kPi / 2.0 - theta + phi / 2.0);
      worst = std::max(worst, std::abs(chord_route - path_delta(r, theta, phi)));
    }
    check("chord route matches closed form", worst <= 1e-12, "max |diff| " + fmt_double(worst));
  }
  {
    const double d = 0.0714, r = 1e6 * d, theta = kPi / 6.0;
    const double rel = std::abs(path_delta(r, theta, d / r) - d * std::sin(theta)) / d;
    check("flat-array limit", rel <= 1e-6, "relative error " + fmt_double(rel));
  }
  {
    bool exact = true;
    for (int m = -32767; m <= 32767 && exact; ++m) {
      const double x = m / 1024.0;
      exact = quantize(x).value() == x;
    }
    check("QWord exact on LSB multiples", exact);
    check("QWord saturates", quantize(100.0).value() == QWord::kMax && quantize(-100.0).value() == -QWord::kMax);
  }
  {
    const LoopConfig cfg;
    check("LUT quarter period is +1.0", lut_sine(cfg, cfg.lut_len / 4).as_double() == 1.0);
  }
  {
    LoopConfig cfg;
    HpfState state;
    const double ts = cfg.tick_period_s();
    double peak = 0.0;
    for (int n = 0; n < 20 * cfg.lut_len; ++n) {
      const double y = static_cast<double>(hpf_step(cfg, state, quantize(std::sin(cfg.omega_p_rad_s * n * ts)))) /
                       static_cast<double>(kLoopOne);
      if (n >= 10 * cfg.lut_len) peak = std::max(peak, std::abs(y));
    }
    const double ratio = cfg.omega_p_rad_s / cfg.hpf_cutoff_rad_s;
    const double analytic = ratio / std::sqrt(1.0 + ratio * ratio);
    check("HPF gain at the dither frequency", std::abs(peak / analytic - 1.0) <= 0.03,
          "measured " + fmt_double(peak) + " analytic " + fmt_double(analytic));
  }
  return out;
}

namespace {

Scenario load_with_overrides(const RunManifest& m) {
  json doc;
  {
    std::ifstream in(m.scenario_path);
    if (!in) throw ConfigError("cannot open scenario file '" + m.scenario_path + "'");
    try {
      doc = json::parse(in);
    } catch (const json::parse_error& e) {
      throw ConfigError(std::string("scenario is not valid JSON: ") + e.what());
    }
  }
  for (const auto& o : m.overrides) apply_override(doc, o);
  if (m.seed) {
    doc["run"]["seed"] = *m.seed;
    doc["noise"]["seed"] = *m.seed;
  }
  return scenario_from_json(doc);
}

std::string radius_tag(double r) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "R%.4g", r);
  return buf;
}

int run_mode(const Scenario& scn, const RunManifest& m, std::ostream& log) {
  const RunResult result = simulate(scn);
  {
    auto out = open_output(m.output_dir / "trace.csv");
    write_trace_csv(out, result);
  }
  write_text(m.output_dir / "summary.json", summary_to_json(scn, result.summary).dump(2) + "\n");
  const auto& s = result.summary;
  log << "uncompensated error " << s.uncompensated_error_deg << " deg, final error "
      << s.final_error_deg << " deg, " << (s.converged ? "converged" : "not converged");
  if (s.ticks_to_converge) log << " at tick " << *s.ticks_to_converge;
  log << '\n';
  if (m.require_converged && !s.converged) return kExitNotConverged;
  return kExitOk;
}

int sweep_mode(const Scenario& base, const RunManifest& m, std::ostream& log) {
  std::vector<std::future<RunResult>> jobs;
  std::vector<Scenario> scenarios;
  for (double r : m.sweep_radii_m) {
    Scenario scn = base;
    scn.trajectory = DeformationTrajectory{};
    scn.trajectory.r0_m = r;
    scn.trajectory.r1_m = r;
    scn.name = base.name + "_" + radius_tag(r);
    scn.validate();
    scenarios.push_back(scn);
  }
  for (const auto& scn : scenarios) {
    jobs.push_back(std::async(std::launch::async, [&scn] { return simulate(scn); }));
  }
  auto table = open_output(m.output_dir / "sweep.csv");
  table << "R_m,uncompensated_error_deg,final_error_deg,converged,ticks_to_converge\n";
  bool all_converged = true;
  for (std::size_t i = 0; i < jobs.size(); ++i) {
    const RunResult result = jobs[i].get();
    const auto& s = result.summary;
    const auto tag = radius_tag(scenarios[i].trajectory.r0_m);
    write_text(m.output_dir / ("summary_" + tag + ".json"),
               summary_to_json(scenarios[i], s).dump(2) + "\n");
    table << fmt_double(scenarios[i].trajectory.r0_m) << ',' << fmt_double(s.uncompensated_error_deg) << ','
          << fmt_double(s.final_error_deg) << ',' << (s.converged ? 1 : 0) << ','
          << (s.ticks_to_converge ? std::to_string(*s.ticks_to_converge) : std::string()) << '\n';
    log << tag << ": uncompensated " << s.uncompensated_error_deg << " deg, final " << s.final_error_deg
        << " deg\n";
    all_converged = all_converged && s.converged;
  }
  if (m.require_converged && !all_converged) return kExitNotConverged;
  return kExitOk;
}

int oracle_mode(const Scenario& scn, const RunManifest& m, std::ostream& log) {
  const JointOptimum joint = oracle_joint(scn);
  std::vector<OracleCurve> curves;
  for (std::size_t i = 0; i < scn.loops.size(); ++i) curves.push_back(oracle_exhaustive(scn, i, joint.codes));

  json j{{"joint_codes", joint.codes},
         {"joint_objective", joint.objective},
         {"pointing_error_deg", pointing_error_deg(scn, joint.codes, scn.trajectory.r0_m)}};
  json per_loop = json::array();
  for (const auto& c : curves) per_loop.push_back(c.best_code);
  j["per_loop_best_code"] = per_loop;
  write_text(m.output_dir / "oracle.json", j.dump(2) + "\n");

  auto out = open_output(m.output_dir / "oracle_curves.csv");
  out << "code";
  for (std::size_t i = 1; i <= curves.size(); ++i) out << ",loop_" << i;
  out << '\n';
  for (int c = 0; c < 256; ++c) {
    out << c;
    for (const auto& curve : curves) out << ',' << fmt_double(curve.curve[static_cast<std::size_t>(c)]);
    out << '\n';
  }
  log << "oracle optimum";
  for (int c : joint.codes) log << ' ' << c;
  log << " (objective " << joint.objective << ")\n";
  return kExitOk;
}

int pattern_mode(const Scenario& scn, const RunManifest& m, std::ostream& log) {
  const RunResult result = simulate(scn);
  const double r = result.trace.empty() ? scn.trajectory.r0_m : result.trace.back().radius_m;
  const auto steer = channel_settings_for(scn, flat_steering_codes(scn));
  const auto corrected = channel_settings_for(scn, result.summary.final_codes);
  const double grid = scn.pattern_grid_deg;
  const std::vector<Pattern> patterns = {
      pattern_sweep(scn, steer, grid, std::numeric_limits<double>::infinity()),
      pattern_sweep(scn, steer, grid, r),
      pattern_sweep(scn, corrected, grid, r),
  };
  write_pattern_csv(m.output_dir / "pattern.csv", {"flat", "deformed_uncompensated", "deformed_corrected"},
                    patterns);
  write_text(m.output_dir / "summary.json", summary_to_json(scn, result.summary).dump(2) + "\n");
  log << "pattern written; corrected pointing error " << result.summary.final_error_deg << " deg\n";
  return kExitOk;
}

}  // namespace

int cli_run(const RunManifest& m, std::ostream& log) {
  try {
    if (m.mode == RunMode::Selftest) {
      const auto results = run_selftest();
      bool ok = true;
      json j = json::array();
      for (const auto& r : results) {
        log << (r.passed ? "PASS " : "FAIL ") << r.name << (r.detail.empty() ? "" : " (" + r.detail + ")")
            << '\n';
        j.push_back({{"name", r.name}, {"passed", r.passed}, {"detail", r.detail}});
        ok = ok && r.passed;
      }
      if (!m.output_dir.empty()) {
        std::filesystem::create_directories(m.output_dir);
        write_text(m.output_dir / "selftest.json", j.dump(2) + "\n");
      }
      return ok ? kExitOk : kExitSelftestFailed;
    }

    if (m.scenario_path.empty()) {
      log << "error: --scenario is required for this mode\n";
      return kExitConfig;
    }
    const Scenario scn = load_with_overrides(m);
    std::filesystem::create_directories(m.output_dir);
    switch (m.mode) {
      case RunMode::Run:
        return run_mode(scn, m, log);
      case RunMode::Sweep:
        return sweep_mode(scn, m, log);
      case RunMode::Oracle:
        return oracle_mode(scn, m, log);
      case RunMode::Pattern:
        return pattern_mode(scn, m, log);
      case RunMode::Selftest:
        break;
    }
    return kExitOk;
  } catch (const ConfigError& e) {
    log << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::invalid_argument& e) {
    log << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::filesystem::filesystem_error& e) {
    log << "I/O error: " << e.what() << '\n';
    return kExitIo;
  }
}

}  // namespace flexarray
