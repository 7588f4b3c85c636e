#pragma once

// Run configuration, CSV/JSON output and simple SVG plots.
//
// Config keys carry their unit as a suffix (_mhz, _us, _ns, _rad). Unknown
// keys are rejected so that a typo cannot silently fall back to a default.

#include <json.hpp>

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <type_traits>
#include <vector>

#include "bellstab/cqed_model.hpp"
#include "bellstab/dd_stabilizer.hpp"
#include "bellstab/errors.hpp"
#include "bellstab/lindblad.hpp"
#include "bellstab/markov.hpp"
#include "bellstab/mb_stabilizer.hpp"
#include "bellstab/nfp_model.hpp"

namespace bellstab {

using Json = nlohmann::ordered_json;

/// Herald diagonals at the operating points used in the experiment.
inline HeraldMatrix fixed_herald_dd() { return HeraldMatrix(0.26, 0.20, 0.19, 0.18); }
inline HeraldMatrix fixed_herald_mb() { return HeraldMatrix(0.68, 0.69, 0.19, 0.10); }

enum class HeraldSource { fixed, calibrated };

struct DDRunConfig {
  double n_bar = 4.0;
  double amplitude_0_mhz = 1.0;
  double amplitude_n_mhz = 1.0;
  double phase_pair_0_rad = 0.0;
  double phase_pair_n_rad = kPi;
  double global_phase_rad = 0.0;
  bool allow_phase_override = false;
  double curve_end_us = 10.0;
  double curve_step_us = 0.25;
  std::optional<double> wait_duration_us;
  double attempt_duration_us = 1.4;
  double settle_us = 10.0;

  DDDriveConfig drive() const {
    DDDriveConfig c;
    c.n_bar = n_bar;
    c.amplitude_0 = kTwoPi * amplitude_0_mhz;
    c.amplitude_n = kTwoPi * amplitude_n_mhz;
    c.phase_pair_0 = phase_pair_0_rad;
    c.phase_pair_n = phase_pair_n_rad;
    c.global_phase = global_phase_rad;
    c.allow_phase_override = allow_phase_override;
    c.stabilize_duration = curve_end_us;
    c.wait_duration = wait_duration_us;
    return c;
  }

  std::vector<double> grid() const {
    if (!(curve_step_us > 0.0) || !(curve_end_us > 0.0)) throw ConfigError("dd curve grid is empty");
    std::vector<double> g;
    const auto n = static_cast<long>(std::floor(curve_end_us / curve_step_us + 1e-9));
    for (long i = 0; i <= n; ++i) g.push_back(curve_step_us * static_cast<double>(i));
    return g;
  }
};

struct MBRunConfig {
  ParityModel parity;
  StepTiming timing;
  int n_max = 12;
  std::optional<double> phi_o_rad;
  std::optional<double> z_correction_rad;
};

struct NFPRunConfig {
  int k_max = kDefaultMaxBoosts;
  HeraldSource herald_source = HeraldSource::fixed;
  HeraldMatrix c_dd = fixed_herald_dd();
  HeraldMatrix c_mb = fixed_herald_mb();
  std::optional<double> herald_threshold;  // calibrated source; the operating point when empty
  int n_traj_file = 200;
  int n_traj_stats = 10000;
  std::optional<Mat4> transition_dd;  // skips the simulation when set
  std::optional<Mat4> transition_mb;
};

struct SweepRunConfig {
  double herald_min = -0.4;
  double herald_max = 0.6;
  int points = 41;
  int histogram_samples = 100000;
  int histogram_bins = 60;
  std::optional<Vec4> state_dd;  // population vector to sweep; steady state when empty
  std::optional<Vec4> state_mb;
};

struct CalibrateRunConfig {
  std::vector<double> durations_us{0.0, 0.1, 0.2, 0.33, 0.5, 0.66, 0.8, 1.0, 1.5, 2.0, 3.0, 4.0};
  std::vector<double> n_bars{1.5, 3.0, 4.5, 6.0, 9.0};
  int theta_points = 73;
  CalibrationRates misreport = CalibrationRates::scaled;
};

struct RunConfig {
  SystemParams system;
  IntegratorConfig integrator;
  DDRunConfig dd;
  MBRunConfig mb;
  NFPRunConfig nfp;
  SweepRunConfig sweep;
  CalibrateRunConfig calibrate;
  std::uint64_t seed = 12345;
  std::string output_dir = "out";
  int workers = 0;  // 0: hardware concurrency

  int resolved_workers() const {
    if (workers > 0) return workers;
    return static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  }

  MBSetup mb_setup() const {
    MBSetup s;
    s.system = system;
    s.parity = mb.parity;
    s.timing = mb.timing;
    s.integrator = integrator;
    s.phi_o = mb.phi_o_rad.value_or(0.0);
    s.z_correction = mb.z_correction_rad.value_or(0.0);
    return s;
  }

  void validate() const {
    system.validate(std::max(dd.n_bar, mb.parity.n_bar_meas));
    integrator.validate(system.shortest_timescale());
    dd.drive().validate();
    mb.parity.validate();
    mb.timing.validate();
    if (mb.n_max < 0) throw ConfigError("mb.n_max must be >= 0");
    if (nfp.k_max < 0) throw ConfigError("nfp.k_max must be >= 0");
    if (nfp.n_traj_file < 1 || nfp.n_traj_stats < 1) throw ConfigError("trajectory counts must be >= 1");
    if (sweep.points < 1) throw ConfigError("sweep.points must be >= 1");
    if (sweep.points > 1 && !(sweep.herald_max > sweep.herald_min)) {
      throw ConfigError("sweep.herald_max must exceed sweep.herald_min");
    }
    if (calibrate.durations_us.empty() || calibrate.n_bars.empty()) throw ConfigError("calibration grid is empty");
    if (calibrate.theta_points < 3) throw ConfigError("calibrate.theta_points must be >= 3");
    if (dd.attempt_duration_us <= 0.0) throw ConfigError("dd.attempt_duration_us must be positive");
  }
};

// ---------------------------------------------------------------------------
// JSON mapping

namespace detail {

class Reader {
 public:
  Reader(const Json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(where() + " must be an object");
  }
  ~Reader() = default;

  template <class T>
  void get(const char* key, T& out) {
    seen_.insert(key);
    if (!j_.contains(key)) return;
    if constexpr (std::is_integral_v<T> && !std::is_same_v<T, bool>) {
      const bool ok = std::is_unsigned_v<T> ? j_.at(key).is_number_unsigned() : j_.at(key).is_number_integer();
      if (!ok) throw ConfigError(where() + "." + key + " must be an integer");
    }
    try {
      out = j_.at(key).get<T>();
    } catch (const nlohmann::json::exception&) {
      throw ConfigError(where() + "." + key + " has the wrong type");
    }
  }

  void get(const char* key, std::optional<double>& out) {
    seen_.insert(key);
    if (!j_.contains(key)) return;
    if (j_.at(key).is_null()) {
      out.reset();
      return;
    }
    double v = 0.0;
    get(key, v);
    out = v;
  }

  void get(const char* key, HeraldMatrix& out) {
    seen_.insert(key);
    if (!j_.contains(key)) return;
    std::vector<double> v;
    get(key, v);
    if (v.size() != 4) throw ConfigError(where() + "." + key + " needs four entries");
    try {
      out = HeraldMatrix(v[0], v[1], v[2], v[3]);
    } catch (const InvariantError& e) {
      throw ConfigError(where() + "." + key + ": " + e.what());
    }
  }

  void get(const char* key, std::optional<Vec4>& out) {
    seen_.insert(key);
    if (!j_.contains(key) || j_.at(key).is_null()) return;
    std::vector<double> v;
    get(key, v);
    if (v.size() != 4) throw ConfigError(where() + "." + key + " needs four entries");
    out = Vec4(v[0], v[1], v[2], v[3]);
  }

  /// 4x4 matrix given as a list of four columns.
  void get(const char* key, std::optional<Mat4>& out) {
    seen_.insert(key);
    if (!j_.contains(key) || j_.at(key).is_null()) return;
    std::vector<std::vector<double>> cols;
    get(key, cols);
    if (cols.size() != 4) throw ConfigError(where() + "." + key + " needs four columns");
    Mat4 m;
    for (int c = 0; c < 4; ++c) {
      if (cols[c].size() != 4) throw ConfigError(where() + "." + key + " columns need four entries");
      for (int r = 0; r < 4; ++r) m(r, c) = cols[c][r];
    }
    try {
      TransitionMatrix check(m);
      (void)check;
    } catch (const InvariantError& e) {
      throw ConfigError(where() + "." + key + ": " + e.what());
    }
    out = m;
  }

  Json sub(const char* key) {
    seen_.insert(key);
    return j_.contains(key) ? j_.at(key) : Json::object();
  }

  std::string child(const char* key) const { return path_.empty() ? key : path_ + "." + key; }

  void finish() const {
    for (const auto& [k, v] : j_.items()) {
      if (!seen_.count(k)) throw ConfigError("unknown config key " + where() + "." + k);
    }
  }

 private:
  std::string where() const { return path_.empty() ? "<root>" : path_; }
  const Json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

inline Json optional_json(const std::optional<double>& v) { return v ? Json(*v) : Json(nullptr); }

inline Json columns_json(const Mat4& m) {
  Json cols = Json::array();
  for (int c = 0; c < 4; ++c) cols.push_back({m(0, c), m(1, c), m(2, c), m(3, c)});
  return cols;
}

inline Json vec_json(const Vec4& v) { return Json::array({v(0), v(1), v(2), v(3)}); }

}  // namespace detail

inline RunConfig config_from_json(const Json& root) {
  RunConfig c;
  detail::Reader r(root, "");
  r.get("seed", c.seed);
  r.get("output_dir", c.output_dir);
  r.get("workers", c.workers);
  {
    const Json j = r.sub("system");
    detail::Reader s(j, "system");
    auto& p = c.system;
    s.get("chi_a_mhz", p.chi_a_mhz);
    s.get("chi_b_mhz", p.chi_b_mhz);
    s.get("kappa_mhz", p.kappa_mhz);
    s.get("t1_a_us", p.t1_a_us);
    s.get("t1_b_us", p.t1_b_us);
    s.get("t2_a_us", p.t2_a_us);
    s.get("t2_b_us", p.t2_b_us);
    s.get("thermal_pop_a", p.thermal_pop_a);
    s.get("thermal_pop_b", p.thermal_pop_b);
    s.get("eta", p.eta);
    s.get("fock_dim", p.fock_dim);
    s.get("anharmonicity_a_mhz", p.anharmonicity_a_mhz);
    s.get("anharmonicity_b_mhz", p.anharmonicity_b_mhz);
    s.finish();
  }
  {
    const Json j = r.sub("integrator");
    detail::Reader s(j, "integrator");
    double dt_ns = c.integrator.dt * 1e3;
    s.get("dt_ns", dt_ns);
    c.integrator.dt = dt_ns * 1e-3;
    s.get("max_trace_drift", c.integrator.max_trace_drift);
    s.finish();
  }
  {
    const Json j = r.sub("dd");
    detail::Reader s(j, "dd");
    auto& d = c.dd;
    s.get("n_bar", d.n_bar);
    s.get("amplitude_0_mhz", d.amplitude_0_mhz);
    s.get("amplitude_n_mhz", d.amplitude_n_mhz);
    s.get("phase_pair_0_rad", d.phase_pair_0_rad);
    s.get("phase_pair_n_rad", d.phase_pair_n_rad);
    s.get("global_phase_rad", d.global_phase_rad);
    s.get("allow_phase_override", d.allow_phase_override);
    s.get("curve_end_us", d.curve_end_us);
    s.get("curve_step_us", d.curve_step_us);
    s.get("wait_duration_us", d.wait_duration_us);
    s.get("attempt_duration_us", d.attempt_duration_us);
    s.get("settle_us", d.settle_us);
    s.finish();
  }
  {
    const Json j = r.sub("mb");
    detail::Reader s(j, "mb");
    auto& m = c.mb;
    s.get("n_bar_meas", m.parity.n_bar_meas);
    s.get("eps_eo", m.parity.eps_eo);
    s.get("eps_oe", m.parity.eps_oe);
    s.get("pulse_decay_us", m.timing.pulse_decay);
    s.get("measurement_us", m.timing.measurement);
    s.get("latency_us", m.timing.latency);
    s.get("n_max", m.n_max);
    s.get("phi_o_rad", m.phi_o_rad);
    s.get("z_correction_rad", m.z_correction_rad);
    s.finish();
  }
  {
    const Json j = r.sub("nfp");
    detail::Reader s(j, "nfp");
    auto& n = c.nfp;
    s.get("k_max", n.k_max);
    std::string src = n.herald_source == HeraldSource::fixed ? "fixed" : "calibrated";
    s.get("herald_source", src);
    if (src == "fixed") {
      n.herald_source = HeraldSource::fixed;
    } else if (src == "calibrated") {
      n.herald_source = HeraldSource::calibrated;
    } else {
      throw ConfigError("nfp.herald_source must be 'fixed' or 'calibrated'");
    }
    s.get("c_dd", n.c_dd);
    s.get("c_mb", n.c_mb);
    s.get("herald_threshold", n.herald_threshold);
    s.get("n_traj_file", n.n_traj_file);
    s.get("n_traj_stats", n.n_traj_stats);
    s.get("transition_dd", n.transition_dd);
    s.get("transition_mb", n.transition_mb);
    s.finish();
  }
  {
    const Json j = r.sub("sweep");
    detail::Reader s(j, "sweep");
    auto& w = c.sweep;
    s.get("herald_min", w.herald_min);
    s.get("herald_max", w.herald_max);
    s.get("points", w.points);
    s.get("histogram_samples", w.histogram_samples);
    s.get("histogram_bins", w.histogram_bins);
    s.get("state_dd", w.state_dd);
    s.get("state_mb", w.state_mb);
    s.finish();
  }
  {
    const Json j = r.sub("calibrate");
    detail::Reader s(j, "calibrate");
    s.get("durations_us", c.calibrate.durations_us);
    s.get("n_bars", c.calibrate.n_bars);
    s.get("theta_points", c.calibrate.theta_points);
    std::string mode = c.calibrate.misreport == CalibrationRates::scaled ? "scaled" : "fixed";
    s.get("misreport", mode);
    if (mode == "scaled") {
      c.calibrate.misreport = CalibrationRates::scaled;
    } else if (mode == "fixed") {
      c.calibrate.misreport = CalibrationRates::fixed;
    } else {
      throw ConfigError("calibrate.misreport must be 'scaled' or 'fixed'");
    }
    s.finish();
  }
  r.finish();
  return c;
}

inline Json system_to_json(const SystemParams& p) {
  return Json{{"chi_a_mhz", p.chi_a_mhz},
                 {"chi_b_mhz", p.chi_b_mhz},
                 {"kappa_mhz", p.kappa_mhz},
                 {"t1_a_us", p.t1_a_us},
                 {"t1_b_us", p.t1_b_us},
                 {"t2_a_us", p.t2_a_us},
                 {"t2_b_us", p.t2_b_us},
                 {"thermal_pop_a", p.thermal_pop_a},
                 {"thermal_pop_b", p.thermal_pop_b},
                 {"eta", p.eta},
                 {"fock_dim", p.fock_dim},
                 {"anharmonicity_a_mhz", p.anharmonicity_a_mhz},
                 {"anharmonicity_b_mhz", p.anharmonicity_b_mhz}};
}

inline Json config_to_json(const RunConfig& c) {
  Json j;
  j["seed"] = c.seed;
  j["output_dir"] = c.output_dir;
  j["workers"] = c.workers;
  j["system"] = system_to_json(c.system);
  j["integrator"] = {{"dt_ns", c.integrator.dt * 1e3}, {"max_trace_drift", c.integrator.max_trace_drift}};
  const auto& d = c.dd;
  j["dd"] = {{"n_bar", d.n_bar},
             {"amplitude_0_mhz", d.amplitude_0_mhz},
             {"amplitude_n_mhz", d.amplitude_n_mhz},
             {"phase_pair_0_rad", d.phase_pair_0_rad},
             {"phase_pair_n_rad", d.phase_pair_n_rad},
             {"global_phase_rad", d.global_phase_rad},
             {"allow_phase_override", d.allow_phase_override},
             {"curve_end_us", d.curve_end_us},
             {"curve_step_us", d.curve_step_us},
             {"wait_duration_us", detail::optional_json(d.wait_duration_us)},
             {"attempt_duration_us", d.attempt_duration_us},
             {"settle_us", d.settle_us}};
  const auto& m = c.mb;
  j["mb"] = {{"n_bar_meas", m.parity.n_bar_meas},
             {"eps_eo", m.parity.eps_eo},
             {"eps_oe", m.parity.eps_oe},
             {"pulse_decay_us", m.timing.pulse_decay},
             {"measurement_us", m.timing.measurement},
             {"latency_us", m.timing.latency},
             {"n_max", m.n_max},
             {"phi_o_rad", detail::optional_json(m.phi_o_rad)},
             {"z_correction_rad", detail::optional_json(m.z_correction_rad)}};
  const auto& n = c.nfp;
  j["nfp"] = {{"k_max", n.k_max},
              {"herald_source", n.herald_source == HeraldSource::fixed ? "fixed" : "calibrated"},
              {"c_dd", detail::vec_json(n.c_dd.diagonal())},
              {"c_mb", detail::vec_json(n.c_mb.diagonal())},
              {"herald_threshold", detail::optional_json(n.herald_threshold)},
              {"n_traj_file", n.n_traj_file},
              {"n_traj_stats", n.n_traj_stats},
              {"transition_dd", n.transition_dd ? detail::columns_json(*n.transition_dd) : Json(nullptr)},
              {"transition_mb", n.transition_mb ? detail::columns_json(*n.transition_mb) : Json(nullptr)}};
  const auto& w = c.sweep;
  j["sweep"] = {{"herald_min", w.herald_min},
                {"herald_max", w.herald_max},
                {"points", w.points},
                {"histogram_samples", w.histogram_samples},
                {"histogram_bins", w.histogram_bins},
                {"state_dd", w.state_dd ? detail::vec_json(*w.state_dd) : Json(nullptr)},
                {"state_mb", w.state_mb ? detail::vec_json(*w.state_mb) : Json(nullptr)}};
  j["calibrate"] = {{"durations_us", c.calibrate.durations_us},
                    {"n_bars", c.calibrate.n_bars},
                    {"theta_points", c.calibrate.theta_points},
                    {"misreport", c.calibrate.misreport == CalibrationRates::scaled ? "scaled" : "fixed"}};
  return j;
}

inline RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path);
  Json j;
  try {
    j = Json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("config " + path + " is not valid JSON: " + e.what());
  }
  return config_from_json(j);
}

// ---------------------------------------------------------------------------
// Output

/// Shortest round-trip decimal text, NaN written as "nan".
inline std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  char buf[64];
  for (int prec = 1; prec <= 17; ++prec) {
    std::snprintf(buf, sizeof buf, "%.*g", prec, v);
    if (std::strtod(buf, nullptr) == v) break;
  }
  return buf;
}

class CsvWriter {
 public:
  CsvWriter(const std::filesystem::path& path, const std::vector<std::string>& header) : out_(path) {
    if (!out_) throw ConfigError("cannot write " + path.string());
    row_strings(header);
  }

  void row(const std::vector<double>& values) {
    std::vector<std::string> s;
    s.reserve(values.size());
    for (double v : values) s.push_back(format_number(v));
    row_strings(s);
  }

  void row_strings(const std::vector<std::string>& values) {
    for (std::size_t i = 0; i < values.size(); ++i) {
      if (i) out_ << ',';
      out_ << values[i];
    }
    out_ << '\n';
  }

 private:
  std::ofstream out_;
};

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write " + path.string());
  out << text;
}

inline void write_json(const std::filesystem::path& path, const Json& j) { write_text(path, j.dump(2) + "\n"); }

inline std::string format_matrix(const Mat4& m) {
  std::ostringstream s;
  s << "# rows/columns: phi_minus phi_plus gg ee; column j is the distribution after one step from state j\n";
  for (int r = 0; r < 4; ++r) {
    for (int c = 0; c < 4; ++c) {
      char buf[32];
      std::snprintf(buf, sizeof buf, "%s%.6f", c ? " " : "", m(r, c));
      s << buf;
    }
    s << '\n';
  }
  return s.str();
}

inline std::filesystem::path prepare_output_dir(const std::string& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec || !std::filesystem::is_directory(dir)) throw ConfigError("cannot create output directory " + dir);
  const auto probe = std::filesystem::path(dir) / ".write_probe";
  {
    std::ofstream out(probe);
    if (!out) throw ConfigError("output directory " + dir + " is not writable");
  }
  std::filesystem::remove(probe, ec);
  return dir;
}

// ---------------------------------------------------------------------------
// SVG

struct PlotSeries {
  std::string label;
  std::vector<double> x;
  std::vector<double> y;
  bool markers = false;
};

/// Minimal line/scatter chart with axes, ticks and a legend.
inline std::string render_svg(const std::string& title, const std::string& xlabel, const std::string& ylabel,
                              const std::vector<PlotSeries>& series) {
  constexpr double kW = 640, kH = 420, kL = 70, kR = 20, kT = 40, kB = 55;
  double x0 = 1e300, x1 = -1e300, y0 = 1e300, y1 = -1e300;
  for (const auto& s : series) {
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) continue;
      x0 = std::min(x0, s.x[i]);
      x1 = std::max(x1, s.x[i]);
      y0 = std::min(y0, s.y[i]);
      y1 = std::max(y1, s.y[i]);
    }
  }
  if (x0 > x1) x0 = 0, x1 = 1, y0 = 0, y1 = 1;
  if (x1 == x0) x1 = x0 + 1;
  if (y1 == y0) y1 = y0 + 1;
  const double pad = 0.05 * (y1 - y0);
  y0 -= pad;
  y1 += pad;
  auto px = [&](double x) { return kL + (x - x0) / (x1 - x0) * (kW - kL - kR); };
  auto py = [&](double y) { return kH - kB - (y - y0) / (y1 - y0) * (kH - kT - kB); };
  static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"};

  std::ostringstream o;
  char buf[256];
  o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"640\" height=\"420\" font-family=\"sans-serif\" "
       "font-size=\"12\">\n";
  o << "<rect width=\"640\" height=\"420\" fill=\"white\"/>\n";
  o << "<text x=\"320\" y=\"22\" text-anchor=\"middle\" font-size=\"14\">" << title << "</text>\n";
  std::snprintf(buf, sizeof buf, "<rect x=\"%g\" y=\"%g\" width=\"%g\" height=\"%g\" fill=\"none\" stroke=\"black\"/>\n",
                kL, kT, kW - kL - kR, kH - kT - kB);
  o << buf;
  for (int i = 0; i <= 5; ++i) {
    const double xv = x0 + (x1 - x0) * i / 5.0;
    const double yv = y0 + (y1 - y0) * i / 5.0;
    std::snprintf(buf, sizeof buf, "<text x=\"%.1f\" y=\"%.1f\" text-anchor=\"middle\">%.3g</text>\n", px(xv),
                  kH - kB + 16, xv);
    o << buf;
    std::snprintf(buf, sizeof buf, "<text x=\"%.1f\" y=\"%.1f\" text-anchor=\"end\">%.3g</text>\n", kL - 6,
                  py(yv) + 4, yv);
    o << buf;
  }
  std::snprintf(buf, sizeof buf, "<text x=\"%.1f\" y=\"%.1f\" text-anchor=\"middle\">", (kL + kW - kR) / 2, kH - 12);
  o << buf << xlabel << "</text>\n";
  std::snprintf(buf, sizeof buf, "<text x=\"16\" y=\"%.1f\" text-anchor=\"middle\" transform=\"rotate(-90 16 %.1f)\">",
                (kT + kH - kB) / 2, (kT + kH - kB) / 2);
  o << buf << ylabel << "</text>\n";
  for (std::size_t k = 0; k < series.size(); ++k) {
    const auto& s = series[k];
    const char* col = colors[k % 6];
    if (s.markers) {
      for (std::size_t i = 0; i < s.x.size(); ++i) {
        if (!std::isfinite(s.y[i])) continue;
        std::snprintf(buf, sizeof buf, "<circle cx=\"%.1f\" cy=\"%.1f\" r=\"2\" fill=\"%s\"/>\n", px(s.x[i]),
                      py(s.y[i]), col);
        o << buf;
      }
    } else {
      o << "<polyline fill=\"none\" stroke=\"" << col << "\" stroke-width=\"1.5\" points=\"";
      for (std::size_t i = 0; i < s.x.size(); ++i) {
        if (!std::isfinite(s.y[i])) continue;
        std::snprintf(buf, sizeof buf, "%.1f,%.1f ", px(s.x[i]), py(s.y[i]));
        o << buf;
      }
      o << "\"/>\n";
    }
    std::snprintf(buf, sizeof buf, "<text x=\"%.1f\" y=\"%.1f\" fill=\"%s\">", kL + 10, kT + 16 + 15.0 * k, col);
    o << buf << s.label << "</text>\n";
  }
  o << "</svg>\n";
  return o.str();
}

}  // namespace bellstab
