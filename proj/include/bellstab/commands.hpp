#pragma once

// Experiment commands behind the command-line tool. Each command writes its
// CSV files, a JSON summary and a manifest echoing the resolved config into
// the output directory.

#include <cmath>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "bellstab/dd_stabilizer.hpp"
#include "bellstab/io.hpp"
#include "bellstab/markov.hpp"
#include "bellstab/mb_stabilizer.hpp"
#include "bellstab/nfp_model.hpp"
#include "bellstab/outcome_model.hpp"

namespace bellstab {

enum class Scheme { dd, mb };

inline const char* to_string(Scheme s) { return s == Scheme::dd ? "dd" : "mb"; }

inline Scheme parse_scheme(const std::string& s) {
  if (s == "dd") return Scheme::dd;
  if (s == "mb") return Scheme::mb;
  throw ConfigError("scheme must be 'dd' or 'mb', got '" + s + "'");
}

struct CommandOptions {
  bool plot = false;
};

class OutputSet {
 public:
  OutputSet(const RunConfig& cfg, std::string command) : cfg_(cfg), command_(std::move(command)) {
    dir_ = prepare_output_dir(cfg.output_dir);
  }

  std::filesystem::path path(const std::string& name) {
    files_.push_back(name);
    return dir_ / name;
  }

  void finish(const Json& summary, const std::optional<Scheme>& scheme = std::nullopt) {
    Json m;
    m["command"] = command_;
    if (scheme) m["scheme"] = to_string(*scheme);
    m["config"] = config_to_json(cfg_);
    m["summary"] = summary;
    const std::string name =
        scheme ? command_ + "_" + to_string(*scheme) + "_manifest.json" : command_ + "_manifest.json";
    files_.push_back(name);
    m["outputs"] = files_;
    write_json(dir_ / name, m);
  }

 private:
  const RunConfig& cfg_;
  std::string command_;
  std::filesystem::path dir_;
  std::vector<std::string> files_;
};

inline Json fit_json(const ExponentialFit& f) {
  return {{"f_ss", f.f_ss},
          {"f0", f.f0},
          {"tau_us", f.tau},
          {"rms_residual", f.rms_residual},
          {"converged", f.converged},
          {"diagnostic", f.diagnostic}};
}

inline Json state_json(const StateVector4& s) {
  Json j;
  for (int i = 0; i < 4; ++i) j[kFourStateNames[i]] = s[i];
  return j;
}

inline Json nan_safe(double v) { return std::isfinite(v) ? Json(v) : Json(nullptr); }

// ---------------------------------------------------------------------------
// Shared pieces

/// MB model honouring the optional phase overrides; unset phases track -phi_D.
inline MBModel build_configured_mb_model(const RunConfig& cfg) {
  MBSetup setup = cfg.mb_setup();
  if (!cfg.mb.phi_o_rad && !cfg.mb.z_correction_rad) return build_mb_model(setup, false, cfg.resolved_workers());
  const double phi_d = ac_stark_phase(setup.system, setup.parity, setup.timing, setup.integrator);
  setup.phi_o = cfg.mb.phi_o_rad.value_or(-phi_d);
  setup.z_correction = cfg.mb.z_correction_rad.value_or(-phi_d);
  return build_mb_model(setup, true, cfg.resolved_workers());
}

inline TransitionMatrix scheme_transition(const RunConfig& cfg, Scheme s) {
  if (s == Scheme::dd) {
    if (cfg.nfp.transition_dd) return TransitionMatrix(*cfg.nfp.transition_dd);
    return dd_transition_matrix(cfg.system, cfg.dd.drive(), cfg.integrator, cfg.dd.attempt_duration_us,
                                cfg.dd.settle_us, cfg.resolved_workers())
        .matrix;
  }
  if (cfg.nfp.transition_mb) return TransitionMatrix(*cfg.nfp.transition_mb);
  return build_configured_mb_model(cfg).transition;
}

inline SchemeOutcomes scheme_outcomes(const RunConfig& cfg, Scheme s) {
  const auto& pm = cfg.mb.parity;
  return s == Scheme::dd ? calibrate_dd_outcomes(pm.eps_eo, pm.eps_oe, cfg.nfp.c_dd)
                         : calibrate_mb_outcomes(pm.eps_eo, pm.eps_oe, cfg.nfp.c_mb);
}

/// Herald diagonal used by the NFP: the configured values, or the outcome
/// model evaluated at the configured herald threshold.
inline HeraldMatrix scheme_herald(const RunConfig& cfg, Scheme s) {
  const HeraldMatrix& given = s == Scheme::dd ? cfg.nfp.c_dd : cfg.nfp.c_mb;
  if (cfg.nfp.herald_source == HeraldSource::fixed) return given;
  const SchemeOutcomes o = scheme_outcomes(cfg, s);
  const double h = cfg.nfp.herald_threshold.value_or(o.thresholds.i_gg_herald);
  return herald_matrix(o.dist, h, h);
}

// ---------------------------------------------------------------------------
// dd-curve

inline Json cmd_dd_curve(const RunConfig& cfg, const CommandOptions& opt = {}) {
  cfg.validate();
  OutputSet out(cfg, "dd_curve");
  const DDResult r = simulate_dd(cfg.system, cfg.dd.drive(), cfg.dd.grid(), cfg.integrator, cfg.resolved_workers());
  {
    CsvWriter w(out.path("dd_curve.csv"), {"t_us", "fidelity", "p_phi_minus", "p_phi_plus", "p_gg", "p_ee"});
    for (std::size_t i = 0; i < r.times.size(); ++i) {
      const auto& s = r.populations[i];
      w.row({r.times[i], r.fidelities[i], s[0], s[1], s[2], s[3]});
    }
  }
  Json summary = fit_json(r.fit);
  summary["wait_duration_us"] = r.wait_duration;
  summary["final_fidelity"] = r.fidelities.back();
  write_json(out.path("dd_summary.json"), summary);
  if (opt.plot) {
    std::vector<double> fitted;
    for (double t : r.times) fitted.push_back(r.fit.f_ss + (r.fit.f0 - r.fit.f_ss) * std::exp(-t / r.fit.tau));
    write_text(out.path("dd_curve.svg"),
               render_svg("DD stabilization", "stabilization time (us)", "fidelity to phi_-",
                          {{"simulation", r.times, r.fidelities, true}, {"fit", r.times, fitted, false}}));
  }
  out.finish(summary);
  return summary;
}

// ---------------------------------------------------------------------------
// mb-curve

inline Json cmd_mb_curve(const RunConfig& cfg, const CommandOptions& opt = {}) {
  cfg.validate();
  OutputSet out(cfg, "mb_curve");
  const MBModel model = build_configured_mb_model(cfg);
  const MBCurve c = simulate_mb_curve(model, cfg.mb.n_max);
  {
    CsvWriter w(out.path("mb_curve.csv"), {"step", "t_us", "fidelity", "p_phi_minus", "p_phi_plus", "p_gg", "p_ee"});
    for (std::size_t i = 0; i < c.steps.size(); ++i) {
      const auto& s = c.states[i];
      w.row({static_cast<double>(c.steps[i]), c.times[i], c.fidelities[i], s[0], s[1], s[2], s[3]});
    }
  }
  write_text(out.path("mb_transition.txt"), format_matrix(model.transition.matrix()));
  {
    CsvWriter w(out.path("mb_transition.csv"), {"to", "from_phi_minus", "from_phi_plus", "from_gg", "from_ee"});
    const Mat4& m = model.transition.matrix();
    for (int i = 0; i < 4; ++i) {
      w.row_strings({kFourStateNames[i], format_number(m(i, 0)), format_number(m(i, 1)), format_number(m(i, 2)),
                     format_number(m(i, 3))});
    }
  }
  Json summary = fit_json(c.fit);
  summary["steady_state"] = state_json(c.steady);
  summary["markov_tau_us"] = c.markov_tau;
  summary["step_duration_us"] = model.setup.timing.total();
  summary["phi_d_rad"] = model.phi_d;
  summary["phi_o_rad"] = model.setup.phi_o;
  summary["z_correction_rad"] = model.setup.z_correction;
  summary["max_residual_coherence"] = model.diagnostics.max_residual_coherence;
  write_json(out.path("mb_summary.json"), summary);
  if (opt.plot) {
    std::vector<double> n(c.steps.begin(), c.steps.end());
    write_text(out.path("mb_curve.svg"), render_svg("MB stabilization", "correction steps N", "fidelity to phi_-",
                                                    {{"Markov model", n, c.fidelities, false}}));
  }
  out.finish(summary);
  return summary;
}

// ---------------------------------------------------------------------------
// nfp

inline void write_nfp_csv(const std::filesystem::path& path, const NFPResult& r) {
  CsvWriter w(path, {"attempt", "per_attempt_fidelity", "differential_success", "cumulative_success",
                     "surviving_mass", "h_phi_minus", "h_phi_plus", "h_gg", "h_ee"});
  for (int k = 0; k <= r.k_max; ++k) {
    const Vec4& h = r.heralded_states[k];
    w.row({static_cast<double>(k), r.per_attempt_fidelity[k], r.differential_success[k], r.cumulative_success[k],
           r.surviving_mass[k], h(0), h(1), h(2), h(3)});
  }
}

inline Json cmd_nfp(const RunConfig& cfg, Scheme scheme, const CommandOptions& opt = {}) {
  cfg.validate();
  const std::string tag = to_string(scheme);
  OutputSet out(cfg, "nfp");
  const TransitionMatrix t = scheme_transition(cfg, scheme);
  const HeraldMatrix c = scheme_herald(cfg, scheme);
  const StateVector4 s0 = steady_state(t);
  const NFPResult exact = nfp_recursion(t, c, s0, cfg.nfp.k_max);
  write_nfp_csv(out.path("nfp_" + tag + ".csv"), exact);

  std::optional<std::pair<double, double>> parity;
  if (scheme == Scheme::mb) parity = std::make_pair(cfg.mb.parity.eps_eo, cfg.mb.parity.eps_oe);
  const int workers = cfg.resolved_workers();
  const TrajectorySample stats =
      sample_trajectories(t, c, s0, cfg.nfp.n_traj_stats, cfg.nfp.k_max, cfg.seed, parity, workers);
  write_nfp_csv(out.path("nfp_" + tag + "_mc.csv"), stats.empirical);
  const TrajectorySample file =
      sample_trajectories(t, c, s0, cfg.nfp.n_traj_file, cfg.nfp.k_max, cfg.seed ^ 0x9e3779b97f4a7c15ULL, parity,
                          workers);
  {
    CsvWriter w(out.path("nfp_" + tag + "_trajectories.csv"), {"index", "trajectory", "terminal", "final_state"});
    for (std::size_t i = 0; i < file.records.size(); ++i) {
      const auto& rec = file.records[i];
      w.row_strings({std::to_string(i), encode_trajectory(rec),
                     rec.terminal == Terminal::heralded ? "heralded" : "exhausted", kFourStateNames[rec.final_state]});
    }
  }
  {
    CsvWriter w(out.path("nfp_" + tag + "_matrices.csv"), {"state", "herald_c", "s0", "t_col_phi_minus",
                                                           "t_col_phi_plus", "t_col_gg", "t_col_ee"});
    for (int i = 0; i < 4; ++i) {
      w.row_strings({kFourStateNames[i], format_number(c[i]), format_number(s0[i]), format_number(t(i, 0)),
                     format_number(t(i, 1)), format_number(t(i, 2)), format_number(t(i, 3))});
    }
  }

  Json summary;
  summary["k_max"] = cfg.nfp.k_max;
  summary["herald_source"] = cfg.nfp.herald_source == HeraldSource::fixed ? "fixed" : "calibrated";
  summary["herald_c"] = detail::vec_json(c.diagonal());
  summary["s0"] = state_json(s0);
  summary["cumulative_success"] = exact.cumulative_success.back();
  summary["average_heralded_fidelity"] = nan_safe(average_heralded_fidelity(exact));
  summary["postselection_success"] = exact.differential_success.front();
  summary["postselection_fidelity"] = nan_safe(exact.per_attempt_fidelity.front());
  summary["mc_trajectories"] = cfg.nfp.n_traj_stats;
  summary["mc_cumulative_success"] = stats.empirical.cumulative_success.back();
  double mc_avg = std::nan("");
  if (stats.empirical.cumulative_success.back() > 0.0) mc_avg = average_heralded_fidelity(stats.empirical);
  summary["mc_average_heralded_fidelity"] = nan_safe(mc_avg);
  summary["mc_exhausted"] = stats.exhausted;
  summary["mc_exhausted_fidelity"] = nan_safe(stats.exhausted_fidelity);
  write_json(out.path("nfp_" + tag + "_summary.json"), summary);
  if (opt.plot) {
    std::vector<double> k;
    for (int i = 0; i <= cfg.nfp.k_max; ++i) k.push_back(i);
    write_text(out.path("nfp_" + tag + ".svg"),
               render_svg("NFP " + tag, "boost attempts k", "probability",
                          {{"per-attempt fidelity", k, exact.per_attempt_fidelity, false},
                           {"cumulative success", k, exact.cumulative_success, false},
                           {"Monte-Carlo cumulative", k, stats.empirical.cumulative_success, true}}));
  }
  out.finish(summary, scheme);
  return summary;
}

// ---------------------------------------------------------------------------
// threshold-sweep

inline std::vector<double> linear_grid(double lo, double hi, int n) {
  if (n == 1) return {lo};
  std::vector<double> g(n);
  // Rounded so that decimal grid values print as typed.
  for (int i = 0; i < n; ++i) g[i] = std::round((lo + (hi - lo) * i / (n - 1)) * 1e12) / 1e12;
  return g;
}

inline Json cmd_threshold_sweep(const RunConfig& cfg, Scheme scheme, const CommandOptions& opt = {}) {
  cfg.validate();
  const std::string tag = to_string(scheme);
  OutputSet out(cfg, "threshold_sweep");
  const SchemeOutcomes o = scheme_outcomes(cfg, scheme);
  const auto& override_state = scheme == Scheme::dd ? cfg.sweep.state_dd : cfg.sweep.state_mb;
  const StateVector4 s =
      override_state ? StateVector4(*override_state).normalized() : steady_state(scheme_transition(cfg, scheme));
  const auto grid = linear_grid(cfg.sweep.herald_min, cfg.sweep.herald_max, cfg.sweep.points);
  const auto cells = sweep_thresholds(s, o.dist, grid, grid);
  {
    CsvWriter w(out.path("sweep_" + tag + ".csv"), {"threshold_gg", "threshold_ee", "fidelity", "success"});
    for (const auto& cell : cells) w.row({cell.i_gg_herald, cell.i_ee_herald, cell.fidelity, cell.success});
  }
  {
    std::vector<std::string> header{"threshold_gg"};
    for (double te : grid) header.push_back("ee_" + format_number(te));
    CsvWriter w(out.path("sweep_" + tag + "_success_grid.csv"), header);
    for (std::size_t i = 0; i < grid.size(); ++i) {
      std::vector<double> row{grid[i]};
      for (std::size_t j = 0; j < grid.size(); ++j) row.push_back(cells[i * grid.size() + j].success);
      w.row(row);
    }
  }
  {
    std::mt19937_64 rng = stream_rng(cfg.seed, 0);
    const double lo = -1.0;
    const double hi = 2.0;
    const Histogram h =
        sample_histogram(s, o.dist, cfg.sweep.histogram_samples, cfg.sweep.histogram_bins, lo, hi, rng);
    CsvWriter w(out.path("histogram_" + tag + ".csv"), {"bin", "count", "channel", "scheme"});
    for (const char* channel : {"gg", "ee"}) {
      const auto& counts = std::string(channel) == "gg" ? h.gg : h.ee;
      for (std::size_t b = 0; b < counts.size(); ++b) {
        w.row_strings({format_number(lo + (b + 0.5) * h.bin_width()), std::to_string(counts[b]), channel, tag});
      }
    }
  }

  const double hp = o.thresholds.i_gg_herald;
  const auto op = sweep_thresholds(s, o.dist, {hp}, {hp}).front();
  Json summary;
  summary["state"] = state_json(s);
  summary["noise_sigma"] = o.dist.sigma;
  summary["separation_scale"] = o.dist.separation_scale;
  summary["parity_threshold"] = o.thresholds.i_gg_parity;
  summary["operating_threshold"] = hp;
  summary["operating_success"] = op.success;
  summary["operating_fidelity"] = nan_safe(op.fidelity);
  summary["operating_herald_c"] = detail::vec_json(op.herald);
  const auto& tight = cells.front();
  const auto& loose = cells.back();
  summary["tightest_fidelity"] = nan_safe(tight.fidelity);
  summary["loosest_fidelity"] = nan_safe(loose.fidelity);
  write_json(out.path("sweep_" + tag + "_summary.json"), summary);
  if (opt.plot) {
    std::vector<double> x, y;
    for (const auto& cell : cells) {
      if (cell.empty) continue;
      x.push_back(cell.success);
      y.push_back(cell.fidelity);
    }
    write_text(out.path("sweep_" + tag + ".svg"),
               render_svg("Threshold sweep " + tag, "success probability", "fidelity to phi_-",
                          {{"grid cells", x, y, true}}));
  }
  out.finish(summary, scheme);
  return summary;
}

// ---------------------------------------------------------------------------
// prospects

struct ProspectScenario {
  std::string name;
  SystemParams system;
  StepTiming timing;
};

/// Current parameters; eta = 0.6 with the measurement halved and the latency
/// cut by 100 ns; additionally T1 = T2 = 100 us on both qubits.
inline std::vector<ProspectScenario> prospect_scenarios(const RunConfig& cfg) {
  std::vector<ProspectScenario> s;
  s.push_back({"current", cfg.system, cfg.mb.timing});
  ProspectScenario faster{"eta_0.6_short_step", cfg.system, cfg.mb.timing};
  faster.system.eta = 0.6;
  faster.timing.measurement = 0.5 * cfg.mb.timing.measurement;
  faster.timing.latency = cfg.mb.timing.latency - 0.1;
  s.push_back(faster);
  ProspectScenario coherent = faster;
  coherent.name = "eta_0.6_short_step_t1_t2_100us";
  coherent.system.t1_a_us = coherent.system.t1_b_us = 100.0;
  coherent.system.t2_a_us = coherent.system.t2_b_us = 100.0;
  s.push_back(coherent);
  return s;
}

struct ProspectRow {
  std::string name;
  double step_us;
  double dd_f_ss;
  double dd_tau_us;
  double mb_f_ss;
  double mb_tau_us;
};

/// DD depends on neither eta nor the MB step, so scenarios whose DD-relevant
/// parameters match an earlier one reuse its curve.
inline std::vector<ProspectRow> run_prospects(const RunConfig& cfg) {
  const auto scenarios = prospect_scenarios(cfg);
  std::vector<ProspectRow> rows;
  std::vector<std::pair<SystemParams, DDResult>> dd_cache;
  auto dd_key_equal = [](SystemParams a, SystemParams b) {
    a.eta = b.eta = 0.0;
    return system_to_json(a) == system_to_json(b);
  };
  for (const auto& sc : scenarios) {
    const DDResult* dd = nullptr;
    for (const auto& [p, r] : dd_cache) {
      if (dd_key_equal(p, sc.system)) dd = &r;
    }
    if (!dd) {
      dd_cache.emplace_back(sc.system, simulate_dd(sc.system, cfg.dd.drive(), cfg.dd.grid(), cfg.integrator,
                                                   cfg.resolved_workers()));
      dd = &dd_cache.back().second;
    }
    RunConfig mc = cfg;
    mc.system = sc.system;
    mc.mb.timing = sc.timing;
    const MBModel m = build_configured_mb_model(mc);
    const double step = sc.timing.total();
    rows.push_back({sc.name, step, dd->fit.f_ss, dd->fit.tau, steady_state(m.transition).fidelity(),
                    m.transition.relaxation_time(step)});
  }
  return rows;
}

inline Json cmd_prospects(const RunConfig& cfg, const CommandOptions& = {}) {
  cfg.validate();
  OutputSet out(cfg, "prospects");
  const auto rows = run_prospects(cfg);
  Json summary = Json::array();
  {
    CsvWriter w(out.path("prospects.csv"), {"scenario", "mb_step_us", "dd_f_ss", "dd_tau_us", "mb_f_ss", "mb_tau_us"});
    for (const auto& r : rows) {
      w.row_strings({r.name, format_number(r.step_us), format_number(r.dd_f_ss), format_number(r.dd_tau_us),
                     format_number(r.mb_f_ss), format_number(r.mb_tau_us)});
      summary.push_back({{"scenario", r.name}, {"dd_f_ss", r.dd_f_ss}, {"mb_f_ss", r.mb_f_ss}});
    }
  }
  out.finish(summary);
  return summary;
}

// ---------------------------------------------------------------------------
// calibrate

inline Json cmd_calibrate(const RunConfig& cfg, const CommandOptions& opt = {}) {
  cfg.validate();
  OutputSet out(cfg, "calibrate");
  const int workers = cfg.resolved_workers();
  const auto surface =
      calibrate_measurement(cfg.system, cfg.mb.parity, cfg.calibrate.durations_us, cfg.calibrate.n_bars,
                            cfg.integrator, workers, cfg.calibrate.misreport);
  const CalibrationPoint* best = &surface.front();
  {
    CsvWriter w(out.path("calibration.csv"), {"duration_us", "n_bar", "eps_eo", "eps_oe", "success", "fidelity"});
    for (const auto& p : surface) {
      w.row({p.duration, p.n_bar, p.eps_eo, p.eps_oe, p.success, p.fidelity});
      if (p.fidelity > best->fidelity) best = &p;
    }
  }
  const MBModel model = build_mb_model(cfg.mb_setup(), false, workers);
  std::vector<double> thetas;
  const int n = cfg.calibrate.theta_points;
  for (int i = 0; i < n; ++i) thetas.push_back(-kPi + kTwoPi * i / n);
  const auto z = sweep_z_correction(model, thetas);
  {
    CsvWriter w(out.path("z_sweep.csv"), {"theta_rad", "steady_fidelity"});
    for (const auto& p : z) w.row({p.theta, p.fidelity});
  }
  Json summary;
  summary["best_duration_us"] = best->duration;
  summary["best_n_bar"] = best->n_bar;
  summary["best_fidelity"] = best->fidelity;
  summary["phi_d_rad"] = model.phi_d;
  summary["theta_opt_rad"] = optimal_z_correction(z);
  summary["minus_phi_d_rad"] = -model.phi_d;
  write_json(out.path("calibrate_summary.json"), summary);
  if (opt.plot) {
    std::vector<PlotSeries> series;
    for (double nb : cfg.calibrate.n_bars) {
      PlotSeries s{"n_bar " + format_number(nb), {}, {}, false};
      for (const auto& p : surface) {
        if (p.n_bar == nb) {
          s.x.push_back(p.duration);
          s.y.push_back(p.fidelity);
        }
      }
      series.push_back(std::move(s));
    }
    write_text(out.path("calibration.svg"),
               render_svg("Measurement calibration", "duration (us)", "Bell fidelity", series));
  }
  out.finish(summary);
  return summary;
}

}  // namespace bellstab
