#pragma once

// Measurement-based stabilization of phi_-.
//
// One correction step is simulated piecewise:
//   1. conditional unitary U_E or U_O (instantaneous),
//   2. free evolution under H_disp while the pulses would play,
//   3. quasi-parity measurement: H_disp plus the two-tone cavity drive,
//      followed by projection onto {odd, gg, ee} of the qubit factor,
//   4. free evolution for the feedback latency.
//
// Conventions. U_O = (R_x ⊗ R_{phi_o}) (1 ⊗ R_z(theta)) and
// U_E = R_x ⊗ R_{phi_o + pi}. Both share the target bell_state(phi_o + pi):
// it is the eigenstate of the U_O rotation, and U_E maps |gg> onto it with
// probability 1/2 after an odd outcome. The measurement adds the AC-Stark
// phase phi_D, so the state seen at the end of a step is
// bell_state(phi_o + pi + phi_D). Choosing phi_o = theta = -phi_D stabilizes
// phi_- exactly.

#include <algorithm>
#include <array>
#include <cmath>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "bellstab/cqed_model.hpp"
#include "bellstab/errors.hpp"
#include "bellstab/fit.hpp"
#include "bellstab/lindblad.hpp"
#include "bellstab/markov.hpp"
#include "bellstab/outcome_model.hpp"
#include "bellstab/parallel.hpp"
#include "bellstab/quantum_core.hpp"

namespace bellstab {

struct ParityModel {
  double n_bar_meas = 4.5;  // photons per tone
  double eps_eo = 0.04;     // P(report even | odd)
  double eps_oe = 0.05;     // P(report odd | even)

  void validate() const {
    if (!(n_bar_meas >= 0.0)) throw ConfigError("n_bar_meas must be >= 0");
    for (double e : {eps_eo, eps_oe}) {
      if (!(e >= 0.0 && e < 1.0)) throw ConfigError("parity error probabilities must lie in [0, 1)");
    }
  }
};

struct StepTiming {
  double pulse_decay = 0.154;  // us
  double measurement = 0.660;  // us
  double latency = 0.686;      // us

  double total() const { return pulse_decay + measurement + latency; }
  void validate() const {
    if (!(pulse_decay >= 0.0 && latency >= 0.0)) throw ConfigError("step segment durations must be >= 0");
    if (!(measurement > 0.0)) throw ConfigError("measurement duration must be positive");
  }
};

// ---------------------------------------------------------------------------
// Conditional unitaries

struct ConditionalUnitaries {
  Operator u_even;  // applied after an even report
  Operator u_odd;   // applied after an odd report
};

/// Z rotation on one qubit built from X and Y pulses: R_x(pi/2) R_y(theta) R_x(-pi/2).
inline Operator composite_z_rotation(double theta) {
  return qubit_rotation(0.0, kPi / 2.0) * qubit_rotation(kPi / 2.0, theta) * qubit_rotation(0.0, -kPi / 2.0);
}

inline ConditionalUnitaries build_conditional_unitaries(double phi_o, double z_correction) {
  const Operator rx = qubit_rotation(0.0, kPi / 2.0);
  const Operator u_e = tensor(rx, qubit_rotation(phi_o + kPi, kPi / 2.0));
  const Operator rot_o = tensor(rx, qubit_rotation(phi_o, kPi / 2.0));
  const Operator z = tensor(Operator::identity(Layout::qubit()), composite_z_rotation(z_correction));
  return {u_e, rot_o * z};
}

/// State stabilized by a pair of unitaries with the given Bob axis phase.
inline PureState conditional_target(double phi_o) { return bell_state(phi_o + kPi); }

// ---------------------------------------------------------------------------
// Quasi-parity measurement

enum class ProjectionOutcome { odd, even_gg, even_ee };

inline const char* to_string(ProjectionOutcome o) {
  switch (o) {
    case ProjectionOutcome::odd: return "odd";
    case ProjectionOutcome::even_gg: return "even_gg";
    case ProjectionOutcome::even_ee: return "even_ee";
  }
  return "?";
}

inline Parity parity_of(ProjectionOutcome o) {
  return o == ProjectionOutcome::odd ? Parity::odd : Parity::even;
}

/// Qubit projector (4x4) of a measurement outcome.
inline Matrix qubit_projector(ProjectionOutcome o) {
  Matrix p = Matrix::Zero(4, 4);
  switch (o) {
    case ProjectionOutcome::odd:
      p(1, 1) = 1.0;
      p(2, 2) = 1.0;
      break;
    case ProjectionOutcome::even_gg: p(0, 0) = 1.0; break;
    case ProjectionOutcome::even_ee: p(3, 3) = 1.0; break;
  }
  return p;
}

/// P rho P with P acting on the qubit factor of a 4N x 4N matrix.
inline Matrix project_qubits(const Matrix& rho, ProjectionOutcome o, int cavity_dim) {
  const Matrix p = qubit_projector(o);
  Matrix out = Matrix::Zero(rho.rows(), rho.cols());
  for (int i = 0; i < 4; ++i) {
    if (p(i, i) == 0.0) continue;
    for (int j = 0; j < 4; ++j) {
      if (p(j, j) == 0.0) continue;
      out.block(i * cavity_dim, j * cavity_dim, cavity_dim, cavity_dim) =
          rho.block(i * cavity_dim, j * cavity_dim, cavity_dim, cavity_dim);
    }
  }
  return out;
}

struct ParityBranch {
  ProjectionOutcome outcome;  // true projection
  Parity reported;
  double probability;
  DensityMatrix post_state;  // projected and renormalized
};

/// Ideal projection with misreported labels. The post-state follows the
/// true projection; only the reported parity is flipped.
inline std::vector<ParityBranch> apply_quasi_parity(const DensityMatrix& rho, const ParityModel& pm) {
  const Layout& l = rho.layout();
  const bool full = l.is_full();
  if (!full && !l.is_qubit_pair()) throw DimensionError("apply_quasi_parity expects qubit or full layout");
  const int n = full ? l.cavity_dim() : 1;
  std::vector<ParityBranch> out;
  for (auto o : {ProjectionOutcome::odd, ProjectionOutcome::even_gg, ProjectionOutcome::even_ee}) {
    Matrix proj = project_qubits(rho.matrix(), o, n);
    const double p = proj.trace().real();
    if (p <= 1e-15) continue;
    proj /= p;
    proj = 0.5 * (proj + proj.adjoint()).eval();
    const DensityMatrix post(l, proj, DensityTolerances{1e-10, 1e-8, -1e-7});
    const Parity truth = parity_of(o);
    const Parity flipped = truth == Parity::odd ? Parity::even : Parity::odd;
    const double flip = truth == Parity::odd ? pm.eps_eo : pm.eps_oe;
    if (p * (1.0 - flip) > 0.0) out.push_back({o, truth, p * (1.0 - flip), post});
    if (p * flip > 0.0) out.push_back({o, flipped, p * flip, post});
  }
  return out;
}

// ---------------------------------------------------------------------------
// Step segments

/// Everything needed to simulate a correction step.
struct MBSetup {
  SystemParams system;
  ParityModel parity;
  StepTiming timing;
  IntegratorConfig integrator;
  double phi_o = 0.0;
  double z_correction = 0.0;

  ConditionalUnitaries unitaries() const { return build_conditional_unitaries(phi_o, z_correction); }
  void validate() const {
    system.validate(parity.n_bar_meas);
    parity.validate();
    timing.validate();
    integrator.validate(system.shortest_timescale());
  }
};

inline EvolutionSegment free_segment(const SystemParams& p, double duration, std::string label) {
  EvolutionSegment s;
  s.label = std::move(label);
  s.hamiltonian = Hamiltonian(p.layout());
  s.hamiltonian.add(build_h_disp(p));
  s.dissipators = all_dissipators(p);
  s.duration = duration;
  return s;
}

inline EvolutionSegment measurement_segment(const SystemParams& p, double n_bar, double duration) {
  EvolutionSegment s = free_segment(p, duration, "measurement");
  s.hamiltonian += build_parity_drive(p, photons_to_amplitude(p, n_bar));
  return s;
}

struct StepSegments {
  EvolutionSegment pulse_decay;
  EvolutionSegment measurement;
  EvolutionSegment latency;
};

inline StepSegments step_segments(const MBSetup& s) {
  return {free_segment(s.system, s.timing.pulse_decay, "pulse_decay"),
          measurement_segment(s.system, s.parity.n_bar_meas, s.timing.measurement),
          free_segment(s.system, s.timing.latency, "latency")};
}

/// Qubit-factor unitary conjugation of a full-space matrix.
inline Matrix conjugate_qubits(const Matrix& rho, const Operator& u4, int cavity_dim) {
  const Matrix u = kron(u4.matrix(), Matrix::Identity(cavity_dim, cavity_dim));
  return u * rho * u.adjoint();
}

struct StepBranch {
  Parity reported;
  double probability;
  DensityMatrix state;
};

/// One full correction step from `rho` given the previously reported parity.
/// Returns one branch per reported parity with nonzero probability.
inline std::vector<StepBranch> simulate_correction_step(const DensityMatrix& rho, Parity last_reported,
                                                        const MBSetup& setup) {
  const int n = setup.system.fock_dim;
  detail::require_same_layout(rho.layout(), setup.system.layout(), "simulate_correction_step");
  const StepSegments seg = step_segments(setup);
  const ConditionalUnitaries cu = setup.unitaries();
  const Operator& u = last_reported == Parity::odd ? cu.u_odd : cu.u_even;

  Matrix m = conjugate_qubits(rho.matrix(), u, n);
  m = evolve_matrix(m, seg.pulse_decay, setup.integrator);
  m = evolve_matrix(m, seg.measurement, setup.integrator);
  const Matrix odd = project_qubits(m, ProjectionOutcome::odd, n);
  const Matrix even = project_qubits(m, ProjectionOutcome::even_gg, n) + project_qubits(m, ProjectionOutcome::even_ee, n);
  const auto& pm = setup.parity;

  std::vector<StepBranch> out;
  for (Parity rep : {Parity::odd, Parity::even}) {
    Matrix part = rep == Parity::odd ? Matrix((1.0 - pm.eps_eo) * odd + pm.eps_oe * even)
                                     : Matrix(pm.eps_eo * odd + (1.0 - pm.eps_oe) * even);
    const double p = part.trace().real();
    if (p <= 1e-15) continue;
    part = evolve_matrix(part / p, seg.latency, setup.integrator);
    out.push_back({rep, p, DensityMatrix(rho.layout(), part, DensityTolerances{1e-10, 1e-6, -1e-7})});
  }
  return out;
}

// ---------------------------------------------------------------------------
// Step channel and transition matrix

/// Linear map from a two-qubit input (cavity in vacuum) to the two-qubit
/// state at the end of a step, excluding the conditional unitary. The
/// measurement projection is non-selective. Stored as the images of the 16
/// Hermitian basis matrices.
class StepChannel {
 public:
  StepChannel() = default;
  explicit StepChannel(std::array<Matrix, 16> images) : images_(std::move(images)) {}

  static std::array<Matrix, 16> hermitian_basis() {
    std::array<Matrix, 16> b;
    int k = 0;
    for (int i = 0; i < 4; ++i) {
      for (int j = i; j < 4; ++j) {
        Matrix s = Matrix::Zero(4, 4);
        if (i == j) {
          s(i, i) = 1.0;
          b[k++] = s;
        } else {
          s(i, j) = 1.0;
          s(j, i) = 1.0;
          b[k++] = s;
          Matrix a = Matrix::Zero(4, 4);
          a(i, j) = kI;
          a(j, i) = -kI;
          b[k++] = a;
        }
      }
    }
    return b;
  }

  /// Coordinates of a Hermitian matrix in hermitian_basis().
  static std::array<double, 16> coordinates(const Matrix& x) {
    std::array<double, 16> c{};
    int k = 0;
    for (int i = 0; i < 4; ++i) {
      for (int j = i; j < 4; ++j) {
        if (i == j) {
          c[k++] = x(i, i).real();
        } else {
          c[k++] = x(i, j).real();
          c[k++] = x(i, j).imag();
        }
      }
    }
    return c;
  }

  Matrix apply(const Matrix& x) const {
    if (x.rows() != 4 || x.cols() != 4) throw DimensionError("StepChannel expects a 4x4 input");
    const auto c = coordinates(0.5 * (x + x.adjoint()));
    Matrix out = Matrix::Zero(4, 4);
    for (int k = 0; k < 16; ++k) out += c[k] * images_[k];
    return out;
  }

 private:
  std::array<Matrix, 16> images_;
};

/// Full-space version of the non-selective step (no unitary).
inline Matrix step_without_unitary(const Matrix& rho_full, const StepSegments& seg, const IntegratorConfig& cfg,
                                   int cavity_dim) {
  Matrix m = evolve_matrix(rho_full, seg.pulse_decay, cfg);
  m = evolve_matrix(m, seg.measurement, cfg);
  Matrix projected = Matrix::Zero(m.rows(), m.cols());
  for (auto o : {ProjectionOutcome::odd, ProjectionOutcome::even_gg, ProjectionOutcome::even_ee}) {
    projected += project_qubits(m, o, cavity_dim);
  }
  return evolve_matrix(projected, seg.latency, cfg);
}

inline StepChannel compute_step_channel(const MBSetup& setup, int workers = 1) {
  const int n = setup.system.fock_dim;
  const StepSegments seg = step_segments(setup);
  const auto basis = StepChannel::hermitian_basis();
  std::array<Matrix, 16> images;
  parallel_for(16, workers, [&](std::size_t k) {
    const Matrix out = step_without_unitary(with_cavity_vacuum(basis[k], n), seg, setup.integrator, n);
    images[k] = partial_trace_cavity(out, n);
  });
  return StepChannel(std::move(images));
}

/// Populations after one step from basis state `j` when unitary `u` is applied.
inline Vec4 step_column(const StepChannel& ch, const Operator& u, int j) {
  const Matrix rho = four_state_projector(j);
  const Matrix out = ch.apply(u.matrix() * rho * u.matrix().adjoint());
  return reduce_to_four_states(out).populations;
}

struct TransitionDiagnostics {
  double max_residual_coherence = 0.0;
};

/// Columns weight U_O / U_E by the probability that the previous report
/// matched the current parity.
inline TransitionMatrix transition_matrix_from_channel(const StepChannel& ch, const ConditionalUnitaries& cu,
                                                       const ParityModel& pm, TransitionDiagnostics* diag = nullptr) {
  Mat4 t;
  double coh = 0.0;
  for (int j = 0; j < 4; ++j) {
    const bool odd = j == kPhiMinus || j == kPhiPlus;
    const double w_odd = odd ? 1.0 - pm.eps_eo : pm.eps_oe;
    Vec4 col = Vec4::Zero();
    for (const auto& [w, u] : {std::pair{w_odd, &cu.u_odd}, std::pair{1.0 - w_odd, &cu.u_even}}) {
      const Matrix rho = four_state_projector(j);
      const Matrix out = ch.apply(u->matrix() * rho * u->matrix().adjoint());
      const auto red = reduce_to_four_states(out);
      coh = std::max(coh, red.residual_coherence);
      col += w * red.populations;
    }
    t.col(j) = clip_and_normalize(col);
  }
  if (diag) diag->max_residual_coherence = coh;
  return TransitionMatrix(t);
}

/// Transition matrix of the controller's first step, which always applies U_E.
inline TransitionMatrix first_step_matrix(const StepChannel& ch, const ConditionalUnitaries& cu) {
  Mat4 t;
  for (int j = 0; j < 4; ++j) t.col(j) = clip_and_normalize(step_column(ch, cu.u_even, j));
  return TransitionMatrix(t);
}

// ---------------------------------------------------------------------------
// AC-Stark phase

/// Bell phase acquired by an odd state over one step with no unitaries:
/// arg rho_{eg,ge}(end) - arg rho_{eg,ge}(start), wrapped to (-pi, pi].
inline double ac_stark_phase(const SystemParams& p, const ParityModel& pm, const StepTiming& timing,
                             const IntegratorConfig& cfg) {
  MBSetup s{p, pm, timing, cfg};
  const StepSegments seg = step_segments(s);
  const int n = p.fock_dim;
  const Matrix phi = phi_minus().amplitudes() * phi_minus().amplitudes().adjoint();
  Matrix m = with_cavity_vacuum(phi, n);
  m = evolve_matrix(m, seg.pulse_decay, cfg);
  m = evolve_matrix(m, seg.measurement, cfg);
  m = evolve_matrix(m, seg.latency, cfg);
  const Matrix q = partial_trace_cavity(m, n);
  return std::remainder(std::arg(q(2, 1)) - std::arg(phi(2, 1)), 2.0 * kPi);
}

// ---------------------------------------------------------------------------
// Markov model

struct MBModel {
  MBSetup setup;
  double phi_d = 0.0;
  StepChannel channel;
  TransitionMatrix transition;
  TransitionMatrix first_step;
  TransitionDiagnostics diagnostics;
};

/// Sets phi_o = z_correction = -phi_D (target phi_-) unless `keep_phases`.
inline MBModel build_mb_model(MBSetup setup, bool keep_phases = false, int workers = 1) {
  setup.validate();
  MBModel m;
  m.phi_d = ac_stark_phase(setup.system, setup.parity, setup.timing, setup.integrator);
  if (!keep_phases) {
    setup.phi_o = -m.phi_d;
    setup.z_correction = -m.phi_d;
  }
  m.setup = setup;
  m.channel = compute_step_channel(setup, workers);
  const auto cu = setup.unitaries();
  m.transition = transition_matrix_from_channel(m.channel, cu, setup.parity, &m.diagnostics);
  m.first_step = first_step_matrix(m.channel, cu);
  return m;
}

inline TransitionMatrix build_transition_matrix(const MBSetup& setup, int workers = 1) {
  return build_mb_model(setup, false, workers).transition;
}

/// Four-state populations of the thermal initial state.
inline StateVector4 thermal_populations(const SystemParams& p) {
  const Matrix q = partial_trace_cavity(thermal_state(p).matrix(), p.fock_dim);
  return StateVector4(clip_and_normalize(reduce_to_four_states(q).populations));
}

struct MBCurve {
  std::vector<int> steps;
  std::vector<double> times;  // N * step duration, us
  std::vector<StateVector4> states;
  std::vector<double> fidelities;
  ExponentialFit fit;
  StateVector4 steady;
  double markov_tau = 0.0;  // step / (-ln |lambda_2|)
};

/// Fidelity after N = 0..n_max steps from the thermal state. The first step
/// uses U_E for every input (the controller starts in the even state).
inline MBCurve simulate_mb_curve(const MBModel& model, int n_max) {
  if (n_max < 0) throw ConfigError("n_max must be >= 0");
  MBCurve c;
  const double step = model.setup.timing.total();
  StateVector4 s = thermal_populations(model.setup.system);
  for (int n = 0; n <= n_max; ++n) {
    if (n == 1) s = model.first_step.apply(s);
    if (n > 1) s = model.transition.apply(s);
    c.steps.push_back(n);
    c.times.push_back(n * step);
    c.states.push_back(s);
    c.fidelities.push_back(s.fidelity());
  }
  if (n_max >= 2) c.fit = fit_exponential_rise(c.times, c.fidelities);
  c.steady = steady_state(model.transition);
  c.markov_tau = model.transition.relaxation_time(step);
  return c;
}

/// Piecewise density-matrix iteration without the four-state reduction: the
/// controller state (last report) and the cavity are tracked exactly.
inline std::vector<double> simulate_mb_full(const MBSetup& setup, int n_max) {
  const int n = setup.system.fock_dim;
  struct Weighted {
    double w;
    DensityMatrix rho;
  };
  std::vector<std::optional<Weighted>> ctrl(2);  // index 0: even, 1: odd
  ctrl[0] = Weighted{1.0, thermal_state(setup.system)};
  std::vector<double> fid;
  auto fidelity_now = [&]() {
    Matrix q = Matrix::Zero(4, 4);
    for (const auto& c : ctrl) {
      if (c) q += c->w * partial_trace_cavity(c->rho.matrix(), n);
    }
    return expectation(q, phi_minus().amplitudes());
  };
  fid.push_back(fidelity_now());
  for (int step = 0; step < n_max; ++step) {
    std::array<Matrix, 2> acc{Matrix::Zero(4 * n, 4 * n), Matrix::Zero(4 * n, 4 * n)};
    std::array<double, 2> wsum{0.0, 0.0};
    for (int k = 0; k < 2; ++k) {
      if (!ctrl[k]) continue;
      const Parity last = k == 1 ? Parity::odd : Parity::even;
      for (const auto& b : simulate_correction_step(ctrl[k]->rho, last, setup)) {
        const int idx = b.reported == Parity::odd ? 1 : 0;
        const double w = ctrl[k]->w * b.probability;
        acc[idx] += w * b.state.matrix();
        wsum[idx] += w;
      }
    }
    for (int k = 0; k < 2; ++k) {
      if (wsum[k] > 1e-15) {
        Matrix m = acc[k] / wsum[k];
        ctrl[k] = Weighted{wsum[k], DensityMatrix(setup.system.layout(), 0.5 * (m + m.adjoint()),
                                                  DensityTolerances{1e-10, 1e-6, -1e-7})};
      } else {
        ctrl[k].reset();
      }
    }
    fid.push_back(fidelity_now());
  }
  return fid;
}

// ---------------------------------------------------------------------------
// Sweeps

struct ZSweepPoint {
  double theta;
  double fidelity;  // steady-state phi_- population
};

/// Steady-state fidelity versus the Z-correction angle. Bob's axis phase is
/// held at -phi_D so the nominal target is phi_-.
inline std::vector<ZSweepPoint> sweep_z_correction(const MBModel& model, const std::vector<double>& thetas) {
  std::vector<ZSweepPoint> out;
  for (double theta : thetas) {
    const auto cu = build_conditional_unitaries(model.setup.phi_o, theta);
    const TransitionMatrix t = transition_matrix_from_channel(model.channel, cu, model.setup.parity);
    out.push_back({theta, steady_state(t).fidelity()});
  }
  return out;
}

/// Theta with the highest steady-state fidelity, refined by a parabola
/// through the best grid point and its neighbours.
inline double optimal_z_correction(const std::vector<ZSweepPoint>& sweep) {
  if (sweep.empty()) throw InvariantError("empty sweep");
  std::size_t best = 0;
  for (std::size_t i = 1; i < sweep.size(); ++i) {
    if (sweep[i].fidelity > sweep[best].fidelity) best = i;
  }
  if (best == 0 || best + 1 == sweep.size()) return sweep[best].theta;
  const auto& a = sweep[best - 1];
  const auto& b = sweep[best];
  const auto& c = sweep[best + 1];
  const double denom = (a.theta - b.theta) * (a.theta - c.theta) * (b.theta - c.theta);
  const double ca = (c.theta * (b.fidelity - a.fidelity) + b.theta * (a.fidelity - c.fidelity) +
                     a.theta * (c.fidelity - b.fidelity)) / denom;
  const double cb = (c.theta * c.theta * (a.fidelity - b.fidelity) + b.theta * b.theta * (c.fidelity - a.fidelity) +
                     a.theta * a.theta * (b.fidelity - c.fidelity)) / denom;
  if (!(ca < 0.0)) return b.theta;
  return -cb / (2.0 * ca);
}

// ---------------------------------------------------------------------------
// Measurement calibration

/// n_bar * integral_0^d (1 - exp(-kappa t / 2))^2 dt: photons collected
/// while the cavity field rings up.
inline double integrated_photons(double kappa, double n_bar, double duration) {
  if (duration <= 0.0) return 0.0;
  const double e1 = 1.0 - std::exp(-0.5 * kappa * duration);
  const double e2 = 1.0 - std::exp(-kappa * duration);
  return n_bar * (duration - 4.0 / kappa * e1 + e2 / kappa);
}

/// Misreport rates of a measurement of the given duration and strength. The
/// noise width scales as 1/sqrt(eta * collected photons) and is anchored so
/// that the reference point reproduces `pm`'s rates; thresholds stay fixed.
struct MisreportModel {
  double kappa;
  double eta;
  double ref_signal;
  ParityCalibration ref;

  static MisreportModel anchored(const SystemParams& p, const ParityModel& pm, double ref_duration = 0.66,
                                 double ref_n_bar = 4.5) {
    return {p.kappa(), p.eta, p.eta * integrated_photons(p.kappa(), ref_n_bar, ref_duration),
            calibrate_parity(pm.eps_eo, pm.eps_oe)};
  }

  /// (eps_eo, eps_oe) for a measurement with efficiency `eta`.
  std::pair<double, double> rates(double duration, double n_bar, double eta_now) const {
    const double signal = eta_now * integrated_photons(kappa, n_bar, duration);
    if (signal <= 0.0) return {0.75, 0.25};
    const double sigma = ref.sigma * std::sqrt(ref_signal / signal);
    const double odd = normal_cdf(ref.threshold / sigma);
    return {1.0 - odd * odd, normal_cdf((ref.threshold - 1.0) / sigma) * odd};
  }
  std::pair<double, double> rates(double duration, double n_bar) const { return rates(duration, n_bar, eta); }
};

struct CalibrationPoint {
  double duration;
  double n_bar;
  double eps_eo;
  double eps_oe;
  double success;   // probability of an odd report
  double fidelity;  // to the closest odd Bell state, given an odd report
};

/// Fidelity to the closest state (|ge> + e^{i phi}|eg>)/sqrt 2 over phi.
inline double odd_bell_fidelity(const Matrix& rho4) {
  const double tr = rho4.trace().real();
  if (!(tr > 0.0)) throw NumericalError("empty state");
  return (0.5 * (rho4(1, 1).real() + rho4(2, 2).real()) + std::abs(rho4(1, 2))) / tr;
}

/// How misreport rates depend on the calibration measurement: scaled with the
/// collected signal (MisreportModel), or held at the ParityModel values.
enum class CalibrationRates { scaled, fixed };

/// Calibration experiment: pi/2 pulses on both qubits from |gg>, a parity
/// measurement of the given duration and strength, then post-selection on an
/// odd report.
inline std::vector<CalibrationPoint> calibrate_measurement(const SystemParams& p, const ParityModel& pm,
                                                           std::vector<double> durations,
                                                           const std::vector<double>& n_bars,
                                                           const IntegratorConfig& cfg, int workers = 1,
                                                           CalibrationRates mode = CalibrationRates::scaled) {
  if (durations.empty() || n_bars.empty()) throw ConfigError("calibration grid is empty");
  std::sort(durations.begin(), durations.end());
  if (durations.front() < 0.0) throw ConfigError("durations must be >= 0");
  p.validate();
  const MisreportModel mis = MisreportModel::anchored(p, pm);
  const Operator pulses = tensor(qubit_rotation(0.0, kPi / 2.0), qubit_rotation(0.0, kPi / 2.0));
  const Vector psi = pulses.matrix() * Vector::Unit(4, 0);

  std::vector<CalibrationPoint> out(durations.size() * n_bars.size());
  parallel_for(n_bars.size(), workers, [&](std::size_t b) {
    const double nb = n_bars[b];
    if (!(nb >= 0.0)) throw ConfigError("calibration n_bar must be >= 0");
    // Strong drives get a larger cavity space than the configured one.
    SystemParams pb = p;
    pb.fock_dim = std::max(p.fock_dim, static_cast<int>(std::ceil(3.0 * nb)));
    const int n = pb.fock_dim;
    Matrix rho = with_cavity_vacuum(psi * psi.adjoint(), n);
    double t = 0.0;
    for (std::size_t i = 0; i < durations.size(); ++i) {
      if (durations[i] > t) {
        EvolutionSegment seg = measurement_segment(pb, nb, durations[i] - t);
        seg.start_time = t;
        rho = evolve_matrix(rho, seg, cfg);
        t = durations[i];
      }
      const Matrix q = partial_trace_cavity(rho, n);
      const auto [eo, oe] =
          mode == CalibrationRates::scaled ? mis.rates(durations[i], nb) : std::make_pair(pm.eps_eo, pm.eps_oe);
      const Matrix sel = (1.0 - eo) * project_qubits(q, ProjectionOutcome::odd, 1) +
                         oe * (project_qubits(q, ProjectionOutcome::even_gg, 1) +
                               project_qubits(q, ProjectionOutcome::even_ee, 1));
      out[b * durations.size() + i] = {durations[i], nb, eo, oe, sel.trace().real(), odd_bell_fidelity(sel)};
    }
  });
  return out;
}

}  // namespace bellstab
