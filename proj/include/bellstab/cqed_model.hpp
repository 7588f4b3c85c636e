#pragma once

// Two transmons dispersively coupled to one readout cavity.
//
// Frame: each qubit rotates at its zero-photon frequency and the cavity at
// the mean of its gg and ee resonances, so the bare Hamiltonian reduces to
//
//   H_disp = (chi_A sigma_z^A / 2 + chi_B sigma_z^B / 2) a^dag a.
//
// With sigma_z = |e><e| - |g><g| the cavity resonance sits at -chi_bar for gg,
// +chi_bar for ee, -(chi_A - chi_B)/2 for ge and +(chi_A - chi_B)/2 for eg,
// and qubit A's transition with n photons is shifted by +chi_A n.

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "bellstab/errors.hpp"
#include "bellstab/lindblad.hpp"
#include "bellstab/quantum_core.hpp"

namespace bellstab {

inline constexpr double kTwoPi = 2.0 * kPi;

/// Physical constants. Frequencies are stored as f = omega / 2 pi in MHz so
/// that values read from a config file round-trip exactly; the accessors
/// return angular frequencies in rad/us.
struct SystemParams {
  double chi_a_mhz = 5.0;
  double chi_b_mhz = 4.5;
  double kappa_mhz = 2.0;
  double t1_a_us = 60.0;
  double t1_b_us = 18.0;
  double t2_a_us = 9.0;
  double t2_b_us = 10.0;
  double thermal_pop_a = 0.05;
  double thermal_pop_b = 0.05;
  double eta = 0.30;
  int fock_dim = 20;
  // Recorded for completeness; the qubits are modeled as two-level systems.
  double anharmonicity_a_mhz = 212.0;
  double anharmonicity_b_mhz = 209.0;

  double chi_a() const { return kTwoPi * chi_a_mhz; }
  double chi_b() const { return kTwoPi * chi_b_mhz; }
  double chi_bar() const { return 0.5 * (chi_a() + chi_b()); }
  double kappa() const { return kTwoPi * kappa_mhz; }
  Layout layout() const { return Layout::full(fock_dim); }

  /// Throws ConfigError when an invariant is violated. `max_photons` is the
  /// largest mean photon number any drive will use.
  void validate(double max_photons = 0.0) const {
    auto positive = [](double v, const char* name) {
      if (!(v > 0.0)) throw ConfigError(std::string(name) + " must be positive");
    };
    if (!(kappa_mhz >= 0.0)) throw ConfigError("kappa must be >= 0");
    positive(t1_a_us, "t1_a");
    positive(t1_b_us, "t1_b");
    positive(t2_a_us, "t2_a");
    positive(t2_b_us, "t2_b");
    if (chi_a_mhz == 0.0 && chi_b_mhz == 0.0) throw ConfigError("at least one chi must be nonzero");
    if (t2_a_us > 2.0 * t1_a_us || t2_b_us > 2.0 * t1_b_us) throw ConfigError("t2 must not exceed 2 t1");
    for (double p : {thermal_pop_a, thermal_pop_b}) {
      if (!(p >= 0.0 && p < 0.5)) throw ConfigError("thermal population must lie in [0, 0.5)");
    }
    if (!(eta > 0.0 && eta <= 1.0)) throw ConfigError("eta must lie in (0, 1]");
    if (fock_dim < 2) throw ConfigError("fock_dim must be >= 2");
    if (fock_dim < static_cast<int>(std::ceil(3.0 * max_photons))) {
      throw ConfigError("fock_dim " + std::to_string(fock_dim) + " is too small for " +
                        std::to_string(max_photons) + " photons");
    }
  }

  /// Shortest dynamical timescale: min(1/kappa, T1, T2, 2 pi/|chi|).
  double shortest_timescale() const {
    double s = std::min({1.0 / kappa(), t1_a_us, t1_b_us, t2_a_us, t2_b_us});
    for (double chi : {chi_a(), chi_b()}) {
      if (chi != 0.0) s = std::min(s, kTwoPi / std::abs(chi));
    }
    return s;
  }
};

/// Rates of a single qubit's dissipators, all in 1/us.
struct QubitRates {
  double down;      // 1/T_down: sigma_-
  double up;        // 1/T_up:   sigma_+
  double dephasing; // 1/T_phi; the dissipator rate is half of it on D[sigma_z]
};

/// Splits 1/T1 into emission and absorption so the steady excited population
/// equals `thermal_pop`, and derives 1/T_phi = 1/T2 - 1/(2 T1).
inline QubitRates qubit_rates(double t1, double t2, double thermal_pop) {
  const double gamma1 = 1.0 / t1;
  const double gphi = 1.0 / t2 - 0.5 * gamma1;
  if (gphi < -1e-15) throw ConfigError("t2 exceeds 2 t1");
  return {(1.0 - thermal_pop) * gamma1, thermal_pop * gamma1, std::max(0.0, gphi)};
}

inline std::vector<Dissipator> qubit_dissipators(const SystemParams& p, const Layout& layout) {
  std::vector<Dissipator> out;
  const QubitRates ra = qubit_rates(p.t1_a_us, p.t2_a_us, p.thermal_pop_a);
  const QubitRates rb = qubit_rates(p.t1_b_us, p.t2_b_us, p.thermal_pop_b);
  out.emplace_back(ops::on_qubit_a(ops::sigma_minus(), layout), ra.down);
  out.emplace_back(ops::on_qubit_a(ops::sigma_plus(), layout), ra.up);
  out.emplace_back(ops::on_qubit_a(ops::sigma_z(), layout), 0.5 * ra.dephasing);
  out.emplace_back(ops::on_qubit_b(ops::sigma_minus(), layout), rb.down);
  out.emplace_back(ops::on_qubit_b(ops::sigma_plus(), layout), rb.up);
  out.emplace_back(ops::on_qubit_b(ops::sigma_z(), layout), 0.5 * rb.dephasing);
  return out;
}

/// Cavity decay plus both qubits' relaxation, excitation and dephasing.
inline std::vector<Dissipator> all_dissipators(const SystemParams& p) {
  const Layout l = p.layout();
  std::vector<Dissipator> out;
  out.emplace_back(ops::on_cavity(ops::annihilation(p.fock_dim), l), p.kappa());
  auto q = qubit_dissipators(p, l);
  out.insert(out.end(), q.begin(), q.end());
  return out;
}

inline Operator build_h_disp(const SystemParams& p) {
  const Layout l = p.layout();
  const Operator n = ops::on_cavity(ops::number(p.fock_dim), l);
  const Operator za = ops::on_qubit_a(ops::sigma_z(), l);
  const Operator zb = ops::on_qubit_b(ops::sigma_z(), l);
  return (0.5 * p.chi_a()) * (za * n) + (0.5 * p.chi_b()) * (zb * n);
}

/// 2 eps_c cos(chi_bar t)(a + a^dag): two tones on the gg and ee resonances.
inline Hamiltonian build_parity_drive(const SystemParams& p, double eps_c) {
  const Layout l = p.layout();
  const Operator a = ops::on_cavity(ops::annihilation(p.fock_dim), l);
  const double chi_bar = p.chi_bar();
  Hamiltonian h(l);
  h.add(a + a.adjoint(), [eps_c, chi_bar](double t) { return 2.0 * eps_c * std::cos(chi_bar * t); });
  return h;
}

/// Resonant drive amplitude that fills the cavity with `n_bar` photons:
/// eps_c = kappa sqrt(n_bar) / 2.
inline double photons_to_amplitude(const SystemParams& p, double n_bar) {
  if (!(n_bar >= 0.0)) throw InvariantError("photon number must be >= 0");
  return 0.5 * p.kappa() * std::sqrt(n_bar);
}

/// Two-qubit basis indices in the (gg, ge, eg, ee) ordering.
enum class QubitBasis : int { gg = 0, ge = 1, eg = 2, ee = 3 };

/// (|ge> + e^{i phase} |eg>) / sqrt 2. phase = pi gives phi_-, phase = 0 gives phi_+.
inline PureState bell_state(double phase) {
  Vector v = Vector::Zero(4);
  v(1) = 1.0 / std::sqrt(2.0);
  v(2) = std::exp(Complex(0.0, phase)) / std::sqrt(2.0);
  return PureState::normalized(Layout::qubit_pair(), v);
}

inline PureState phi_minus() { return bell_state(kPi); }
inline PureState phi_plus() { return bell_state(0.0); }

/// Thermal single-qubit product state of both qubits tensored with the cavity vacuum.
inline DensityMatrix thermal_state(const SystemParams& p) {
  Matrix qa = Matrix::Zero(2, 2);
  qa(0, 0) = 1.0 - p.thermal_pop_a;
  qa(1, 1) = p.thermal_pop_a;
  Matrix qb = Matrix::Zero(2, 2);
  qb(0, 0) = 1.0 - p.thermal_pop_b;
  qb(1, 1) = p.thermal_pop_b;
  Matrix cav = Matrix::Zero(p.fock_dim, p.fock_dim);
  cav(0, 0) = 1.0;
  return {p.layout(), kron(kron(qa, qb), cav)};
}

/// rho_q ⊗ |0><0|.
inline Matrix with_cavity_vacuum(const Matrix& rho_q, int fock_dim) {
  Matrix cav = Matrix::Zero(fock_dim, fock_dim);
  cav(0, 0) = 1.0;
  return kron(rho_q, cav);
}

/// rho_q ⊗ rho_cav.
inline Matrix with_cavity_state(const Matrix& rho_q, const Matrix& rho_cav) { return kron(rho_q, rho_cav); }

/// Mean photon number of a full-layout matrix.
inline double mean_photons(const Matrix& rho, int fock_dim) {
  const Matrix cav = partial_trace_qubits(rho, fock_dim);
  double n = 0.0;
  for (int k = 0; k < fock_dim; ++k) n += k * cav(k, k).real();
  return n;
}

}  // namespace bellstab
