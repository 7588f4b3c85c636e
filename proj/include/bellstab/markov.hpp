#pragma once

// Four-state population model over (phi_-, phi_+, gg, ee) and the column-
// stochastic transition matrices that act on it.

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <optional>
#include <string>
#include <vector>

#include "bellstab/cqed_model.hpp"
#include "bellstab/errors.hpp"
#include "bellstab/quantum_core.hpp"

namespace bellstab {

using Vec4 = Eigen::Vector4d;
using Mat4 = Eigen::Matrix4d;

/// Indices into a StateVector4.
enum FourState : int { kPhiMinus = 0, kPhiPlus = 1, kGG = 2, kEE = 3 };

inline constexpr std::array<const char*, 4> kFourStateNames{"phi_minus", "phi_plus", "gg", "ee"};

/// Populations over (phi_-, phi_+, gg, ee).
class StateVector4 {
 public:
  StateVector4() : p_(Vec4::Zero()) {}
  explicit StateVector4(const Vec4& p) : p_(p) {
    if ((p_.array() < 0.0).any()) throw InvariantError("populations must be >= 0");
  }
  StateVector4(double m, double p, double gg, double ee) : StateVector4(Vec4(m, p, gg, ee)) {}

  static StateVector4 unit(int index) {
    Vec4 v = Vec4::Zero();
    v(index) = 1.0;
    return StateVector4(v);
  }

  const Vec4& values() const { return p_; }
  double operator[](int i) const { return p_(i); }
  double sum() const { return p_.sum(); }
  double fidelity() const { return p_(kPhiMinus); }
  bool is_normalized(double tol = 1e-9) const { return std::abs(sum() - 1.0) <= tol; }
  StateVector4 normalized() const {
    const double s = sum();
    if (s <= 0.0) throw InvariantError("cannot normalize an empty population vector");
    return StateVector4(p_ / s);
  }

 private:
  Vec4 p_;
};

/// Qubit-space vectors of the four basis states, in StateVector4 order.
inline std::array<Vector, 4> four_state_basis() {
  std::array<Vector, 4> b;
  b[kPhiMinus] = phi_minus().amplitudes();
  b[kPhiPlus] = phi_plus().amplitudes();
  b[kGG] = Vector::Unit(4, static_cast<int>(QubitBasis::gg));
  b[kEE] = Vector::Unit(4, static_cast<int>(QubitBasis::ee));
  return b;
}

inline Matrix four_state_projector(int index) {
  const Vector v = four_state_basis()[index];
  return v * v.adjoint();
}

struct FourStateReduction {
  Vec4 populations;           // diagonal in the four-state basis
  double residual_coherence;  // largest off-diagonal magnitude in that basis
};

/// Diagonal of a 4x4 qubit matrix in the (phi_-, phi_+, gg, ee) basis. Entries
/// are not renormalized.
inline FourStateReduction reduce_to_four_states(const Matrix& rho4) {
  if (rho4.rows() != 4 || rho4.cols() != 4) throw DimensionError("expected a 4x4 qubit matrix");
  const auto b = four_state_basis();
  Matrix u(4, 4);
  for (int k = 0; k < 4; ++k) u.col(k) = b[k];
  const Matrix r = u.adjoint() * rho4 * u;
  FourStateReduction out{Vec4::Zero(), 0.0};
  for (int i = 0; i < 4; ++i) {
    out.populations(i) = r(i, i).real();
    for (int j = 0; j < 4; ++j) {
      if (i != j) out.residual_coherence = std::max(out.residual_coherence, std::abs(r(i, j)));
    }
  }
  return out;
}

/// Clips tiny negative populations and renormalizes to unit sum.
inline Vec4 clip_and_normalize(Vec4 p, double clip_tol = 1e-9) {
  for (int i = 0; i < 4; ++i) {
    if (p(i) < 0.0) {
      if (p(i) < -clip_tol) throw NumericalError("population " + std::to_string(p(i)) + " is negative");
      p(i) = 0.0;
    }
  }
  const double s = p.sum();
  if (s <= 0.0) throw NumericalError("population vector has no weight");
  return p / s;
}

/// Column-stochastic 4x4 matrix: column j is the distribution after one step
/// starting from basis state j.
class TransitionMatrix {
 public:
  TransitionMatrix() : m_(Mat4::Identity()) {}
  explicit TransitionMatrix(const Mat4& m, double tol = 1e-9) : m_(m) {
    for (int j = 0; j < 4; ++j) {
      for (int i = 0; i < 4; ++i) {
        if (m_(i, j) < -tol) throw InvariantError("transition matrix has a negative entry");
        m_(i, j) = std::max(0.0, m_(i, j));
      }
      if (std::abs(m_.col(j).sum() - 1.0) > tol) {
        throw InvariantError("transition matrix column " + std::to_string(j) + " sums to " +
                             std::to_string(m_.col(j).sum()));
      }
    }
  }

  static TransitionMatrix uniform() { return TransitionMatrix(Mat4::Constant(0.25)); }

  const Mat4& matrix() const { return m_; }
  double operator()(int i, int j) const { return m_(i, j); }

  StateVector4 apply(const StateVector4& s) const { return StateVector4((m_ * s.values()).cwiseMax(0.0)); }

  /// Eigenvalues sorted by decreasing modulus.
  std::vector<std::complex<double>> eigenvalues() const {
    Eigen::EigenSolver<Mat4> es(m_, false);
    std::vector<std::complex<double>> ev(4);
    for (int i = 0; i < 4; ++i) ev[i] = es.eigenvalues()(i);
    std::sort(ev.begin(), ev.end(), [](auto a, auto b) { return std::abs(a) > std::abs(b); });
    return ev;
  }

  /// Relaxation time implied by the subleading eigenvalue: step / (-ln |lambda_2|).
  double relaxation_time(double step_duration) const {
    const double l2 = std::abs(eigenvalues()[1]);
    if (l2 <= 0.0) return 0.0;
    if (l2 >= 1.0) throw NumericalError("subleading eigenvalue has unit modulus; no relaxation");
    return step_duration / (-std::log(l2));
  }

 private:
  Mat4 m_;
};

class DegenerateSteadyState : public NumericalError {
 public:
  explicit DegenerateSteadyState(int multiplicity)
      : NumericalError("eigenvalue 1 has multiplicity " + std::to_string(multiplicity) +
                       "; the stationary distribution depends on the initial state"),
        multiplicity_(multiplicity) {}
  int multiplicity() const { return multiplicity_; }

 private:
  int multiplicity_;
};

/// Iterates s <- T s until successive iterates differ by < tol in L1.
inline std::optional<StateVector4> power_iteration(const TransitionMatrix& t, const StateVector4& start,
                                                   double tol = 1e-13, int max_iter = 200000) {
  Vec4 s = start.values();
  for (int k = 0; k < max_iter; ++k) {
    const Vec4 next = t.matrix() * s;
    if ((next - s).lpNorm<1>() < tol) return StateVector4(next.cwiseMax(0.0) / next.sum());
    s = next;
  }
  return std::nullopt;
}

/// Stationary distribution from the unit eigenvector, cross-checked against
/// power iteration from (1, 0, 0, 0).
inline StateVector4 steady_state(const TransitionMatrix& t) {
  Eigen::EigenSolver<Mat4> es(t.matrix(), true);
  int unit_count = 0;
  int unit_index = -1;
  for (int i = 0; i < 4; ++i) {
    if (std::abs(es.eigenvalues()(i) - 1.0) < 1e-9) {
      ++unit_count;
      unit_index = i;
    }
  }
  if (unit_count == 0) throw NumericalError("transition matrix has no unit eigenvalue");
  if (unit_count > 1) throw DegenerateSteadyState(unit_count);

  Vec4 v = es.eigenvectors().col(unit_index).real();
  if (v.sum() < 0.0) v = -v;
  for (int i = 0; i < 4; ++i) {
    if (v(i) < 0.0 && v(i) >= -1e-12 * std::max(1.0, v.cwiseAbs().maxCoeff())) v(i) = 0.0;
  }
  v /= v.sum();
  if ((v.array() < -1e-12).any()) throw NumericalError("stationary eigenvector has negative entries");
  v = v.cwiseMax(0.0);

  if (auto p = power_iteration(t, StateVector4::unit(kPhiMinus))) {
    if ((p->values() - v).lpNorm<Eigen::Infinity>() > 1e-10) {
      throw NumericalError("eigenvector and power iteration disagree on the steady state");
    }
  }
  return StateVector4(v);
}

/// Diagonal selection matrix: entry j is the probability that a trajectory
/// in basis state j passes the herald condition.
class HeraldMatrix {
 public:
  HeraldMatrix() : c_(Vec4::Zero()) {}
  explicit HeraldMatrix(const Vec4& c) : c_(c) {
    for (int i = 0; i < 4; ++i) {
      if (!(c_(i) >= 0.0 && c_(i) <= 1.0)) throw InvariantError("herald entries must lie in [0, 1]");
    }
  }
  HeraldMatrix(double m, double p, double gg, double ee) : HeraldMatrix(Vec4(m, p, gg, ee)) {}

  static HeraldMatrix identity() { return HeraldMatrix(Vec4::Ones()); }
  static HeraldMatrix zero() { return HeraldMatrix(Vec4::Zero()); }

  const Vec4& diagonal() const { return c_; }
  double operator[](int i) const { return c_(i); }
  Mat4 matrix() const { return c_.asDiagonal(); }

 private:
  Vec4 c_;
};

/// T^n s for n = 0..steps.
inline std::vector<StateVector4> iterate_chain(const TransitionMatrix& t, const StateVector4& s0, int steps) {
  std::vector<StateVector4> out{s0};
  for (int n = 0; n < steps; ++n) out.push_back(t.apply(out.back()));
  return out;
}

}  // namespace bellstab
