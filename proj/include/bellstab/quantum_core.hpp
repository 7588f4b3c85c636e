#pragma once

// Dense state and operator algebra on the two-qubit (+ cavity) Hilbert space.
//
// Tensor factor ordering is fixed: qubit A (Alice) ⊗ qubit B (Bob) ⊗ cavity.
// Each qubit uses the ordered basis (g, e); the cavity uses ascending Fock
// states |0>, ..., |N-1>. A flat index is therefore ((a * 2) + b) * N + n and
// the reduced two-qubit basis reads gg, ge, eg, ee. The Pauli Z convention is
// sigma_z = |e><e| - |g><g|, and sigma_+ = |e><g| raises.

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <complex>
#include <numeric>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "bellstab/errors.hpp"

namespace bellstab {

using Complex = std::complex<double>;
using Matrix = Eigen::MatrixXcd;
using Vector = Eigen::VectorXcd;

inline constexpr Complex kI{0.0, 1.0};
inline constexpr double kPi = 3.14159265358979323846;

/// Ordered list of tensor-factor dimensions.
class Layout {
 public:
  Layout() = default;
  explicit Layout(std::vector<int> factors) : factors_(std::move(factors)) {
    for (int f : factors_) {
      if (f < 1) throw DimensionError("tensor factor dimension must be positive");
    }
  }

  static Layout qubit() { return Layout({2}); }
  static Layout qubit_pair() { return Layout({2, 2}); }
  /// A ⊗ B ⊗ cavity with a Fock truncation of `cavity_dim` levels.
  static Layout full(int cavity_dim) {
    if (cavity_dim < 2) throw DimensionError("cavity_dim must be >= 2");
    return Layout({2, 2, cavity_dim});
  }

  const std::vector<int>& factors() const { return factors_; }
  int dim() const {
    return std::accumulate(factors_.begin(), factors_.end(), 1, std::multiplies<>());
  }
  bool is_qubit_pair() const { return factors_ == std::vector<int>{2, 2}; }
  bool is_full() const {
    return factors_.size() == 3 && factors_[0] == 2 && factors_[1] == 2 && factors_[2] >= 2;
  }
  int cavity_dim() const {
    if (!is_full()) throw DimensionError("layout " + str() + " has no cavity factor");
    return factors_[2];
  }

  std::string str() const {
    std::ostringstream os;
    os << '(';
    for (std::size_t i = 0; i < factors_.size(); ++i) os << (i ? "x" : "") << factors_[i];
    os << ')';
    return os.str();
  }

  friend Layout operator*(const Layout& a, const Layout& b) {
    std::vector<int> f = a.factors_;
    f.insert(f.end(), b.factors_.begin(), b.factors_.end());
    return Layout(std::move(f));
  }
  friend bool operator==(const Layout&, const Layout&) = default;

 private:
  std::vector<int> factors_;
};

namespace detail {

inline void require_same_layout(const Layout& a, const Layout& b, const char* what) {
  if (!(a == b)) {
    throw DimensionError(std::string(what) + ": layout mismatch " + a.str() + " vs " + b.str());
  }
}

inline double hermiticity_defect(const Matrix& m) {
  return m.rows() == 0 ? 0.0 : (m - m.adjoint()).cwiseAbs().maxCoeff();
}

}  // namespace detail

/// Square complex matrix acting on a Layout.
class Operator {
 public:
  Operator() = default;
  Operator(Layout layout, Matrix entries) : layout_(std::move(layout)), m_(std::move(entries)) {
    if (m_.rows() != m_.cols()) throw DimensionError("operator must be square");
    if (m_.rows() != layout_.dim()) {
      throw DimensionError("operator size " + std::to_string(m_.rows()) +
                           " does not match layout " + layout_.str());
    }
  }

  static Operator identity(const Layout& l) { return {l, Matrix::Identity(l.dim(), l.dim())}; }
  static Operator zero(const Layout& l) { return {l, Matrix::Zero(l.dim(), l.dim())}; }

  const Layout& layout() const { return layout_; }
  const Matrix& matrix() const { return m_; }
  int dim() const { return static_cast<int>(m_.rows()); }
  Complex operator()(int r, int c) const { return m_(r, c); }

  Operator adjoint() const { return {layout_, m_.adjoint()}; }
  bool is_hermitian(double tol = 1e-12) const { return detail::hermiticity_defect(m_) <= tol; }
  bool is_unitary(double tol = 1e-12) const {
    return (m_ * m_.adjoint() - Matrix::Identity(dim(), dim())).cwiseAbs().maxCoeff() <= tol;
  }

  friend Operator operator+(const Operator& a, const Operator& b) {
    detail::require_same_layout(a.layout_, b.layout_, "operator +");
    return {a.layout_, a.m_ + b.m_};
  }
  friend Operator operator-(const Operator& a, const Operator& b) {
    detail::require_same_layout(a.layout_, b.layout_, "operator -");
    return {a.layout_, a.m_ - b.m_};
  }
  friend Operator operator*(const Operator& a, const Operator& b) {
    detail::require_same_layout(a.layout_, b.layout_, "operator *");
    return {a.layout_, a.m_ * b.m_};
  }
  friend Operator operator*(Complex s, const Operator& a) { return {a.layout_, s * a.m_}; }
  friend Operator operator*(double s, const Operator& a) { return {a.layout_, s * a.m_}; }

 private:
  Layout layout_;
  Matrix m_;
};

/// Unit-norm state vector.
class PureState {
 public:
  PureState() = default;
  PureState(Layout layout, Vector amplitudes)
      : layout_(std::move(layout)), v_(std::move(amplitudes)) {
    if (v_.size() != layout_.dim()) throw DimensionError("state size does not match layout");
    if (std::abs(v_.norm() - 1.0) > 1e-12) {
      throw InvariantError("pure state is not normalized (norm = " + std::to_string(v_.norm()) + ")");
    }
  }

  static PureState normalized(Layout layout, Vector amplitudes) {
    const double n = amplitudes.norm();
    if (n == 0.0) throw InvariantError("cannot normalize the zero vector");
    return {std::move(layout), amplitudes / n};
  }
  static PureState basis(const Layout& l, int index) {
    if (index < 0 || index >= l.dim()) throw DimensionError("basis index out of range");
    Vector v = Vector::Zero(l.dim());
    v(index) = 1.0;
    return {l, std::move(v)};
  }

  const Layout& layout() const { return layout_; }
  const Vector& amplitudes() const { return v_; }
  Complex operator[](int i) const { return v_(i); }

  /// State after applying `u`, renormalized to absorb rounding.
  PureState apply(const Operator& u) const {
    detail::require_same_layout(layout_, u.layout(), "apply");
    return normalized(layout_, u.matrix() * v_);
  }

 private:
  Layout layout_;
  Vector v_;
};

struct DensityTolerances {
  double hermitian = 1e-10;
  double trace = 1e-8;
  double min_eigenvalue = -1e-8;
};

/// Hermitian, unit-trace, positive semidefinite matrix.
class DensityMatrix {
 public:
  DensityMatrix() = default;

  /// Validates every invariant; throws InvariantError on violation.
  DensityMatrix(Layout layout, Matrix entries, DensityTolerances tol = {})
      : layout_(std::move(layout)), m_(std::move(entries)) {
    if (m_.rows() != m_.cols() || m_.rows() != layout_.dim()) {
      throw DimensionError("density matrix size does not match layout " + layout_.str());
    }
    if (detail::hermiticity_defect(m_) > tol.hermitian) {
      throw InvariantError("density matrix is not Hermitian");
    }
    if (std::abs(m_.trace() - 1.0) > tol.trace) {
      throw InvariantError("density matrix trace deviates from 1: " +
                           std::to_string(std::abs(m_.trace())));
    }
    const double lmin = min_eigenvalue();
    if (lmin < tol.min_eigenvalue) {
      throw InvariantError("density matrix has negative eigenvalue " + std::to_string(lmin));
    }
  }

  static DensityMatrix from_pure(const PureState& psi) {
    return {psi.layout(), psi.amplitudes() * psi.amplitudes().adjoint()};
  }
  static DensityMatrix maximally_mixed(const Layout& l) {
    return {l, Matrix::Identity(l.dim(), l.dim()) / static_cast<double>(l.dim())};
  }

  const Layout& layout() const { return layout_; }
  const Matrix& matrix() const { return m_; }
  int dim() const { return static_cast<int>(m_.rows()); }
  Complex operator()(int r, int c) const { return m_(r, c); }
  double trace() const { return m_.trace().real(); }
  double min_eigenvalue() const {
    Eigen::SelfAdjointEigenSolver<Matrix> es(m_, Eigen::EigenvaluesOnly);
    return es.eigenvalues().minCoeff();
  }

  /// U rho U^dagger.
  DensityMatrix conjugate(const Operator& u) const {
    detail::require_same_layout(layout_, u.layout(), "conjugate");
    Matrix r = u.matrix() * m_ * u.matrix().adjoint();
    return {layout_, 0.5 * (r + r.adjoint())};
  }

 private:
  Layout layout_;
  Matrix m_;
};

// ---------------------------------------------------------------------------
// Tensor products

inline Matrix kron(const Matrix& a, const Matrix& b) {
  Matrix out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    for (Eigen::Index j = 0; j < a.cols(); ++j) {
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
    }
  }
  return out;
}

inline Vector kron(const Vector& a, const Vector& b) {
  Vector out(a.size() * b.size());
  for (Eigen::Index i = 0; i < a.size(); ++i) out.segment(i * b.size(), b.size()) = a(i) * b;
  return out;
}

inline Operator tensor(const Operator& a, const Operator& b) {
  return {a.layout() * b.layout(), kron(a.matrix(), b.matrix())};
}

inline PureState tensor(const PureState& a, const PureState& b) {
  return PureState::normalized(a.layout() * b.layout(), kron(a.amplitudes(), b.amplitudes()));
}

inline DensityMatrix tensor(const DensityMatrix& a, const DensityMatrix& b) {
  Matrix m = kron(a.matrix(), b.matrix());
  return {a.layout() * b.layout(), 0.5 * (m + m.adjoint())};
}

// ---------------------------------------------------------------------------
// Partial trace

/// Trace over the cavity factor of a (4N x 4N) matrix; works on any matrix,
/// Hermitian or not, so it can be applied to superoperator basis elements.
inline Matrix partial_trace_cavity(const Matrix& m, int cavity_dim) {
  if (m.rows() != 4 * cavity_dim || m.cols() != 4 * cavity_dim) {
    throw DimensionError("partial_trace_cavity: matrix is not 4N x 4N");
  }
  Matrix out = Matrix::Zero(4, 4);
  for (int i = 0; i < 4; ++i) {
    for (int j = 0; j < 4; ++j) {
      out(i, j) = m.block(i * cavity_dim, j * cavity_dim, cavity_dim, cavity_dim).trace();
    }
  }
  return out;
}

inline DensityMatrix partial_trace_cavity(const DensityMatrix& rho) {
  if (!rho.layout().is_full()) throw DimensionError("partial_trace_cavity needs a qubit-qubit-cavity layout");
  Matrix q = partial_trace_cavity(rho.matrix(), rho.layout().cavity_dim());
  return {Layout::qubit_pair(), 0.5 * (q + q.adjoint())};
}

/// Trace over both qubits; returns the cavity's reduced state (N x N).
inline Matrix partial_trace_qubits(const Matrix& m, int cavity_dim) {
  Matrix out = Matrix::Zero(cavity_dim, cavity_dim);
  for (int q = 0; q < 4; ++q) out += m.block(q * cavity_dim, q * cavity_dim, cavity_dim, cavity_dim);
  return out;
}

// ---------------------------------------------------------------------------
// Fidelity

/// <psi| rho |psi>.
inline double fidelity_to_pure(const DensityMatrix& rho, const PureState& psi) {
  detail::require_same_layout(rho.layout(), psi.layout(), "fidelity_to_pure");
  const Complex f = psi.amplitudes().dot(rho.matrix() * psi.amplitudes());
  return std::clamp(f.real(), 0.0, 1.0);
}

/// Same overlap on a raw (possibly unnormalized) matrix; no clamping.
inline double expectation(const Matrix& rho, const Vector& psi) {
  return psi.dot(rho * psi).real();
}

// ---------------------------------------------------------------------------
// Single-qubit operators and rotations

namespace ops {

inline Operator sigma_minus() {
  Matrix m = Matrix::Zero(2, 2);
  m(0, 1) = 1.0;  // |g><e|
  return {Layout::qubit(), m};
}
inline Operator sigma_plus() { return sigma_minus().adjoint(); }
inline Operator sigma_z() {
  Matrix m = Matrix::Zero(2, 2);
  m(0, 0) = -1.0;
  m(1, 1) = 1.0;
  return {Layout::qubit(), m};
}
inline Operator sigma_x() { return sigma_plus() + sigma_minus(); }
inline Operator sigma_y() { return Complex(0, -1) * (sigma_plus() - sigma_minus()); }

inline Operator annihilation(int cavity_dim) {
  if (cavity_dim < 2) throw DimensionError("cavity_dim must be >= 2");
  Matrix m = Matrix::Zero(cavity_dim, cavity_dim);
  for (int n = 1; n < cavity_dim; ++n) m(n - 1, n) = std::sqrt(static_cast<double>(n));
  return {Layout({cavity_dim}), m};
}

inline Operator number(int cavity_dim) {
  const Operator a = annihilation(cavity_dim);
  return a.adjoint() * a;
}

/// Embed a single-qubit operator on Alice into `layout` (qubit pair or full).
inline Operator on_qubit_a(const Operator& op, const Layout& layout) {
  Operator r = tensor(op, Operator::identity(Layout::qubit()));
  if (layout.is_full()) r = tensor(r, Operator::identity(Layout({layout.cavity_dim()})));
  return r;
}

inline Operator on_qubit_b(const Operator& op, const Layout& layout) {
  Operator r = tensor(Operator::identity(Layout::qubit()), op);
  if (layout.is_full()) r = tensor(r, Operator::identity(Layout({layout.cavity_dim()})));
  return r;
}

/// Embed a two-qubit operator into the full layout (identity on the cavity).
inline Operator on_qubits(const Operator& op, const Layout& layout) {
  if (!op.layout().is_qubit_pair()) throw DimensionError("on_qubits expects a 4x4 operator");
  if (!layout.is_full()) return op;
  return tensor(op, Operator::identity(Layout({layout.cavity_dim()})));
}

inline Operator on_cavity(const Operator& op, const Layout& layout) {
  if (!layout.is_full() || op.dim() != layout.cavity_dim()) throw DimensionError("cavity operator does not match layout");
  return tensor(Operator::identity(Layout::qubit_pair()), op);
}

}  // namespace ops

/// exp(-i (angle/2) (cos(axis_phase) sigma_x + sin(axis_phase) sigma_y)).
inline Operator qubit_rotation(double axis_phase, double angle) {
  const double c = std::cos(angle / 2.0);
  const double s = std::sin(angle / 2.0);
  const Operator n = std::cos(axis_phase) * ops::sigma_x() + std::sin(axis_phase) * ops::sigma_y();
  return Complex(c, 0.0) * Operator::identity(Layout::qubit()) + Complex(0.0, -s) * n;
}

/// exp(-i (angle/2) sigma_z).
inline Operator qubit_rotation_z(double angle) {
  Matrix m = Matrix::Zero(2, 2);
  m(0, 0) = std::exp(Complex(0, angle / 2.0));
  m(1, 1) = std::exp(Complex(0, -angle / 2.0));
  return {Layout::qubit(), m};
}

/// True when a = e^{i theta} b for some real theta, entrywise within tol.
inline bool equal_up_to_global_phase(const Operator& a, const Operator& b, double tol = 1e-12) {
  detail::require_same_layout(a.layout(), b.layout(), "equal_up_to_global_phase");
  const Complex overlap = (b.matrix().adjoint() * a.matrix()).trace();
  if (std::abs(overlap) == 0.0) return a.matrix().cwiseAbs().maxCoeff() <= tol && b.matrix().cwiseAbs().maxCoeff() <= tol;
  const Complex phase = overlap / std::abs(overlap);
  return (a.matrix() - phase * b.matrix()).cwiseAbs().maxCoeff() <= tol;
}

}  // namespace bellstab
