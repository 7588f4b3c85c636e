#pragma once

// Fixed-step integrating-factor RK4 integration of the Lindblad master equation
//
//   d rho / dt = -i [H(t), rho] + sum_k rate_k D[L_k] rho,
//   D[L] rho   = L rho L^dag - 1/2 {L^dag L, rho}.
//
// Time is in microseconds and Hamiltonians in rad/us. Operators are stored
// densely; the integrator compiles each segment into sparse copies of its
// operators because every operator on the qubit-qubit-cavity space is sparse.

#include <Eigen/Sparse>

#include <cmath>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "bellstab/errors.hpp"
#include "bellstab/quantum_core.hpp"

namespace bellstab {

using Coefficient = std::function<Complex(double)>;
using SparseMatrix = Eigen::SparseMatrix<Complex>;

/// H(t) = H_static + sum_k f_k(t) O_k, kept Hermitian by construction.
class Hamiltonian {
 public:
  struct Term {
    Matrix op;
    Coefficient coefficient;
    bool add_conjugate_pair;  // when true the term is f O + conj(f) O^dag
  };

  Hamiltonian() = default;
  explicit Hamiltonian(Layout layout)
      : layout_(std::move(layout)), static_(Matrix::Zero(layout_.dim(), layout_.dim())) {}

  /// Adds a time-independent Hermitian operator.
  Hamiltonian& add(const Operator& op) {
    check(op);
    if (!op.is_hermitian(1e-12)) throw InvariantError("static Hamiltonian term is not Hermitian");
    static_ += op.matrix();
    return *this;
  }

  /// Adds f(t) * op for Hermitian op and real f.
  Hamiltonian& add(const Operator& op, std::function<double(double)> f) {
    check(op);
    if (!op.is_hermitian(1e-12)) throw InvariantError("real-coefficient term must be Hermitian");
    terms_.push_back({op.matrix(), [f = std::move(f)](double t) { return Complex(f(t), 0.0); }, false});
    return *this;
  }

  /// Adds f(t) op + conj(f(t)) op^dag.
  Hamiltonian& add_hermitian_pair(const Operator& op, Coefficient f) {
    check(op);
    terms_.push_back({op.matrix(), std::move(f), true});
    return *this;
  }

  /// Sum of two Hamiltonians on the same layout.
  Hamiltonian& operator+=(const Hamiltonian& other) {
    detail::require_same_layout(layout_, other.layout_, "Hamiltonian +=");
    static_ += other.static_;
    terms_.insert(terms_.end(), other.terms_.begin(), other.terms_.end());
    return *this;
  }

  const Layout& layout() const { return layout_; }
  const Matrix& static_part() const { return static_; }
  const std::vector<Term>& terms() const { return terms_; }

  Operator operator()(double t) const {
    Matrix h = static_;
    for (const auto& term : terms_) {
      const Complex c = term.coefficient(t);
      h += c * term.op;
      if (term.add_conjugate_pair) h += std::conj(c) * term.op.adjoint();
    }
    return {layout_, std::move(h)};
  }

 private:
  void check(const Operator& op) const {
    detail::require_same_layout(layout_, op.layout(), "Hamiltonian term");
  }

  Layout layout_;
  Matrix static_;
  std::vector<Term> terms_;
};

struct Dissipator {
  Operator jump;
  double rate = 0.0;  // 1/us

  Dissipator(Operator j, double r) : jump(std::move(j)), rate(r) {
    if (!(rate >= 0.0)) throw InvariantError("dissipator rate must be >= 0");
  }
};

struct EvolutionSegment {
  std::string label;
  Hamiltonian hamiltonian;
  std::vector<Dissipator> dissipators;
  double duration = 0.0;    // us
  double start_time = 0.0;  // time at which H(t) is sampled when the segment begins

  void validate(int samples = 5) const {
    if (!(duration >= 0.0)) throw InvariantError("segment '" + label + "' has negative duration");
    for (const auto& d : dissipators) {
      detail::require_same_layout(hamiltonian.layout(), d.jump.layout(), "segment dissipator");
    }
    for (int i = 0; i < samples; ++i) {
      const double t = start_time + duration * i / std::max(1, samples - 1);
      if (!hamiltonian(t).is_hermitian(1e-10)) {
        throw InvariantError("segment '" + label + "' Hamiltonian is not Hermitian");
      }
    }
  }
};

struct Schedule {
  std::vector<EvolutionSegment> segments;

  double total_duration() const {
    double s = 0.0;
    for (const auto& seg : segments) s += seg.duration;
    return s;
  }
};

struct IntegratorConfig {
  enum class Method { rk4 };

  double dt = 1e-3;  // us
  Method method = Method::rk4;
  double max_trace_drift = 1e-6;

  /// Rejects dt outside (0, shortest_timescale / 20].
  void validate(double shortest_timescale) const {
    if (!(dt > 0.0)) throw ConfigError("integrator dt must be positive");
    if (dt > shortest_timescale / 20.0 * (1.0 + 1e-12)) {
      throw ConfigError("integrator dt = " + std::to_string(dt) +
                        " us exceeds 1/20 of the shortest timescale (" +
                        std::to_string(shortest_timescale) + " us)");
    }
  }
};

/// Reference right-hand side with dense algebra; valid for any square rho.
inline Matrix lindblad_rhs(const Operator& h, const std::vector<Dissipator>& dissipators,
                           const Matrix& rho) {
  if (rho.rows() != h.dim() || rho.cols() != h.dim()) {
    throw DimensionError("lindblad_rhs: rho does not match Hamiltonian dimension");
  }
  Matrix out = -kI * (h.matrix() * rho - rho * h.matrix());
  for (const auto& d : dissipators) {
    detail::require_same_layout(h.layout(), d.jump.layout(), "lindblad_rhs");
    const Matrix& l = d.jump.matrix();
    const Matrix ldl = l.adjoint() * l;
    out += d.rate * (l * rho * l.adjoint() - 0.5 * ldl * rho - 0.5 * rho * ldl);
  }
  return out;
}

inline Matrix lindblad_rhs(const Operator& h, const std::vector<Dissipator>& dissipators,
                           const DensityMatrix& rho) {
  detail::require_same_layout(h.layout(), rho.layout(), "lindblad_rhs");
  return lindblad_rhs(h, dissipators, rho.matrix());
}

/// Sparse compiled generator of one segment:
///   L(t) rho = K(t) rho + rho K(t)^dag + sum_k J_k rho J_k^dag,
///   K(t) = -i H(t) - 1/2 sum_k J_k^dag J_k,  J_k = sqrt(rate_k) L_k.
/// With split_diagonal the diagonal D = -i diag(H_static) is held apart, so
/// apply() returns L(t) rho - (D rho + rho D^dag).
class CompiledGenerator {
 public:
  explicit CompiledGenerator(const EvolutionSegment& seg, bool split_diagonal = false) {
    const auto& h = seg.hamiltonian;
    const int n = h.layout().dim();
    Matrix k = -kI * h.static_part();
    for (const auto& d : seg.dissipators) {
      if (d.rate == 0.0) continue;
      const Matrix j = std::sqrt(d.rate) * d.jump.matrix();
      k -= 0.5 * (j.adjoint() * j);
      jumps_.push_back({sparse(j), sparse(j.adjoint())});
    }
    diag_ = Vector::Zero(n);
    if (split_diagonal) {
      // Only the Hermitian part, so the split-off map is a pure phase that
      // keeps every stage trace free.
      diag_ = -kI * h.static_part().diagonal().real().cast<Complex>();
      k.diagonal() -= diag_;
    }
    k_static_ = sparse(k);
    for (const auto& term : h.terms()) {
      timed_.push_back({sparse(-kI * term.op), term.coefficient, false});
      if (term.add_conjugate_pair) {
        timed_.push_back({sparse(-kI * Matrix(term.op.adjoint())), term.coefficient, true});
      }
    }
    k_ = SparseMatrix(n, n);
  }

  /// Diagonal removed by split_diagonal (zero otherwise).
  const Vector& diagonal() const { return diag_; }

  /// out = L(t) rho. `hermitian` lets rho K^dag be taken as (K rho)^dag.
  void apply(double t, const Matrix& rho, Matrix& out, bool hermitian) const {
    assemble_k(t);
    kr_.noalias() = k_ * rho;
    if (hermitian) {
      out = kr_ + kr_.adjoint();
    } else {
      out = kr_;
      out.noalias() += rho * k_adj_;
    }
    for (const auto& j : jumps_) {
      tmp_.noalias() = j.op * rho;
      out.noalias() += tmp_ * j.adj;
    }
  }

 private:
  struct Jump {
    SparseMatrix op;
    SparseMatrix adj;
  };
  struct Timed {
    SparseMatrix op;
    Coefficient coefficient;
    bool conjugate;
  };

  static SparseMatrix sparse(const Matrix& m) {
    SparseMatrix s = m.sparseView(1.0, 1e-300);
    s.makeCompressed();
    return s;
  }

  void assemble_k(double t) const {
    if (timed_.empty()) {
      if (!assembled_static_) {
        k_ = k_static_;
        k_adj_ = k_.adjoint();
        assembled_static_ = true;
      }
      return;
    }
    k_ = k_static_;
    for (const auto& term : timed_) {
      Complex c = term.coefficient(t);
      if (term.conjugate) c = std::conj(c);
      k_ += c * term.op;
    }
    k_adj_ = k_.adjoint();
  }

  SparseMatrix k_static_;
  Vector diag_;
  std::vector<Jump> jumps_;
  std::vector<Timed> timed_;
  mutable SparseMatrix k_;
  mutable SparseMatrix k_adj_;
  mutable bool assembled_static_ = false;
  mutable Matrix kr_;
  mutable Matrix tmp_;
};

/// Called after every accepted step with (time, state).
using StepObserver = std::function<void(double, const Matrix&)>;

/// Integrates a raw matrix through one segment. The map is real-linear in rho
/// (symmetrization included), so it may be applied to Hermitian basis
/// elements that are not density matrices. Trace drift is measured relative
/// to the input trace.
inline Matrix evolve_matrix(Matrix rho, const EvolutionSegment& seg, const IntegratorConfig& cfg,
                            const StepObserver& observer = {}) {
  if (!(cfg.dt > 0.0)) throw ConfigError("integrator dt must be positive");
  if (!(seg.duration >= 0.0)) throw InvariantError("negative segment duration");
  if (rho.rows() != seg.hamiltonian.layout().dim()) {
    throw DimensionError("evolve: state dimension does not match segment layout");
  }
  if (seg.duration == 0.0) return rho;

  const auto steps = static_cast<long>(std::ceil(seg.duration / cfg.dt - 1e-9));
  const double h = seg.duration / static_cast<double>(steps);
  const CompiledGenerator gen(seg, true);
  const Complex trace0 = rho.trace();
  const double scale = std::max(1.0, std::abs(trace0));

  // Integrating-factor RK4: the diagonal Hamiltonian part is solved exactly
  // as the phase rho_kl -> w_kl rho_kl and RK4 handles the rest. This keeps
  // the fast chi n phases of high Fock levels out of the RK4 error.
  const Vector e_half = (0.5 * h * gen.diagonal()).array().exp().matrix();
  const Matrix w_half = (e_half * e_half.adjoint()).eval();
  const Matrix w_full = w_half.cwiseProduct(w_half);

  Matrix a, b, c, d, stage;
  double t = seg.start_time;
  for (long s = 0; s < steps; ++s) {
    gen.apply(t, rho, a, true);
    stage = w_half.cwiseProduct(rho + (0.5 * h) * a);
    gen.apply(t + 0.5 * h, stage, b, true);
    stage = w_half.cwiseProduct(rho) + (0.5 * h) * b;
    gen.apply(t + 0.5 * h, stage, c, true);
    stage = w_full.cwiseProduct(rho) + h * w_half.cwiseProduct(c);
    gen.apply(t + h, stage, d, true);
    rho = w_full.cwiseProduct(rho + (h / 6.0) * a) + (h / 3.0) * w_half.cwiseProduct(b + c) + (h / 6.0) * d;
    rho = 0.5 * (rho + rho.adjoint()).eval();
    t = seg.start_time + h * static_cast<double>(s + 1);

    const double drift = std::abs(rho.trace() - trace0) / scale;
    if (!(drift <= cfg.max_trace_drift)) {
      throw NumericalError("segment '" + seg.label + "': trace drift " + std::to_string(drift) +
                           " at t = " + std::to_string(t) + " us (dt = " + std::to_string(cfg.dt) +
                           " us); reduce the step size");
    }
    if (observer) observer(t, rho);
  }
  return rho;
}

/// Evolves a density matrix through one segment and re-validates it.
inline DensityMatrix evolve(const DensityMatrix& rho0, const EvolutionSegment& seg,
                            const IntegratorConfig& cfg) {
  detail::require_same_layout(rho0.layout(), seg.hamiltonian.layout(), "evolve");
  Matrix out = evolve_matrix(rho0.matrix(), seg, cfg);
  return {rho0.layout(), std::move(out), DensityTolerances{1e-10, 1e-6, -1e-7}};
}

struct Checkpoint {
  double time;
  DensityMatrix state;
};

/// Chains segments; returns the initial state and the state after every segment.
inline std::vector<Checkpoint> evolve_schedule(const DensityMatrix& rho0, const Schedule& schedule,
                                               const IntegratorConfig& cfg) {
  std::vector<Checkpoint> out;
  out.push_back({0.0, rho0});
  double t = 0.0;
  DensityMatrix rho = rho0;
  for (const auto& seg : schedule.segments) {
    rho = evolve(rho, seg, cfg);
    t += seg.duration;
    out.push_back({t, rho});
  }
  return out;
}

}  // namespace bellstab
