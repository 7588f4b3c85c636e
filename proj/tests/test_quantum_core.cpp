#include <gtest/gtest.h>

#include <cmath>

#include "bellstab/cqed_model.hpp"
#include "bellstab/quantum_core.hpp"

using namespace bellstab;

TEST(Layout, DimensionsAndShape) {
  EXPECT_EQ(Layout::qubit_pair().dim(), 4);
  EXPECT_EQ(Layout::full(7).dim(), 28);
  EXPECT_TRUE(Layout::full(7).is_full());
  EXPECT_EQ(Layout::full(7).cavity_dim(), 7);
  EXPECT_FALSE(Layout::qubit_pair().is_full());
}

TEST(Operator, KronOfPaulisMatchesHandBuiltMatrix) {
  const Operator zx = tensor(ops::sigma_z(), ops::sigma_x());
  // sigma_z = diag(-1, 1) in (g, e) order.
  Matrix expected = Matrix::Zero(4, 4);
  expected(0, 1) = expected(1, 0) = -1.0;
  expected(2, 3) = expected(3, 2) = 1.0;
  EXPECT_LT((zx.matrix() - expected).norm(), 1e-15);
}

TEST(Operator, MismatchedLayoutsThrow) {
  const Operator a = Operator::identity(Layout::qubit_pair());
  const Operator b = Operator::identity(Layout::full(3));
  EXPECT_THROW(a * b, DimensionError);
}

TEST(Operator, LadderCommutator) {
  const int n = 6;
  const Matrix a = ops::annihilation(n).matrix();
  const Matrix comm = a * a.adjoint() - a.adjoint() * a;
  // [a, a^dag] = 1 except in the truncated top level.
  for (int k = 0; k < n - 1; ++k) EXPECT_NEAR(comm(k, k).real(), 1.0, 1e-14);
  EXPECT_NEAR(comm(n - 1, n - 1).real(), -(n - 1.0), 1e-14);
}

TEST(PureState, NormalizationEnforced) {
  Vector v = Vector::Zero(4);
  v(0) = 2.0;
  EXPECT_THROW(PureState(Layout::qubit_pair(), v), InvariantError);
  EXPECT_NEAR(PureState::normalized(Layout::qubit_pair(), v).amplitudes().norm(), 1.0, 1e-15);
}

TEST(DensityMatrix, RejectsNonPhysicalInput) {
  Matrix m = Matrix::Zero(4, 4);
  m(0, 0) = 1.5;
  m(1, 1) = -0.5;
  EXPECT_THROW(DensityMatrix(Layout::qubit_pair(), m), InvariantError);
  Matrix h = Matrix::Identity(4, 4) * 0.25;
  h(0, 1) = 0.1;
  EXPECT_THROW(DensityMatrix(Layout::qubit_pair(), h), InvariantError);
}

TEST(PartialTrace, ProductStateFactorizes) {
  const Vector psi = phi_minus().amplitudes();
  const Matrix rq = psi * psi.adjoint();
  Matrix cav = Matrix::Zero(3, 3);
  cav(0, 0) = 0.7;
  cav(2, 2) = 0.3;
  cav(0, 2) = cav(2, 0) = 0.2;
  const Matrix full = kron(rq, cav);
  EXPECT_LT((partial_trace_cavity(full, 3) - rq).norm(), 1e-15);
  EXPECT_LT((partial_trace_qubits(full, 3) - cav).norm(), 1e-15);
}

TEST(Fidelity, BellStatesAreOrthogonal) {
  const auto m = DensityMatrix::from_pure(phi_minus());
  EXPECT_NEAR(fidelity_to_pure(m, phi_minus()), 1.0, 1e-15);
  EXPECT_NEAR(fidelity_to_pure(m, phi_plus()), 0.0, 1e-15);
  EXPECT_NEAR(fidelity_to_pure(DensityMatrix::maximally_mixed(Layout::qubit_pair()), phi_minus()), 0.25, 1e-15);
}

TEST(Rotations, PiPulseFlipsAndIsUnitary) {
  const Operator rx = qubit_rotation(0.0, kPi);
  EXPECT_TRUE(rx.is_unitary());
  const Vector e = rx.matrix() * Vector::Unit(2, 0);
  EXPECT_NEAR(std::norm(e(1)), 1.0, 1e-15);
}

TEST(Rotations, AxisPhaseConjugatesByZ) {
  // R_phi(theta) = Rz(phi) Rx(theta) Rz(-phi)
  for (double phi : {0.3, 1.2, -2.0}) {
    const Operator lhs = qubit_rotation(phi, 0.7);
    const Operator rhs = qubit_rotation_z(phi) * qubit_rotation(0.0, 0.7) * qubit_rotation_z(-phi);
    EXPECT_TRUE(equal_up_to_global_phase(lhs, rhs, 1e-12)) << phi;
  }
}

TEST(Rotations, GlobalPhaseComparison) {
  const Operator u = qubit_rotation(0.4, 1.1);
  EXPECT_TRUE(equal_up_to_global_phase(u, std::exp(Complex(0.0, 0.9)) * u));
  EXPECT_FALSE(equal_up_to_global_phase(u, qubit_rotation(0.4, 1.2)));
}

TEST(Embedding, QubitOperatorsCommuteWithCavity) {
  const Layout l = Layout::full(4);
  const Operator za = ops::on_qubit_a(ops::sigma_z(), l);
  const Operator n = ops::on_cavity(ops::number(4), l);
  EXPECT_LT((za * n - n * za).matrix().norm(), 1e-14);
  EXPECT_THROW(ops::on_cavity(ops::number(3), l), DimensionError);
}
