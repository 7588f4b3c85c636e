#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "bellstab/cqed_model.hpp"
#include "bellstab/markov.hpp"

using namespace bellstab;

namespace {

Mat4 random_stochastic(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.01, 1.0);
  Mat4 m;
  for (int j = 0; j < 4; ++j) {
    for (int i = 0; i < 4; ++i) m(i, j) = u(rng);
    m.col(j) /= m.col(j).sum();
  }
  return m;
}

/// Stationary vector from the bordered linear system (T - I) s = 0, sum s = 1.
Vec4 linear_solve_oracle(const Mat4& t) {
  Eigen::Matrix<double, 5, 4> a;
  a.topRows<4>() = t - Mat4::Identity();
  a.row(4).setOnes();
  Eigen::Matrix<double, 5, 1> b = Eigen::Matrix<double, 5, 1>::Zero();
  b(4) = 1.0;
  return a.colPivHouseholderQr().solve(b);
}

}  // namespace

TEST(TransitionMatrix, ColumnSumsChecked) {
  Mat4 m = Mat4::Constant(0.25);
  m(0, 0) = 0.3;
  EXPECT_THROW(TransitionMatrix{m}, InvariantError);
  m = Mat4::Constant(0.25);
  m(0, 0) = -0.1;
  m(1, 0) = 0.6;
  EXPECT_THROW(TransitionMatrix{m}, InvariantError);
}

TEST(TransitionMatrix, ApplyConservesMass) {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 50; ++trial) {
    const TransitionMatrix t(random_stochastic(rng));
    StateVector4 s(0.1, 0.2, 0.3, 0.4);
    for (int k = 0; k < 20; ++k) s = t.apply(s);
    EXPECT_NEAR(s.sum(), 1.0, 1e-9);
  }
}

TEST(SteadyState, UniformMatrixGivesQuarter) {
  const StateVector4 s = steady_state(TransitionMatrix::uniform());
  for (int i = 0; i < 4; ++i) EXPECT_NEAR(s[i], 0.25, 1e-12);
}

TEST(SteadyState, MatchesLinearSolveOracle) {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 100; ++trial) {
    const Mat4 m = random_stochastic(rng);
    const StateVector4 s = steady_state(TransitionMatrix(m));
    const Vec4 o = linear_solve_oracle(m);
    EXPECT_LT((s.values() - o).lpNorm<Eigen::Infinity>(), 1e-10);
    EXPECT_LT((m * s.values() - s.values()).lpNorm<1>(), 1e-12);
  }
}

TEST(SteadyState, DegenerateChainsRejected) {
  EXPECT_THROW(steady_state(TransitionMatrix(Mat4::Identity())), DegenerateSteadyState);
  Mat4 block = Mat4::Zero();
  block.topLeftCorner<2, 2>().setConstant(0.5);
  block.bottomRightCorner<2, 2>().setConstant(0.5);
  try {
    steady_state(TransitionMatrix(block));
    FAIL() << "expected DegenerateSteadyState";
  } catch (const DegenerateSteadyState& e) {
    EXPECT_EQ(e.multiplicity(), 2);
  }
}

TEST(Relaxation, MixtureWithStationaryProjector) {
  // T = lambda I + (1 - lambda) pi 1^T has subleading eigenvalue lambda.
  const Vec4 pi(0.4, 0.3, 0.2, 0.1);
  for (double lambda : {0.2, 0.5, 0.9}) {
    const Mat4 m = lambda * Mat4::Identity() + (1.0 - lambda) * pi * Vec4::Ones().transpose();
    const TransitionMatrix t(m);
    EXPECT_NEAR(t.relaxation_time(1.5), 1.5 / -std::log(lambda), 1e-9);
    EXPECT_LT((steady_state(t).values() - pi).norm(), 1e-12);
  }
}

TEST(IterateChain, StartsAtInitialVector) {
  const auto chain = iterate_chain(TransitionMatrix::uniform(), StateVector4::unit(2), 3);
  ASSERT_EQ(chain.size(), 4u);
  EXPECT_DOUBLE_EQ(chain[0][2], 1.0);
  EXPECT_NEAR(chain[1][0], 0.25, 1e-15);
}

TEST(FourStateReduction, BellProjectorsAndProductStates) {
  const auto pm = reduce_to_four_states(four_state_projector(kPhiMinus));
  EXPECT_NEAR(pm.populations(kPhiMinus), 1.0, 1e-15);
  EXPECT_NEAR(pm.residual_coherence, 0.0, 1e-15);
  Matrix ge = Matrix::Zero(4, 4);
  ge(1, 1) = 1.0;
  const auto r = reduce_to_four_states(ge);
  EXPECT_NEAR(r.populations(kPhiMinus), 0.5, 1e-15);
  EXPECT_NEAR(r.populations(kPhiPlus), 0.5, 1e-15);
  EXPECT_NEAR(r.residual_coherence, 0.5, 1e-15);
  const Vector v = four_state_basis()[kPhiMinus];
  EXPECT_LT((v - phi_minus().amplitudes()).norm(), 1e-15);
}

TEST(ClipAndNormalize, SmallNegativesClippedLargeRejected) {
  const Vec4 v = clip_and_normalize(Vec4(0.5, 0.5, -1e-12, 0.0));
  EXPECT_DOUBLE_EQ(v(2), 0.0);
  EXPECT_NEAR(v.sum(), 1.0, 1e-15);
  EXPECT_THROW(clip_and_normalize(Vec4(0.5, 0.6, -0.1, 0.0)), NumericalError);
}

TEST(HeraldMatrix, EntriesBounded) {
  EXPECT_THROW(HeraldMatrix(1.1, 0.0, 0.0, 0.0), InvariantError);
  EXPECT_EQ(HeraldMatrix::identity()[3], 1.0);
  EXPECT_EQ(HeraldMatrix::zero().matrix(), Mat4::Zero());
}
