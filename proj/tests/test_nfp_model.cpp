#include <gtest/gtest.h>

#include <cmath>
#include <functional>

#include "bellstab/nfp_model.hpp"

using namespace bellstab;

namespace {

// Transition matrix with the shape of the measurement-based one.
const Mat4 kT = (Mat4() << 0.790, 0.029, 0.406, 0.406,  //
                 0.128, 0.051, 0.093, 0.093,              //
                 0.064, 0.484, 0.274, 0.274,              //
                 0.018, 0.436, 0.227, 0.227)
                    .finished();
const HeraldMatrix kC(0.68, 0.69, 0.19, 0.10);

/// Heralded population after exactly k failed checks, summed over every
/// explicit path of basis states.
Vec4 path_sum_oracle(const Mat4& t, const Vec4& c, const Vec4& s0, int k) {
  Vec4 out = Vec4::Zero();
  std::function<void(int, int, double)> walk = [&](int depth, int state, double w) {
    if (depth == k) {
      out(state) += w * c(state);
      return;
    }
    for (int next = 0; next < 4; ++next) walk(depth + 1, next, w * (1.0 - c(state)) * t(next, state));
  };
  for (int j = 0; j < 4; ++j) walk(0, j, s0(j));
  return out;
}

}  // namespace

TEST(NfpRecursion, MatchesExplicitPathSums) {
  const TransitionMatrix t(kT);
  const StateVector4 s0(0.3, 0.2, 0.4, 0.1);
  const NFPResult r = nfp_recursion(t, kC, s0, 4);
  for (int k = 0; k <= 4; ++k) {
    const Vec4 o = path_sum_oracle(kT, kC.diagonal(), s0.values(), k);
    EXPECT_NEAR(r.differential_success[k], o.sum(), 1e-12);
    EXPECT_NEAR(r.per_attempt_fidelity[k], o(kPhiMinus) / o.sum(), 1e-12);
  }
}

TEST(NfpRecursion, MassConservation) {
  const TransitionMatrix t(kT);
  const NFPResult r = nfp_recursion(t, kC);
  ASSERT_EQ(r.cumulative_success.size(), 12u);
  for (int k = 0; k <= r.k_max; ++k) {
    EXPECT_NEAR(r.cumulative_success[k] + r.surviving_mass[k], 1.0, 1e-9);
    EXPECT_NEAR(r.heralded_states[k].sum(), 1.0, 1e-9);
  }
}

TEST(NfpRecursion, IdentityHeraldStopsImmediately) {
  const TransitionMatrix t(kT);
  const StateVector4 s0 = steady_state(t);
  const NFPResult r = nfp_recursion(t, HeraldMatrix::identity(), s0);
  EXPECT_NEAR(r.differential_success[0], 1.0, 1e-15);
  EXPECT_NEAR(r.per_attempt_fidelity[0], s0.fidelity(), 1e-15);
  for (int k = 1; k <= r.k_max; ++k) EXPECT_EQ(r.differential_success[k], 0.0);
  EXPECT_NEAR(average_heralded_fidelity(r), s0.fidelity(), 1e-15);
}

TEST(NfpRecursion, ZeroHeraldNeverSucceeds) {
  const NFPResult r = nfp_recursion(TransitionMatrix(kT), HeraldMatrix::zero());
  for (int k = 0; k <= r.k_max; ++k) {
    EXPECT_EQ(r.cumulative_success[k], 0.0);
    EXPECT_TRUE(std::isnan(r.per_attempt_fidelity[k]));
    EXPECT_NEAR(r.surviving_mass[k], 1.0, 1e-12);
  }
  EXPECT_THROW(average_heralded_fidelity(r), NumericalError);
}

TEST(NfpRecursion, NoBoostsIsPostselection) {
  const StateVector4 s0(0.58, 0.11, 0.18, 0.13);
  const NFPResult r = nfp_recursion(TransitionMatrix(kT), kC, s0, 0);
  ASSERT_EQ(r.differential_success.size(), 1u);
  const double ps = 0.68 * 0.58 + 0.69 * 0.11 + 0.19 * 0.18 + 0.10 * 0.13;
  EXPECT_NEAR(r.differential_success[0], ps, 1e-15);
  EXPECT_NEAR(r.per_attempt_fidelity[0], 0.68 * 0.58 / ps, 1e-15);
  EXPECT_THROW(nfp_recursion(TransitionMatrix(kT), kC, s0, -1), ConfigError);
}

TEST(PostselectionHerald, RoundTrip) {
  const StateVector4 s0(0.58, 0.11, 0.18, 0.13);
  const Vec4 heralded = kC.diagonal().cwiseProduct(s0.values());
  const double ps = heralded.sum();
  const auto back = herald_matrix_from_postselection(s0, StateVector4(heralded / ps), ps);
  for (int j = 0; j < 4; ++j) {
    EXPECT_TRUE(back.defined[j]);
    EXPECT_NEAR(back.c[j], kC[j], 1e-9);
  }
}

TEST(PostselectionHerald, UndefinedAndInconsistentEntries) {
  const auto r = herald_matrix_from_postselection(StateVector4(0.5, 0.5, 0.0, 0.0), StateVector4(1, 0, 0, 0), 0.4);
  EXPECT_FALSE(r.defined[kGG]);
  EXPECT_NEAR(r.c[kPhiMinus], 0.8, 1e-15);
  EXPECT_THROW(herald_matrix_from_postselection(StateVector4(0.2, 0.8, 0, 0), StateVector4(1, 0, 0, 0), 0.5),
               InvariantError);
  EXPECT_THROW(herald_matrix_from_postselection(StateVector4(1, 0, 0, 0), StateVector4(0.5, 0, 0.5, 0), 0.5),
               InvariantError);
}

TEST(NfpTrajectories, MonteCarloWithinThreeSigmaOfRecursion) {
  const TransitionMatrix t(kT);
  const StateVector4 s0 = steady_state(t);
  const int n = 10000;
  const NFPResult exact = nfp_recursion(t, kC, s0);
  const TrajectorySample mc = sample_trajectories(t, kC, s0, n, exact.k_max, 2024);
  for (int k = 0; k <= exact.k_max; ++k) {
    const double p = exact.cumulative_success[k];
    EXPECT_NEAR(mc.empirical.cumulative_success[k], p, 3.0 * std::sqrt(p * (1 - p) / n) + 1e-12) << k;
    const double d = exact.differential_success[k];
    EXPECT_NEAR(mc.empirical.differential_success[k], d, 3.0 * std::sqrt(d * (1 - d) / n) + 1e-12) << k;
  }
  const double f = exact.per_attempt_fidelity[0];
  const double n0 = exact.differential_success[0] * n;
  EXPECT_NEAR(mc.empirical.per_attempt_fidelity[0], f, 3.0 * std::sqrt(f * (1 - f) / n0));
}

TEST(NfpTrajectories, DeterministicAcrossWorkerCounts) {
  const TransitionMatrix t(kT);
  const StateVector4 s0 = steady_state(t);
  const auto a = sample_trajectories(t, kC, s0, 500, 11, 77, std::make_pair(0.04, 0.05), 1);
  const auto b = sample_trajectories(t, kC, s0, 500, 11, 77, std::make_pair(0.04, 0.05), 4);
  ASSERT_EQ(a.records.size(), b.records.size());
  for (std::size_t i = 0; i < a.records.size(); ++i) {
    EXPECT_EQ(encode_trajectory(a.records[i]), encode_trajectory(b.records[i]));
    EXPECT_EQ(a.records[i].final_state, b.records[i].final_state);
  }
  const auto c = sample_trajectories(t, kC, s0, 500, 11, 78, std::make_pair(0.04, 0.05), 1);
  int differing = 0;
  for (std::size_t i = 0; i < a.records.size(); ++i) {
    differing += encode_trajectory(a.records[i]) != encode_trajectory(c.records[i]);
  }
  EXPECT_GT(differing, 0);
}

TEST(NfpTrajectories, EncodingAndExhaustion) {
  TrajectoryRecord r;
  r.entries = {{0, Parity::odd, false}, {1, Parity::even, true}};
  r.terminal = Terminal::heralded;
  EXPECT_EQ(encode_trajectory(r), "o.eH");
  r.entries = {{0, std::nullopt, false}};
  r.terminal = Terminal::exhausted;
  EXPECT_EQ(encode_trajectory(r), ".!");

  const auto s = sample_trajectories(TransitionMatrix(kT), HeraldMatrix::zero(), StateVector4(1, 0, 0, 0), 50, 3, 1);
  EXPECT_EQ(s.exhausted, 50);
  for (const auto& rec : s.records) EXPECT_EQ(rec.entries.size(), 4u);
}
