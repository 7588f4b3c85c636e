#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "bellstab/outcome_model.hpp"

using namespace bellstab;

namespace {

double cdf_oracle(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

/// Inverse of cdf_oracle by bisection.
double quantile_oracle(double p) {
  double lo = -40.0;
  double hi = 40.0;
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    (cdf_oracle(mid) < p ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

const HeraldMatrix kMbTarget(0.68, 0.69, 0.19, 0.10);
const HeraldMatrix kDdTarget(0.26, 0.20, 0.19, 0.18);

}  // namespace

TEST(NormalFunctions, QuantileInvertsCdf) {
  for (double p : {1e-6, 0.04, 0.5, 0.93, 1.0 - 1e-6}) {
    EXPECT_NEAR(normal_quantile(p), quantile_oracle(p), 1e-9);
    EXPECT_NEAR(normal_cdf(normal_quantile(p)), p, 1e-12);
  }
  EXPECT_THROW(normal_quantile(0.0), InvariantError);
}

TEST(Rng, StreamsAreReproducibleAndDistinct) {
  auto a = stream_rng(42, 3);
  auto b = stream_rng(42, 3);
  auto c = stream_rng(42, 4);
  const double x = uniform01(a);
  EXPECT_EQ(x, uniform01(b));
  EXPECT_NE(x, uniform01(c));
  for (int i = 0; i < 1000; ++i) {
    const double u = uniform01(a);
    EXPECT_GE(u, 0.0);
    EXPECT_LT(u, 1.0);
  }
}

TEST(ParityCalibration, SolvesMisreportEquations) {
  const ParityCalibration pc = calibrate_parity(0.04, 0.05);
  EXPECT_NEAR(std::pow(cdf_oracle(pc.threshold / pc.sigma), 2), 0.96, 1e-12);
  EXPECT_NEAR(cdf_oracle((pc.threshold - 1.0) / pc.sigma) * cdf_oracle(pc.threshold / pc.sigma), 0.05, 1e-12);
  // Independent construction: a = q(sqrt(0.96)), b = q(0.05 / sqrt(0.96)), sigma = 1 / (a - b).
  const double a = quantile_oracle(std::sqrt(0.96));
  const double b = quantile_oracle(0.05 / std::sqrt(0.96));
  EXPECT_NEAR(pc.sigma, 1.0 / (a - b), 1e-9);
  EXPECT_NEAR(pc.threshold, a / (a - b), 1e-9);
}

TEST(ParityCalibration, RejectsOutOfRangeRates) {
  EXPECT_THROW(calibrate_parity(0.0, 0.05), ConfigError);
  EXPECT_THROW(calibrate_parity(0.04, 0.6), ConfigError);
}

TEST(Classify, StrictInequalityOnBothChannels) {
  Thresholds t{0.1, 0.2, 0.5, 0.5};
  EXPECT_TRUE(classify(0.49, 0.49, t, ClassifyMode::parity));
  EXPECT_FALSE(classify(0.5, 0.0, t, ClassifyMode::parity));  // tie goes to even
  EXPECT_FALSE(classify(0.0, 0.5, t, ClassifyMode::parity));
  EXPECT_TRUE(classify(0.09, 0.19, t, ClassifyMode::herald));
  EXPECT_FALSE(classify(0.1, 0.0, t, ClassifyMode::herald));
  EXPECT_EQ(classify_parity({0.0, 0.0}, t), Parity::odd);
  Thresholds bad{0.6, 0.0, 0.5, 0.5};
  EXPECT_THROW(bad.validate(), ConfigError);
}

TEST(OutcomeSampling, MisreportRatesMatchCalibration) {
  const ParityCalibration pc = calibrate_parity(0.04, 0.05);
  const auto d = OutcomeDistribution::gaussian(pc.sigma);
  const Thresholds t{0.0, 0.0, pc.threshold, pc.threshold};
  auto rng = stream_rng(5, 0);
  const int n = 200000;
  long odd_as_even = 0;
  long gg_as_odd = 0;
  for (int k = 0; k < n; ++k) {
    if (classify_parity(sample_outcome(kPhiMinus, d, rng), t) == Parity::even) ++odd_as_even;
    if (classify_parity(sample_outcome(kGG, d, rng), t) == Parity::odd) ++gg_as_odd;
  }
  const double s1 = std::sqrt(0.04 * 0.96 / n);
  const double s2 = std::sqrt(0.05 * 0.95 / n);
  EXPECT_NEAR(static_cast<double>(odd_as_even) / n, 0.04, 3 * s1);
  EXPECT_NEAR(static_cast<double>(gg_as_odd) / n, 0.05, 3 * s2);
}

TEST(SchemeCalibration, MbReproducesTargetHerald) {
  const SchemeOutcomes o = calibrate_mb_outcomes(0.04, 0.05, kMbTarget);
  const double h = o.thresholds.i_gg_herald;
  const HeraldMatrix c = herald_matrix(o.dist, h, h);
  const double c_odd = 0.5 * (kMbTarget[0] + kMbTarget[1]);
  EXPECT_NEAR(c[kPhiMinus], c_odd, 1e-9);
  EXPECT_NEAR(c[kPhiPlus], c_odd, 1e-9);
  EXPECT_NEAR(c[kGG], kMbTarget[kGG], 1e-9);
  EXPECT_NEAR(c[kEE], kMbTarget[kEE], 1e-9);
  // At measurement time the parity rates are the calibrated ones.
  const auto d = o.dist.measurement_time();
  EXPECT_NEAR(1.0 - odd_report_probability(d, kPhiMinus, o.thresholds), 0.04, 1e-9);
  EXPECT_NEAR(odd_report_probability(d, kGG, o.thresholds), 0.05, 1e-9);
}

TEST(SchemeCalibration, DdReproducesTargetHerald) {
  const SchemeOutcomes o = calibrate_dd_outcomes(0.04, 0.05, kDdTarget);
  const double h = o.thresholds.i_gg_herald;
  const HeraldMatrix c = herald_matrix(o.dist, h, h);
  const double c_even = 0.5 * (kDdTarget[kGG] + kDdTarget[kEE]);
  EXPECT_NEAR(c[kPhiMinus], kDdTarget[kPhiMinus], 1e-9);
  EXPECT_NEAR(c[kPhiPlus], kDdTarget[kPhiPlus], 1e-9);
  EXPECT_NEAR(c[kGG], c_even, 1e-9);
  EXPECT_NEAR(c[kEE], c_even, 1e-9);
  EXPECT_LT(o.dist.separation_scale, 1.0);
}

TEST(ThresholdSweep, SuccessMonotoneInEachThreshold) {
  const SchemeOutcomes o = calibrate_mb_outcomes(0.04, 0.05, kMbTarget);
  const StateVector4 s(0.58, 0.11, 0.18, 0.13);
  std::vector<double> g;
  for (int i = 0; i < 15; ++i) g.push_back(-0.4 + 0.07 * i);
  const auto cells = sweep_thresholds(s, o.dist, g, g);
  ASSERT_EQ(cells.size(), g.size() * g.size());
  for (std::size_t i = 0; i < g.size(); ++i) {
    for (std::size_t j = 0; j < g.size(); ++j) {
      const auto& c = cells[i * g.size() + j];
      EXPECT_EQ(c.i_gg_herald, g[i]);
      EXPECT_EQ(c.i_ee_herald, g[j]);
      if (i > 0) {
        EXPECT_GE(c.success, cells[(i - 1) * g.size() + j].success - 1e-15);
      }
      if (j > 0) {
        EXPECT_GE(c.success, cells[i * g.size() + j - 1].success - 1e-15);
      }
    }
  }
  EXPECT_GE(cells.front().fidelity, cells.back().fidelity);
}

TEST(ThresholdSweep, SingleCellGrid) {
  const auto d = OutcomeDistribution::gaussian(0.3);
  const auto cells = sweep_thresholds(StateVector4(1, 0, 0, 0), d, {0.2}, {0.2});
  ASSERT_EQ(cells.size(), 1u);
  EXPECT_NEAR(cells[0].success, std::pow(cdf_oracle(0.2 / 0.3), 2), 1e-12);
  EXPECT_NEAR(cells[0].fidelity, 1.0, 1e-15);
}

TEST(ThresholdSweep, EmptyCellHasUndefinedFidelity) {
  const auto d = OutcomeDistribution::gaussian(0.1);
  const auto cells = sweep_thresholds(StateVector4(1, 0, 0, 0), d, {-2.0}, {-2.0});
  EXPECT_TRUE(cells[0].empty);
  EXPECT_TRUE(std::isnan(cells[0].fidelity));
}

TEST(ThresholdSweep, MonteCarloAgreesWithAnalytic) {
  const SchemeOutcomes o = calibrate_dd_outcomes(0.04, 0.05, kDdTarget);
  const StateVector4 s(0.71, 0.06, 0.12, 0.11);
  const double tg = 0.05;
  const double te = 0.1;
  const auto exact = sweep_thresholds(s, o.dist, {tg}, {te}).front();
  auto rng = stream_rng(9, 0);
  const int n = 100000;
  const auto mc = sample_sweep_cell(s, o.dist, tg, te, n, rng);
  EXPECT_NEAR(mc.success, exact.success, 3.0 * std::sqrt(exact.success * (1 - exact.success) / n));
  const double nf = exact.success * n;
  EXPECT_NEAR(mc.fidelity, exact.fidelity, 3.0 * std::sqrt(exact.fidelity * (1 - exact.fidelity) / nf));
}

TEST(Histogram, CountsEveryDraw) {
  const auto d = OutcomeDistribution::gaussian(0.27);
  auto rng = stream_rng(1, 0);
  const Histogram h = sample_histogram(StateVector4(0.5, 0.1, 0.2, 0.2), d, 5000, 30, -1.0, 2.0, rng);
  long gg = 0;
  long ee = 0;
  for (long c : h.gg) gg += c;
  for (long c : h.ee) ee += c;
  EXPECT_EQ(gg, 5000);
  EXPECT_EQ(ee, 5000);
  EXPECT_NEAR(h.bin_width(), 0.1, 1e-15);
}
