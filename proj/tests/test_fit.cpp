#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <vector>

#include "bellstab/fit.hpp"

using namespace bellstab;

namespace {

std::vector<double> grid(double end, int n) {
  std::vector<double> t(n);
  for (int i = 0; i < n; ++i) t[i] = end * i / (n - 1);
  return t;
}

}  // namespace

TEST(ExponentialFit, RecoversNoiselessParameters) {
  const auto t = grid(10.0, 41);
  for (double tau : {0.3, 1.0, 2.5}) {
    std::vector<double> y;
    for (double x : t) y.push_back(0.76 + (0.02 - 0.76) * std::exp(-x / tau));
    const auto f = fit_exponential_rise(t, y);
    ASSERT_TRUE(f.converged) << f.diagnostic;
    EXPECT_NEAR(f.tau, tau, 1e-6 * tau);
    EXPECT_NEAR(f.f_ss, 0.76, 1e-8);
    EXPECT_NEAR(f.f0, 0.02, 1e-8);
    EXPECT_LT(f.rms_residual, 1e-9);
  }
}

TEST(ExponentialFit, NoisyDataWithinTolerance) {
  const auto t = grid(10.0, 81);
  std::mt19937_64 rng(3);
  std::normal_distribution<double> noise(0.0, 0.005);
  std::vector<double> y;
  for (double x : t) y.push_back(0.6 - 0.55 * std::exp(-x / 1.4) + noise(rng));
  const auto f = fit_exponential_rise(t, y);
  ASSERT_TRUE(f.converged);
  EXPECT_NEAR(f.tau, 1.4, 0.1);
  EXPECT_NEAR(f.f_ss, 0.6, 0.005);
}

TEST(ExponentialFit, FlatDataIsFlaggedNotConverged) {
  const auto t = grid(1.0, 11);
  std::vector<double> y;
  for (double x : t) y.push_back(0.1 * x);  // linear ramp: tau runs off to large values
  const auto f = fit_exponential_rise(t, y);
  EXPECT_FALSE(f.converged);
  EXPECT_FALSE(f.diagnostic.empty());
}

TEST(ExponentialFit, InputValidation) {
  std::vector<double> t{0.0, 1.0};
  std::vector<double> y{0.0, 1.0};
  EXPECT_FALSE(fit_exponential_rise(t, y).converged);
  std::vector<double> t3{0.0, 1.0, 1.0};
  std::vector<double> y3{0.0, 1.0, 1.0};
  EXPECT_THROW(fit_exponential_rise(t3, y3), InvariantError);
}
