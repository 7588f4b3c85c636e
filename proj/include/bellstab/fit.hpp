#pragma once

// Least-squares fit of F(t) = f_ss - (f_ss - f0) exp(-t / tau).
//
// For fixed tau the model is linear in (f_ss, f0), so the fit is a 1-D
// minimization over log(tau) of the residual of a 2x2 linear solve.

#include <Eigen/Dense>
#include <boost/math/tools/minima.hpp>

#include <cmath>
#include <limits>
#include <span>
#include <string>

#include "bellstab/errors.hpp"

namespace bellstab {

struct ExponentialFit {
  double f_ss = 0.0;
  double f0 = 0.0;
  double tau = 0.0;
  double rms_residual = 0.0;
  bool converged = false;
  std::string diagnostic;
};

namespace detail {

struct LinearPart {
  double f_ss;
  double f0;
  double sse;
};

inline LinearPart solve_linear_part(std::span<const double> t, std::span<const double> y, double tau) {
  // y ≈ f_ss (1 - e) + f0 e,  e = exp(-t/tau)
  Eigen::MatrixXd a(t.size(), 2);
  Eigen::VectorXd b(t.size());
  for (std::size_t i = 0; i < t.size(); ++i) {
    const double e = std::exp(-t[i] / tau);
    a(i, 0) = 1.0 - e;
    a(i, 1) = e;
    b(i) = y[i];
  }
  const Eigen::Vector2d x = a.colPivHouseholderQr().solve(b);
  return {x(0), x(1), (a * x - b).squaredNorm()};
}

}  // namespace detail

/// Fits an exponential rise. `tau_min`/`tau_max` bound the search; a minimum
/// pinned at either bound is reported as non-converged.
inline ExponentialFit fit_exponential_rise(std::span<const double> t, std::span<const double> y,
                                           double tau_min = 1e-3, double tau_max = 1e3) {
  ExponentialFit out;
  if (t.size() != y.size()) throw InvariantError("fit: times and values differ in length");
  if (t.size() < 3) {
    out.diagnostic = "need at least three points";
    return out;
  }
  for (std::size_t i = 1; i < t.size(); ++i) {
    if (!(t[i] > t[i - 1])) throw InvariantError("fit: times must be strictly ascending");
  }

  auto objective = [&](double log_tau) { return detail::solve_linear_part(t, y, std::exp(log_tau)).sse; };
  const double lo = std::log(tau_min);
  const double hi = std::log(tau_max);

  // Coarse scan guards against a local minimum, then Brent refines.
  constexpr int kScan = 120;
  double best = lo;
  double best_val = std::numeric_limits<double>::infinity();
  for (int i = 0; i <= kScan; ++i) {
    const double x = lo + (hi - lo) * i / kScan;
    const double v = objective(x);
    if (v < best_val) {
      best_val = v;
      best = x;
    }
  }
  const double step = (hi - lo) / kScan;
  const auto r = boost::math::tools::brent_find_minima(objective, std::max(lo, best - step),
                                                       std::min(hi, best + step), 52);
  const double tau = std::exp(r.first);
  const auto lin = detail::solve_linear_part(t, y, tau);
  out.f_ss = lin.f_ss;
  out.f0 = lin.f0;
  out.tau = tau;
  out.rms_residual = std::sqrt(lin.sse / static_cast<double>(t.size()));
  const double edge = 1e-3 * (hi - lo);
  if (r.first <= lo + edge || r.first >= hi - edge) {
    out.diagnostic = "time constant pinned at the search bound";
    return out;
  }
  if (tau > 2.0 * (t.back() - t.front())) {
    out.diagnostic = "time constant exceeds twice the sampled window";
    return out;
  }
  out.converged = true;
  return out;
}

}  // namespace bellstab
