#pragma once

// Readout records of the two-tone cavity measurement.
//
// Each shot yields two integrated amplitudes (I_gg, I_ee), one per cavity
// tone, in normalized units: 0 when the tone is not transmitted and
// `separation_scale` when it is. gg lights up the gg tone, ee the ee tone
// and odd states neither. Both channels carry independent Gaussian noise of
// width sigma.
//
// The record reflects the qubit state while the tone was on, which can
// differ from the state at the time the record is used. `origin` captures
// this: origin(i, j) is the probability that a trajectory ending in basis
// state j left a record typical of class i.

#include <Eigen/Dense>
#include <boost/math/distributions/normal.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "bellstab/errors.hpp"
#include "bellstab/markov.hpp"

namespace bellstab {

enum class Parity { even, odd };

inline const char* to_string(Parity p) { return p == Parity::odd ? "odd" : "even"; }

inline double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

inline double normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) throw InvariantError("normal quantile needs p in (0, 1)");
  return boost::math::quantile(boost::math::normal_distribution<double>(), p);
}

/// Uniform double in [0, 1) from the top 53 bits of one draw.
inline double uniform01(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

/// Generator for stream `index` of a seeded family.
inline std::mt19937_64 stream_rng(std::uint64_t seed, std::uint64_t index) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32)};
  return std::mt19937_64(seq);
}

struct Outcome {
  double i_gg;
  double i_ee;
};

struct OutcomeDistribution {
  using Means = std::array<std::array<double, 2>, 4>;  // [record class][channel]

  Means mean{};
  double sigma = 0.25;
  double separation_scale = 1.0;
  Mat4 origin = Mat4::Identity();

  /// Odd classes at (0, 0), gg at (s, 0), ee at (0, s).
  static OutcomeDistribution gaussian(double sigma, double separation_scale = 1.0) {
    OutcomeDistribution d;
    d.sigma = sigma;
    d.separation_scale = separation_scale;
    d.mean[kGG] = {separation_scale, 0.0};
    d.mean[kEE] = {0.0, separation_scale};
    d.validate();
    return d;
  }

  /// Same noise model with records taken at the measured state itself.
  OutcomeDistribution measurement_time() const {
    OutcomeDistribution d = *this;
    d.origin = Mat4::Identity();
    return d;
  }

  void validate() const {
    if (!(sigma > 0.0)) throw ConfigError("outcome sigma must be positive");
    if (!(separation_scale > 0.0)) throw ConfigError("separation_scale must be positive");
    if (mean[kPhiMinus] != mean[kPhiPlus]) throw ConfigError("odd states must share their outcome means");
    TransitionMatrix check(origin);  // column-stochastic
    (void)check;
  }
};

struct Thresholds {
  double i_gg_herald = 0.0;
  double i_ee_herald = 0.0;
  double i_gg_parity = 0.5;
  double i_ee_parity = 0.5;

  void validate() const {
    if (i_gg_herald > i_gg_parity || i_ee_herald > i_ee_parity) {
      throw ConfigError("herald thresholds must not exceed the parity thresholds");
    }
  }
};

enum class ClassifyMode { parity, herald };

/// Parity mode: true means odd. Herald mode: true means C holds. Both need
/// each channel strictly below its threshold.
inline bool classify(double i_gg, double i_ee, const Thresholds& t, ClassifyMode mode) {
  if (mode == ClassifyMode::parity) return i_gg < t.i_gg_parity && i_ee < t.i_ee_parity;
  return i_gg < t.i_gg_herald && i_ee < t.i_ee_herald;
}

inline Parity classify_parity(const Outcome& o, const Thresholds& t) {
  return classify(o.i_gg, o.i_ee, t, ClassifyMode::parity) ? Parity::odd : Parity::even;
}

/// P(I_gg < t_gg and I_ee < t_ee) for records of class `record`.
inline double prob_both_below(const OutcomeDistribution& d, int record, double t_gg, double t_ee) {
  return normal_cdf((t_gg - d.mean[record][0]) / d.sigma) * normal_cdf((t_ee - d.mean[record][1]) / d.sigma);
}

/// P(both channels below the given thresholds | basis state `state`).
inline double prob_below_given_state(const OutcomeDistribution& d, int state, double t_gg, double t_ee) {
  double p = 0.0;
  for (int i = 0; i < 4; ++i) {
    if (d.origin(i, state) > 0.0) p += d.origin(i, state) * prob_both_below(d, i, t_gg, t_ee);
  }
  return p;
}

inline double herald_probability(const OutcomeDistribution& d, int state, const Thresholds& t) {
  return prob_below_given_state(d, state, t.i_gg_herald, t.i_ee_herald);
}

inline double odd_report_probability(const OutcomeDistribution& d, int state, const Thresholds& t) {
  return prob_below_given_state(d, state, t.i_gg_parity, t.i_ee_parity);
}

inline HeraldMatrix herald_matrix(const OutcomeDistribution& d, double t_gg, double t_ee) {
  Vec4 c;
  for (int j = 0; j < 4; ++j) c(j) = std::clamp(prob_below_given_state(d, j, t_gg, t_ee), 0.0, 1.0);
  return HeraldMatrix(c);
}

/// Draws one record for a trajectory in basis state `state`.
inline Outcome sample_outcome(int state, const OutcomeDistribution& d, std::mt19937_64& rng) {
  if (state < 0 || state > 3) throw InvariantError("basis state index out of range");
  const double u = uniform01(rng);
  int record = 3;
  double acc = 0.0;
  for (int i = 0; i < 4; ++i) {
    acc += d.origin(i, state);
    if (u < acc) {
      record = i;
      break;
    }
  }
  std::normal_distribution<double> noise(0.0, d.sigma);
  const double a = noise(rng);
  const double b = noise(rng);
  return {d.mean[record][0] + a, d.mean[record][1] + b};
}

// ---------------------------------------------------------------------------
// Threshold sweep

struct SweepCell {
  double i_gg_herald;
  double i_ee_herald;
  double success;   // probability of passing C
  double fidelity;  // phi_- share of the passing mass; NaN when empty
  Vec4 herald;      // per-state pass probabilities
  bool empty;       // success < 1e-6
};

/// Analytic sweep over herald thresholds, gg threshold in the outer loop.
inline std::vector<SweepCell> sweep_thresholds(const StateVector4& s, const OutcomeDistribution& d,
                                               const std::vector<double>& grid_gg,
                                               const std::vector<double>& grid_ee) {
  d.validate();
  std::vector<SweepCell> out;
  out.reserve(grid_gg.size() * grid_ee.size());
  for (double tg : grid_gg) {
    for (double te : grid_ee) {
      SweepCell cell{tg, te, 0.0, 0.0, Vec4::Zero(), false};
      for (int j = 0; j < 4; ++j) cell.herald(j) = prob_below_given_state(d, j, tg, te);
      const Vec4 passed = cell.herald.cwiseProduct(s.values());
      cell.success = passed.sum();
      cell.empty = cell.success < 1e-6;
      cell.fidelity = cell.empty ? std::nan("") : passed(kPhiMinus) / cell.success;
      out.push_back(cell);
    }
  }
  return out;
}

/// Monte-Carlo estimate of one sweep cell with `n` draws.
inline SweepCell sample_sweep_cell(const StateVector4& s, const OutcomeDistribution& d, double tg, double te,
                                   int n, std::mt19937_64& rng) {
  const Vec4 cdf_states = Vec4(s[0], s[0] + s[1], s[0] + s[1] + s[2], 1.0);
  long pass = 0;
  long pass_target = 0;
  for (int k = 0; k < n; ++k) {
    const double u = uniform01(rng);
    int state = 3;
    for (int j = 0; j < 4; ++j) {
      if (u < cdf_states(j)) {
        state = j;
        break;
      }
    }
    const Outcome o = sample_outcome(state, d, rng);
    if (o.i_gg < tg && o.i_ee < te) {
      ++pass;
      if (state == kPhiMinus) ++pass_target;
    }
  }
  SweepCell c{tg, te, static_cast<double>(pass) / n, 0.0, Vec4::Zero(), pass == 0};
  c.fidelity = pass == 0 ? std::nan("") : static_cast<double>(pass_target) / pass;
  return c;
}

// ---------------------------------------------------------------------------
// Calibration

struct ParityCalibration {
  double sigma;
  double threshold;  // shared by both channels
};

/// Noise width and symmetric parity threshold for which the two-channel AND
/// rule misreports odd as even with probability eps_eo and even as odd with
/// probability eps_oe (channel separation 1):
///   Phi(t / sigma)^2 = 1 - eps_eo,   Phi((t - 1) / sigma) Phi(t / sigma) = eps_oe.
inline ParityCalibration calibrate_parity(double eps_eo, double eps_oe) {
  for (double e : {eps_eo, eps_oe}) {
    if (!(e > 0.0 && e < 0.5)) throw ConfigError("parity error probabilities must lie in (0, 0.5)");
  }
  const double root = std::sqrt(1.0 - eps_eo);
  const double a = normal_quantile(root);          // t / sigma
  const double b = normal_quantile(eps_oe / root);  // (t - 1) / sigma
  if (!(a > b)) throw ConfigError("parity error probabilities admit no noise width");
  const double sigma = 1.0 / (a - b);
  if (!(sigma > 0.0 && sigma < 2.0)) throw ConfigError("calibrated noise width outside (0, 2)");
  return {sigma, a * sigma};
}

struct SchemeOutcomes {
  OutcomeDistribution dist;
  Thresholds thresholds;  // parity thresholds plus the herald point matching the target c
};

/// Measurement-based records: full separation. Odd states herald at the mean
/// of the two odd targets; the even entries fix the fraction of even
/// trajectories whose record was odd-like (a qubit jump after the tone).
inline SchemeOutcomes calibrate_mb_outcomes(double eps_eo, double eps_oe, const HeraldMatrix& target) {
  const ParityCalibration pc = calibrate_parity(eps_eo, eps_oe);
  SchemeOutcomes out{OutcomeDistribution::gaussian(pc.sigma, 1.0), {}};
  const double c_odd = 0.5 * (target[kPhiMinus] + target[kPhiPlus]);
  const double h = pc.sigma * normal_quantile(std::sqrt(c_odd));
  for (int j : {kGG, kEE}) {
    const double clean = prob_both_below(out.dist, j, h, h);
    const double lambda = (target[j] - clean) / (c_odd - clean);
    if (!(lambda >= 0.0 && lambda <= 1.0)) throw ConfigError("herald target not reachable with this noise model");
    out.dist.origin(kPhiMinus, j) = lambda;
    out.dist.origin(j, j) = 1.0 - lambda;
  }
  out.thresholds = {h, h, pc.threshold, pc.threshold};
  out.thresholds.validate();
  out.dist.validate();
  return out;
}

/// Driven-dissipative records: the tones stay on while the qubits are
/// driven, so the even and odd clouds overlap (separation_scale < 1) and part
/// of the phi_+ population leaves even-like records. The noise width is the
/// one implied by the measurement chain.
inline SchemeOutcomes calibrate_dd_outcomes(double eps_eo, double eps_oe, const HeraldMatrix& target) {
  const ParityCalibration pc = calibrate_parity(eps_eo, eps_oe);
  const double sigma = pc.sigma;
  const double h = sigma * normal_quantile(std::sqrt(target[kPhiMinus]));
  const double c_even = 0.5 * (target[kGG] + target[kEE]);
  const double s = h - sigma * normal_quantile(c_even / normal_cdf(h / sigma));
  if (!(s > 0.0 && s <= 1.0)) throw ConfigError("herald target implies separation outside (0, 1]");
  SchemeOutcomes out{OutcomeDistribution::gaussian(sigma, s), {}};
  const double mu = (target[kPhiMinus] - target[kPhiPlus]) / (target[kPhiMinus] - c_even);
  if (!(mu >= 0.0 && mu <= 1.0)) throw ConfigError("herald target implies an invalid phi_+ record mixture");
  out.dist.origin(kPhiPlus, kPhiPlus) = 1.0 - mu;
  out.dist.origin(kGG, kPhiPlus) = 0.5 * mu;
  out.dist.origin(kEE, kPhiPlus) = 0.5 * mu;
  out.thresholds = {h, h, pc.threshold, pc.threshold};
  out.thresholds.validate();
  out.dist.validate();
  return out;
}

// ---------------------------------------------------------------------------
// Histograms

struct Histogram {
  double lo;
  double hi;
  std::vector<long> gg;  // counts of I_gg
  std::vector<long> ee;  // counts of I_ee
  double bin_width() const { return (hi - lo) / static_cast<double>(gg.size()); }
};

/// Records drawn from the population vector `s`; out-of-range values are
/// clamped into the edge bins.
inline Histogram sample_histogram(const StateVector4& s, const OutcomeDistribution& d, int n, int bins, double lo,
                                  double hi, std::mt19937_64& rng) {
  if (bins < 1 || !(hi > lo)) throw ConfigError("histogram needs bins >= 1 and hi > lo");
  Histogram h{lo, hi, std::vector<long>(bins, 0), std::vector<long>(bins, 0)};
  auto bin = [&](double x) {
    const int b = static_cast<int>(std::floor((x - lo) / (hi - lo) * bins));
    return std::clamp(b, 0, bins - 1);
  };
  const Vec4 cdf(s[0], s[0] + s[1], s[0] + s[1] + s[2], 1.0);
  for (int k = 0; k < n; ++k) {
    const double u = uniform01(rng);
    int state = 3;
    for (int j = 0; j < 4; ++j) {
      if (u < cdf(j)) {
        state = j;
        break;
      }
    }
    const Outcome o = sample_outcome(state, d, rng);
    ++h.gg[bin(o.i_gg)];
    ++h.ee[bin(o.i_ee)];
  }
  return h;
}

}  // namespace bellstab
