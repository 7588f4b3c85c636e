#pragma once

// Nested feedback: an outer heralding loop around DD or MB stabilization.
// Before each boost attempt the herald condition is checked; trajectories
// that pass stop, the rest run one more stabilization period (one
// application of the transition matrix). After k failed checks the heralded
// mass is c (T (I - c))^k S0.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "bellstab/errors.hpp"
#include "bellstab/markov.hpp"
#include "bellstab/outcome_model.hpp"
#include "bellstab/parallel.hpp"

namespace bellstab {

inline constexpr int kDefaultMaxBoosts = 11;

struct PostselectionHerald {
  HeraldMatrix c;
  std::array<bool, 4> defined{};  // false where S0 has no population
};

/// c_j = S_herald,j p_s / S0,j. Entries exceeding 1 by more than 1e-6 mean
/// the inputs are inconsistent; smaller excesses are clipped.
inline PostselectionHerald herald_matrix_from_postselection(const StateVector4& s0, const StateVector4& s_herald,
                                                            double p_s) {
  if (!(p_s >= 0.0 && p_s <= 1.0)) throw InvariantError("success probability must lie in [0, 1]");
  PostselectionHerald out;
  Vec4 c = Vec4::Zero();
  for (int j = 0; j < 4; ++j) {
    if (s0[j] <= 0.0) {
      if (s_herald[j] > 0.0) throw InvariantError("heralded population where the unconditioned state has none");
      out.defined[j] = false;
      continue;
    }
    out.defined[j] = true;
    double v = s_herald[j] * p_s / s0[j];
    if (v > 1.0 + 1e-6) {
      throw InvariantError("herald entry " + std::to_string(j) + " = " + std::to_string(v) + " exceeds 1");
    }
    c(j) = std::min(v, 1.0);
  }
  out.c = HeraldMatrix(c);
  return out;
}

struct NFPResult {
  int k_max = kDefaultMaxBoosts;
  std::vector<double> per_attempt_fidelity;  // NaN where nothing heralds
  std::vector<double> differential_success;
  std::vector<double> cumulative_success;
  std::vector<Vec4> heralded_states;  // normalized c (T(I-c))^k S0
  std::vector<double> surviving_mass;  // ||(I-c)(T(I-c))^k S0||_1 after check k
};

/// Exact recursion over k = 0..k_max checks. S0 defaults to steady_state(T).
inline NFPResult nfp_recursion(const TransitionMatrix& t, const HeraldMatrix& c,
                               std::optional<StateVector4> s0 = std::nullopt, int k_max = kDefaultMaxBoosts) {
  if (k_max < 0) throw ConfigError("k_max must be >= 0");
  const Vec4 start = s0 ? s0->values() : steady_state(t).values();
  if (std::abs(start.sum() - 1.0) > 1e-9) throw InvariantError("S0 must be normalized");
  NFPResult r;
  r.k_max = k_max;
  const Mat4 cm = c.matrix();
  const Mat4 pass_fail = Mat4::Identity() - cm;
  Vec4 s = start;
  double cum = 0.0;
  for (int k = 0; k <= k_max; ++k) {
    const Vec4 heralded = cm * s;
    const double mass = heralded.sum();
    cum += mass;
    r.differential_success.push_back(mass);
    r.cumulative_success.push_back(cum);
    r.per_attempt_fidelity.push_back(mass > 0.0 ? heralded(kPhiMinus) / mass : std::nan(""));
    r.heralded_states.push_back(mass > 0.0 ? Vec4(heralded / mass) : Vec4(Vec4::Zero()));
    const Vec4 failed = pass_fail * s;
    r.surviving_mass.push_back(failed.sum());
    s = t.matrix() * failed;
  }
  return r;
}

/// Success-weighted mean of the per-attempt fidelities.
inline double average_heralded_fidelity(const NFPResult& r) {
  double num = 0.0;
  double den = 0.0;
  for (std::size_t k = 0; k < r.differential_success.size(); ++k) {
    if (r.differential_success[k] <= 0.0) continue;
    num += r.differential_success[k] * r.per_attempt_fidelity[k];
    den += r.differential_success[k];
  }
  if (!(den > 0.0)) throw NumericalError("no heralded mass; average fidelity undefined");
  return num / den;
}

// ---------------------------------------------------------------------------
// Trajectories

struct TrajectoryEntry {
  int attempt;
  std::optional<Parity> reported;  // MB parity report preceding the check
  bool herald;
};

enum class Terminal { heralded, exhausted };

struct TrajectoryRecord {
  std::vector<TrajectoryEntry> entries;
  Terminal terminal = Terminal::exhausted;
  int final_state = 0;  // basis index at termination
};

/// One token per check: 'o'/'e' for the reported parity (omitted without a
/// parity model), then 'H' when heralded or '.' otherwise. A trailing '!'
/// marks an exhausted trajectory.
inline std::string encode_trajectory(const TrajectoryRecord& r) {
  std::string s;
  for (const auto& e : r.entries) {
    if (e.reported) s += *e.reported == Parity::odd ? 'o' : 'e';
    s += e.herald ? 'H' : '.';
  }
  if (r.terminal == Terminal::exhausted) s += '!';
  return s;
}

struct TrajectorySample {
  std::vector<TrajectoryRecord> records;
  NFPResult empirical;
  double exhausted_fidelity = std::nan("");  // phi_- share among exhausted trajectories
  long exhausted = 0;
};

namespace detail {

inline int sample_index(const Vec4& p, std::mt19937_64& rng) {
  const double u = uniform01(rng) * p.sum();
  double acc = 0.0;
  for (int j = 0; j < 3; ++j) {
    acc += p(j);
    if (u < acc) return j;
  }
  return 3;
}

}  // namespace detail

/// Samples `n_traj` trajectories. At each check the herald is drawn first,
/// then, if it fails and boosts remain, the next state from T's column.
/// Trajectory i uses its own stream derived from (seed, i), so results do
/// not depend on `workers`. When `parity_errors` (eps_eo, eps_oe) is given,
/// each check also records a reported parity drawn from those rates.
inline TrajectorySample sample_trajectories(const TransitionMatrix& t, const HeraldMatrix& c, const StateVector4& s0,
                                            int n_traj, int k_max, std::uint64_t seed,
                                            std::optional<std::pair<double, double>> parity_errors = std::nullopt,
                                            int workers = 1) {
  if (n_traj < 1) throw ConfigError("n_traj must be >= 1");
  if (k_max < 0) throw ConfigError("k_max must be >= 0");
  TrajectorySample out;
  out.records.resize(n_traj);
  parallel_for(static_cast<std::size_t>(n_traj), workers, [&](std::size_t i) {
    std::mt19937_64 rng = stream_rng(seed, i);
    TrajectoryRecord rec;
    int state = detail::sample_index(s0.values(), rng);
    for (int k = 0; k <= k_max; ++k) {
      TrajectoryEntry e{k, std::nullopt, false};
      if (parity_errors) {
        const bool odd = state == kPhiMinus || state == kPhiPlus;
        const double p_odd = odd ? 1.0 - parity_errors->first : parity_errors->second;
        e.reported = uniform01(rng) < p_odd ? Parity::odd : Parity::even;
      }
      e.herald = uniform01(rng) < c[state];
      rec.entries.push_back(e);
      if (e.herald) {
        rec.terminal = Terminal::heralded;
        break;
      }
      if (k < k_max) state = detail::sample_index(t.matrix().col(state), rng);
    }
    rec.final_state = state;
    out.records[i] = std::move(rec);
  });

  NFPResult& r = out.empirical;
  r.k_max = k_max;
  std::vector<long> herald_count(k_max + 1, 0);
  std::vector<long> herald_target(k_max + 1, 0);
  std::vector<Vec4> herald_states(k_max + 1, Vec4::Zero());
  long exhausted_target = 0;
  for (const auto& rec : out.records) {
    if (rec.terminal == Terminal::heralded) {
      const int k = rec.entries.back().attempt;
      ++herald_count[k];
      herald_states[k](rec.final_state) += 1.0;
      if (rec.final_state == kPhiMinus) ++herald_target[k];
    } else {
      ++out.exhausted;
      if (rec.final_state == kPhiMinus) ++exhausted_target;
    }
  }
  double cum = 0.0;
  long remaining = n_traj;
  for (int k = 0; k <= k_max; ++k) {
    const double d = static_cast<double>(herald_count[k]) / n_traj;
    cum += d;
    remaining -= herald_count[k];
    r.differential_success.push_back(d);
    r.cumulative_success.push_back(cum);
    r.per_attempt_fidelity.push_back(herald_count[k] > 0 ? static_cast<double>(herald_target[k]) / herald_count[k]
                                                         : std::nan(""));
    r.heralded_states.push_back(herald_count[k] > 0 ? Vec4(herald_states[k] / herald_count[k]) : Vec4(Vec4::Zero()));
    r.surviving_mass.push_back(static_cast<double>(remaining) / n_traj);
  }
  if (out.exhausted > 0) out.exhausted_fidelity = static_cast<double>(exhausted_target) / out.exhausted;
  return out;
}

}  // namespace bellstab
