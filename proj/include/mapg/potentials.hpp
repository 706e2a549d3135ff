#pragma once

// alpha-potential machinery.
//
// A state-dependent potential Phi certifies the game as an alpha-potential
// game when every unilateral deviation satisfies
//
//   |(Phi(s, pi_i', pi_-i) - Phi(s, pi_i, pi_-i))
//      - (V_i(s, pi_i', pi_-i) - V_i(s, pi_i, pi_-i))| <= alpha.
//
// Here Phi is always the discounted value of a stage potential phi(s, a),
// i.e. Phi(., pi) solves the ordinary Bellman system with stage reward phi.
// Closed-form certified gaps:
//
//   congestion games:    alpha = 2 zeta |S| D delta |E| max_{s,pi} Phi(s,pi) / (|I| (1-delta))
//   perturbed team games: alpha = 2 kappa / (1-delta)^2
//
// The empirical gap estimator probes unilateral deviations and reports a
// LOWER bound on the true alpha; it never certifies.

#include <algorithm>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "mapg/evaluation.hpp"
#include "mapg/game.hpp"

namespace mapg {

struct PotentialSpec {
  Mat stage_potential;                 // phi(s, flat_a)
  double alpha_bound = 0.0;            // certified gap, when alpha_certified
  double potential_range_bound = 0.0;  // C_Phi with |Phi(mu,pi)-Phi(mu,pi')| <= C_Phi
  bool alpha_certified = false;
};

// C_Phi default: (max phi - min phi) / (1 - delta).
inline double potential_range_default(const Mat& stage_potential, double discount) {
  return (stage_potential.maxCoeff() - stage_potential.minCoeff()) / (1.0 - discount);
}

// Conservative default for max_{s,pi} Phi(s,pi): max_{s,a} phi(s,a) / (1-delta).
inline double max_potential_default(const Mat& stage_potential, double discount) {
  return stage_potential.maxCoeff() / (1.0 - discount);
}

// Phi(s, pi) per state: the value-function solve with stage reward phi.
inline Vec potential_state_values(const MarkovGame& game, const PotentialSpec& spec,
                                  const JointPolicy& policy) {
  if (spec.stage_potential.rows() != game.num_states ||
      spec.stage_potential.cols() != game.num_joint_actions())
    throw std::invalid_argument("potential_state_values: stage potential shape mismatch");
  validate_policy(game, policy);
  const detail::BellmanSolver solver(game, policy);
  Vec stage(game.num_states);
  for (int s = 0; s < game.num_states; ++s)
    stage[s] = spec.stage_potential.row(s).dot(joint_action_distribution(game, policy, s));
  return solver.solve(stage);
}

inline double potential_value(const MarkovGame& game, const PotentialSpec& spec,
                              const JointPolicy& policy, const StateDistribution& initial) {
  validate_distribution(initial, game.num_states, "potential_value: initial distribution");
  return initial.dot(potential_state_values(game, spec, policy));
}

// Smoothed potential: Phit(s, pi) = Phi(s, pi) - tau sum_i W_i(s), where W_i
// is the discounted entropy value of player i.
inline Vec smoothed_potential_state_values(const MarkovGame& game, const PotentialSpec& spec,
                                           const JointPolicy& policy, double tau) {
  if (!(tau > 0.0)) throw std::invalid_argument("smoothed_potential_state_values: tau must be positive");
  validate_policy(game, policy);
  const detail::BellmanSolver solver(game, policy);
  Vec stage(game.num_states);
  for (int s = 0; s < game.num_states; ++s)
    stage[s] = spec.stage_potential.row(s).dot(joint_action_distribution(game, policy, s));
  Vec phi = solver.solve(stage);
  for (int i = 0; i < game.num_players; ++i) {
    Vec nu(game.num_states);
    for (int s = 0; s < game.num_states; ++s)
      nu[s] = negative_entropy(policy.rows[i].row(s));
    phi -= tau * solver.solve(nu);
  }
  return phi;
}

inline double smoothed_potential_value(const MarkovGame& game, const PotentialSpec& spec,
                                       const JointPolicy& policy, const StateDistribution& initial,
                                       double tau) {
  validate_distribution(initial, game.num_states, "smoothed_potential_value: initial distribution");
  return initial.dot(smoothed_potential_state_values(game, spec, policy, tau));
}

inline double pmtg_alpha_bound(double kappa, double delta) {
  if (kappa < 0.0) throw std::invalid_argument("pmtg_alpha_bound: kappa must be >= 0");
  if (!(delta > 0.0 && delta < 1.0))
    throw std::invalid_argument("pmtg_alpha_bound: delta must lie in (0,1)");
  return 2.0 * kappa / ((1.0 - delta) * (1.0 - delta));
}

inline double mcg_alpha_bound(double zeta, int num_states, double demand, int num_facilities,
                              int num_players, double delta, double max_potential) {
  if (zeta < 0.0 || demand < 0.0 || max_potential < 0.0)
    throw std::invalid_argument("mcg_alpha_bound: negative input");
  if (!(delta > 0.0 && delta < 1.0))
    throw std::invalid_argument("mcg_alpha_bound: delta must lie in (0,1)");
  return 2.0 * zeta * num_states * demand * delta * num_facilities * max_potential /
         (num_players * (1.0 - delta));
}

struct GapEstimate {
  double estimate = 0.0;  // empirical max |dPhi - dV_i|; a lower bound on alpha
  std::int64_t probes = 0;
  std::string description;
  std::optional<double> certified_bound;
  std::uint64_t seed = 0;
};

namespace detail {

// Deterministic per-player policy with index d in [0, |A_i|^S): state s plays
// digit s of d in base |A_i|.
inline std::vector<int> assignment_from_index(std::int64_t d, int num_states, int num_actions) {
  std::vector<int> a(num_states);
  for (int s = 0; s < num_states; ++s) {
    a[s] = static_cast<int>(d % num_actions);
    d /= num_actions;
  }
  return a;
}

inline Mat one_hot_rows(const std::vector<int>& assignment, int num_actions) {
  Mat m = Mat::Zero(static_cast<int>(assignment.size()), num_actions);
  for (std::size_t s = 0; s < assignment.size(); ++s) m(static_cast<int>(s), assignment[s]) = 1.0;
  return m;
}

inline Mat random_policy_rows(std::mt19937_64& rng, int num_states, int num_actions) {
  std::uniform_real_distribution<double> unif(0.01, 1.0);
  Mat m(num_states, num_actions);
  for (int s = 0; s < num_states; ++s) {
    double total = 0.0;
    for (int a = 0; a < num_actions; ++a) {
      m(s, a) = unif(rng);
      total += m(s, a);
    }
    m.row(s) /= total;
  }
  return m;
}

}  // namespace detail

// Empirical gap over unilateral deviations. When every deterministic
// unilateral pair fits within max_probes, the probe set is exhaustive over
// deterministic policies; otherwise tuples (i, pi_i, pi_i', pi_-i) are drawn
// with random interior policies. Either way the result is a lower bound on
// the true alpha: the supremum in the definition ranges over a continuum the
// probe set cannot exhaust.
inline GapEstimate estimate_gap(const MarkovGame& game, const PotentialSpec& spec,
                                std::int64_t max_probes, std::uint64_t seed) {
  if (max_probes < 1) throw std::invalid_argument("estimate_gap: max_probes must be >= 1");

  GapEstimate result;
  result.seed = seed;
  if (spec.alpha_certified) result.certified_bound = spec.alpha_bound;

  // Count deterministic unilateral pairs: sum_i C(D_i, 2) * prod_{j!=i} D_j.
  double det_pairs = 0.0;
  std::vector<double> det_count(game.num_players);
  for (int i = 0; i < game.num_players; ++i)
    det_count[i] = std::pow(static_cast<double>(game.action_counts[i]),
                            static_cast<double>(game.num_states));
  for (int i = 0; i < game.num_players; ++i) {
    double opp = 1.0;
    for (int j = 0; j < game.num_players; ++j)
      if (j != i) opp *= det_count[j];
    det_pairs += det_count[i] * (det_count[i] - 1.0) / 2.0 * opp;
  }

  const bool exhaustive = det_pairs <= static_cast<double>(max_probes);
  auto probe = [&](int player, const JointPolicy& base, const Mat& deviated_rows) {
    JointPolicy dev = base;
    dev.rows[player] = deviated_rows;
    const Vec phi_base = potential_state_values(game, spec, base);
    const Vec phi_dev = potential_state_values(game, spec, dev);
    const Vec v_base = exact_values(game, base)[player];
    const Vec v_dev = exact_values(game, dev)[player];
    const double gap = ((phi_dev - phi_base) - (v_dev - v_base)).cwiseAbs().maxCoeff();
    result.estimate = std::max(result.estimate, gap);
    ++result.probes;
  };

  if (exhaustive) {
    result.description = "exhaustive deterministic unilateral deviations";
    for (int i = 0; i < game.num_players; ++i) {
      const auto di = static_cast<std::int64_t>(det_count[i]);
      std::int64_t opp_total = 1;
      std::vector<int> others;
      for (int j = 0; j < game.num_players; ++j)
        if (j != i) {
          opp_total *= static_cast<std::int64_t>(det_count[j]);
          others.push_back(j);
        }
      for (std::int64_t od = 0; od < opp_total; ++od) {
        // Decode the opponents' joint deterministic profile.
        JointPolicy base = uniform_policy(game);
        std::int64_t rem = od;
        for (int j : others) {
          const auto dj = static_cast<std::int64_t>(det_count[j]);
          base.rows[j] = detail::one_hot_rows(
              detail::assignment_from_index(rem % dj, game.num_states, game.action_counts[j]),
              game.action_counts[j]);
          rem /= dj;
        }
        for (std::int64_t p = 0; p < di; ++p) {
          base.rows[i] = detail::one_hot_rows(
              detail::assignment_from_index(p, game.num_states, game.action_counts[i]),
              game.action_counts[i]);
          for (std::int64_t p2 = p + 1; p2 < di; ++p2)
            probe(i, base,
                  detail::one_hot_rows(
                      detail::assignment_from_index(p2, game.num_states, game.action_counts[i]),
                      game.action_counts[i]));
        }
      }
    }
  } else {
    result.description = "random stochastic unilateral deviations";
    std::mt19937_64 rng(seed);
    while (result.probes < max_probes) {
      const int i = static_cast<int>(rng() % static_cast<std::uint64_t>(game.num_players));
      JointPolicy base;
      base.rows.reserve(game.num_players);
      for (int j = 0; j < game.num_players; ++j)
        base.rows.push_back(detail::random_policy_rows(rng, game.num_states, game.action_counts[j]));
      probe(i, base, detail::random_policy_rows(rng, game.num_states, game.action_counts[i]));
    }
  }
  return result;
}

}  // namespace mapg
