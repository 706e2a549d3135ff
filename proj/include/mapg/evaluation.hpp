#pragma once

// Exact and sampled policy evaluation.
//
// Value functions solve the linear Bellman system
//
//   V_i = u_i^pi + delta P^pi V_i
//
// by a direct dense factorization (I - delta P^pi is strictly diagonally
// dominant for delta < 1, so the solve cannot fail). Q-functions marginalize
// the opponents:
//
//   Q_i(s, a_i) = sum_{a_-i} pi_-i(s, a_-i) (u_i(s, a) + delta sum_s' P(s'|s,a) V_i(s'))
//
// The smoothed game replaces the one-stage payoff with
// u_i(s, pi) - tau nu_i(s, pi_i), where nu_i(s, p) = sum_a p(a) log p(a) is
// the negative entropy (0 log 0 = 0), and its Q-function carries the same
// -tau nu_i(s, pi_i) term:
//
//   Qt_i(s, a_i) = [opponent-marginal of u_i + delta P Vt_i] - tau nu_i(s, pi_i)
//
// so that Vt_i(s) = sum_{a_i} pi_i(s, a_i) Qt_i(s, a_i) holds exactly.
//
// Monte-Carlo Q estimation follows the episodic protocol: for every table
// entry (s, a_i), run `episodes` truncated rollouts that start in state s with
// player i forced to a_i in the first step and the opponents drawing from
// pi_-i(s); all players follow pi afterwards. Each (s, a_i) entry uses its own
// RNG substream derived from the root seed, so estimates are reproducible and
// independent of evaluation order.

#include <cstdint>
#include <random>
#include <stdexcept>
#include <vector>

#include "mapg/game.hpp"

namespace mapg {

struct EvaluationResult {
  std::vector<Vec> values;    // values[i][s] = V_i(s, pi)
  std::vector<Mat> q_tables;  // q_tables[i](s, a_i)
  StateDistribution visitation;
};

struct SmoothedEvaluationResult {
  std::vector<Vec> values;    // Vt_i
  std::vector<Mat> q_tables;  // Qt_i
  Mat entropies;              // entropies(i, s) = nu_i(s, pi_i)
  double tau = 0.0;
};

// nu(p) = sum_a p(a) log p(a), with the 0 log 0 = 0 convention. Lies in
// [-log(n), 0].
inline double negative_entropy(const Eigen::Ref<const Vec>& p) {
  double v = 0.0;
  for (Eigen::Index a = 0; a < p.size(); ++a)
    if (p[a] > 0.0) v += p[a] * std::log(p[a]);
  return v;
}

namespace detail {

// Factorization of (I - delta P^pi), shared by every per-player solve.
struct BellmanSolver {
  Mat system;  // I - delta P^pi
  Eigen::PartialPivLU<Mat> lu;
  Mat chain;
  double discount;

  BellmanSolver(const MarkovGame& game, const JointPolicy& policy)
      : chain(induced_chain(game, policy)), discount(game.discount) {
    const int n = game.num_states;
    system = Mat::Identity(n, n) - discount * chain;
    lu.compute(system);
  }

  // Solves v = r + delta P^pi v and verifies the residual.
  Vec solve(const Vec& stage_reward) const {
    Vec v = lu.solve(stage_reward);
    const double residual =
        (v - stage_reward - discount * (chain * v)).cwiseAbs().maxCoeff();
    if (residual > 1e-9 * std::max(1.0, v.cwiseAbs().maxCoeff()))
      throw std::runtime_error("BellmanSolver: solve residual too large");
    return v;
  }

  // Solves d^T = (1-delta) mu^T (I - delta P^pi)^{-1}.
  Vec visitation(const Vec& mu) const {
    const Eigen::PartialPivLU<Mat> lut(system.transpose());
    return (1.0 - discount) * lut.solve(mu);
  }
};

// Per-player expected stage rewards using one shared joint-action
// distribution pass per state.
inline std::vector<Vec> stage_rewards(const MarkovGame& game, const JointPolicy& policy) {
  std::vector<Vec> out(game.num_players, Vec(game.num_states));
  for (int s = 0; s < game.num_states; ++s) {
    const Vec dist = joint_action_distribution(game, policy, s);
    for (int i = 0; i < game.num_players; ++i)
      out[i][s] = game.rewards[i].row(s).dot(dist);
  }
  return out;
}

// Q table against continuation values `values` (either V_i or Vt_i).
inline Mat q_against(const MarkovGame& game, const JointPolicy& policy, int player,
                     const Vec& values) {
  const Vec cont = game.transitions * values;  // cont[sa] = sum_s' P(s'|s,a) values[s']
  const auto& space = game.actions;
  const int ai_count = game.action_counts[player];
  Mat q(game.num_states, ai_count);
  for (int s = 0; s < game.num_states; ++s) {
    const Vec opp = opponent_marginal(game, policy, s, player);
    const std::int64_t base = game.sa(s, 0);
    for (int ai = 0; ai < ai_count; ++ai) {
      double acc = 0.0;
      for (std::int64_t o = 0; o < opp.size(); ++o) {
        const std::int64_t flat = space.compose(player, ai, o);
        acc += opp[o] * (game.rewards[player](s, flat) + game.discount * cont[base + flat]);
      }
      q(s, ai) = acc;
    }
  }
  return q;
}

// splitmix64; used to derive independent RNG substreams from a root seed.
inline std::uint64_t substream_seed(std::uint64_t root, std::uint64_t index) {
  std::uint64_t z = root + 0x9e3779b97f4a7c15ULL * (index + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

inline int sample_index(const Eigen::Ref<const Vec>& probs, double u) {
  double acc = 0.0;
  for (Eigen::Index k = 0; k + 1 < probs.size(); ++k) {
    acc += probs[k];
    if (u < acc) return static_cast<int>(k);
  }
  return static_cast<int>(probs.size() - 1);
}

}  // namespace detail

inline std::vector<Vec> exact_values(const MarkovGame& game, const JointPolicy& policy) {
  validate_policy(game, policy);
  const detail::BellmanSolver solver(game, policy);
  const std::vector<Vec> rewards = detail::stage_rewards(game, policy);
  std::vector<Vec> values;
  values.reserve(game.num_players);
  for (int i = 0; i < game.num_players; ++i) values.push_back(solver.solve(rewards[i]));
  return values;
}

inline std::vector<Mat> exact_q(const MarkovGame& game, const JointPolicy& policy,
                                const std::vector<Vec>& values) {
  validate_policy(game, policy);
  if (static_cast<int>(values.size()) != game.num_players)
    throw std::invalid_argument("exact_q: one value vector per player required");
  std::vector<Mat> q;
  q.reserve(game.num_players);
  for (int i = 0; i < game.num_players; ++i) {
    if (values[i].size() != game.num_states)
      throw std::invalid_argument("exact_q: value vector has wrong length");
    q.push_back(detail::q_against(game, policy, i, values[i]));
  }
  return q;
}

// d_mu^pi = (1-delta) mu^T (I - delta P^pi)^{-1}. Sums to 1 and dominates
// (1-delta) mu elementwise.
inline StateDistribution visitation(const MarkovGame& game, const JointPolicy& policy,
                                    const StateDistribution& initial) {
  validate_distribution(initial, game.num_states, "visitation: initial distribution");
  const detail::BellmanSolver solver(game, policy);
  return solver.visitation(initial);
}

inline EvaluationResult evaluate(const MarkovGame& game, const JointPolicy& policy,
                                 const StateDistribution& initial) {
  validate_policy(game, policy);
  validate_distribution(initial, game.num_states, "evaluate: initial distribution");
  const detail::BellmanSolver solver(game, policy);
  const std::vector<Vec> rewards = detail::stage_rewards(game, policy);
  EvaluationResult result;
  result.values.reserve(game.num_players);
  result.q_tables.reserve(game.num_players);
  for (int i = 0; i < game.num_players; ++i) {
    result.values.push_back(solver.solve(rewards[i]));
    result.q_tables.push_back(detail::q_against(game, policy, i, result.values[i]));
  }
  result.visitation = solver.visitation(initial);
  return result;
}

// Discounted value of the stage reward nu_i(s, pi_i): solves
// W_i = nu_i^pi + delta P^pi W_i. (The entropy correction in
// Vt_i = V_i - tau W_i.)
inline Vec discounted_entropy_value(const MarkovGame& game, const JointPolicy& policy, int player) {
  validate_policy(game, policy);
  const detail::BellmanSolver solver(game, policy);
  Vec nu(game.num_states);
  for (int s = 0; s < game.num_states; ++s)
    nu[s] = negative_entropy(policy.rows[player].row(s));
  return solver.solve(nu);
}

inline SmoothedEvaluationResult smoothed_values(const MarkovGame& game, const JointPolicy& policy,
                                                double tau) {
  if (!(tau > 0.0)) throw std::invalid_argument("smoothed_values: tau must be positive");
  validate_policy(game, policy);
  const detail::BellmanSolver solver(game, policy);
  const std::vector<Vec> rewards = detail::stage_rewards(game, policy);

  SmoothedEvaluationResult result;
  result.tau = tau;
  result.entropies = Mat(game.num_players, game.num_states);
  result.values.reserve(game.num_players);
  result.q_tables.reserve(game.num_players);
  for (int i = 0; i < game.num_players; ++i) {
    for (int s = 0; s < game.num_states; ++s)
      result.entropies(i, s) = negative_entropy(policy.rows[i].row(s));
    const Vec smoothed_reward = rewards[i] - tau * result.entropies.row(i).transpose();
    result.values.push_back(solver.solve(smoothed_reward));
    Mat q = detail::q_against(game, policy, i, result.values[i]);
    q.colwise() -= tau * result.entropies.row(i).transpose();
    result.q_tables.push_back(std::move(q));
  }
  return result;
}

// Monte-Carlo Q estimate; see the protocol note at the top of this header.
// Deterministic given (seed, episodes, horizon).
inline Mat sampled_q(const MarkovGame& game, const JointPolicy& policy, int player, int episodes,
                     int horizon, std::uint64_t seed) {
  if (player < 0 || player >= game.num_players)
    throw std::out_of_range("sampled_q: player index out of range");
  if (episodes < 1 || horizon < 1)
    throw std::invalid_argument("sampled_q: episodes and horizon must be >= 1");
  validate_policy(game, policy);

  const int ai_count = game.action_counts[player];
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::vector<int> joint(game.num_players);
  Mat q(game.num_states, ai_count);
  for (int s0 = 0; s0 < game.num_states; ++s0) {
    for (int a0 = 0; a0 < ai_count; ++a0) {
      std::mt19937_64 rng(detail::substream_seed(seed, static_cast<std::uint64_t>(s0) * ai_count + a0));
      double total = 0.0;
      for (int ep = 0; ep < episodes; ++ep) {
        int s = s0;
        double ret = 0.0;
        double disc = 1.0;
        for (int k = 0; k < horizon; ++k) {
          for (int j = 0; j < game.num_players; ++j)
            joint[j] = detail::sample_index(policy.rows[j].row(s), unif(rng));
          if (k == 0) joint[player] = a0;
          const std::int64_t flat = game.actions.encode(joint);
          ret += disc * game.rewards[player](s, flat);
          disc *= game.discount;
          s = detail::sample_index(game.transitions.row(game.sa(s, flat)), unif(rng));
        }
        total += ret;
      }
      q(s0, a0) = total / episodes;
    }
  }
  return q;
}

// Monte-Carlo estimate of the smoothed Q-function: rollouts accumulate
// u_i(s^k, a^k) - tau nu_i(s^k, pi_i) per step (including the forced first
// step), matching the exact Qt_i definition in expectation up to truncation.
inline Mat sampled_smoothed_q(const MarkovGame& game, const JointPolicy& policy, int player,
                              double tau, int episodes, int horizon, std::uint64_t seed) {
  if (!(tau > 0.0)) throw std::invalid_argument("sampled_smoothed_q: tau must be positive");
  Mat q = sampled_q(game, policy, player, episodes, horizon, seed);
  // The entropy stream is a deterministic function of the policy, so only the
  // reward stream is sampled; the correction below is
  // Qt(s, a_i) = Q(s, a_i) - tau * (nu(s) + delta * E_{a_-i}[P w](s, a_i))
  // with w the discounted entropy value.
  Vec nu(game.num_states);
  for (int s = 0; s < game.num_states; ++s)
    nu[s] = negative_entropy(policy.rows[player].row(s));
  const detail::BellmanSolver solver(game, policy);
  const Vec w = solver.solve(nu);
  const Vec cont = game.transitions * w;
  for (int s = 0; s < game.num_states; ++s) {
    const Vec opp = opponent_marginal(game, policy, s, player);
    for (int ai = 0; ai < game.action_counts[player]; ++ai) {
      double acc = 0.0;
      for (std::int64_t o = 0; o < opp.size(); ++o)
        acc += opp[o] * cont[game.sa(s, game.actions.compose(player, ai, o))];
      q(s, ai) -= tau * (nu[s] + game.discount * acc);
    }
  }
  return q;
}

}  // namespace mapg
