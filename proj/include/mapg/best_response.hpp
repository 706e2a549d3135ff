#pragma once

// Exact single-agent best response against fixed opponents.
//
// Fixing pi_-i reduces the game to an MDP for player i with
//
//   r(s, a_i)     = E_{a_-i ~ pi_-i}[u_i(s, a_i, a_-i)]
//   P_i(s'|s,a_i) = E_{a_-i ~ pi_-i}[P(s'|s, a_i, a_-i)]
//
// which is solved exactly by policy iteration. The instantaneous regret
//
//   R_i = max_{pi_i'} V_i(mu, pi_i', pi_-i) - V_i(mu, pi)
//
// is the per-player exploitability; max_i R_i feeds the Nash-regret average.

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "mapg/evaluation.hpp"
#include "mapg/game.hpp"

namespace mapg {

struct InducedMDP {
  Mat reward;       // (s, a_i)
  Mat transitions;  // row s*|A_i| + a_i = P_i(.|s, a_i)
  double discount = 0.0;

  int num_states() const { return static_cast<int>(reward.rows()); }
  int num_actions() const { return static_cast<int>(reward.cols()); }
};

inline InducedMDP induce_mdp(const MarkovGame& game, const JointPolicy& policy, int player) {
  if (player < 0 || player >= game.num_players)
    throw std::out_of_range("induce_mdp: player index out of range");
  validate_policy(game, policy);

  const int ai_count = game.action_counts[player];
  InducedMDP mdp;
  mdp.discount = game.discount;
  mdp.reward = Mat(game.num_states, ai_count);
  mdp.transitions = Mat::Zero(static_cast<std::int64_t>(game.num_states) * ai_count, game.num_states);
  for (int s = 0; s < game.num_states; ++s) {
    const Vec opp = opponent_marginal(game, policy, s, player);
    for (int ai = 0; ai < ai_count; ++ai) {
      double r = 0.0;
      auto row = mdp.transitions.row(static_cast<std::int64_t>(s) * ai_count + ai);
      for (std::int64_t o = 0; o < opp.size(); ++o) {
        const std::int64_t flat = game.actions.compose(player, ai, o);
        r += opp[o] * game.rewards[player](s, flat);
        row += opp[o] * game.transitions.row(game.sa(s, flat));
      }
      mdp.reward(s, ai) = r;
    }
  }
  return mdp;
}

struct MDPSolution {
  Vec value;                // optimal value per state
  std::vector<int> policy;  // deterministic optimal action per state
  int iterations = 0;
};

// Policy iteration with exact evaluation. Greedy improvement switches only on
// improvements above solver noise (1e-12) and scans actions from index 0, so
// ties resolve to the lowest action index and the result is deterministic.
inline MDPSolution solve_mdp(const InducedMDP& mdp) {
  const int ns = mdp.num_states();
  const int na = mdp.num_actions();
  if (ns < 1 || na < 1) throw std::invalid_argument("solve_mdp: empty MDP");
  constexpr double kSwitchTol = 1e-12;

  // Iteration cap from the finite policy count; policy iteration strictly
  // improves on every switch, so exceeding it is an internal error.
  const double bound = std::pow(static_cast<double>(na), static_cast<double>(ns));
  const std::int64_t max_iters =
      bound > 1e9 ? std::int64_t{1'000'000'000} : static_cast<std::int64_t>(bound) + 1;

  MDPSolution sol;
  sol.policy.assign(ns, 0);
  for (int s = 0; s < ns; ++s) {
    int best = 0;
    for (int a = 1; a < na; ++a)
      if (mdp.reward(s, a) > mdp.reward(s, best) + kSwitchTol) best = a;
    sol.policy[s] = best;
  }

  Mat q(ns, na);
  for (std::int64_t iter = 1;; ++iter) {
    if (iter > max_iters) throw std::runtime_error("solve_mdp: policy iteration failed to converge");
    sol.iterations = static_cast<int>(iter);

    // Evaluate the current deterministic policy.
    Mat chain(ns, ns);
    Vec stage(ns);
    for (int s = 0; s < ns; ++s) {
      chain.row(s) = mdp.transitions.row(static_cast<std::int64_t>(s) * na + sol.policy[s]);
      stage[s] = mdp.reward(s, sol.policy[s]);
    }
    Eigen::PartialPivLU<Mat> lu(Mat::Identity(ns, ns) - mdp.discount * chain);
    sol.value = lu.solve(stage);

    // Greedy improvement.
    bool changed = false;
    for (int s = 0; s < ns; ++s) {
      for (int a = 0; a < na; ++a)
        q(s, a) = mdp.reward(s, a) +
                  mdp.discount * mdp.transitions.row(static_cast<std::int64_t>(s) * na + a).dot(sol.value);
      int best = 0;
      for (int a = 1; a < na; ++a)
        if (q(s, a) > q(s, best) + kSwitchTol) best = a;
      if (best != sol.policy[s] && q(s, best) > q(s, sol.policy[s]) + kSwitchTol) {
        sol.policy[s] = best;
        changed = true;
      }
    }
    if (!changed) break;
  }

  // Bellman optimality residual check.
  double residual = 0.0;
  for (int s = 0; s < ns; ++s) residual = std::max(residual, q.row(s).maxCoeff() - sol.value[s]);
  if (residual > 1e-9 * std::max(1.0, sol.value.cwiseAbs().maxCoeff()))
    throw std::runtime_error("solve_mdp: Bellman optimality residual too large");
  return sol;
}

struct PlayerRegret {
  double best_value = 0.0;     // mu . V_i(best response)
  double current_value = 0.0;  // mu . V_i(pi)
  double regret = 0.0;         // clamped to [0, inf)
  double worst_state_regret = 0.0;  // max_s (V_dagger(s) - V_i(s)); the mu = e_s view
  std::vector<int> best_policy;     // deterministic best response per state
};

struct ExploitabilityReport {
  std::vector<PlayerRegret> players;
  double max_regret = 0.0;
};

// Negative regret beyond solver noise means the "best" response lost to the
// incumbent, which is impossible; fail loudly instead of reporting it.
inline double clamp_regret(double r) {
  if (r < -1e-9) throw std::runtime_error("exploitability: negative regret beyond tolerance");
  return r < 0.0 ? 0.0 : r;
}

inline ExploitabilityReport exploitability(const MarkovGame& game, const JointPolicy& policy,
                                           const StateDistribution& initial) {
  validate_distribution(initial, game.num_states, "exploitability: initial distribution");
  const std::vector<Vec> values = exact_values(game, policy);

  ExploitabilityReport report;
  report.players.reserve(game.num_players);
  for (int i = 0; i < game.num_players; ++i) {
    const MDPSolution best = solve_mdp(induce_mdp(game, policy, i));
    PlayerRegret pr;
    pr.best_value = initial.dot(best.value);
    pr.current_value = initial.dot(values[i]);
    pr.regret = clamp_regret(pr.best_value - pr.current_value);
    pr.worst_state_regret = clamp_regret((best.value - values[i]).maxCoeff());
    pr.best_policy = best.policy;
    report.max_regret = std::max(report.max_regret, pr.regret);
    report.players.push_back(std::move(pr));
  }
  return report;
}

}  // namespace mapg
