#pragma once

// Dense tabular representation of a finite discounted Markov game
//
//   G = <I, S, (A_i), (u_i), P, delta>
//
// Joint actions are addressed by a single flattened index with player 0
// varying fastest:
//
//   flat(a) = a_0 + |A_0| * (a_1 + |A_1| * (a_2 + ...))
//
// Rewards are stored per player as an S x A matrix (A = prod_i |A_i|),
// transitions as an (S*A) x S matrix whose row s*A + a is P(.|s,a).
// All values are immutable after construction; every operation here is a
// pure function and safe to call concurrently.

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace mapg {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

// A length-|S| probability vector (initial distributions, visitation
// distributions, ...).
using StateDistribution = Vec;

// Tolerance for probability-vector validation. Construction fails loudly on
// violation; nothing is ever silently renormalized.
inline constexpr double kProbTol = 1e-12;

namespace detail {
inline void check(bool ok, const std::string& msg) {
  if (!ok) throw std::invalid_argument(msg);
}
}  // namespace detail

// Flattened index space over joint actions, player 0 fastest.
class JointActionSpace {
 public:
  JointActionSpace() = default;

  explicit JointActionSpace(std::vector<int> counts) : counts_(std::move(counts)) {
    detail::check(!counts_.empty(), "JointActionSpace: need at least one player");
    strides_.resize(counts_.size());
    std::int64_t acc = 1;
    for (std::size_t i = 0; i < counts_.size(); ++i) {
      detail::check(counts_[i] >= 1, "JointActionSpace: action count must be >= 1");
      strides_[i] = acc;
      acc *= counts_[i];
    }
    size_ = acc;
  }

  std::int64_t size() const { return size_; }
  int num_players() const { return static_cast<int>(counts_.size()); }
  int count(int player) const { return counts_[player]; }
  std::int64_t stride(int player) const { return strides_[player]; }

  // Player `player`'s action inside the joint action `flat`.
  int action_of(std::int64_t flat, int player) const {
    return static_cast<int>((flat / strides_[player]) % counts_[player]);
  }

  std::int64_t encode(std::span<const int> actions) const {
    std::int64_t flat = 0;
    for (int i = 0; i < num_players(); ++i) flat += actions[i] * strides_[i];
    return flat;
  }

  std::vector<int> decode(std::int64_t flat) const {
    std::vector<int> a(counts_.size());
    for (int i = 0; i < num_players(); ++i) a[i] = action_of(flat, i);
    return a;
  }

  // Index space over the opponents of `player`: the joint index with
  // player's digit removed, i.e. opp = low + high * stride(player) where
  // low = flat mod stride(player) and high = flat div (stride(player)*count).
  std::int64_t opponent_size(int player) const { return size_ / counts_[player]; }

  std::int64_t opponent_index(std::int64_t flat, int player) const {
    const std::int64_t st = strides_[player];
    return flat % st + (flat / (st * counts_[player])) * st;
  }

  // Inverse of opponent_index: joint action where `player` plays `ai` and the
  // opponents play the profile `opp`.
  std::int64_t compose(int player, int ai, std::int64_t opp) const {
    const std::int64_t st = strides_[player];
    const std::int64_t low = opp % st;
    const std::int64_t high = opp / st;
    return low + st * (ai + static_cast<std::int64_t>(counts_[player]) * high);
  }

 private:
  std::vector<int> counts_;
  std::vector<std::int64_t> strides_;
  std::int64_t size_ = 0;
};

inline void validate_distribution(const Vec& p, int n, const std::string& what) {
  detail::check(static_cast<int>(p.size()) == n, what + ": wrong length");
  detail::check((p.array() >= 0.0).all(), what + ": negative entry");
  detail::check(std::abs(p.sum() - 1.0) <= kProbTol, what + ": does not sum to 1");
}

struct MarkovGame {
  int num_players = 0;
  int num_states = 0;
  std::vector<int> action_counts;
  JointActionSpace actions;
  std::vector<Mat> rewards;  // rewards[i](s, flat_a)
  Mat transitions;           // row s*A + flat_a = P(.|s, a)
  double discount = 0.0;
  StateDistribution initial_dist;

  MarkovGame(int num_states_, std::vector<int> action_counts_, std::vector<Mat> rewards_,
             Mat transitions_, double discount_, StateDistribution initial_dist_)
      : num_players(static_cast<int>(action_counts_.size())),
        num_states(num_states_),
        action_counts(std::move(action_counts_)),
        actions(action_counts),
        rewards(std::move(rewards_)),
        transitions(std::move(transitions_)),
        discount(discount_),
        initial_dist(std::move(initial_dist_)) {
    detail::check(num_states >= 1, "MarkovGame: need at least one state");
    detail::check(num_players >= 1, "MarkovGame: need at least one player");
    detail::check(discount > 0.0 && discount < 1.0, "MarkovGame: discount must lie in (0,1)");
    const std::int64_t a = actions.size();
    detail::check(static_cast<int>(rewards.size()) == num_players,
                  "MarkovGame: one reward table per player required");
    for (int i = 0; i < num_players; ++i) {
      detail::check(rewards[i].rows() == num_states && rewards[i].cols() == a,
                    "MarkovGame: reward table shape mismatch for player " + std::to_string(i));
      detail::check(rewards[i].allFinite(), "MarkovGame: non-finite reward entry");
    }
    detail::check(transitions.rows() == static_cast<std::int64_t>(num_states) * a &&
                      transitions.cols() == num_states,
                  "MarkovGame: transition table shape mismatch");
    for (std::int64_t r = 0; r < transitions.rows(); ++r) {
      detail::check((transitions.row(r).array() >= 0.0).all(),
                    "MarkovGame: negative transition probability in row " + std::to_string(r));
      detail::check(std::abs(transitions.row(r).sum() - 1.0) <= kProbTol,
                    "MarkovGame: transition row " + std::to_string(r) + " does not sum to 1");
    }
    validate_distribution(initial_dist, num_states, "MarkovGame: initial distribution");
  }

  std::int64_t num_joint_actions() const { return actions.size(); }

  std::int64_t sa(int s, std::int64_t a) const { return static_cast<std::int64_t>(s) * actions.size() + a; }

  // C = max_{i,s,a} |u_i(s,a)|. (The sup-norm reading; the signed max over
  // rewards is max_reward().)
  double max_abs_reward() const {
    double c = 0.0;
    for (const Mat& u : rewards) c = std::max(c, u.cwiseAbs().maxCoeff());
    return c;
  }

  double max_reward() const {
    double c = rewards[0].maxCoeff();
    for (const Mat& u : rewards) c = std::max(c, u.maxCoeff());
    return c;
  }
};

// Stationary Markov policy profile; rows[i] is the S x |A_i| matrix whose row
// s is pi_i(s, .).
struct JointPolicy {
  std::vector<Mat> rows;

  int num_players() const { return static_cast<int>(rows.size()); }

  bool operator==(const JointPolicy& other) const {
    if (rows.size() != other.rows.size()) return false;
    for (std::size_t i = 0; i < rows.size(); ++i)
      if (rows[i].rows() != other.rows[i].rows() || rows[i].cols() != other.rows[i].cols() ||
          rows[i] != other.rows[i])
        return false;
    return true;
  }
};

inline void validate_policy(const MarkovGame& game, const JointPolicy& policy) {
  detail::check(policy.num_players() == game.num_players, "JointPolicy: wrong number of players");
  for (int i = 0; i < game.num_players; ++i) {
    const Mat& m = policy.rows[i];
    detail::check(m.rows() == game.num_states && m.cols() == game.action_counts[i],
                  "JointPolicy: shape mismatch for player " + std::to_string(i));
    detail::check((m.array() >= 0.0).all(), "JointPolicy: negative probability");
    for (int s = 0; s < game.num_states; ++s)
      detail::check(std::abs(m.row(s).sum() - 1.0) <= kProbTol,
                    "JointPolicy: row does not sum to 1 (player " + std::to_string(i) +
                        ", state " + std::to_string(s) + ")");
  }
}

inline JointPolicy uniform_policy(const MarkovGame& game) {
  JointPolicy p;
  p.rows.reserve(game.num_players);
  for (int i = 0; i < game.num_players; ++i)
    p.rows.push_back(Mat::Constant(game.num_states, game.action_counts[i],
                                   1.0 / game.action_counts[i]));
  return p;
}

// One-hot policy: assignment[i][s] is player i's action in state s.
inline JointPolicy deterministic_policy(const MarkovGame& game,
                                        const std::vector<std::vector<int>>& assignment) {
  detail::check(static_cast<int>(assignment.size()) == game.num_players,
                "deterministic_policy: wrong number of players");
  JointPolicy p;
  p.rows.reserve(game.num_players);
  for (int i = 0; i < game.num_players; ++i) {
    Mat m = Mat::Zero(game.num_states, game.action_counts[i]);
    for (int s = 0; s < game.num_states; ++s) {
      const int a = assignment[i][s];
      detail::check(a >= 0 && a < game.action_counts[i], "deterministic_policy: action out of range");
      m(s, a) = 1.0;
    }
    p.rows.push_back(std::move(m));
  }
  return p;
}

// Distribution over joint actions in state s: prod_i pi_i(s, a_i), laid out in
// flat order. Built player by player, which matches the player-0-fastest
// layout exactly.
inline Vec joint_action_distribution(const MarkovGame& game, const JointPolicy& policy, int s) {
  Vec dist = Vec::Ones(1);
  for (int i = 0; i < game.num_players; ++i) {
    const auto row = policy.rows[i].row(s);
    const std::int64_t prev = dist.size();
    Vec next(prev * game.action_counts[i]);
    for (int a = 0; a < game.action_counts[i]; ++a)
      next.segment(a * prev, prev) = dist * row[a];
    dist.swap(next);
  }
  return dist;
}

// Distribution over the opponents' joint actions (player `player` excluded),
// laid out in the opponent index order of JointActionSpace::compose.
inline Vec opponent_marginal(const MarkovGame& game, const JointPolicy& policy, int s, int player) {
  Vec dist = Vec::Ones(1);
  for (int i = 0; i < game.num_players; ++i) {
    if (i == player) continue;
    const auto row = policy.rows[i].row(s);
    const std::int64_t prev = dist.size();
    Vec next(prev * game.action_counts[i]);
    for (int a = 0; a < game.action_counts[i]; ++a)
      next.segment(a * prev, prev) = dist * row[a];
    dist.swap(next);
  }
  return dist;
}

// P^pi(s'|s) = sum_a prod_i pi_i(s, a_i) P(s'|s, a).
inline Mat induced_chain(const MarkovGame& game, const JointPolicy& policy) {
  validate_policy(game, policy);
  const std::int64_t a = game.num_joint_actions();
  Mat chain(game.num_states, game.num_states);
  for (int s = 0; s < game.num_states; ++s) {
    const Vec dist = joint_action_distribution(game, policy, s);
    chain.row(s) = dist.transpose() * game.transitions.middleRows(game.sa(s, 0), a);
  }
  return chain;
}

// u_i(s, pi) = E_{a ~ pi(s)}[u_i(s, a)], per state.
inline Vec expected_reward(const MarkovGame& game, const JointPolicy& policy, int player) {
  if (player < 0 || player >= game.num_players)
    throw std::out_of_range("expected_reward: player index out of range");
  validate_policy(game, policy);
  Vec out(game.num_states);
  for (int s = 0; s < game.num_states; ++s)
    out[s] = game.rewards[player].row(s).dot(joint_action_distribution(game, policy, s));
  return out;
}

}  // namespace mapg
