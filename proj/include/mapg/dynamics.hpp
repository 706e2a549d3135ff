#pragma once

// The two equilibrium-approximation dynamics.
//
// Projected gradient ascent. Every player updates simultaneously from the
// same Q snapshot:
//
//   pi_i^{t+1}(s) = Proj_simplex( pi_i^t(s) + eta Q_i(s; pi^t) )
//
// with the Euclidean projection computed by the sort-and-threshold method.
//
// Sequential maximum-improvement smoothed best response. With smoothed
// Q-tables Qt at the current profile and temperature tau, the per-(player,
// state) improvement is
//
//   Delta_i(s) = max_p ( Qt_i(s)^T p - tau nu(p) )
//                - ( Qt_i(s)^T pi_i(s) - tau nu(pi_i(s)) )
//
// where the max over the simplex is attained at softmax(Qt_i(s)/tau) and
// equals tau * logsumexp(Qt_i(s)/tau). The incumbent is included in the max,
// so Delta >= 0 up to roundoff. Exactly one (player, state) row -- the argmax
// of Delta, ties broken by lowest player then lowest state -- is replaced by
// the softmax row per iteration; the run terminates once max Delta <= 1e-10.
//
// Both dynamics start from the uniform profile. In exact mode reruns are
// bit-identical; in sampled mode they are bit-identical for a fixed seed
// (iteration t, player i draws its Q estimate from the substream
// seed' = splitmix64(seed, t * |I| + i)).

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <stdexcept>
#include <vector>

#include "mapg/best_response.hpp"
#include "mapg/evaluation.hpp"
#include "mapg/game.hpp"
#include "mapg/potentials.hpp"

namespace mapg {

// Termination threshold for "Delta <= 0": Delta is analytically nonnegative,
// so anything below this is solver noise around a fixed point.
inline constexpr double kImprovementTerminationTol = 1e-10;

// Euclidean projection onto the probability simplex (sort and threshold).
inline Vec project_simplex(const Vec& v) {
  if (!v.allFinite()) throw std::invalid_argument("project_simplex: non-finite input");
  const Eigen::Index n = v.size();
  if (n == 0) throw std::invalid_argument("project_simplex: empty input");
  std::vector<double> u(v.data(), v.data() + n);
  std::sort(u.begin(), u.end(), std::greater<>());
  double css = 0.0;
  double lambda = 0.0;
  for (Eigen::Index j = 0; j < n; ++j) {
    css += u[j];
    const double candidate = (1.0 - css) / static_cast<double>(j + 1);
    if (u[j] + candidate > 0.0) lambda = candidate;
  }
  return (v.array() + lambda).cwiseMax(0.0);
}

// softmax(q / tau), computed with max subtraction.
inline Vec smoothed_br(const Vec& q_row, double tau) {
  if (!(tau > 0.0)) throw std::invalid_argument("smoothed_br: tau must be positive");
  const double m = q_row.maxCoeff();
  Vec e = ((q_row.array() - m) / tau).exp();
  return e / e.sum();
}

// max_p (q^T p - tau nu(p)) = tau * logsumexp(q / tau), the value attained by
// smoothed_br.
inline double smoothed_br_value(const Vec& q_row, double tau) {
  if (!(tau > 0.0)) throw std::invalid_argument("smoothed_br_value: tau must be positive");
  const double m = q_row.maxCoeff();
  return m + tau * std::log(((q_row.array() - m) / tau).exp().sum());
}

enum class EvalMode { Exact, Sampled };

struct SampledEvalParams {
  int horizon = 20;
  int batch = 10;
  std::uint64_t seed = 0;
};

struct PGAConfig {
  double eta = 0.01;
  int iterations = 1000;
  EvalMode mode = EvalMode::Exact;
  SampledEvalParams sampled;
};

struct SMBRConfig {
  double tau0 = 0.05;
  double tau_decay = 1.0;  // update t (0-based) uses tau_t = tau0 * tau_decay^t
  int iterations = 1000;
  EvalMode mode = EvalMode::Exact;
  SampledEvalParams sampled;
};

namespace detail {

inline void check_pga_config(const PGAConfig& c) {
  if (!(c.eta >= 0.0)) throw std::invalid_argument("PGAConfig: eta must be >= 0");
  if (c.iterations < 0) throw std::invalid_argument("PGAConfig: iterations must be >= 0");
}

inline void check_smbr_config(const SMBRConfig& c) {
  if (!(c.tau0 > 0.0)) throw std::invalid_argument("SMBRConfig: tau0 must be positive");
  if (!(c.tau_decay > 0.0 && c.tau_decay <= 1.0))
    throw std::invalid_argument("SMBRConfig: tau_decay must lie in (0,1]");
  if (c.iterations < 0) throw std::invalid_argument("SMBRConfig: iterations must be >= 0");
}

// Q tables for all players, exact or Monte-Carlo.
inline std::vector<Mat> q_tables(const MarkovGame& game, const JointPolicy& policy, EvalMode mode,
                                 const SampledEvalParams& params, std::uint64_t stream_base) {
  if (mode == EvalMode::Exact) return exact_q(game, policy, exact_values(game, policy));
  std::vector<Mat> q;
  q.reserve(game.num_players);
  for (int i = 0; i < game.num_players; ++i)
    q.push_back(sampled_q(game, policy, i, params.batch, params.horizon,
                          substream_seed(params.seed, stream_base + i)));
  return q;
}

struct SmoothedTables {
  std::vector<Mat> q;  // Qt_i
  Mat entropies;       // nu_i(s, pi_i)
};

inline SmoothedTables smoothed_q_tables(const MarkovGame& game, const JointPolicy& policy,
                                        double tau, EvalMode mode, const SampledEvalParams& params,
                                        std::uint64_t stream_base) {
  SmoothedTables tables;
  if (mode == EvalMode::Exact) {
    SmoothedEvaluationResult eval = smoothed_values(game, policy, tau);
    tables.q = std::move(eval.q_tables);
    tables.entropies = std::move(eval.entropies);
  } else {
    tables.entropies = Mat(game.num_players, game.num_states);
    tables.q.reserve(game.num_players);
    for (int i = 0; i < game.num_players; ++i) {
      tables.q.push_back(sampled_smoothed_q(game, policy, i, tau, params.batch, params.horizon,
                                            substream_seed(params.seed, stream_base + i)));
      for (int s = 0; s < game.num_states; ++s)
        tables.entropies(i, s) = negative_entropy(policy.rows[i].row(s));
    }
  }
  return tables;
}

inline Mat improvement_from(const SmoothedTables& tables, const JointPolicy& policy, double tau) {
  const int num_players = static_cast<int>(tables.q.size());
  const int num_states = static_cast<int>(tables.entropies.cols());
  Mat delta(num_players, num_states);
  for (int i = 0; i < num_players; ++i) {
    for (int s = 0; s < num_states; ++s) {
      const Vec q_row = tables.q[i].row(s).transpose();
      const double incumbent =
          q_row.dot(policy.rows[i].row(s).transpose()) - tau * tables.entropies(i, s);
      delta(i, s) = smoothed_br_value(q_row, tau) - incumbent;
    }
  }
  return delta;
}

}  // namespace detail

// Delta_i(s) for every (player, state) at the current profile (exact
// evaluation).
inline Mat improvement_table(const MarkovGame& game, const JointPolicy& policy, double tau) {
  return detail::improvement_from(detail::smoothed_q_tables(game, policy, tau, EvalMode::Exact, {}, 0),
                                  policy, tau);
}

// One simultaneous projected-gradient step from the given Q snapshot.
inline JointPolicy pga_step_from(const MarkovGame& game, const JointPolicy& policy, double eta,
                                 const std::vector<Mat>& q_tables) {
  if (!(eta >= 0.0)) throw std::invalid_argument("pga_step: eta must be >= 0");
  if (eta == 0.0) return policy;  // zero step is the exact identity
  JointPolicy next = policy;
  for (int i = 0; i < game.num_players; ++i)
    for (int s = 0; s < game.num_states; ++s)
      next.rows[i].row(s) =
          project_simplex(policy.rows[i].row(s).transpose() + eta * q_tables[i].row(s).transpose())
              .transpose();
  return next;
}

inline JointPolicy pga_step(const MarkovGame& game, const JointPolicy& policy, double eta) {
  validate_policy(game, policy);
  return pga_step_from(game, policy, eta, exact_q(game, policy, exact_values(game, policy)));
}

struct SmbrStepResult {
  JointPolicy policy;
  bool terminated = false;
  int player = -1;
  int state = -1;
  double delta = 0.0;  // max improvement of the applied update
};

inline SmbrStepResult smbr_step_from(const detail::SmoothedTables& tables,
                                     const JointPolicy& policy, double tau) {
  const Mat delta = detail::improvement_from(tables, policy, tau);
  int best_i = 0;
  int best_s = 0;
  // Strict > scan in (player, state) order realizes the lowest-player,
  // lowest-state tie-break.
  for (int i = 0; i < delta.rows(); ++i)
    for (int s = 0; s < delta.cols(); ++s)
      if (delta(i, s) > delta(best_i, best_s)) {
        best_i = i;
        best_s = s;
      }

  SmbrStepResult result;
  result.delta = delta(best_i, best_s);
  if (result.delta <= kImprovementTerminationTol) {
    result.terminated = true;
    result.policy = policy;
    return result;
  }
  result.player = best_i;
  result.state = best_s;
  result.policy = policy;
  result.policy.rows[best_i].row(best_s) =
      smoothed_br(tables.q[best_i].row(best_s).transpose(), tau).transpose();
  return result;
}

inline SmbrStepResult smbr_step(const MarkovGame& game, const JointPolicy& policy, double tau) {
  if (!(tau > 0.0)) throw std::invalid_argument("smbr_step: tau must be positive");
  validate_policy(game, policy);
  return smbr_step_from(detail::smoothed_q_tables(game, policy, tau, EvalMode::Exact, {}, 0), policy,
                        tau);
}

struct TraceRow {
  int iteration = 0;
  std::optional<double> max_regret;          // max_i R_i at this iterate
  std::optional<double> running_nash_regret; // mean of measured max regrets so far
  std::optional<double> potential;           // Phi(mu, pi^(t)) when a spec is attached
  std::optional<int> selected_player;        // Algorithm 2 only
  std::optional<int> selected_state;
  std::optional<double> delta;
};

struct RunOptions {
  StateDistribution initial;  // empty => game.initial_dist
  const PotentialSpec* potential = nullptr;
  int regret_stride = 1;  // measure exploitability every this many iterations; 0 disables
  bool keep_policies = true;
  std::function<void(const TraceRow&)> on_row;  // incremental flush
  std::function<void(int, const ExploitabilityReport&)> on_exploitability;
};

struct RunResult {
  std::vector<TraceRow> rows;         // rows[0] describes the uniform initial profile
  std::vector<JointPolicy> policies;  // parallel to rows when keep_policies
  JointPolicy final_policy;
  bool terminated = false;  // Algorithm 2 reached its fixed point early
  double nash_regret = 0.0;
  int iterations_completed = 0;
};

namespace detail {

struct TraceRecorder {
  const MarkovGame& game;
  const RunOptions& options;
  StateDistribution mu;
  RunResult result;
  double regret_sum = 0.0;
  int regret_count = 0;

  TraceRecorder(const MarkovGame& g, const RunOptions& o) : game(g), options(o) {
    mu = options.initial.size() == 0 ? g.initial_dist : options.initial;
    validate_distribution(mu, g.num_states, "run: initial distribution");
    if (options.regret_stride < 0) throw std::invalid_argument("run: regret stride must be >= 0");
  }

  void record(int t, const JointPolicy& policy, bool is_last, const SmbrStepResult* step) {
    TraceRow row;
    row.iteration = t;
    const bool measure =
        options.regret_stride > 0 && t > 0 && (t % options.regret_stride == 0 || is_last);
    if (measure) {
      const ExploitabilityReport report = exploitability(game, policy, mu);
      if (options.on_exploitability) options.on_exploitability(t, report);
      row.max_regret = report.max_regret;
      regret_sum += *row.max_regret;
      ++regret_count;
      row.running_nash_regret = regret_sum / regret_count;
    }
    if (options.potential != nullptr)
      row.potential = potential_value(game, *options.potential, policy, mu);
    if (step != nullptr) {
      row.selected_player = step->player;
      row.selected_state = step->state;
      row.delta = step->delta;
    }
    if (options.on_row) options.on_row(row);
    result.rows.push_back(std::move(row));
    if (options.keep_policies) result.policies.push_back(policy);
  }

  RunResult finish(JointPolicy final_policy, bool terminated, int iterations) {
    result.final_policy = std::move(final_policy);
    result.terminated = terminated;
    result.iterations_completed = iterations;
    result.nash_regret = regret_count > 0 ? regret_sum / regret_count : 0.0;
    return std::move(result);
  }
};

}  // namespace detail

inline RunResult run_pga(const MarkovGame& game, const PGAConfig& config, const RunOptions& options) {
  detail::check_pga_config(config);
  detail::TraceRecorder rec(game, options);
  JointPolicy policy = uniform_policy(game);
  rec.record(0, policy, config.iterations == 0, nullptr);
  for (int t = 1; t <= config.iterations; ++t) {
    const std::vector<Mat> q = detail::q_tables(
        game, policy, config.mode, config.sampled,
        static_cast<std::uint64_t>(t - 1) * static_cast<std::uint64_t>(game.num_players));
    policy = pga_step_from(game, policy, config.eta, q);
    rec.record(t, policy, t == config.iterations, nullptr);
  }
  return rec.finish(std::move(policy), false, config.iterations);
}

inline RunResult run_smbr(const MarkovGame& game, const SMBRConfig& config,
                          const RunOptions& options) {
  detail::check_smbr_config(config);
  detail::TraceRecorder rec(game, options);
  JointPolicy policy = uniform_policy(game);
  rec.record(0, policy, config.iterations == 0, nullptr);
  bool terminated = false;
  int completed = 0;
  for (int t = 1; t <= config.iterations; ++t) {
    const double tau = config.tau0 * std::pow(config.tau_decay, t - 1);
    const detail::SmoothedTables tables = detail::smoothed_q_tables(
        game, policy, tau, config.mode, config.sampled,
        static_cast<std::uint64_t>(t - 1) * static_cast<std::uint64_t>(game.num_players));
    const SmbrStepResult step = smbr_step_from(tables, policy, tau);
    if (step.terminated) {
      terminated = true;
      break;
    }
    policy = step.policy;
    rec.record(t, policy, t == config.iterations, &step);
    completed = t;
  }
  return rec.finish(std::move(policy), terminated, completed);
}

// Step-size and temperature prescriptions from the regret analysis; exposed
// as helper computations only (their optimality is not exercised anywhere).
inline double theorem_step_size(double c_phi, double alpha, int iterations, int num_players,
                                std::int64_t num_joint_actions, double delta) {
  const double t = static_cast<double>(iterations);
  return std::pow(1.0 - delta, 2.5) * std::sqrt(c_phi + num_players * num_players * alpha * t) /
         (2.0 * num_players * static_cast<double>(num_joint_actions) * std::sqrt(t));
}

inline double theorem_tau(double c_phi, double alpha, int iterations, int max_action_count,
                          double delta, double mu_min, double max_abs_reward) {
  const double log_a = std::log(static_cast<double>(max_action_count));
  const double root = std::sqrt(alpha + c_phi / static_cast<double>(iterations));
  const double denom =
      log_a + std::sqrt(2.0 * log_a / (1.0 - delta)) / root +
      log_a * (1.0 - delta) * std::sqrt(mu_min) /
          (4.0 * max_abs_reward * std::sqrt(static_cast<double>(max_action_count)) * root);
  return 1.0 / denom;
}

}  // namespace mapg
