#pragma once

// Builders for the two benchmark families.
//
// Markov congestion game (MCG). Players pick feasible facility subsets; with
// per-player demand D/|I| the aggregate usage of facility e is
// w_e(a) = n_e(a) D/|I| where n_e counts occupants. Each facility carries a
// congestion bit; the game state is the bit vector (facility 0 = least
// significant bit, |S| = 2^|E|). Facility rewards c_e(s, w) default to
// safe_weight_e * n_e, minus 100 per occupant while congested. A facility
// flips to congested when occupancy exceeds congest_fraction * |I| and
// recovers when occupancy is at most decongest_fraction * |I|; in between the
// bit persists. Flips are deterministic in threshold mode and independent
// logistic coin flips otherwise. The Rosenthal stage potential
//
//   phi(s, a) = sum_e sum_{j=1}^{n_e(a)} c_e(s, j D/|I|)
//
// certifies the stage games exactly; the discounted gap bound needs a
// Lipschitz constant zeta of the kernel in w, which is steepness*|I|/(4D) in
// logistic mode and must be supplied by the caller for threshold kernels.
//
// Perturbed Markov team game (PMTG). Players approve (1) or disapprove (0) a
// project; it is conducted when at least |I|/2 approve. Payoffs are
// u_i = r + xi_i with common r = 1{conducted} and, while conducted,
// xi_i = w_i 1{a_i = s} - w_i' a_i, where the default weights follow
// w_i = 10(|I|+1-i)/|I| and w_i' = (i+1)/|I| for 1-indexed players. States are
// Low = 0 and High = 1 excitement; High is entered when n(a) >= |I|/2 and
// kept while n(a) >= |I|/4 (thresholds), or via logistic flips with the same
// midpoints. The potential is the team value (phi = r) with certified gap
// 2 kappa/(1-delta)^2, kappa = max |xi_i| over the built tables.

#include <bit>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "mapg/game.hpp"
#include "mapg/potentials.hpp"

namespace mapg {

struct BuiltGame {
  MarkovGame game;
  PotentialSpec potential;
  double kappa = 0.0;  // PMTG: built max |xi_i|
  double zeta = 0.0;   // MCG: effective transition Lipschitz constant
};

enum class TransitionKind { Threshold, Logistic };

struct CongestionGameSpec {
  int num_facilities = 0;
  std::vector<double> safe_weights;    // per facility
  double congestion_penalty = -100.0;  // per occupant while congested
  // Per player: feasible facility subsets as bitmasks. Empty => every player
  // may pick any single facility (|A_i| = |E|).
  std::vector<std::vector<unsigned>> feasible_subsets;
  double total_demand = 0.0;  // D; 0 => |I| (per-player demand 1)
  double congest_fraction = 0.5;
  double decongest_fraction = 0.25;
  TransitionKind transitions = TransitionKind::Threshold;
  double logistic_steepness = 50.0;
  double zeta = 0.0;  // threshold mode: user-supplied kernel Lipschitz constant
  // Optional override: custom_costs[e](s, n) = c_e(s, n D/|I|) for occupancy
  // n in 0..|I|. Replaces the safe-weight/penalty form entirely.
  std::vector<Mat> custom_costs;
};

inline double mcg_effective_zeta(const CongestionGameSpec& spec, int num_players) {
  const double demand = spec.total_demand > 0.0 ? spec.total_demand : num_players;
  if (spec.transitions == TransitionKind::Logistic)
    return spec.logistic_steepness * num_players / (4.0 * demand);
  return spec.zeta;
}

namespace detail {

inline double facility_cost(const CongestionGameSpec& spec, int e, int state, int count) {
  if (!spec.custom_costs.empty()) return spec.custom_costs[e](state, count);
  const bool congested = (state >> e) & 1;
  return spec.safe_weights[e] * count + (congested ? spec.congestion_penalty : 0.0);
}

inline double logistic(double z) { return 1.0 / (1.0 + std::exp(-z)); }

inline std::vector<std::vector<unsigned>> resolved_subsets(const CongestionGameSpec& spec,
                                                           int num_players) {
  if (!spec.feasible_subsets.empty()) {
    if (static_cast<int>(spec.feasible_subsets.size()) != num_players)
      throw std::invalid_argument("build_mcg: one subset list per player required");
    for (const auto& list : spec.feasible_subsets)
      if (list.empty()) throw std::invalid_argument("build_mcg: empty action set");
    return spec.feasible_subsets;
  }
  std::vector<unsigned> singletons(spec.num_facilities);
  for (int e = 0; e < spec.num_facilities; ++e) singletons[e] = 1u << e;
  return std::vector<std::vector<unsigned>>(num_players, singletons);
}

}  // namespace detail

// Rosenthal stage potential phi(s, a) for the joint action given by each
// player's index into their feasible-subset list.
inline double rosenthal_stage_potential(const CongestionGameSpec& spec, int num_players, int state,
                                        std::span<const int> subset_choices) {
  const auto subsets = detail::resolved_subsets(spec, num_players);
  std::vector<int> counts(spec.num_facilities, 0);
  for (int i = 0; i < num_players; ++i) {
    if (subset_choices[i] < 0 || subset_choices[i] >= static_cast<int>(subsets[i].size()))
      throw std::invalid_argument("rosenthal_stage_potential: invalid subset action");
    const unsigned mask = subsets[i][subset_choices[i]];
    for (int e = 0; e < spec.num_facilities; ++e)
      if (mask & (1u << e)) ++counts[e];
  }
  double phi = 0.0;
  for (int e = 0; e < spec.num_facilities; ++e)
    for (int j = 1; j <= counts[e]; ++j) phi += detail::facility_cost(spec, e, state, j);
  return phi;
}

inline BuiltGame build_mcg(const CongestionGameSpec& spec, int num_players, double discount,
                           StateDistribution initial = {}) {
  if (spec.num_facilities < 1) throw std::invalid_argument("build_mcg: need at least one facility");
  if (num_players < 1) throw std::invalid_argument("build_mcg: need at least one player");
  if (!(spec.congest_fraction > 0.0 && spec.congest_fraction <= 1.0) ||
      !(spec.decongest_fraction > 0.0 && spec.decongest_fraction <= 1.0))
    throw std::invalid_argument("build_mcg: thresholds must lie in (0,1]");
  if (spec.custom_costs.empty() &&
      static_cast<int>(spec.safe_weights.size()) != spec.num_facilities)
    throw std::invalid_argument("build_mcg: one safe weight per facility required");
  if (!spec.custom_costs.empty()) {
    if (static_cast<int>(spec.custom_costs.size()) != spec.num_facilities)
      throw std::invalid_argument("build_mcg: one cost table per facility required");
    for (const Mat& c : spec.custom_costs)
      if (c.rows() != (1 << spec.num_facilities) || c.cols() != num_players + 1)
        throw std::invalid_argument("build_mcg: cost table shape mismatch");
  }

  const int num_states = 1 << spec.num_facilities;
  const auto subsets = detail::resolved_subsets(spec, num_players);
  std::vector<int> action_counts(num_players);
  for (int i = 0; i < num_players; ++i) action_counts[i] = static_cast<int>(subsets[i].size());
  const JointActionSpace space(action_counts);
  const std::int64_t num_a = space.size();
  const double demand = spec.total_demand > 0.0 ? spec.total_demand : num_players;

  // Occupancy counts per joint action (state-independent).
  std::vector<std::vector<int>> counts(num_a, std::vector<int>(spec.num_facilities, 0));
  for (std::int64_t a = 0; a < num_a; ++a) {
    for (int i = 0; i < num_players; ++i) {
      const unsigned mask = subsets[i][space.action_of(a, i)];
      for (int e = 0; e < spec.num_facilities; ++e)
        if (mask & (1u << e)) ++counts[a][e];
    }
  }

  // Per-(e, s) prefix sums of costs over occupancy, for rewards and phi.
  std::vector<Mat> prefix(spec.num_facilities, Mat::Zero(num_states, num_players + 1));
  for (int e = 0; e < spec.num_facilities; ++e)
    for (int s = 0; s < num_states; ++s)
      for (int j = 1; j <= num_players; ++j)
        prefix[e](s, j) = prefix[e](s, j - 1) + detail::facility_cost(spec, e, s, j);

  std::vector<Mat> rewards(num_players, Mat::Zero(num_states, num_a));
  Mat phi = Mat::Zero(num_states, num_a);
  for (int s = 0; s < num_states; ++s) {
    for (std::int64_t a = 0; a < num_a; ++a) {
      double pot = 0.0;
      for (int e = 0; e < spec.num_facilities; ++e) pot += prefix[e](s, counts[a][e]);
      phi(s, a) = pot;
      for (int i = 0; i < num_players; ++i) {
        const unsigned mask = subsets[i][space.action_of(a, i)];
        double u = 0.0;
        for (int e = 0; e < spec.num_facilities; ++e)
          if (mask & (1u << e)) u += detail::facility_cost(spec, e, s, counts[a][e]);
        rewards[i](s, a) = u;
      }
    }
  }

  Mat transitions = Mat::Zero(static_cast<std::int64_t>(num_states) * num_a, num_states);
  const double congest_at = spec.congest_fraction * num_players;
  const double decongest_at = spec.decongest_fraction * num_players;
  for (int s = 0; s < num_states; ++s) {
    for (std::int64_t a = 0; a < num_a; ++a) {
      const std::int64_t row = static_cast<std::int64_t>(s) * num_a + a;
      if (spec.transitions == TransitionKind::Threshold) {
        int next = 0;
        for (int e = 0; e < spec.num_facilities; ++e) {
          const bool congested = (s >> e) & 1;
          const int n = counts[a][e];
          bool next_bit = congested;
          if (n > congest_at)
            next_bit = true;
          else if (congested && n <= decongest_at)
            next_bit = false;
          if (next_bit) next |= 1 << e;
        }
        transitions(row, next) = 1.0;
      } else {
        std::vector<double> p_cong(spec.num_facilities);
        for (int e = 0; e < spec.num_facilities; ++e) {
          const bool congested = (s >> e) & 1;
          const double mid = congested ? decongest_at : congest_at;
          p_cong[e] = detail::logistic(spec.logistic_steepness * (counts[a][e] - mid));
        }
        for (int next = 0; next < num_states; ++next) {
          double p = 1.0;
          for (int e = 0; e < spec.num_facilities; ++e)
            p *= ((next >> e) & 1) ? p_cong[e] : 1.0 - p_cong[e];
          transitions(row, next) = p;
        }
      }
    }
  }

  if (initial.size() == 0) initial = Vec::Constant(num_states, 1.0 / num_states);

  MarkovGame game(num_states, action_counts, std::move(rewards), std::move(transitions), discount,
                  std::move(initial));

  const double zeta = mcg_effective_zeta(spec, num_players);
  PotentialSpec potential;
  potential.stage_potential = std::move(phi);
  potential.potential_range_bound = potential_range_default(potential.stage_potential, discount);
  potential.alpha_bound =
      mcg_alpha_bound(zeta, num_states, demand, spec.num_facilities, num_players, discount,
                      max_potential_default(potential.stage_potential, discount));
  potential.alpha_certified = spec.transitions == TransitionKind::Logistic || spec.zeta > 0.0;

  return BuiltGame{std::move(game), std::move(potential), 0.0, zeta};
}

struct TeamGameSpec {
  std::vector<double> match_weights;  // w_i;  empty => 10 (|I|+1-i)/|I|
  std::vector<double> approve_costs;  // w_i'; empty => (i+1)/|I|
  double perturbation_scale = 1.0;    // scales every xi_i (0 => exact team game)
  TransitionKind transitions = TransitionKind::Threshold;
  double logistic_steepness = 50.0;
};

inline BuiltGame build_pmtg(const TeamGameSpec& spec, int num_players, double discount,
                            StateDistribution initial = {}) {
  if (num_players < 1) throw std::invalid_argument("build_pmtg: need at least one player");
  if (spec.perturbation_scale < 0.0)
    throw std::invalid_argument("build_pmtg: perturbation scale must be >= 0");
  std::vector<double> w = spec.match_weights;
  std::vector<double> wp = spec.approve_costs;
  if (w.empty()) {
    w.resize(num_players);
    for (int p = 0; p < num_players; ++p)
      w[p] = 10.0 * (num_players - p) / num_players;  // i = p + 1
  }
  if (wp.empty()) {
    wp.resize(num_players);
    for (int p = 0; p < num_players; ++p) wp[p] = (p + 2.0) / num_players;
  }
  if (static_cast<int>(w.size()) != num_players || static_cast<int>(wp.size()) != num_players)
    throw std::invalid_argument("build_pmtg: one weight per player required");

  const int num_states = 2;  // Low = 0, High = 1
  const std::vector<int> action_counts(num_players, 2);
  const std::int64_t num_a = std::int64_t{1} << num_players;
  const double conduct_at = num_players / 2.0;  // project conducted iff n >= |I|/2
  const double keep_at = num_players / 4.0;     // High kept iff n >= |I|/4

  std::vector<Mat> rewards(num_players, Mat::Zero(num_states, num_a));
  Mat phi = Mat::Zero(num_states, num_a);
  Mat transitions = Mat::Zero(num_states * num_a, num_states);
  double kappa = 0.0;
  for (std::int64_t a = 0; a < num_a; ++a) {
    // Player 0 is the least significant bit, so popcount(a) = approvers.
    const int n = static_cast<int>(std::popcount(static_cast<std::uint64_t>(a)));
    const bool conducted = n >= conduct_at;
    for (int s = 0; s < num_states; ++s) {
      const double r = conducted ? 1.0 : 0.0;
      phi(s, a) = r;
      for (int p = 0; p < num_players; ++p) {
        const int ai = static_cast<int>((a >> p) & 1);
        const double xi =
            conducted ? spec.perturbation_scale * (w[p] * (ai == s ? 1.0 : 0.0) - wp[p] * ai) : 0.0;
        kappa = std::max(kappa, std::abs(xi));
        rewards[p](s, a) = r + xi;
      }
      const std::int64_t row = static_cast<std::int64_t>(s) * num_a + a;
      if (spec.transitions == TransitionKind::Threshold) {
        const bool high = (s == 0) ? (n >= conduct_at) : (n >= keep_at);
        transitions(row, high ? 1 : 0) = 1.0;
      } else {
        const double mid = (s == 0) ? conduct_at : keep_at;
        const double p_high = detail::logistic(spec.logistic_steepness * (n - mid));
        transitions(row, 1) = p_high;
        transitions(row, 0) = 1.0 - p_high;
      }
    }
  }

  if (initial.size() == 0) initial = Vec::Constant(num_states, 0.5);

  MarkovGame game(num_states, action_counts, std::move(rewards), std::move(transitions), discount,
                  std::move(initial));

  PotentialSpec potential;
  potential.stage_potential = std::move(phi);
  potential.potential_range_bound = potential_range_default(potential.stage_potential, discount);
  potential.alpha_bound = pmtg_alpha_bound(kappa, discount);
  potential.alpha_certified = true;

  return BuiltGame{std::move(game), std::move(potential), kappa, 0.0};
}

}  // namespace mapg
