#include <catch2/catch_amalgamated.hpp>

#include "mapg/game_zoo.hpp"
#include "mapg/potentials.hpp"
#include "oracles.hpp"

using namespace mapg;
using Catch::Matchers::WithinAbs;

namespace {

CongestionGameSpec paper_mcg_spec() {
  CongestionGameSpec spec;
  spec.num_facilities = 4;
  spec.safe_weights = {1.0, 2.0, 4.0, 6.0};
  spec.congestion_penalty = -100.0;
  return spec;
}

}  // namespace

TEST_CASE("benchmark congestion game instance") {
  const BuiltGame built = build_mcg(paper_mcg_spec(), 8, 0.99);
  const MarkovGame& game = built.game;
  REQUIRE(game.num_states == 16);
  REQUIRE(game.num_players == 8);
  for (int i = 0; i < 8; ++i) REQUIRE(game.action_counts[i] == 4);
  REQUIRE(game.num_joint_actions() == 65536);

  // All 8 players on facility 3 (weight 6): 48 each in the normal state,
  // 48 - 100 when that facility's bit is congested.
  const std::vector<int> all_d(8, 3);
  const std::int64_t flat = game.actions.encode(all_d);
  REQUIRE_THAT(game.rewards[0](0, flat), WithinAbs(48.0, 1e-12));
  REQUIRE_THAT(game.rewards[0](1 << 3, flat), WithinAbs(-52.0, 1e-12));

  // 8 occupants > |I|/2 = 4: the facility flips to congested deterministically.
  const Eigen::Index row = game.sa(0, flat);
  REQUIRE(game.transitions(row, 1 << 3) == 1.0);
}

TEST_CASE("single occupant earns its weight") {
  CongestionGameSpec spec;
  spec.num_facilities = 1;
  spec.safe_weights = {1.0};
  const BuiltGame built = build_mcg(spec, 1, 0.9);
  REQUIRE_THAT(built.game.rewards[0](0, 0), WithinAbs(1.0, 1e-15));
}

TEST_CASE("mcg threshold transitions congest and decongest at the documented counts") {
  CongestionGameSpec spec;
  spec.num_facilities = 2;
  spec.safe_weights = {1.0, 2.0};
  const int num_players = 4;  // congest when n > 2, decongest when n <= 1
  const BuiltGame built = build_mcg(spec, num_players, 0.9);
  const MarkovGame& game = built.game;

  auto next_state = [&](int s, const std::vector<int>& facilities) {
    const std::int64_t flat = game.actions.encode(facilities);
    const auto row = game.transitions.row(game.sa(s, flat));
    for (int s2 = 0; s2 < game.num_states; ++s2)
      if (row[s2] == 1.0) return s2;
    FAIL("transition row is not deterministic");
    return -1;
  };

  // 3 players on facility 0 from the all-normal state: facility 0 congests.
  REQUIRE(next_state(0, {0, 0, 0, 1}) == 1);
  // 2 players on each facility: everything stays normal.
  REQUIRE(next_state(0, {0, 0, 1, 1}) == 0);
  // Facility 0 congested with 2 occupants: persists (between the thresholds).
  REQUIRE(next_state(1, {0, 0, 1, 1}) == 1);
  // Facility 0 congested with 1 occupant recovers, while facility 1 picks up
  // 3 occupants and congests.
  REQUIRE(next_state(1, {0, 1, 1, 1}) == 2);
}

TEST_CASE("mcg transitions depend on actions only through occupancy counts") {
  CongestionGameSpec spec;
  spec.num_facilities = 2;
  spec.safe_weights = {1.0, 2.0};
  spec.transitions = TransitionKind::Logistic;
  spec.logistic_steepness = 3.0;
  const BuiltGame built = build_mcg(spec, 3, 0.9);
  const MarkovGame& game = built.game;
  // (0,1,0) and (0,0,1) put the same counts on both facilities.
  const std::int64_t a = game.actions.encode(std::vector<int>{0, 1, 0});
  const std::int64_t b = game.actions.encode(std::vector<int>{0, 0, 1});
  for (int s = 0; s < game.num_states; ++s)
    REQUIRE(game.transitions.row(game.sa(s, a)) == game.transitions.row(game.sa(s, b)));
}

TEST_CASE("rosenthal exactness holds on every state of a small built instance") {
  CongestionGameSpec spec;
  spec.num_facilities = 2;
  spec.safe_weights = {1.0, 3.0};
  const BuiltGame built = build_mcg(spec, 2, 0.9);
  const MarkovGame& game = built.game;
  for (int s = 0; s < 4; ++s)
    for (std::int64_t a = 0; a < 4; ++a)
      for (int i = 0; i < 2; ++i)
        for (int ai2 = 0; ai2 < 2; ++ai2) {
          const std::int64_t a2 = game.actions.compose(i, ai2, game.actions.opponent_index(a, i));
          REQUIRE_THAT(
              built.potential.stage_potential(s, a) - built.potential.stage_potential(s, a2),
              WithinAbs(game.rewards[i](s, a) - game.rewards[i](s, a2), 1e-12));
        }
}

TEST_CASE("perturbed team game instance") {
  const BuiltGame built = build_pmtg(TeamGameSpec{}, 16, 0.99);
  const MarkovGame& game = built.game;
  REQUIRE(game.num_states == 2);
  REQUIRE(game.num_joint_actions() == 65536);

  // Default weights: w_1 = 10 (player 0), w_16' = 17/16 (player 15).
  // All-approve in High: u_i = 1 + w_i - w_i'.
  const std::int64_t all_approve = 65535;
  REQUIRE_THAT(game.rewards[0](1, all_approve), WithinAbs(1.0 + 10.0 - 2.0 / 16.0, 1e-12));
  REQUIRE_THAT(game.rewards[15](1, all_approve),
               WithinAbs(1.0 + 10.0 / 16.0 - 17.0 / 16.0, 1e-12));

  // Project not conducted: rewards are exactly 0.
  REQUIRE(game.rewards[0](0, 0) == 0.0);
  REQUIRE(game.rewards[7](1, 1) == 0.0);  // one approver < 8

  // kappa is the largest perturbation magnitude: player 0 disapproving in Low
  // while the project is conducted keeps w_1 = 10.
  REQUIRE_THAT(built.kappa, WithinAbs(10.0, 1e-12));
  REQUIRE_THAT(built.potential.alpha_bound, WithinAbs(2.0 * 10.0 / (0.01 * 0.01), 1e-6));
}

TEST_CASE("pmtg threshold transitions follow the approval counts") {
  const BuiltGame built = build_pmtg(TeamGameSpec{}, 4, 0.9);
  const MarkovGame& game = built.game;
  auto high_prob = [&](int s, std::int64_t a) { return game.transitions(game.sa(s, a), 1); };
  // n = 2 >= |I|/2: Low -> High.
  REQUIRE(high_prob(0, 0b0011) == 1.0);
  REQUIRE(high_prob(0, 0b0001) == 0.0);
  // From High: kept while n >= |I|/4 = 1.
  REQUIRE(high_prob(1, 0b0001) == 1.0);
  REQUIRE(high_prob(1, 0b0000) == 0.0);
}

TEST_CASE("pmtg logistic transitions") {
  TeamGameSpec spec;
  spec.transitions = TransitionKind::Logistic;
  spec.logistic_steepness = 50.0;
  const BuiltGame built = build_pmtg(spec, 16, 0.99);
  const MarkovGame& game = built.game;

  SECTION("midpoint: n = |I|/2 approvers from Low give probability 1/2") {
    const std::int64_t eight_approvers = 0b11111111;  // players 0..7
    REQUIRE_THAT(game.transitions(game.sa(0, eight_approvers), 1), WithinAbs(0.5, 1e-12));
  }
  SECTION("monotone in the number of approvers") {
    double prev = -1.0;
    for (int n = 0; n <= 16; ++n) {
      const std::int64_t a = (std::int64_t{1} << n) - 1;
      const double p = game.transitions(game.sa(0, a), 1);
      REQUIRE(p >= prev);
      prev = p;
    }
  }
}

TEST_CASE("zero perturbation builds an exact potential game") {
  TeamGameSpec spec;
  spec.perturbation_scale = 0.0;
  const BuiltGame built = build_pmtg(spec, 2, 0.8);
  REQUIRE(built.kappa == 0.0);
  REQUIRE(built.potential.alpha_bound == 0.0);
  const GapEstimate est = estimate_gap(built.game, built.potential, 100, 3);
  REQUIRE(est.estimate <= 1e-8);
}

TEST_CASE("builders expose the effective lipschitz constant") {
  CongestionGameSpec spec;
  spec.num_facilities = 2;
  spec.safe_weights = {1.0, 2.0};
  SECTION("logistic mode derives zeta from the slope") {
    spec.transitions = TransitionKind::Logistic;
    spec.logistic_steepness = 8.0;
    const BuiltGame built = build_mcg(spec, 4, 0.9);
    REQUIRE_THAT(built.zeta, WithinAbs(8.0 * 4 / (4.0 * 4.0), 1e-12));
    REQUIRE(built.potential.alpha_certified);
  }
  SECTION("threshold mode with user-supplied zeta certifies; without it, does not") {
    spec.transitions = TransitionKind::Threshold;
    spec.zeta = 0.0;
    REQUIRE_FALSE(build_mcg(spec, 4, 0.9).potential.alpha_certified);
    spec.zeta = 1.0;
    const BuiltGame built = build_mcg(spec, 4, 0.9);
    REQUIRE(built.potential.alpha_certified);
    REQUIRE_THAT(built.potential.alpha_bound,
                 WithinAbs(mcg_alpha_bound(1.0, 4, 4.0, 2, 4, 0.9,
                                           max_potential_default(built.potential.stage_potential, 0.9)),
                           1e-12));
  }
}
