#pragma once

// JSON wire formats. Index order is documented in schemas/ and frozen:
//
//   rewards[i][k]   : k = s * A + a      (A = prod_i |A_i|, a flat, player 0 fastest)
//   transitions[k]  : k = (s * A + a) * S + s'
//   policies[i][k]  : k = s * |A_i| + a
//
// A game document may embed a "family" block (the builder spec it came from);
// loaders use it to reconstruct the potential. A bare family document (as
// accepted by `build-game`) carries the family block plus num_players,
// discount and an optional initial_dist.

#include <fstream>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "mapg/best_response.hpp"
#include "mapg/evaluation.hpp"
#include "mapg/game.hpp"
#include "mapg/game_zoo.hpp"
#include "mapg/potentials.hpp"

namespace mapg {

using Json = nlohmann::json;

namespace detail {

inline std::vector<double> flatten(const Mat& m) {
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(m.size()));
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) out.push_back(m(r, c));
  return out;
}

inline Mat unflatten(const std::vector<double>& v, Eigen::Index rows, Eigen::Index cols,
                     const std::string& what) {
  if (static_cast<Eigen::Index>(v.size()) != rows * cols)
    throw std::invalid_argument(what + ": flat array has wrong length");
  Mat m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r)
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = v[static_cast<std::size_t>(r * cols + c)];
  return m;
}

inline Vec to_vec(const std::vector<double>& v) {
  return Eigen::Map<const Vec>(v.data(), static_cast<Eigen::Index>(v.size()));
}

inline std::vector<double> from_vec(const Vec& v) {
  return std::vector<double>(v.data(), v.data() + v.size());
}

inline std::string transition_kind_name(TransitionKind k) {
  return k == TransitionKind::Threshold ? "threshold" : "logistic";
}

inline TransitionKind transition_kind_from(const std::string& name) {
  if (name == "threshold") return TransitionKind::Threshold;
  if (name == "logistic") return TransitionKind::Logistic;
  throw std::invalid_argument("unknown transition kind: " + name);
}

}  // namespace detail

inline Json game_to_json(const MarkovGame& game, const Json* family = nullptr) {
  Json j;
  j["format"] = "mapg-game";
  j["schema_version"] = 1;
  j["num_players"] = game.num_players;
  j["num_states"] = game.num_states;
  j["action_counts"] = game.action_counts;
  j["discount"] = game.discount;
  j["initial_dist"] = detail::from_vec(game.initial_dist);
  Json rewards = Json::array();
  for (const Mat& u : game.rewards) rewards.push_back(detail::flatten(u));
  j["rewards"] = std::move(rewards);
  j["transitions"] = detail::flatten(game.transitions);
  if (family != nullptr && !family->is_null()) j["family"] = *family;
  return j;
}

inline MarkovGame game_from_json(const Json& j) {
  if (!j.contains("num_players") || !j.contains("rewards") || !j.contains("transitions"))
    throw std::invalid_argument("game_from_json: missing required fields");
  const int num_states = j.at("num_states").get<int>();
  const auto action_counts = j.at("action_counts").get<std::vector<int>>();
  const JointActionSpace space(action_counts);
  const std::int64_t num_a = space.size();
  std::vector<Mat> rewards;
  for (const auto& flat : j.at("rewards"))
    rewards.push_back(detail::unflatten(flat.get<std::vector<double>>(), num_states, num_a,
                                        "game_from_json: rewards"));
  Mat transitions = detail::unflatten(j.at("transitions").get<std::vector<double>>(),
                                      num_states * num_a, num_states, "game_from_json: transitions");
  return MarkovGame(num_states, action_counts, std::move(rewards), std::move(transitions),
                    j.at("discount").get<double>(),
                    detail::to_vec(j.at("initial_dist").get<std::vector<double>>()));
}

inline Json policy_to_json(const MarkovGame& game, const JointPolicy& policy) {
  validate_policy(game, policy);
  Json j;
  j["format"] = "mapg-policy";
  j["schema_version"] = 1;
  j["num_players"] = game.num_players;
  j["num_states"] = game.num_states;
  j["action_counts"] = game.action_counts;
  Json rows = Json::array();
  for (const Mat& m : policy.rows) rows.push_back(detail::flatten(m));
  j["policies"] = std::move(rows);
  return j;
}

inline JointPolicy policy_from_json(const Json& j) {
  const int num_states = j.at("num_states").get<int>();
  const auto action_counts = j.at("action_counts").get<std::vector<int>>();
  JointPolicy policy;
  const auto& rows = j.at("policies");
  if (rows.size() != action_counts.size())
    throw std::invalid_argument("policy_from_json: one row table per player required");
  for (std::size_t i = 0; i < action_counts.size(); ++i)
    policy.rows.push_back(detail::unflatten(rows[i].get<std::vector<double>>(), num_states,
                                            action_counts[i], "policy_from_json: policies"));
  return policy;
}

inline Json mcg_spec_to_json(const CongestionGameSpec& spec) {
  Json j;
  j["name"] = "mcg";
  j["num_facilities"] = spec.num_facilities;
  j["safe_weights"] = spec.safe_weights;
  j["congestion_penalty"] = spec.congestion_penalty;
  if (!spec.feasible_subsets.empty()) j["feasible_subsets"] = spec.feasible_subsets;
  if (spec.total_demand > 0.0) j["total_demand"] = spec.total_demand;
  j["congest_fraction"] = spec.congest_fraction;
  j["decongest_fraction"] = spec.decongest_fraction;
  j["transitions"] = detail::transition_kind_name(spec.transitions);
  j["logistic_steepness"] = spec.logistic_steepness;
  j["zeta"] = spec.zeta;
  if (!spec.custom_costs.empty()) {
    Json costs = Json::array();
    for (const Mat& c : spec.custom_costs) costs.push_back(detail::flatten(c));
    j["custom_costs"] = std::move(costs);
  }
  return j;
}

inline CongestionGameSpec mcg_spec_from_json(const Json& j, int num_players) {
  CongestionGameSpec spec;
  spec.num_facilities = j.at("num_facilities").get<int>();
  spec.safe_weights = j.value("safe_weights", std::vector<double>{});
  spec.congestion_penalty = j.value("congestion_penalty", -100.0);
  if (j.contains("feasible_subsets"))
    spec.feasible_subsets = j.at("feasible_subsets").get<std::vector<std::vector<unsigned>>>();
  spec.total_demand = j.value("total_demand", 0.0);
  spec.congest_fraction = j.value("congest_fraction", 0.5);
  spec.decongest_fraction = j.value("decongest_fraction", 0.25);
  spec.transitions = detail::transition_kind_from(j.value("transitions", "threshold"));
  spec.logistic_steepness = j.value("logistic_steepness", 50.0);
  spec.zeta = j.value("zeta", 0.0);
  if (j.contains("custom_costs")) {
    const int num_states = 1 << spec.num_facilities;
    for (const auto& flat : j.at("custom_costs"))
      spec.custom_costs.push_back(detail::unflatten(flat.get<std::vector<double>>(), num_states,
                                                    num_players + 1, "mcg custom_costs"));
  }
  return spec;
}

inline Json pmtg_spec_to_json(const TeamGameSpec& spec) {
  Json j;
  j["name"] = "pmtg";
  if (!spec.match_weights.empty()) j["match_weights"] = spec.match_weights;
  if (!spec.approve_costs.empty()) j["approve_costs"] = spec.approve_costs;
  j["perturbation_scale"] = spec.perturbation_scale;
  j["transitions"] = detail::transition_kind_name(spec.transitions);
  j["logistic_steepness"] = spec.logistic_steepness;
  return j;
}

inline TeamGameSpec pmtg_spec_from_json(const Json& j) {
  TeamGameSpec spec;
  spec.match_weights = j.value("match_weights", std::vector<double>{});
  spec.approve_costs = j.value("approve_costs", std::vector<double>{});
  spec.perturbation_scale = j.value("perturbation_scale", 1.0);
  spec.transitions = detail::transition_kind_from(j.value("transitions", "threshold"));
  spec.logistic_steepness = j.value("logistic_steepness", 50.0);
  return spec;
}

inline BuiltGame build_from_family(const Json& family, int num_players, double discount,
                                   StateDistribution initial = {}) {
  const std::string name = family.at("name").get<std::string>();
  if (name == "mcg")
    return build_mcg(mcg_spec_from_json(family, num_players), num_players, discount,
                     std::move(initial));
  if (name == "pmtg")
    return build_pmtg(pmtg_spec_from_json(family), num_players, discount, std::move(initial));
  throw std::invalid_argument("unsupported game family: " + name);
}

// A loaded game document: the tensors plus, when a family block is present,
// the reconstructed potential.
struct LoadedGame {
  MarkovGame game;
  std::optional<PotentialSpec> potential;
  Json family;  // null when absent
  double kappa = 0.0;
  double zeta = 0.0;
};

inline LoadedGame load_game_json(const Json& j) {
  // Bare family documents carry the builder inputs at top level.
  if (!j.contains("rewards") && j.contains("family")) {
    const int num_players = j.at("num_players").get<int>();
    const double discount = j.at("discount").get<double>();
    StateDistribution initial;
    if (j.contains("initial_dist"))
      initial = detail::to_vec(j.at("initial_dist").get<std::vector<double>>());
    BuiltGame built = build_from_family(j.at("family"), num_players, discount, std::move(initial));
    return LoadedGame{std::move(built.game), std::move(built.potential), j.at("family"),
                      built.kappa, built.zeta};
  }
  MarkovGame game = game_from_json(j);
  LoadedGame loaded{std::move(game), std::nullopt, Json(), 0.0, 0.0};
  if (j.contains("family")) {
    loaded.family = j.at("family");
    BuiltGame built = build_from_family(loaded.family, loaded.game.num_players,
                                        loaded.game.discount, loaded.game.initial_dist);
    loaded.potential = std::move(built.potential);
    loaded.kappa = built.kappa;
    loaded.zeta = built.zeta;
  }
  return loaded;
}

inline Json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  Json j;
  in >> j;
  return j;
}

inline void write_json_file(const std::string& path, const Json& j) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  out << j.dump(2) << "\n";
}

inline Json exploitability_to_json(const ExploitabilityReport& report) {
  Json players = Json::array();
  for (std::size_t i = 0; i < report.players.size(); ++i) {
    const PlayerRegret& pr = report.players[i];
    players.push_back({{"player", i},
                       {"best_value", pr.best_value},
                       {"current_value", pr.current_value},
                       {"regret", pr.regret},
                       {"worst_state_regret", pr.worst_state_regret},
                       {"best_policy", pr.best_policy}});
  }
  return Json{{"max_regret", report.max_regret}, {"players", std::move(players)}};
}

inline Json evaluation_to_json(const EvaluationResult& result) {
  Json values = Json::array();
  Json q_tables = Json::array();
  for (std::size_t i = 0; i < result.values.size(); ++i) {
    values.push_back(detail::from_vec(result.values[i]));
    q_tables.push_back(detail::flatten(result.q_tables[i]));
  }
  return Json{{"values", std::move(values)},
              {"q_tables", std::move(q_tables)},
              {"visitation", detail::from_vec(result.visitation)}};
}

inline Json gap_estimate_to_json(const GapEstimate& estimate) {
  Json j{{"estimate", estimate.estimate},
         {"probes", estimate.probes},
         {"description", estimate.description},
         {"seed", estimate.seed}};
  if (estimate.certified_bound) {
    j["certified_bound"] = *estimate.certified_bound;
    j["within_certified_bound"] = estimate.estimate <= *estimate.certified_bound + 1e-8;
  }
  return j;
}

}  // namespace mapg
