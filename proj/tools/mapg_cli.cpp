// mapg CLI: build, run, and inspect Markov alpha-potential game experiments.
//
//   mapg build-game      write a game document from a preset or a family spec
//   mapg run             run pga/smbr and persist traces under the output dir
//   mapg evaluate        values + exploitability (+ potential) for a policy
//   mapg estimate-alpha  empirical potential-gap estimate for a game
//
// The default output root is $MAPG_OUT_ROOT when set, else ./runs.

#include <cstdlib>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "mapg/mapg.hpp"

namespace {

mapg::StateDistribution parse_distribution(const std::string& csv) {
  std::vector<double> entries;
  std::stringstream ss(csv);
  std::string cell;
  while (std::getline(ss, cell, ',')) entries.push_back(std::stod(cell));
  return Eigen::Map<const mapg::Vec>(entries.data(), static_cast<Eigen::Index>(entries.size()));
}

std::string default_output_root() {
  const char* env = std::getenv("MAPG_OUT_ROOT");
  return env != nullptr ? env : "runs";
}

struct GameSource {
  std::string preset;
  std::string game_file;
  int num_players_override = 0;
  double discount_override = 0.0;

  mapg::ExperimentConfig resolve_config() const {
    mapg::ExperimentConfig config;
    if (!preset.empty()) {
      config = mapg::preset_config(preset);
    } else if (!game_file.empty()) {
      const mapg::Json doc = mapg::read_json_file(game_file);
      if (doc.contains("family")) config.family = doc.at("family");
      if (doc.contains("num_players")) config.num_players = doc.at("num_players").get<int>();
      if (doc.contains("discount")) config.discount = doc.at("discount").get<double>();
      config.name = game_file;
    } else {
      throw CLI::ValidationError("either --preset or --game is required");
    }
    if (num_players_override > 0) config.num_players = num_players_override;
    if (discount_override > 0.0) config.discount = discount_override;
    return config;
  }

  mapg::LoadedGame load() const {
    if (!preset.empty()) {
      const mapg::ExperimentConfig config = resolve_config();
      mapg::BuiltGame built = mapg::build_experiment_game(config);
      return mapg::LoadedGame{std::move(built.game), std::move(built.potential), config.family,
                              built.kappa, built.zeta};
    }
    mapg::Json doc = mapg::read_json_file(game_file);
    if (num_players_override > 0 && !doc.contains("rewards"))
      doc["num_players"] = num_players_override;
    if (discount_override > 0.0 && !doc.contains("rewards"))
      doc["discount"] = discount_override;
    return mapg::load_game_json(doc);
  }
};

void add_game_source(CLI::App* cmd, GameSource& source) {
  cmd->add_option("--preset", source.preset,
                  "built-in preset: mcg-paper, pmtg-paper, pmtg-logistic (optional -pga/-smbr suffix)");
  cmd->add_option("--game", source.game_file, "game or family-spec JSON file");
  cmd->add_option("--players", source.num_players_override, "override the player count");
  cmd->add_option("--discount", source.discount_override, "override the discount factor");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Markov alpha-potential games toolkit"};
  app.require_subcommand(1);

  // ---- build-game ----
  GameSource build_source;
  std::string build_out = "game.json";
  CLI::App* build = app.add_subcommand("build-game", "build a game document and write it as JSON");
  add_game_source(build, build_source);
  build->add_option("--out", build_out, "output path");

  // ---- run ----
  GameSource run_source;
  mapg::ExperimentConfig run_config;
  std::string run_out;
  std::string run_eval = "";
  std::string run_algorithm = "";
  std::vector<std::uint64_t> run_seeds;
  std::string run_mu;
  int run_iters = -1;
  double run_eta = -1.0, run_tau0 = -1.0, run_tau_decay = -1.0;
  int run_stride = -1, run_reps = -1, run_horizon = -1, run_batch = -1;
  CLI::App* run = app.add_subcommand("run", "run an experiment and persist traces");
  add_game_source(run, run_source);
  run->add_option("--algorithm", run_algorithm, "pga or smbr");
  run->add_option("--eta", run_eta, "pga step size");
  run->add_option("--tau0", run_tau0, "smbr initial temperature");
  run->add_option("--tau-decay", run_tau_decay, "smbr temperature decay per iteration");
  run->add_option("--iters", run_iters, "iteration budget T");
  run->add_option("--eval", run_eval, "exact or sampled");
  run->add_option("--horizon", run_horizon, "sampled rollout length");
  run->add_option("--batch", run_batch, "sampled mini-batch size");
  run->add_option("--stride", run_stride, "exploitability measurement stride");
  run->add_option("--reps", run_reps, "number of repetitions");
  run->add_option("--seed", run_seeds, "root seed per repetition");
  run->add_option("--mu", run_mu, "initial state distribution, comma separated");
  run->add_option("--out", run_out, "output directory (default $MAPG_OUT_ROOT/<name>)");

  // ---- evaluate ----
  GameSource eval_source;
  std::string eval_policy_file;
  std::string eval_mu;
  std::string eval_out;
  int eval_sampled_batch = 0, eval_sampled_horizon = 20;
  std::uint64_t eval_sampled_seed = 1;
  CLI::App* evaluate = app.add_subcommand("evaluate", "report values and exploitability for a policy");
  add_game_source(evaluate, eval_source);
  evaluate->add_option("--policy", eval_policy_file, "policy JSON file")->required();
  evaluate->add_option("--mu", eval_mu, "initial state distribution, comma separated");
  evaluate->add_option("--sampled-batch", eval_sampled_batch,
                       "also report Monte-Carlo Q estimates from this many episodes");
  evaluate->add_option("--sampled-horizon", eval_sampled_horizon, "rollout length for --sampled-batch");
  evaluate->add_option("--sampled-seed", eval_sampled_seed, "seed for --sampled-batch");
  evaluate->add_option("--out", eval_out, "write the JSON report here instead of stdout");

  // ---- estimate-alpha ----
  GameSource alpha_source;
  std::int64_t alpha_probes = 1000;
  std::uint64_t alpha_seed = 1;
  std::string alpha_out;
  CLI::App* alpha = app.add_subcommand("estimate-alpha", "empirical potential-gap estimate");
  add_game_source(alpha, alpha_source);
  alpha->add_option("--probes", alpha_probes, "probe budget");
  alpha->add_option("--seed", alpha_seed, "RNG seed for random probes");
  alpha->add_option("--out", alpha_out, "write the JSON estimate here instead of stdout");

  CLI11_PARSE(app, argc, argv);

  try {
    if (build->parsed()) {
      const mapg::LoadedGame loaded = build_source.load();
      const mapg::Json family = loaded.family;
      mapg::write_json_file(build_out,
                            mapg::game_to_json(loaded.game, family.is_null() ? nullptr : &family));
      std::cout << "wrote " << build_out << "\n";
      return 0;
    }

    if (run->parsed()) {
      mapg::ExperimentConfig config = run_source.resolve_config();
      if (!run_algorithm.empty()) config.algorithm = run_algorithm;
      if (run_eta >= 0.0) config.eta = run_eta;
      if (run_tau0 > 0.0) config.tau0 = run_tau0;
      if (run_tau_decay > 0.0) config.tau_decay = run_tau_decay;
      if (run_iters >= 0) config.iterations = run_iters;
      if (!run_eval.empty()) {
        if (run_eval == "exact")
          config.mode = mapg::EvalMode::Exact;
        else if (run_eval == "sampled")
          config.mode = mapg::EvalMode::Sampled;
        else
          throw CLI::ValidationError("--eval must be exact or sampled");
      }
      if (run_horizon > 0) config.horizon = run_horizon;
      if (run_batch > 0) config.batch = run_batch;
      if (run_stride >= 0) config.regret_stride = run_stride;
      if (run_reps > 0) config.repetitions = run_reps;
      if (!run_seeds.empty()) {
        config.seeds = run_seeds;
        config.repetitions = static_cast<int>(run_seeds.size());
      }
      if (!run_mu.empty()) config.initial = parse_distribution(run_mu);
      config.output_dir =
          !run_out.empty() ? run_out : default_output_root() + "/" + config.name;

      const mapg::LoadedGame loaded = run_source.load();
      config.num_players = loaded.game.num_players;
      config.discount = loaded.game.discount;
      const mapg::ExperimentArtifacts artifacts =
          mapg::run_experiment(loaded.game, loaded.potential, config);
      std::cout << "wrote " << artifacts.output_dir.string() << " (" << artifacts.run_dirs.size()
                << " run(s))\n";
      return 0;
    }

    if (evaluate->parsed()) {
      const mapg::LoadedGame loaded = eval_source.load();
      const mapg::JointPolicy policy =
          mapg::policy_from_json(mapg::read_json_file(eval_policy_file));
      const mapg::StateDistribution mu =
          eval_mu.empty() ? loaded.game.initial_dist : parse_distribution(eval_mu);
      mapg::Json report = mapg::evaluate_report(loaded.game, loaded.potential, policy, mu);
      if (eval_sampled_batch > 0)
        report["sampled_q"] = mapg::sampled_q_report(loaded.game, policy, eval_sampled_batch,
                                                     eval_sampled_horizon, eval_sampled_seed);
      if (eval_out.empty())
        std::cout << report.dump(2) << "\n";
      else
        mapg::write_json_file(eval_out, report);
      return 0;
    }

    if (alpha->parsed()) {
      const mapg::LoadedGame loaded = alpha_source.load();
      if (!loaded.potential) {
        std::cerr << "error: no potential available for this game; supply a family block "
                     "(mcg or pmtg)\n";
        return 2;
      }
      const mapg::GapEstimate estimate =
          mapg::estimate_gap(loaded.game, *loaded.potential, alpha_probes, alpha_seed);
      const mapg::Json report = mapg::gap_estimate_to_json(estimate);
      if (alpha_out.empty())
        std::cout << report.dump(2) << "\n";
      else
        mapg::write_json_file(alpha_out, report);
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
