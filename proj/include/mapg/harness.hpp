#pragma once

// Experiment runner: builds a game (preset or file), runs a configured
// dynamic for each repetition, and persists plot-ready artifacts under the
// output directory:
//
//   manifest.json            fully resolved config, seeds, library version
//   run_XX/trace.csv         iteration,max_regret,running_nash_regret,
//                            potential,selected_player,selected_state,delta
//   run_XX/regrets.jsonl     one {iteration, player, regret} row per measured
//                            (iteration, player)
//   run_XX/final_policy.json
//   run_XX/metrics.csv       iteration,l1_accuracy,max_regret,
//                            running_nash_regret,potential
//   aggregate.csv            iteration,n,l1_mean,l1_std across repetitions
//
// L1-accuracy at iteration t is (1/|I|) sum_i ||pi_i^(t) - pi_i^(final)||_1
// (entrywise) against the run's own final policy, so it ends at exactly 0.
// The aggregate uses the population standard deviation (ddof = 0) over the
// runs that reached each iteration. No artifact contains wall-clock data:
// with exact evaluation (or a fixed seed list) reruns are byte-identical.
//
// Presets bundle every benchmark parameter:
//
//   mcg-paper      8 players, 4 facilities, weights (1,2,4,6), penalty -100,
//                  threshold flips, delta 0.99; pga eta 0.01,
//                  smbr tau_t = 0.999^t * 5
//   pmtg-paper     16 players, threshold flips, delta 0.99; pga eta 0.05,
//                  smbr tau_t = 0.9975^t * 0.05
//   pmtg-logistic  pmtg-paper with logistic(steepness 50) flips
//
// All presets default to sampled evaluation with 20-step episodes in
// mini-batches of 10. A "-pga" or "-smbr" suffix on the preset name selects
// the algorithm.

#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "mapg/dynamics.hpp"
#include "mapg/game.hpp"
#include "mapg/game_zoo.hpp"
#include "mapg/serialization.hpp"
#include "mapg/version.hpp"

namespace mapg {

struct ExperimentConfig {
  std::string name = "experiment";
  std::string algorithm = "pga";  // "pga" | "smbr"
  double eta = 0.01;
  double tau0 = 0.05;
  double tau_decay = 1.0;
  int iterations = 1000;
  EvalMode mode = EvalMode::Sampled;
  int horizon = 20;
  int batch = 10;
  int regret_stride = 1;
  int repetitions = 1;
  std::vector<std::uint64_t> seeds;  // empty => 1..repetitions
  std::string output_dir = "runs";

  // Game source: a family block plus shape parameters, or a prebuilt game
  // supplied by the caller.
  Json family;
  int num_players = 0;
  double discount = 0.0;
  StateDistribution initial;  // empty => builder default
};

inline ExperimentConfig preset_config(const std::string& requested) {
  std::string name = requested;
  std::string algorithm;
  for (const char* suffix : {"-pga", "-smbr"}) {
    if (name.size() > std::strlen(suffix) &&
        name.compare(name.size() - std::strlen(suffix), std::string::npos, suffix) == 0) {
      algorithm = suffix + 1;
      name = name.substr(0, name.size() - std::strlen(suffix));
    }
  }

  ExperimentConfig config;
  config.name = name;
  config.mode = EvalMode::Sampled;
  config.horizon = 20;
  config.batch = 10;
  config.iterations = 2000;
  if (name == "mcg-paper") {
    config.num_players = 8;
    config.discount = 0.99;
    config.eta = 0.01;
    config.tau0 = 5.0;
    config.tau_decay = 0.999;
    CongestionGameSpec spec;
    spec.num_facilities = 4;
    spec.safe_weights = {1.0, 2.0, 4.0, 6.0};
    spec.congestion_penalty = -100.0;
    config.family = mcg_spec_to_json(spec);
  } else if (name == "pmtg-paper" || name == "pmtg-logistic") {
    config.num_players = 16;
    config.discount = 0.99;
    config.eta = 0.05;
    config.tau0 = 0.05;
    config.tau_decay = 0.9975;
    TeamGameSpec spec;
    if (name == "pmtg-logistic") {
      spec.transitions = TransitionKind::Logistic;
      spec.logistic_steepness = 50.0;
    }
    config.family = pmtg_spec_to_json(spec);
  } else {
    throw std::invalid_argument("unknown preset: " + requested);
  }
  if (!algorithm.empty()) config.algorithm = algorithm;
  return config;
}

inline BuiltGame build_experiment_game(const ExperimentConfig& config) {
  if (config.family.is_null())
    throw std::invalid_argument("build_experiment_game: config carries no game family");
  return build_from_family(config.family, config.num_players, config.discount, config.initial);
}

namespace detail {

inline std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

inline std::string csv_cell(const std::optional<double>& v) {
  return v ? fmt_double(*v) : std::string();
}

inline std::string csv_cell(const std::optional<int>& v) {
  return v ? std::to_string(*v) : std::string();
}

inline constexpr const char* kTraceHeader =
    "iteration,max_regret,running_nash_regret,potential,selected_player,selected_state,delta";
inline constexpr const char* kMetricsHeader =
    "iteration,l1_accuracy,max_regret,running_nash_regret,potential";
inline constexpr const char* kAggregateHeader = "iteration,n,l1_mean,l1_std";

inline void write_trace_row(std::ofstream& out, const TraceRow& row) {
  out << row.iteration << ',' << csv_cell(row.max_regret) << ','
      << csv_cell(row.running_nash_regret) << ',' << csv_cell(row.potential) << ','
      << csv_cell(row.selected_player) << ',' << csv_cell(row.selected_state) << ','
      << csv_cell(row.delta) << '\n';
  out.flush();  // partial runs stay recoverable
}

inline double l1_accuracy(const JointPolicy& policy, const JointPolicy& final_policy) {
  double total = 0.0;
  for (std::size_t i = 0; i < policy.rows.size(); ++i)
    total += (policy.rows[i] - final_policy.rows[i]).cwiseAbs().sum();
  return total / static_cast<double>(policy.rows.size());
}

inline std::vector<std::uint64_t> resolved_seeds(const ExperimentConfig& config) {
  if (!config.seeds.empty()) {
    if (static_cast<int>(config.seeds.size()) != config.repetitions)
      throw std::invalid_argument("run_experiment: one seed per repetition required");
    return config.seeds;
  }
  std::vector<std::uint64_t> seeds(config.repetitions);
  std::iota(seeds.begin(), seeds.end(), std::uint64_t{1});
  return seeds;
}

}  // namespace detail

inline Json experiment_manifest(const ExperimentConfig& config,
                                const std::vector<std::uint64_t>& seeds) {
  Json j;
  j["library_version"] = kVersion;
  j["name"] = config.name;
  j["algorithm"] = config.algorithm;
  if (config.algorithm == "pga") j["eta"] = config.eta;
  if (config.algorithm == "smbr") {
    j["tau0"] = config.tau0;
    j["tau_decay"] = config.tau_decay;
  }
  j["iterations"] = config.iterations;
  j["evaluation"] = config.mode == EvalMode::Exact ? "exact" : "sampled";
  if (config.mode == EvalMode::Sampled) {
    j["horizon"] = config.horizon;
    j["batch"] = config.batch;
  }
  j["regret_stride"] = config.regret_stride;
  j["repetitions"] = config.repetitions;
  j["seeds"] = seeds;
  j["num_players"] = config.num_players;
  j["discount"] = config.discount;
  if (!config.family.is_null()) j["family"] = config.family;
  if (config.initial.size() > 0)
    j["initial_dist"] = std::vector<double>(config.initial.data(),
                                            config.initial.data() + config.initial.size());
  j["trace_columns"] = detail::kTraceHeader;
  j["metrics_columns"] = detail::kMetricsHeader;
  j["aggregate_columns"] = detail::kAggregateHeader;
  return j;
}

struct ExperimentArtifacts {
  std::filesystem::path output_dir;
  std::vector<std::filesystem::path> run_dirs;
  std::vector<RunResult> results;
};

inline ExperimentArtifacts run_experiment(const MarkovGame& game,
                                          const std::optional<PotentialSpec>& potential,
                                          const ExperimentConfig& config) {
  namespace fs = std::filesystem;
  if (config.algorithm != "pga" && config.algorithm != "smbr")
    throw std::invalid_argument("run_experiment: unknown algorithm " + config.algorithm);
  if (config.repetitions < 1)
    throw std::invalid_argument("run_experiment: repetitions must be >= 1");

  const std::vector<std::uint64_t> seeds = detail::resolved_seeds(config);
  const fs::path out_dir(config.output_dir);
  fs::create_directories(out_dir);
  write_json_file((out_dir / "manifest.json").string(), experiment_manifest(config, seeds));

  ExperimentArtifacts artifacts;
  artifacts.output_dir = out_dir;
  std::vector<std::vector<double>> l1_series;

  for (int rep = 0; rep < config.repetitions; ++rep) {
    char rep_name[16];
    std::snprintf(rep_name, sizeof(rep_name), "run_%02d", rep);
    const fs::path run_dir = out_dir / rep_name;
    fs::create_directories(run_dir);

    std::ofstream trace(run_dir / "trace.csv");
    trace << detail::kTraceHeader << '\n';
    std::ofstream regrets(run_dir / "regrets.jsonl");

    RunOptions options;
    options.initial = config.initial;
    options.potential = potential ? &*potential : nullptr;
    options.regret_stride = config.regret_stride;
    options.keep_policies = true;
    options.on_row = [&trace](const TraceRow& row) { detail::write_trace_row(trace, row); };
    options.on_exploitability = [&regrets](int iteration, const ExploitabilityReport& report) {
      for (std::size_t i = 0; i < report.players.size(); ++i)
        regrets << Json{{"iteration", iteration},
                        {"player", i},
                        {"regret", report.players[i].regret}}
                       .dump()
                << '\n';
    };

    RunResult result;
    if (config.algorithm == "pga") {
      PGAConfig pga;
      pga.eta = config.eta;
      pga.iterations = config.iterations;
      pga.mode = config.mode;
      pga.sampled = {config.horizon, config.batch, seeds[rep]};
      result = run_pga(game, pga, options);
    } else {
      SMBRConfig smbr;
      smbr.tau0 = config.tau0;
      smbr.tau_decay = config.tau_decay;
      smbr.iterations = config.iterations;
      smbr.mode = config.mode;
      smbr.sampled = {config.horizon, config.batch, seeds[rep]};
      result = run_smbr(game, smbr, options);
    }

    write_json_file((run_dir / "final_policy.json").string(),
                    policy_to_json(game, result.final_policy));

    std::ofstream metrics(run_dir / "metrics.csv");
    metrics << detail::kMetricsHeader << '\n';
    std::vector<double> l1;
    l1.reserve(result.rows.size());
    for (std::size_t k = 0; k < result.rows.size(); ++k) {
      const TraceRow& row = result.rows[k];
      const double acc = detail::l1_accuracy(result.policies[k], result.final_policy);
      l1.push_back(acc);
      metrics << row.iteration << ',' << detail::fmt_double(acc) << ','
              << detail::csv_cell(row.max_regret) << ','
              << detail::csv_cell(row.running_nash_regret) << ','
              << detail::csv_cell(row.potential) << '\n';
    }
    l1_series.push_back(std::move(l1));
    artifacts.run_dirs.push_back(run_dir);
    artifacts.results.push_back(std::move(result));
  }

  // Aggregate L1-accuracy across repetitions, per iteration index, over the
  // runs that reached it.
  std::size_t max_len = 0;
  for (const auto& s : l1_series) max_len = std::max(max_len, s.size());
  std::ofstream aggregate(out_dir / "aggregate.csv");
  aggregate << detail::kAggregateHeader << '\n';
  for (std::size_t k = 0; k < max_len; ++k) {
    double sum = 0.0;
    int n = 0;
    for (const auto& s : l1_series)
      if (k < s.size()) {
        sum += s[k];
        ++n;
      }
    const double mean = sum / n;
    double var = 0.0;
    for (const auto& s : l1_series)
      if (k < s.size()) var += (s[k] - mean) * (s[k] - mean);
    var /= n;
    aggregate << k << ',' << n << ',' << detail::fmt_double(mean) << ','
              << detail::fmt_double(std::sqrt(var)) << '\n';
  }
  return artifacts;
}

// Monte-Carlo Q estimates with the batch parameters and seed recorded next to
// the numbers.
inline Json sampled_q_report(const MarkovGame& game, const JointPolicy& policy, int episodes,
                             int horizon, std::uint64_t seed) {
  Json tables = Json::array();
  for (int i = 0; i < game.num_players; ++i)
    tables.push_back(detail::flatten(sampled_q(game, policy, i, episodes, horizon, seed)));
  return Json{{"episodes", episodes}, {"horizon", horizon}, {"seed", seed},
              {"q_tables", std::move(tables)}};
}

// Evaluation report for a fixed (game, policy): per-player values, the
// exploitability report, and the potential value when a spec is available.
inline Json evaluate_report(const MarkovGame& game, const std::optional<PotentialSpec>& potential,
                            const JointPolicy& policy, const StateDistribution& mu) {
  const EvaluationResult eval = evaluate(game, policy, mu);
  Json j;
  j["library_version"] = kVersion;
  Json at_initial = Json::array();
  for (const Vec& v : eval.values) at_initial.push_back(mu.dot(v));
  j["values_at_initial"] = std::move(at_initial);
  j["evaluation"] = evaluation_to_json(eval);
  j["exploitability"] = exploitability_to_json(exploitability(game, policy, mu));
  if (potential) j["potential"] = potential_value(game, *potential, policy, mu);
  return j;
}

}  // namespace mapg
