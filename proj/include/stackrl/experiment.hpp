#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "stackrl/game.hpp"
#include "stackrl/pomdp.hpp"
#include "stackrl/trainer.hpp"

namespace stackrl {

/// Instance parameters for the allocation setting.
struct AllocationParams {
  int items = 3;
  int messages = 3;
};

/// One experiment: a setting, an episode schedule, trainer parameters, and
/// the seeds to run. Parsed from a strict JSON document (schema_version 1,
/// unknown keys rejected) so that configs stay reproducible over time.
struct ExperimentConfig {
  int schema_version = 1;
  std::string name;
  std::string setting;          // maintain, maintain_randomized, escape,
                                // matrix_design, allocation, mu_spm
  AllocationParams allocation;  // allocation setting only
  EpisodeSchedule schedule;
  double mw_epsilon = 0.1;
  TrainConfig trainer;          // per-seed runs override trainer.seed
  std::vector<std::uint64_t> seeds;
  int workers = 1;
  std::string output_dir;       // bundle directory, relative to the output
                                // root unless absolute; defaults to name

  void validate() const;
  std::string canonical_json() const;
  static ExperimentConfig parse_json(const std::string& text);
  static ExperimentConfig load_file(const std::string& path);
};

/// Builds the game an experiment config refers to.
BayesianGame make_setting(const std::string& setting,
                          const AllocationParams& allocation);

/// Output of the setting's matching ground-truth solver, on the same scale
/// as evaluation rewards.
struct OracleSummary {
  std::string method;
  double value = 0.0;      // best commitment value
  int leader_index = -1;   // optimal discrete action where one exists
  double aux_bound = 0.0;  // secondary reference bound
  bool has_aux = false;
};

OracleSummary matching_oracle(const ExperimentConfig& config);

/// One seed's training outcome inside a result bundle.
struct SeedOutcome {
  std::uint64_t seed = 0;
  bool completed = false;
  std::string error;
  double final_eval = 0.0;
  double best_eval = 0.0;
  double oracle_gap = 0.0;  // oracle value minus best evaluation
  std::vector<EvalPoint> curve;
  std::vector<TrainRewardPoint> train_rewards;
  std::vector<double> policy_params;  // final policy parameters
};

struct ExperimentResult {
  ExperimentConfig config;
  OracleSummary oracle;
  std::vector<SeedOutcome> seeds;
  std::string bundle_dir;

  bool all_completed() const;
};

/// Resolves the directory experiment bundles live under: the explicit
/// override when given, else the STACKRL_OUTPUT_ROOT environment variable,
/// else the current directory.
std::string resolve_output_root(const std::string& override_path);

/// Trains every seed (up to config.workers concurrently), writes the bundle
/// (config.json, per-seed CSV logs and policies, summary.json, failures.csv
/// on errors), and returns the outcomes. A failing seed records its error and
/// leaves the remaining seeds running. verbose additionally writes per-seed
/// training-time reward logs. Progress lines go to log.
ExperimentResult run_experiment(const ExperimentConfig& config,
                                const std::string& output_root, bool verbose,
                                std::ostream& log);

/// Reads a bundle directory written by run_experiment.
ExperimentResult load_bundle(const std::string& bundle_dir);

/// Writes <bundle>/curves.svg: mean evaluation reward over completed seeds
/// with a standard-error band (omitted for a single seed) and the oracle
/// value as a reference line. Returns the file path. Throws
/// std::invalid_argument when no seed completed.
std::string emit_plots(const ExperimentResult& bundle);

/// One machine-readable comparison row produced by verify_against_oracle.
struct Verdict {
  std::string check;
  bool pass = false;
  double value = 0.0;
  double threshold = 0.0;
  std::string detail;
};

/// Compares the bundle against its oracle under the setting's published
/// tolerances (optimum reached per seed, required seed fractions, bound
/// comparisons) and rechecks that stored policies reproduce their logged
/// final evaluations. Writes <bundle>/verdicts.json and returns the rows.
std::vector<Verdict> verify_against_oracle(const ExperimentResult& bundle);

bool all_pass(const std::vector<Verdict>& verdicts);

}  // namespace stackrl
