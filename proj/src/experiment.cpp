#include "stackrl/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <cctype>
#include <filesystem>
#include <fstream>
#include <functional>
#include <mutex>
#include <ostream>
#include <set>
#include <sstream>
#include <stdexcept>
#include <thread>

#include <json.hpp>

#include "stackrl/oracle.hpp"
#include "stackrl/rng.hpp"

namespace stackrl {

namespace {

using nlohmann::json;

constexpr double kEvalTolerance = 1e-9;

const std::set<std::string>& known_settings() {
  static const std::set<std::string> settings{
      "maintain", "maintain_randomized", "escape",
      "matrix_design", "allocation", "mu_spm"};
  return settings;
}

/// Shortest decimal text that round-trips the value. Used for every double
/// that lands in a log file, so re-runs stay byte-identical and independent
/// of stream locale or precision state.
std::string fmt_double(double v) {
  char buf[32];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, end);
}

/// Fixed two-decimal text for SVG coordinates.
std::string fmt_coord(double v) {
  char buf[32];
  auto [end, ec] =
      std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::fixed, 2);
  return std::string(buf, end);
}

[[noreturn]] void config_error(const std::string& message) {
  throw std::invalid_argument("experiment config: " + message);
}

void expect_object(const json& value, const std::string& where) {
  if (!value.is_object()) config_error(where + " must be an object");
}

void reject_unknown_keys(const json& obj, const std::string& where,
                         const std::set<std::string>& allowed) {
  for (const auto& item : obj.items()) {
    if (!allowed.count(item.key()))
      config_error("unknown key '" + item.key() + "' in " + where);
  }
}

const json& require_key(const json& obj, const std::string& where,
                        const std::string& key) {
  auto it = obj.find(key);
  if (it == obj.end()) config_error(where + " is missing '" + key + "'");
  return *it;
}

long get_integer(const json& value, const std::string& where) {
  if (!value.is_number_integer())
    config_error(where + " must be an integer");
  return value.get<long>();
}

double get_number(const json& value, const std::string& where) {
  if (!value.is_number()) config_error(where + " must be a number");
  return value.get<double>();
}

std::string get_string(const json& value, const std::string& where) {
  if (!value.is_string()) config_error(where + " must be a string");
  return value.get<std::string>();
}

CriticMode parse_mode(const std::string& text) {
  if (text == "centralized") return CriticMode::centralized_critic;
  if (text == "plain") return CriticMode::plain;
  config_error("trainer.mode must be 'centralized' or 'plain'");
}

PolicyArch parse_arch(const std::string& text) {
  if (text == "tabular") return PolicyArch::tabular;
  if (text == "mlp") return PolicyArch::mlp;
  config_error("trainer.arch must be 'tabular' or 'mlp'");
}

const char* mode_name(CriticMode mode) {
  return mode == CriticMode::centralized_critic ? "centralized" : "plain";
}

const char* arch_name(PolicyArch arch) {
  return arch == PolicyArch::tabular ? "tabular" : "mlp";
}

TrainConfig parse_trainer(const json& obj) {
  expect_object(obj, "trainer");
  reject_unknown_keys(obj, "trainer",
                      {"mode", "arch", "learning_rate", "critic_learning_rate",
                       "clip_ratio", "batch_episodes", "total_steps",
                       "eval_interval", "ppo_epochs", "entropy_coef",
                       "normalize_advantages", "hidden_width",
                       "eval_reward_subepisodes"});
  TrainConfig trainer;
  if (obj.contains("mode"))
    trainer.mode = parse_mode(get_string(obj["mode"], "trainer.mode"));
  if (obj.contains("arch"))
    trainer.arch = parse_arch(get_string(obj["arch"], "trainer.arch"));
  if (obj.contains("learning_rate"))
    trainer.learning_rate =
        get_number(obj["learning_rate"], "trainer.learning_rate");
  if (obj.contains("critic_learning_rate"))
    trainer.critic_learning_rate = get_number(obj["critic_learning_rate"],
                                              "trainer.critic_learning_rate");
  if (obj.contains("clip_ratio"))
    trainer.clip_ratio = get_number(obj["clip_ratio"], "trainer.clip_ratio");
  if (obj.contains("batch_episodes"))
    trainer.batch_episodes = static_cast<int>(
        get_integer(obj["batch_episodes"], "trainer.batch_episodes"));
  if (obj.contains("total_steps"))
    trainer.total_steps = get_integer(obj["total_steps"], "trainer.total_steps");
  if (obj.contains("eval_interval"))
    trainer.eval_interval =
        get_integer(obj["eval_interval"], "trainer.eval_interval");
  if (obj.contains("ppo_epochs"))
    trainer.ppo_epochs =
        static_cast<int>(get_integer(obj["ppo_epochs"], "trainer.ppo_epochs"));
  if (obj.contains("entropy_coef"))
    trainer.entropy_coef =
        get_number(obj["entropy_coef"], "trainer.entropy_coef");
  if (obj.contains("normalize_advantages")) {
    if (!obj["normalize_advantages"].is_boolean())
      config_error("trainer.normalize_advantages must be a boolean");
    trainer.normalize_advantages = obj["normalize_advantages"].get<bool>();
  }
  if (obj.contains("hidden_width"))
    trainer.hidden_width = static_cast<int>(
        get_integer(obj["hidden_width"], "trainer.hidden_width"));
  if (obj.contains("eval_reward_subepisodes"))
    trainer.eval_reward_subepisodes = static_cast<int>(get_integer(
        obj["eval_reward_subepisodes"], "trainer.eval_reward_subepisodes"));
  return trainer;
}

json trainer_json(const TrainConfig& trainer) {
  json obj;
  obj["mode"] = mode_name(trainer.mode);
  obj["arch"] = arch_name(trainer.arch);
  obj["learning_rate"] = trainer.learning_rate;
  obj["critic_learning_rate"] = trainer.critic_learning_rate;
  obj["clip_ratio"] = trainer.clip_ratio;
  obj["batch_episodes"] = trainer.batch_episodes;
  obj["total_steps"] = trainer.total_steps;
  obj["eval_interval"] = trainer.eval_interval;
  obj["ppo_epochs"] = trainer.ppo_epochs;
  obj["entropy_coef"] = trainer.entropy_coef;
  obj["normalize_advantages"] = trainer.normalize_advantages;
  obj["hidden_width"] = trainer.hidden_width;
  obj["eval_reward_subepisodes"] = trainer.eval_reward_subepisodes;
  return obj;
}

std::filesystem::path bundle_path(const ExperimentConfig& config,
                                  const std::string& output_root) {
  std::filesystem::path dir =
      config.output_dir.empty() ? config.name : config.output_dir;
  if (dir.is_absolute()) return dir;
  return std::filesystem::path(output_root) / dir;
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

void write_text_file(const std::filesystem::path& path,
                     const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
}

std::string seed_log_name(std::uint64_t seed) {
  return "seed_" + std::to_string(seed) + ".csv";
}

std::string seed_train_log_name(std::uint64_t seed) {
  return "seed_" + std::to_string(seed) + "_train.csv";
}

std::string seed_policy_name(std::uint64_t seed) {
  return "seed_" + std::to_string(seed) + "_policy.json";
}

std::string curve_csv(const ExperimentConfig& config,
                      const SeedOutcome& outcome) {
  std::ostringstream out;
  out << "step,eval_reward,value_loss,mode,seed\n";
  for (const EvalPoint& point : outcome.curve) {
    out << point.step << "," << fmt_double(point.eval_reward) << ","
        << fmt_double(point.value_loss) << ","
        << mode_name(config.trainer.mode) << "," << outcome.seed << "\n";
  }
  return out.str();
}

std::string train_rewards_csv(const SeedOutcome& outcome) {
  std::ostringstream out;
  out << "step,train_reward\n";
  for (const TrainRewardPoint& point : outcome.train_rewards)
    out << point.step << "," << fmt_double(point.reward) << "\n";
  return out.str();
}

json oracle_json(const OracleSummary& oracle) {
  json obj;
  obj["method"] = oracle.method;
  obj["value"] = oracle.value;
  obj["leader_index"] = oracle.leader_index;
  obj["aux_bound"] = oracle.aux_bound;
  obj["has_aux"] = oracle.has_aux;
  return obj;
}

OracleSummary oracle_from_json(const json& obj) {
  OracleSummary oracle;
  oracle.method = obj.at("method").get<std::string>();
  oracle.value = obj.at("value").get<double>();
  oracle.leader_index = obj.at("leader_index").get<int>();
  oracle.aux_bound = obj.at("aux_bound").get<double>();
  oracle.has_aux = obj.at("has_aux").get<bool>();
  return oracle;
}

std::string summary_json_text(const ExperimentResult& result) {
  json obj;
  obj["schema_version"] = result.config.schema_version;
  obj["name"] = result.config.name;
  obj["setting"] = result.config.setting;
  obj["oracle"] = oracle_json(result.oracle);
  json seeds = json::array();
  for (const SeedOutcome& outcome : result.seeds) {
    json row;
    row["seed"] = outcome.seed;
    row["completed"] = outcome.completed;
    row["error"] = outcome.error;
    row["final_eval"] = outcome.final_eval;
    row["best_eval"] = outcome.best_eval;
    row["oracle_gap"] = outcome.oracle_gap;
    seeds.push_back(std::move(row));
  }
  obj["seeds"] = std::move(seeds);
  return obj.dump(2) + "\n";
}

std::string policy_json_text(const ExperimentConfig& config,
                             const SeedOutcome& outcome) {
  json obj;
  obj["arch"] = arch_name(config.trainer.arch);
  obj["hidden_width"] = config.trainer.hidden_width;
  obj["params"] = outcome.policy_params;
  return obj.dump(2) + "\n";
}

EpisodeSchedule eval_schedule_for(const ExperimentConfig& config) {
  EpisodeSchedule schedule = config.schedule;
  if (config.trainer.eval_reward_subepisodes > 0)
    schedule.reward_subepisodes = config.trainer.eval_reward_subepisodes;
  return schedule;
}

/// Rebuilds the stored final policy of one seed.
LeaderPolicy policy_from_outcome(const BayesianGame& game,
                                 const ExperimentConfig& config,
                                 const SeedOutcome& outcome) {
  LeaderPolicy policy(game, config.trainer.arch, config.trainer.hidden_width,
                      0);
  if (policy.params().size() != outcome.policy_params.size())
    throw std::runtime_error("stored policy for seed " +
                             std::to_string(outcome.seed) +
                             " has the wrong parameter count");
  policy.params() = outcome.policy_params;
  return policy;
}

/// Greedy action index in the leader's first dimension at the setting's
/// canonical scoring observation.
int greedy_leader_index(const BayesianGame& game, LeaderPolicy& policy) {
  PomdpState state = make_subepisode_state(
      game, true, game.type_distribution.front().first,
      ActionProfile(static_cast<std::size_t>(game.n_followers), 0), -1, -1);
  Observation obs = observe(game, state);
  auto masks = action_masks(game, state);
  Rng rng(0);
  policy.begin_episode();
  return policy.act(obs, masks, ActMode::greedy, rng).action.at(0);
}

int count_oscillation_drops(const std::vector<EvalPoint>& curve) {
  std::size_t reached = curve.size();
  for (std::size_t i = 0; i < curve.size(); ++i) {
    if (curve[i].eval_reward >= 1.0 - kEvalTolerance) {
      reached = i;
      break;
    }
  }
  if (reached == curve.size()) return 0;
  int drops = 0;
  bool above = true;
  for (std::size_t i = reached + 1; i < curve.size(); ++i) {
    if (above && curve[i].eval_reward < 0.9) {
      drops += 1;
      above = false;
    } else if (curve[i].eval_reward >= 0.9) {
      above = true;
    }
  }
  return drops;
}

double fraction_of_completed(const ExperimentResult& bundle,
                             const std::function<bool(const SeedOutcome&)>& ok) {
  int completed = 0;
  int passing = 0;
  for (const SeedOutcome& outcome : bundle.seeds) {
    if (!outcome.completed) continue;
    completed += 1;
    if (ok(outcome)) passing += 1;
  }
  return completed == 0 ? 0.0
                        : static_cast<double>(passing) / completed;
}

}  // namespace

void ExperimentConfig::validate() const {
  if (schema_version != 1) config_error("schema_version must be 1");
  if (name.empty()) config_error("name must not be empty");
  for (char c : name) {
    if (!std::isalnum(static_cast<unsigned char>(c)) && c != '_' && c != '-')
      config_error("name may only contain letters, digits, '_' and '-'");
  }
  if (!known_settings().count(setting))
    config_error("unknown setting '" + setting + "'");
  if (setting == "allocation" &&
      (allocation.items < 1 || allocation.messages < 1))
    config_error("allocation items and messages must be positive");
  schedule.validate();
  if (!(mw_epsilon > 0.0) || !std::isfinite(mw_epsilon))
    config_error("mw_epsilon must be positive and finite");
  trainer.validate();
  if (seeds.empty()) config_error("seeds must not be empty");
  if (std::set<std::uint64_t>(seeds.begin(), seeds.end()).size() !=
      seeds.size())
    config_error("seeds must be distinct");
  if (workers < 1) config_error("workers must be at least 1");
}

std::string ExperimentConfig::canonical_json() const {
  json obj;
  obj["schema_version"] = schema_version;
  obj["name"] = name;
  obj["setting"] = setting;
  if (setting == "allocation") {
    obj["allocation"] = {{"items", allocation.items},
                         {"messages", allocation.messages}};
  }
  obj["schedule"] = {{"equilibrium_rounds", schedule.equilibrium_rounds},
                     {"reward_subepisodes", schedule.reward_subepisodes}};
  obj["mw_epsilon"] = mw_epsilon;
  obj["trainer"] = trainer_json(trainer);
  obj["seeds"] = seeds;
  obj["workers"] = workers;
  obj["output_dir"] = output_dir.empty() ? name : output_dir;
  return obj.dump(2) + "\n";
}

ExperimentConfig ExperimentConfig::parse_json(const std::string& text) {
  json obj;
  try {
    obj = json::parse(text);
  } catch (const json::parse_error& e) {
    config_error(std::string("not valid JSON: ") + e.what());
  }
  expect_object(obj, "the document");
  reject_unknown_keys(obj, "the document",
                      {"schema_version", "name", "setting", "allocation",
                       "schedule", "mw_epsilon", "trainer", "seeds", "workers",
                       "output_dir"});

  ExperimentConfig config;
  config.schema_version = static_cast<int>(get_integer(
      require_key(obj, "the document", "schema_version"), "schema_version"));
  config.name = get_string(require_key(obj, "the document", "name"), "name");
  config.setting =
      get_string(require_key(obj, "the document", "setting"), "setting");
  if (!known_settings().count(config.setting))
    config_error("unknown setting '" + config.setting + "'");

  if (obj.contains("allocation")) {
    if (config.setting != "allocation")
      config_error("'allocation' is only valid for the allocation setting");
    const json& alloc = obj["allocation"];
    expect_object(alloc, "allocation");
    reject_unknown_keys(alloc, "allocation", {"items", "messages"});
    config.allocation.items = static_cast<int>(get_integer(
        require_key(alloc, "allocation", "items"), "allocation.items"));
    config.allocation.messages = static_cast<int>(get_integer(
        require_key(alloc, "allocation", "messages"), "allocation.messages"));
  } else if (config.setting == "allocation") {
    config_error("the allocation setting requires an 'allocation' object");
  }

  const json& schedule = require_key(obj, "the document", "schedule");
  expect_object(schedule, "schedule");
  reject_unknown_keys(schedule, "schedule",
                      {"equilibrium_rounds", "reward_subepisodes"});
  config.schedule.equilibrium_rounds = static_cast<int>(
      get_integer(require_key(schedule, "schedule", "equilibrium_rounds"),
                  "schedule.equilibrium_rounds"));
  config.schedule.reward_subepisodes = static_cast<int>(
      get_integer(require_key(schedule, "schedule", "reward_subepisodes"),
                  "schedule.reward_subepisodes"));

  config.mw_epsilon =
      get_number(require_key(obj, "the document", "mw_epsilon"), "mw_epsilon");
  if (obj.contains("trainer")) config.trainer = parse_trainer(obj["trainer"]);

  const json& seeds = require_key(obj, "the document", "seeds");
  if (!seeds.is_array() || seeds.empty())
    config_error("seeds must be a non-empty array");
  for (const json& seed : seeds) {
    if (!seed.is_number_integer() || seed.get<long long>() < 0)
      config_error("seeds must be non-negative integers");
    config.seeds.push_back(seed.get<std::uint64_t>());
  }

  if (obj.contains("workers"))
    config.workers =
        static_cast<int>(get_integer(obj["workers"], "workers"));
  if (obj.contains("output_dir"))
    config.output_dir = get_string(obj["output_dir"], "output_dir");

  config.validate();
  return config;
}

ExperimentConfig ExperimentConfig::load_file(const std::string& path) {
  return parse_json(read_text_file(path));
}

BayesianGame make_setting(const std::string& setting,
                          const AllocationParams& allocation) {
  if (setting == "maintain") return make_maintain(false);
  if (setting == "maintain_randomized") return make_maintain(true);
  if (setting == "escape") return make_escape(false);
  if (setting == "matrix_design") return make_matrix_design();
  if (setting == "allocation")
    return make_simple_allocation(allocation.items, allocation.messages);
  if (setting == "mu_spm") return make_mu_spm(make_agrawal_setting());
  throw std::invalid_argument("make_setting: unknown setting '" + setting +
                              "'");
}

OracleSummary matching_oracle(const ExperimentConfig& config) {
  BayesianGame game = make_setting(config.setting, config.allocation);
  OracleSummary oracle;
  if (config.setting == "maintain" || config.setting == "escape" ||
      config.setting == "matrix_design") {
    StackelbergSolution solution = solve_deterministic_stackelberg(game);
    oracle.method = "deterministic commitment enumeration";
    oracle.value = normalized_reward(game, solution.leader_value);
    oracle.leader_index = solution.leader_strategy.index;
  } else if (config.setting == "maintain_randomized") {
    StackelbergSolution solution = solve_randomized_stackelberg(game, 0.01);
    oracle.method = "leader mixture grid search, resolution 0.01";
    oracle.value = normalized_reward(game, solution.leader_value);
    StackelbergSolution deterministic =
        solve_deterministic_stackelberg(make_maintain(false));
    oracle.aux_bound = normalized_reward(game, deterministic.leader_value);
    oracle.has_aux = true;
  } else if (config.setting == "allocation") {
    AllocationSolution solution = solve_allocation_commitment(game);
    oracle.method = "decoder enumeration, best-responding sender";
    oracle.value = normalized_reward(game, solution.value);
  } else {
    SpmSolution no_messages = solve_spm_exhaustive(game.spm, false);
    oracle.method = "exhaustive posted-price search";
    oracle.value = 0.0;  // first best: zero welfare loss
    oracle.aux_bound = reward_from_welfare(no_messages.expected_welfare,
                                           no_messages.first_best_welfare);
    oracle.has_aux = true;
  }
  return oracle;
}

bool ExperimentResult::all_completed() const {
  for (const SeedOutcome& outcome : seeds)
    if (!outcome.completed) return false;
  return !seeds.empty();
}

std::string resolve_output_root(const std::string& override_path) {
  if (!override_path.empty()) return override_path;
  if (const char* env = std::getenv("STACKRL_OUTPUT_ROOT"))
    if (*env) return env;
  return ".";
}

ExperimentResult run_experiment(const ExperimentConfig& config,
                                const std::string& output_root, bool verbose,
                                std::ostream& log) {
  config.validate();
  const BayesianGame game = make_setting(config.setting, config.allocation);

  ExperimentResult result;
  result.config = config;
  result.oracle = matching_oracle(config);
  result.seeds.resize(config.seeds.size());

  std::mutex log_mutex;
  std::atomic<std::size_t> next{0};
  auto worker = [&]() {
    while (true) {
      std::size_t i = next.fetch_add(1);
      if (i >= config.seeds.size()) return;
      SeedOutcome& outcome = result.seeds[i];
      outcome.seed = config.seeds[i];
      auto started = std::chrono::steady_clock::now();
      try {
        TrainConfig trainer = config.trainer;
        trainer.seed = outcome.seed;
        TrainResult trained =
            train(game, config.schedule, config.mw_epsilon, trainer);
        outcome.completed = true;
        outcome.final_eval = trained.final_eval;
        outcome.best_eval = trained.best_eval;
        outcome.oracle_gap = result.oracle.value - trained.best_eval;
        outcome.curve = std::move(trained.curve);
        outcome.train_rewards = std::move(trained.train_rewards);
        outcome.policy_params = trained.policy.params();
      } catch (const std::exception& e) {
        outcome.error = e.what();
      }
      auto seconds = std::chrono::duration_cast<std::chrono::seconds>(
                         std::chrono::steady_clock::now() - started)
                         .count();
      std::lock_guard<std::mutex> guard(log_mutex);
      if (outcome.completed) {
        log << "[" << config.name << "] seed " << outcome.seed << ": final "
            << fmt_double(outcome.final_eval) << ", best "
            << fmt_double(outcome.best_eval) << ", gap "
            << fmt_double(outcome.oracle_gap) << " (" << seconds << "s)\n";
      } else {
        log << "[" << config.name << "] seed " << outcome.seed
            << " FAILED: " << outcome.error << "\n";
      }
    }
  };

  int n_workers = std::min<int>(config.workers,
                                static_cast<int>(config.seeds.size()));
  std::vector<std::thread> threads;
  threads.reserve(static_cast<std::size_t>(n_workers));
  for (int w = 0; w < n_workers; ++w) threads.emplace_back(worker);
  for (std::thread& t : threads) t.join();

  std::filesystem::path dir = bundle_path(config, output_root);
  std::filesystem::create_directories(dir);
  result.bundle_dir = dir.string();

  write_text_file(dir / "config.json", config.canonical_json());
  std::ostringstream failures;
  failures << "seed,error\n";
  bool any_failure = false;
  for (const SeedOutcome& outcome : result.seeds) {
    if (!outcome.completed) {
      any_failure = true;
      std::string sanitized = outcome.error;
      std::replace(sanitized.begin(), sanitized.end(), ',', ';');
      std::replace(sanitized.begin(), sanitized.end(), '\n', ' ');
      failures << outcome.seed << "," << sanitized << "\n";
      continue;
    }
    write_text_file(dir / seed_log_name(outcome.seed),
                    curve_csv(config, outcome));
    write_text_file(dir / seed_policy_name(outcome.seed),
                    policy_json_text(config, outcome));
    if (verbose)
      write_text_file(dir / seed_train_log_name(outcome.seed),
                      train_rewards_csv(outcome));
  }
  if (any_failure) write_text_file(dir / "failures.csv", failures.str());
  write_text_file(dir / "summary.json", summary_json_text(result));
  return result;
}

ExperimentResult load_bundle(const std::string& bundle_dir) {
  std::filesystem::path dir(bundle_dir);
  ExperimentResult result;
  result.bundle_dir = dir.string();
  result.config =
      ExperimentConfig::parse_json(read_text_file(dir / "config.json"));

  json summary = json::parse(read_text_file(dir / "summary.json"));
  result.oracle = oracle_from_json(summary.at("oracle"));

  for (const json& row : summary.at("seeds")) {
    SeedOutcome outcome;
    outcome.seed = row.at("seed").get<std::uint64_t>();
    outcome.completed = row.at("completed").get<bool>();
    outcome.error = row.at("error").get<std::string>();
    outcome.final_eval = row.at("final_eval").get<double>();
    outcome.best_eval = row.at("best_eval").get<double>();
    outcome.oracle_gap = row.at("oracle_gap").get<double>();
    if (outcome.completed) {
      std::istringstream csv(
          read_text_file(dir / seed_log_name(outcome.seed)));
      std::string line;
      std::getline(csv, line);  // header
      while (std::getline(csv, line)) {
        if (line.empty()) continue;
        EvalPoint point;
        std::size_t pos = 0;
        auto next_field = [&]() {
          std::size_t comma = line.find(',', pos);
          std::string field = line.substr(
              pos, comma == std::string::npos ? comma : comma - pos);
          pos = comma == std::string::npos ? line.size() : comma + 1;
          return field;
        };
        point.step = std::stol(next_field());
        point.eval_reward = std::stod(next_field());
        point.value_loss = std::stod(next_field());
        outcome.curve.push_back(point);
      }
      json policy =
          json::parse(read_text_file(dir / seed_policy_name(outcome.seed)));
      outcome.policy_params =
          policy.at("params").get<std::vector<double>>();
    }
    result.seeds.push_back(std::move(outcome));
  }
  return result;
}

std::string emit_plots(const ExperimentResult& bundle) {
  std::vector<const SeedOutcome*> done;
  for (const SeedOutcome& outcome : bundle.seeds)
    if (outcome.completed && !outcome.curve.empty()) done.push_back(&outcome);
  if (done.empty())
    throw std::invalid_argument("emit_plots: no completed seeds in bundle");

  std::size_t rows = done.front()->curve.size();
  for (const SeedOutcome* outcome : done)
    rows = std::min(rows, outcome->curve.size());

  std::vector<double> mean(rows, 0.0), stderr_band(rows, 0.0);
  for (std::size_t r = 0; r < rows; ++r) {
    double sum = 0.0, sumsq = 0.0;
    for (const SeedOutcome* outcome : done) {
      double v = outcome->curve[r].eval_reward;
      sum += v;
      sumsq += v * v;
    }
    double n = static_cast<double>(done.size());
    mean[r] = sum / n;
    if (done.size() > 1) {
      double var = std::max(0.0, (sumsq / n - mean[r] * mean[r]) * n / (n - 1));
      stderr_band[r] = std::sqrt(var / n);
    }
  }

  double lo = 0.0, hi = 1.0;
  for (std::size_t r = 0; r < rows; ++r) {
    lo = std::min(lo, mean[r] - stderr_band[r]);
    hi = std::max(hi, mean[r] + stderr_band[r]);
  }
  lo = std::min(lo, bundle.oracle.value);
  hi = std::max(hi, bundle.oracle.value);
  if (bundle.oracle.has_aux) lo = std::min(lo, bundle.oracle.aux_bound);
  lo = std::floor(lo * 10.0) / 10.0;
  hi = std::ceil(hi * 10.0) / 10.0;

  const double width = 860, height = 520;
  const double ml = 70, mr = 24, mt = 44, mb = 56;
  const double plot_w = width - ml - mr, plot_h = height - mt - mb;
  const long x_max = std::max<long>(1, done.front()->curve[rows - 1].step);
  auto x_of = [&](double step) { return ml + plot_w * step / x_max; };
  auto y_of = [&](double v) {
    return mt + plot_h * (1.0 - (v - lo) / (hi - lo));
  };

  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width
      << "\" height=\"" << height << "\" viewBox=\"0 0 " << width << " "
      << height << "\">\n";
  svg << "<rect width=\"" << width << "\" height=\"" << height
      << "\" fill=\"white\"/>\n";
  svg << "<text x=\"" << fmt_coord(ml) << "\" y=\"26\" font-family=\"sans-serif\" "
         "font-size=\"17\" fill=\"#222\">"
      << bundle.config.name << "</text>\n";

  for (int tick = 0; tick <= 4; ++tick) {
    double step = x_max * tick / 4.0;
    double x = x_of(step);
    svg << "<line x1=\"" << fmt_coord(x) << "\" y1=\"" << fmt_coord(mt)
        << "\" x2=\"" << fmt_coord(x) << "\" y2=\"" << fmt_coord(mt + plot_h)
        << "\" stroke=\"#dddddd\"/>\n";
    long step_label = static_cast<long>(step);
    std::string label =
        step_label >= 1000 && step_label % 1000 == 0
            ? std::to_string(step_label / 1000) + "k"
            : std::to_string(step_label);
    svg << "<text x=\"" << fmt_coord(x) << "\" y=\""
        << fmt_coord(mt + plot_h + 20)
        << "\" font-family=\"sans-serif\" font-size=\"12\" fill=\"#444\" "
           "text-anchor=\"middle\">"
        << label << "</text>\n";
  }
  for (int tick = 0; tick <= 5; ++tick) {
    double v = lo + (hi - lo) * tick / 5.0;
    double y = y_of(v);
    svg << "<line x1=\"" << fmt_coord(ml) << "\" y1=\"" << fmt_coord(y)
        << "\" x2=\"" << fmt_coord(ml + plot_w) << "\" y2=\"" << fmt_coord(y)
        << "\" stroke=\"#dddddd\"/>\n";
    svg << "<text x=\"" << fmt_coord(ml - 8) << "\" y=\"" << fmt_coord(y + 4)
        << "\" font-family=\"sans-serif\" font-size=\"12\" fill=\"#444\" "
           "text-anchor=\"end\">"
        << fmt_double(std::round(v * 100.0) / 100.0) << "</text>\n";
  }

  double oracle_y = y_of(bundle.oracle.value);
  svg << "<line x1=\"" << fmt_coord(ml) << "\" y1=\"" << fmt_coord(oracle_y)
      << "\" x2=\"" << fmt_coord(ml + plot_w) << "\" y2=\""
      << fmt_coord(oracle_y)
      << "\" stroke=\"#d62728\" stroke-dasharray=\"6 4\"/>\n";
  svg << "<text x=\"" << fmt_coord(ml + plot_w) << "\" y=\""
      << fmt_coord(oracle_y - 6)
      << "\" font-family=\"sans-serif\" font-size=\"12\" fill=\"#d62728\" "
         "text-anchor=\"end\">oracle "
      << fmt_double(std::round(bundle.oracle.value * 1000.0) / 1000.0)
      << "</text>\n";
  if (bundle.oracle.has_aux) {
    double aux_y = y_of(bundle.oracle.aux_bound);
    svg << "<line x1=\"" << fmt_coord(ml) << "\" y1=\"" << fmt_coord(aux_y)
        << "\" x2=\"" << fmt_coord(ml + plot_w) << "\" y2=\""
        << fmt_coord(aux_y)
        << "\" stroke=\"#7f7f7f\" stroke-dasharray=\"2 4\"/>\n";
  }

  if (done.size() > 1) {
    svg << "<polygon fill=\"#1f77b4\" fill-opacity=\"0.18\" stroke=\"none\" "
           "points=\"";
    for (std::size_t r = 0; r < rows; ++r)
      svg << fmt_coord(x_of(static_cast<double>(done.front()->curve[r].step)))
          << "," << fmt_coord(y_of(mean[r] + stderr_band[r])) << " ";
    for (std::size_t r = rows; r-- > 0;)
      svg << fmt_coord(x_of(static_cast<double>(done.front()->curve[r].step)))
          << "," << fmt_coord(y_of(mean[r] - stderr_band[r])) << " ";
    svg << "\"/>\n";
  }

  svg << "<polyline fill=\"none\" stroke=\"#1f77b4\" stroke-width=\"2\" "
         "points=\"";
  for (std::size_t r = 0; r < rows; ++r)
    svg << fmt_coord(x_of(static_cast<double>(done.front()->curve[r].step)))
        << "," << fmt_coord(y_of(mean[r])) << " ";
  svg << "\"/>\n";

  svg << "<text x=\"" << fmt_coord(ml + plot_w / 2) << "\" y=\""
      << fmt_coord(height - 12)
      << "\" font-family=\"sans-serif\" font-size=\"13\" fill=\"#222\" "
         "text-anchor=\"middle\">environment steps</text>\n";
  svg << "<text x=\"18\" y=\"" << fmt_coord(mt + plot_h / 2)
      << "\" font-family=\"sans-serif\" font-size=\"13\" fill=\"#222\" "
         "text-anchor=\"middle\" transform=\"rotate(-90 18 "
      << fmt_coord(mt + plot_h / 2) << ")\">evaluation reward</text>\n";
  svg << "</svg>\n";

  std::filesystem::path path =
      std::filesystem::path(bundle.bundle_dir) / "curves.svg";
  write_text_file(path, svg.str());
  return path.string();
}

std::vector<Verdict> verify_against_oracle(const ExperimentResult& bundle) {
  const ExperimentConfig& config = bundle.config;
  const BayesianGame game = make_setting(config.setting, config.allocation);
  const EpisodeSchedule eval_schedule = eval_schedule_for(config);
  std::vector<Verdict> verdicts;

  double completed_fraction =
      bundle.seeds.empty()
          ? 0.0
          : static_cast<double>(std::count_if(
                bundle.seeds.begin(), bundle.seeds.end(),
                [](const SeedOutcome& s) { return s.completed; })) /
                static_cast<double>(bundle.seeds.size());
  verdicts.push_back(Verdict{"seeds_completed",
                             completed_fraction >= 1.0 - kEvalTolerance,
                             completed_fraction, 1.0,
                             "fraction of requested seeds that finished"});

  // Stored policies must reproduce their logged final evaluations exactly.
  bool reproduced = true;
  std::string repro_detail = "recomputed greedy evaluations match the logs";
  for (const SeedOutcome& outcome : bundle.seeds) {
    if (!outcome.completed) continue;
    try {
      LeaderPolicy policy = policy_from_outcome(game, config, outcome);
      double recomputed =
          evaluate(policy, game, eval_schedule,
                   mix_seed(outcome.seed, 0xf1a1), config.mw_epsilon);
      if (recomputed != outcome.final_eval) {
        reproduced = false;
        repro_detail = "seed " + std::to_string(outcome.seed) +
                       " recomputed " + fmt_double(recomputed) +
                       " vs logged " + fmt_double(outcome.final_eval);
        break;
      }
    } catch (const std::exception& e) {
      reproduced = false;
      repro_detail = e.what();
      break;
    }
  }
  verdicts.push_back(Verdict{"final_evals_reproducible", reproduced,
                             reproduced ? 1.0 : 0.0, 1.0, repro_detail});

  const bool centralized =
      config.trainer.mode == CriticMode::centralized_critic;

  if (config.setting == "maintain" || config.setting == "escape") {
    double fraction = fraction_of_completed(bundle, [&](const SeedOutcome& s) {
      if (std::fabs(s.final_eval - bundle.oracle.value) > kEvalTolerance)
        return false;
      LeaderPolicy policy = policy_from_outcome(game, config, s);
      return greedy_leader_index(game, policy) == bundle.oracle.leader_index;
    });
    double needed = config.setting == "escape" ? 1.0 : (centralized ? 0.9 : 0.0);
    verdicts.push_back(
        Verdict{"optimal_commitment_fraction", fraction >= needed - 1e-12,
                fraction, needed,
                "seeds whose greedy policy plays the oracle action at the "
                "oracle value"});
  } else if (config.setting == "maintain_randomized") {
    verdicts.push_back(Verdict{
        "oracle_grid_value", bundle.oracle.value >= 27.49 / 30.0 - 1e-12,
        bundle.oracle.value, 27.49 / 30.0,
        "randomized commitment value found by the grid oracle"});
    double fraction = fraction_of_completed(bundle, [&](const SeedOutcome& s) {
      return s.final_eval >= 26.5 / 30.0 - 1e-12;
    });
    double needed = centralized ? 0.8 : 0.0;
    verdicts.push_back(Verdict{
        "near_optimal_fraction", fraction >= needed - 1e-12, fraction, needed,
        "seeds with final evaluation at least 26.5/30"});
  } else if (config.setting == "matrix_design") {
    if (centralized) {
      double fraction =
          fraction_of_completed(bundle, [&](const SeedOutcome& s) {
            return s.final_eval >= 1.0 - kEvalTolerance;
          });
      verdicts.push_back(Verdict{"optimal_commitment_fraction",
                                 fraction >= 0.8 - 1e-12, fraction, 0.8,
                                 "seeds whose final evaluation reaches 1.0"});
      long loss_step = 100000;
      int counted = 0, under = 0;
      for (const SeedOutcome& outcome : bundle.seeds) {
        if (!outcome.completed) continue;
        for (const EvalPoint& point : outcome.curve) {
          if (point.step >= loss_step) {
            counted += 1;
            if (point.value_loss < 0.2) under += 1;
            break;
          }
        }
      }
      if (counted > 0) {
        double fraction_under = static_cast<double>(under) / counted;
        verdicts.push_back(
            Verdict{"value_loss_under_0.2_by_100k",
                    fraction_under >= 0.8 - 1e-12, fraction_under, 0.8,
                    "seeds whose critic loss is below 0.2 at 100k steps"});
      }
    } else {
      double fraction =
          fraction_of_completed(bundle, [&](const SeedOutcome& s) {
            return count_oscillation_drops(s.curve) >= 3;
          });
      verdicts.push_back(
          Verdict{"oscillation_majority", fraction > 0.5, fraction, 0.5,
                  "seeds that drop below 0.9 at least three times after "
                  "first reaching 1.0"});
    }
  } else if (config.setting == "allocation") {
    double fraction = fraction_of_completed(bundle, [&](const SeedOutcome& s) {
      return std::fabs(s.final_eval - bundle.oracle.value) <= 0.05;
    });
    double needed = centralized ? 0.8 : 0.0;
    verdicts.push_back(Verdict{
        "near_optimal_fraction", fraction >= needed - 1e-12, fraction, needed,
        "seeds with final evaluation within 0.05 of the oracle value"});
  } else {  // mu_spm
    double beats = fraction_of_completed(bundle, [&](const SeedOutcome& s) {
      return s.final_eval > bundle.oracle.aux_bound;
    });
    verdicts.push_back(Verdict{
        "beats_no_message_bound", beats >= 0.6 - 1e-12, beats, 0.6,
        "seeds whose final welfare-loss reward beats the best mechanism "
        "that ignores messages"});
    double near = fraction_of_completed(bundle, [&](const SeedOutcome& s) {
      return s.final_eval >= -0.05;
    });
    verdicts.push_back(
        Verdict{"near_first_best", near >= 0.4 - 1e-12, near, 0.4,
                "seeds whose final welfare loss is within 0.05 of zero"});
  }

  json rows = json::array();
  for (const Verdict& verdict : verdicts) {
    json row;
    row["check"] = verdict.check;
    row["pass"] = verdict.pass;
    row["value"] = verdict.value;
    row["threshold"] = verdict.threshold;
    row["detail"] = verdict.detail;
    rows.push_back(std::move(row));
  }
  json doc;
  doc["name"] = config.name;
  doc["setting"] = config.setting;
  doc["oracle_value"] = bundle.oracle.value;
  doc["all_pass"] = all_pass(verdicts);
  doc["checks"] = std::move(rows);
  write_text_file(std::filesystem::path(bundle.bundle_dir) / "verdicts.json",
                  doc.dump(2) + "\n");
  return verdicts;
}

bool all_pass(const std::vector<Verdict>& verdicts) {
  for (const Verdict& verdict : verdicts)
    if (!verdict.pass) return false;
  return !verdicts.empty();
}

}  // namespace stackrl
