#include "stackrl/trainer.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <utility>

#include "stackrl/rng.hpp"

namespace stackrl {

CriticNet::CriticNet(int input_dim, int hidden_width, std::uint64_t init_seed)
    : shape_{input_dim, hidden_width, 1} {
  if (input_dim < 1 || hidden_width < 1)
    throw std::invalid_argument("CriticNet: dimensions must be positive");
  mlp_init(shape_, params_, init_seed);
}

double CriticNet::value(const std::vector<double>& input) const {
  std::vector<double> hidden;
  std::vector<double> out;
  mlp_forward(shape_, params_, input.data(), hidden, out);
  return out[0];
}

void CriticNet::accumulate_value_gradient(const std::vector<double>& input,
                                          double coef,
                                          std::vector<double>& grad) const {
  std::vector<double> hidden;
  std::vector<double> out;
  mlp_forward(shape_, params_, input.data(), hidden, out);
  std::vector<double> dout{coef};
  mlp_backward(shape_, params_, input.data(), hidden, dout, grad);
}

void TrainConfig::validate() const {
  if (learning_rate <= 0.0 || critic_learning_rate <= 0.0)
    throw std::invalid_argument("TrainConfig: learning rates must be positive");
  if (clip_ratio <= 0.0 || clip_ratio >= 1.0)
    throw std::invalid_argument("TrainConfig: clip_ratio must be in (0, 1)");
  if (batch_episodes < 1 || total_steps < 1 || eval_interval < 1 ||
      ppo_epochs < 1 || hidden_width < 1)
    throw std::invalid_argument("TrainConfig: counts must be positive");
  if (entropy_coef < 0.0 || eval_reward_subepisodes < 0)
    throw std::invalid_argument("TrainConfig: negative coefficient");
}

std::vector<double> reward_to_go(const EpisodeTrace& trace) {
  std::vector<double> togo(trace.records.size(), 0.0);
  double acc = 0.0;
  for (std::size_t i = trace.records.size(); i-- > 0;) {
    acc += trace.records[i].reward;
    togo[i] = acc;
  }
  return togo;
}

const std::vector<double>& critic_input(const StepRecord& record,
                                        CriticMode mode) {
  return mode == CriticMode::centralized_critic ? record.state_features
                                                : record.obs.features;
}

namespace {

void require_finite(const std::vector<double>& values, const char* where) {
  for (double v : values)
    if (!std::isfinite(v))
      throw std::runtime_error(std::string(where) +
                               ": non-finite value in gradient pipeline");
}

}  // namespace

std::vector<double> policy_gradient_estimate(
    const std::vector<EpisodeTrace>& traces, const LeaderPolicy& policy,
    const CriticNet* critic, CriticMode mode) {
  if (traces.empty())
    throw std::invalid_argument("policy_gradient_estimate: empty batch");
  std::vector<double> grad(policy.params().size(), 0.0);
  double scale = 1.0 / static_cast<double>(traces.size());
  for (const EpisodeTrace& trace : traces) {
    auto togo = reward_to_go(trace);
    for (std::size_t i = 0; i < trace.records.size(); ++i) {
      const StepRecord& rec = trace.records[i];
      if (!rec.first_use) continue;
      double advantage = togo[i];
      if (critic != nullptr) advantage -= critic->value(critic_input(rec, mode));
      if (advantage == 0.0) continue;
      policy.accumulate_logprob_gradient(rec.obs, rec.masks, rec.action,
                                         scale * advantage, grad);
    }
  }
  require_finite(grad, "policy_gradient_estimate");
  return grad;
}

double critic_update(CriticNet& critic, Adam& optimizer,
                     const std::vector<EpisodeTrace>& traces, CriticMode mode,
                     double learning_rate) {
  if (traces.empty())
    throw std::invalid_argument("critic_update: empty batch");
  std::vector<double> grad(critic.params().size(), 0.0);
  double loss = 0.0;
  long count = 0;
  for (const EpisodeTrace& trace : traces) {
    auto togo = reward_to_go(trace);
    for (std::size_t i = 0; i < trace.records.size(); ++i) {
      const auto& input = critic_input(trace.records[i], mode);
      double err = critic.value(input) - togo[i];
      loss += err * err;
      ++count;
      critic.accumulate_value_gradient(input, 2.0 * err, grad);
    }
  }
  if (count == 0) throw std::invalid_argument("critic_update: empty traces");
  loss /= static_cast<double>(count);
  if (!std::isfinite(loss))
    throw std::runtime_error("critic_update: non-finite value loss");
  for (double& g : grad) g /= static_cast<double>(count);
  require_finite(grad, "critic_update");
  optimizer.step(critic.params(), grad, learning_rate);
  return loss;
}

void proximal_update(LeaderPolicy& policy, Adam& optimizer,
                     const std::vector<EpisodeTrace>& traces,
                     const CriticNet* critic, const TrainConfig& config) {
  if (traces.empty())
    throw std::invalid_argument("proximal_update: empty batch");

  struct Item {
    const StepRecord* record;
    double old_logprob;
    double advantage;
  };
  std::vector<Item> items;
  for (const EpisodeTrace& trace : traces) {
    auto togo = reward_to_go(trace);
    for (std::size_t i = 0; i < trace.records.size(); ++i) {
      const StepRecord& rec = trace.records[i];
      if (!rec.first_use) continue;
      double advantage = togo[i];
      if (critic != nullptr)
        advantage -= critic->value(critic_input(rec, config.mode));
      items.push_back(Item{&rec, rec.logprob, advantage});
    }
  }

  if (config.normalize_advantages && items.size() > 1) {
    double mean = 0.0;
    for (const Item& item : items) mean += item.advantage;
    mean /= static_cast<double>(items.size());
    double var = 0.0;
    for (const Item& item : items) {
      double d = item.advantage - mean;
      var += d * d;
    }
    double sd = std::sqrt(var / static_cast<double>(items.size()));
    for (Item& item : items)
      item.advantage = (item.advantage - mean) / (sd + 1e-8);
  }

  double scale = 1.0 / static_cast<double>(traces.size());
  std::vector<double> grad(policy.params().size());
  for (int epoch = 0; epoch < config.ppo_epochs; ++epoch) {
    std::fill(grad.begin(), grad.end(), 0.0);
    for (const Item& item : items) {
      const StepRecord& rec = *item.record;
      double ratio =
          std::exp(policy.logprob(rec.obs, rec.masks, rec.action) -
                   item.old_logprob);
      bool clipped = (item.advantage >= 0.0 && ratio > 1.0 + config.clip_ratio) ||
                     (item.advantage < 0.0 && ratio < 1.0 - config.clip_ratio);
      if (!clipped && item.advantage != 0.0)
        policy.accumulate_logprob_gradient(
            rec.obs, rec.masks, rec.action,
            scale * ratio * item.advantage, grad);
      if (config.entropy_coef > 0.0)
        policy.accumulate_entropy_gradient(rec.obs, rec.masks,
                                           scale * config.entropy_coef, grad);
    }
    require_finite(grad, "proximal_update");
    for (double& g : grad) g = -g;
    optimizer.step(policy.params(), grad, config.learning_rate);
  }
}

double evaluate(const LeaderPolicy& policy, const BayesianGame& game,
                EpisodeSchedule schedule, std::uint64_t seed,
                double mw_epsilon) {
  LeaderPolicy greedy_copy = policy;
  EpisodeRunner runner(game, schedule, mw_epsilon);
  EpisodeTrace trace = runner.run_episode(greedy_copy, seed, ActMode::greedy);
  return normalized_reward(game, trace.mean_reward());
}

TrainResult train(const BayesianGame& game, EpisodeSchedule schedule,
                  double mw_epsilon, const TrainConfig& config) {
  config.validate();
  schedule.validate();
  EpisodeRunner runner(game, schedule, mw_epsilon);
  EpisodeSchedule eval_schedule = schedule;
  if (config.eval_reward_subepisodes > 0)
    eval_schedule.reward_subepisodes = config.eval_reward_subepisodes;

  TrainResult result;
  result.policy = LeaderPolicy(game, config.arch, config.hidden_width,
                               mix_seed(config.seed, 0x9e01));
  int critic_in = config.mode == CriticMode::centralized_critic
                      ? state_feature_dim(game)
                      : observation_feature_dim(game);
  result.critic =
      CriticNet(critic_in, config.hidden_width, mix_seed(config.seed, 0xc217));

  Adam policy_opt;
  Adam critic_opt;
  long rows_wanted = config.total_steps / config.eval_interval;
  double last_loss = 0.0;

  auto emit_due_rows = [&](bool flush) {
    while (static_cast<long>(result.curve.size()) < rows_wanted) {
      long at = (static_cast<long>(result.curve.size()) + 1) *
                config.eval_interval;
      if (!flush && at > result.env_steps) break;
      double reward = evaluate(
          result.policy, game, eval_schedule,
          mix_seed(config.seed, 0xe0000000ULL +
                                    static_cast<std::uint64_t>(
                                        result.curve.size())),
          mw_epsilon);
      result.curve.push_back(EvalPoint{at, reward, last_loss});
    }
  };

  while (result.env_steps < config.total_steps) {
    std::vector<EpisodeTrace> batch;
    batch.reserve(static_cast<std::size_t>(config.batch_episodes));
    for (int b = 0; b < config.batch_episodes; ++b) {
      EpisodeTrace trace = runner.run_episode(
          result.policy,
          mix_seed(config.seed,
                   0x100000ULL + static_cast<std::uint64_t>(result.episodes)),
          ActMode::sample, static_cast<int>(result.episodes));
      result.env_steps += trace.env_steps();
      result.episodes += 1;
      result.train_rewards.push_back(TrainRewardPoint{
          result.env_steps, normalized_reward(game, trace.mean_reward())});
      batch.push_back(std::move(trace));
    }
    last_loss = critic_update(result.critic, critic_opt, batch, config.mode,
                              config.critic_learning_rate);
    proximal_update(result.policy, policy_opt, batch, &result.critic, config);
    emit_due_rows(false);
  }
  emit_due_rows(true);

  result.final_eval = evaluate(result.policy, game, eval_schedule,
                               mix_seed(config.seed, 0xf1a1), mw_epsilon);
  result.best_eval = result.final_eval;
  for (const EvalPoint& point : result.curve)
    result.best_eval = std::max(result.best_eval, point.eval_reward);
  return result;
}

namespace {

constexpr char kCheckpointMagic[] = "stackrl checkpoint v1";

std::string header_double(double v) {
  char buf[32];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, end);
}

double parse_header_double(const std::string& text) {
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || ptr != text.data() + text.size())
    throw std::runtime_error("checkpoint: bad number '" + text + "'");
  return v;
}

void write_doubles_le(std::ostream& out, const std::vector<double>& values) {
  for (double v : values) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, sizeof bits);
    unsigned char bytes[8];
    for (int i = 0; i < 8; ++i)
      bytes[i] = static_cast<unsigned char>((bits >> (8 * i)) & 0xff);
    out.write(reinterpret_cast<const char*>(bytes), 8);
  }
}

std::vector<double> read_doubles_le(std::istream& in, std::size_t count) {
  std::vector<double> values(count);
  for (std::size_t j = 0; j < count; ++j) {
    unsigned char bytes[8];
    if (!in.read(reinterpret_cast<char*>(bytes), 8))
      throw std::runtime_error("checkpoint: truncated parameter payload");
    std::uint64_t bits = 0;
    for (int i = 0; i < 8; ++i)
      bits |= static_cast<std::uint64_t>(bytes[i]) << (8 * i);
    std::memcpy(&values[j], &bits, sizeof bits);
  }
  return values;
}

}  // namespace

void save_checkpoint(const std::string& path, const TrainCheckpoint& ckpt) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("checkpoint: cannot write " + path);
  const TrainConfig& c = ckpt.config;
  out << kCheckpointMagic << "\n"
      << "mode "
      << (c.mode == CriticMode::centralized_critic ? "centralized" : "plain")
      << "\n"
      << "arch " << (c.arch == PolicyArch::tabular ? "tabular" : "mlp") << "\n"
      << "learning_rate " << header_double(c.learning_rate) << "\n"
      << "critic_learning_rate " << header_double(c.critic_learning_rate)
      << "\n"
      << "clip_ratio " << header_double(c.clip_ratio) << "\n"
      << "batch_episodes " << c.batch_episodes << "\n"
      << "total_steps " << c.total_steps << "\n"
      << "eval_interval " << c.eval_interval << "\n"
      << "ppo_epochs " << c.ppo_epochs << "\n"
      << "entropy_coef " << header_double(c.entropy_coef) << "\n"
      << "normalize_advantages " << (c.normalize_advantages ? 1 : 0) << "\n"
      << "hidden_width " << c.hidden_width << "\n"
      << "eval_reward_subepisodes " << c.eval_reward_subepisodes << "\n"
      << "seed " << c.seed << "\n"
      << "policy_params " << ckpt.policy_params.size() << "\n"
      << "critic_params " << ckpt.critic_params.size() << "\n"
      << "rng_state_bytes " << ckpt.rng_state.size() << "\n"
      << "payload\n";
  write_doubles_le(out, ckpt.policy_params);
  write_doubles_le(out, ckpt.critic_params);
  out.write(ckpt.rng_state.data(),
            static_cast<std::streamsize>(ckpt.rng_state.size()));
  if (!out) throw std::runtime_error("checkpoint: write failed for " + path);
}

TrainCheckpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("checkpoint: cannot open " + path);
  std::string line;
  if (!std::getline(in, line) || line != kCheckpointMagic)
    throw std::runtime_error("checkpoint: unknown container version");

  TrainCheckpoint ckpt;
  std::size_t n_policy = 0, n_critic = 0, n_rng = 0;
  while (std::getline(in, line)) {
    if (line == "payload") break;
    std::istringstream fields(line);
    std::string key, value;
    fields >> key >> value;
    if (key.empty() || value.empty())
      throw std::runtime_error("checkpoint: malformed header line '" + line +
                               "'");
    TrainConfig& c = ckpt.config;
    if (key == "mode") {
      c.mode = value == "centralized" ? CriticMode::centralized_critic
                                      : CriticMode::plain;
    } else if (key == "arch") {
      c.arch = value == "tabular" ? PolicyArch::tabular : PolicyArch::mlp;
    } else if (key == "learning_rate") {
      c.learning_rate = parse_header_double(value);
    } else if (key == "critic_learning_rate") {
      c.critic_learning_rate = parse_header_double(value);
    } else if (key == "clip_ratio") {
      c.clip_ratio = parse_header_double(value);
    } else if (key == "batch_episodes") {
      c.batch_episodes = std::stoi(value);
    } else if (key == "total_steps") {
      c.total_steps = std::stol(value);
    } else if (key == "eval_interval") {
      c.eval_interval = std::stol(value);
    } else if (key == "ppo_epochs") {
      c.ppo_epochs = std::stoi(value);
    } else if (key == "entropy_coef") {
      c.entropy_coef = parse_header_double(value);
    } else if (key == "normalize_advantages") {
      c.normalize_advantages = value != "0";
    } else if (key == "hidden_width") {
      c.hidden_width = std::stoi(value);
    } else if (key == "eval_reward_subepisodes") {
      c.eval_reward_subepisodes = std::stoi(value);
    } else if (key == "seed") {
      c.seed = std::stoull(value);
    } else if (key == "policy_params") {
      n_policy = std::stoul(value);
    } else if (key == "critic_params") {
      n_critic = std::stoul(value);
    } else if (key == "rng_state_bytes") {
      n_rng = std::stoul(value);
    } else {
      throw std::runtime_error("checkpoint: unknown header key '" + key + "'");
    }
  }
  if (line != "payload")
    throw std::runtime_error("checkpoint: missing payload marker");

  ckpt.policy_params = read_doubles_le(in, n_policy);
  ckpt.critic_params = read_doubles_le(in, n_critic);
  ckpt.rng_state.resize(n_rng);
  if (n_rng > 0 &&
      !in.read(ckpt.rng_state.data(), static_cast<std::streamsize>(n_rng)))
    throw std::runtime_error("checkpoint: truncated rng state");
  return ckpt;
}

}  // namespace stackrl
