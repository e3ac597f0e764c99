#pragma once

#include <cstdint>
#include <vector>

#include "stackrl/mlp.hpp"
#include "stackrl/policy.hpp"
#include "stackrl/pomdp.hpp"

namespace stackrl {

/// centralized_critic gives the value network the full hidden state
/// (follower strategies, types, phase, progress); plain restricts it to the
/// leader's own observation features.
enum class CriticMode { centralized_critic, plain };

/// Scalar state-value estimator regressed on empirical reward-to-go.
class CriticNet {
 public:
  CriticNet() = default;
  CriticNet(int input_dim, int hidden_width, std::uint64_t init_seed);

  double value(const std::vector<double>& input) const;
  /// grad += coef * d value(input) / d params.
  void accumulate_value_gradient(const std::vector<double>& input, double coef,
                                 std::vector<double>& grad) const;

  std::vector<double>& params() { return params_; }
  const std::vector<double>& params() const { return params_; }
  int input_dim() const { return shape_.in; }

 private:
  MlpShape shape_;
  std::vector<double> params_;
};

struct TrainConfig {
  CriticMode mode = CriticMode::centralized_critic;
  PolicyArch arch = PolicyArch::tabular;
  double learning_rate = 3e-3;
  double critic_learning_rate = 1e-2;
  double clip_ratio = 0.2;
  int batch_episodes = 8;
  long total_steps = 200000;
  long eval_interval = 10000;
  int ppo_epochs = 4;
  double entropy_coef = 0.01;
  /// Standardize advantages per batch (zero mean, unit variance) before the
  /// clipped-surrogate step. Keeps the update scale-free, so exploration
  /// pressure from the entropy bonus survives after the return signal
  /// flattens near a local optimum.
  bool normalize_advantages = true;
  int hidden_width = 64;
  /// Reward sub-episodes per evaluation episode; 0 keeps the training
  /// schedule's count. Larger values only tighten the reward estimate.
  int eval_reward_subepisodes = 0;
  std::uint64_t seed = 0;

  void validate() const;
};

struct EvalPoint {
  long step = 0;
  double eval_reward = 0.0;
  double value_loss = 0.0;
};

/// Normalized mean reward of one sampled training episode, stamped with the
/// environment step count reached once it finished.
struct TrainRewardPoint {
  long step = 0;
  double reward = 0.0;
};

struct TrainResult {
  std::vector<EvalPoint> curve;
  std::vector<TrainRewardPoint> train_rewards;
  LeaderPolicy policy;
  CriticNet critic;
  double final_eval = 0.0;
  double best_eval = 0.0;
  long episodes = 0;
  long env_steps = 0;
};

/// Everything needed to freeze and restore a learner: policy and critic
/// parameters, the training configuration, and a serialized random stream.
struct TrainCheckpoint {
  TrainConfig config;
  std::vector<double> policy_params;
  std::vector<double> critic_params;
  std::string rng_state;
};

/// Writes the checkpoint as a binary container with a plain-text header
/// (format version, config fields, payload sizes). Parameter payloads are
/// stored as little-endian 64-bit doubles regardless of host order.
void save_checkpoint(const std::string& path, const TrainCheckpoint& ckpt);

/// Reads a container written by save_checkpoint. Throws std::runtime_error
/// on unknown versions or truncated payloads.
TrainCheckpoint load_checkpoint(const std::string& path);

/// Undiscounted suffix sums of the trace's rewards, one per record.
std::vector<double> reward_to_go(const EpisodeTrace& trace);

const std::vector<double>& critic_input(const StepRecord& record,
                                        CriticMode mode);

/// Batch-averaged score-function gradient with reward-to-go; subtracts the
/// critic's value as a baseline when one is supplied. Gradient terms exist
/// only at cache-miss steps, the only points where the policy randomizes.
/// Throws on non-finite results.
std::vector<double> policy_gradient_estimate(
    const std::vector<EpisodeTrace>& traces, const LeaderPolicy& policy,
    const CriticNet* critic, CriticMode mode);

/// One regression step toward reward-to-go targets; returns the mean squared
/// error before the step.
double critic_update(CriticNet& critic, Adam& optimizer,
                     const std::vector<EpisodeTrace>& traces, CriticMode mode,
                     double learning_rate);

/// Clipped-surrogate ascent on the batch (plus an optional entropy bonus),
/// using the recorded sample-time log-probabilities as the trust region
/// anchor.
void proximal_update(LeaderPolicy& policy, Adam& optimizer,
                     const std::vector<EpisodeTrace>& traces,
                     const CriticNet* critic, const TrainConfig& config);

/// One full greedy episode; returns the mean normalized reward over the
/// scoring sub-episodes. Deterministic given parameters and seed.
double evaluate(const LeaderPolicy& policy, const BayesianGame& game,
                EpisodeSchedule schedule, std::uint64_t seed,
                double mw_epsilon = 0.1);

/// Full training loop: batches of long episodes, critic regression, proximal
/// policy updates, and greedy evaluations every eval_interval environment
/// steps. Emits exactly total_steps / eval_interval curve rows.
TrainResult train(const BayesianGame& game, EpisodeSchedule schedule,
                  double mw_epsilon, const TrainConfig& config);

}  // namespace stackrl
