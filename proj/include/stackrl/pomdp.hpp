#pragma once

#include <cstdint>
#include <ostream>
#include <vector>

#include "stackrl/game.hpp"
#include "stackrl/no_regret.hpp"
#include "stackrl/rng.hpp"

namespace stackrl {

/// Long-episode layout: T follower-learning rounds followed by R scoring
/// sub-episodes. Matrix experiments use (100, 10), Bayesian ones (1000, 100).
struct EpisodeSchedule {
  int equilibrium_rounds = 100;
  int reward_subepisodes = 10;

  void validate() const;
};

/// What the leader policy is allowed to see: a discrete class key (used by
/// the per-episode action cache and tabular policies) plus a feature vector
/// for function approximators. Never encodes the phase, the follower
/// strategies, the sampled types, or which counterfactual is being probed.
struct Observation {
  std::uint64_t key = 0;
  std::vector<double> features;
};

/// Full environment state. The follower strategy weights live in the
/// FollowerLearner that accompanies the episode; everything else is here.
/// target_follower and probe_action identify the counterfactual being
/// evaluated during learning rounds; they stay at -1 in scoring sub-episodes
/// and are never exposed through Observation.
struct PomdpState {
  bool reward_phase = false;
  TypeProfile types;
  ActionProfile messages;
  std::vector<bool> visited;      // per agent, mechanism settings only
  std::vector<int> item_owner;    // per item, -1 while unallocated
  std::vector<double> payments;   // per agent, mechanism settings only
  int steps_taken = 0;
  int target_follower = -1;
  int probe_action = -1;
  // Fraction of each phase still ahead of this sub-episode. Part of the full
  // state (the critic may use it), invisible to the leader policy.
  double equilibrium_remaining = 1.0;
  double reward_remaining = 1.0;
};

/// Result of applying one leader action. terminal_payoffs holds the raw
/// payoff vector (leader first) once the sub-episode ends; reward is the
/// leader component when the sub-episode belongs to the scoring phase.
struct StepResult {
  PomdpState state;
  Observation observation;
  double reward = 0.0;
  bool done = false;
  std::vector<double> terminal_payoffs;
};

enum class ActMode { sample, greedy };

/// One policy query and its outcome, as stored by the episode runner. Exactly
/// one record is appended per environment step. first_use marks cache misses:
/// only those steps carry probability mass in the episode likelihood, so only
/// they receive gradient. reward is nonzero solely at terminal steps of
/// scoring sub-episodes.
struct StepRecord {
  int episode = 0;
  bool reward_phase = false;
  int subepisode = 0;
  Observation obs;
  std::vector<double> state_features;
  std::vector<int> action;
  std::vector<std::vector<std::uint8_t>> masks;
  double logprob = 0.0;
  bool first_use = false;
  bool terminal = false;
  double reward = 0.0;
};

struct EpisodeTrace {
  std::vector<StepRecord> records;
  double total_reward = 0.0;
  int reward_subepisodes = 0;

  int env_steps() const { return static_cast<int>(records.size()); }
  double mean_reward() const {
    return reward_subepisodes > 0 ? total_reward / reward_subepisodes : 0.0;
  }
  /// Row-per-step dump: episode,phase,subepisode,observation,action,reward.
  void write_csv(std::ostream& out) const;
};

/// Decision returned by a leader policy for one observation. logprob is the
/// log-probability of the returned action under the current parameters;
/// first_use reports whether the observation missed the per-episode cache.
struct PolicyDecision {
  std::vector<int> action;
  double logprob = 0.0;
  bool first_use = false;
};

/// Minimal interface the episode runner needs from a leader policy. The
/// implementation owns the per-episode observation-action cache; the runner
/// announces episode boundaries so the cache can be cleared.
class PolicyHandle {
 public:
  virtual ~PolicyHandle() = default;
  virtual void begin_episode() = 0;
  virtual PolicyDecision act(const Observation& obs,
                             const std::vector<std::vector<std::uint8_t>>& masks,
                             ActMode mode, Rng& rng) = 0;
};

/// Number of discrete choices per leader action dimension. Row-pick settings
/// have one dimension; weight-vector leaders pick one level per base action;
/// posted-price mechanisms pick (agent, price index).
std::vector<int> leader_action_dims(const BayesianGame& game);

/// Levels available per coordinate of a weight-vector leader. Level values
/// are the integers 0..kWeightLevels-1, normalized before use; the all-zero
/// selection is remapped to the uniform mixture.
inline constexpr int kWeightLevels = 6;

int observation_feature_dim(const BayesianGame& game);
int state_feature_dim(const BayesianGame& game);

/// Upper bound (exclusive) on Observation::key, so tabular policies can size
/// one table row per observation class.
int observation_key_space(const BayesianGame& game);

/// Builds the state at the start of one sub-episode.
PomdpState make_subepisode_state(const BayesianGame& game, bool reward_phase,
                                 TypeProfile types, ActionProfile messages,
                                 int target_follower, int probe_action);

/// Phase-blind deterministic projection of the state.
Observation observe(const BayesianGame& game, const PomdpState& state);

/// Commitment encoded by one non-mechanism leader action: a pure row pick,
/// or the level-grid mixture (all-zero levels become the uniform mixture).
LeaderAction leader_action_from_levels(const BayesianGame& game,
                                       const std::vector<int>& levels);

/// Per-dimension validity masks (1 = selectable). Mechanism settings mask
/// already-visited agents; everything else is all-ones.
std::vector<std::vector<std::uint8_t>> action_masks(const BayesianGame& game,
                                                    const PomdpState& state);

/// Critic-side encoding: phase flag, normalized follower strategy rows,
/// type one-hots, message one-hots, and mechanism progress flags.
std::vector<double> state_features(const BayesianGame& game,
                                   const FollowerLearner& learner,
                                   const PomdpState& state);

/// Applies one leader action. Throws std::invalid_argument for actions the
/// masks forbid (revisiting an agent) and std::runtime_error if a sub-episode
/// outlives its step cap.
StepResult step(const BayesianGame& game, const PomdpState& state,
                const std::vector<int>& leader_action);

/// Maps a raw leader payoff onto the reported scale: payoff divided by the
/// game's maximum when one is declared, unchanged for welfare-loss settings.
double normalized_reward(const BayesianGame& game, double raw);

/// Runs long episodes for one game. The same runner serves training (sample
/// mode) and evaluation (greedy mode).
class EpisodeRunner {
 public:
  EpisodeRunner(const BayesianGame& game, EpisodeSchedule schedule,
                double mw_epsilon = 0.1);

  const BayesianGame& game() const { return *game_; }
  const EpisodeSchedule& schedule() const { return schedule_; }
  double mw_epsilon() const { return mw_epsilon_; }

  /// T rounds of no-regret dynamics driven by policy rollouts: sample types,
  /// sample realized follower actions, roll the policy out once per
  /// (follower, counterfactual action), then update the learner.
  void run_equilibrium_phase(FollowerLearner& learner, PolicyHandle& policy,
                             Rng& rng, ActMode mode, int episode_id,
                             EpisodeTrace& trace) const;

  /// R scoring sub-episodes against the frozen follower strategies; the
  /// leader reward lands on each sub-episode's terminal step.
  void run_reward_phase(const FollowerLearner& learner, PolicyHandle& policy,
                        Rng& rng, ActMode mode, int episode_id,
                        EpisodeTrace& trace) const;

  /// Fresh learner, equilibrium phase, reward phase. Deterministic given the
  /// policy parameters and the seed.
  EpisodeTrace run_episode(PolicyHandle& policy, std::uint64_t seed,
                           ActMode mode = ActMode::sample,
                           int episode_id = 0) const;

 private:
  /// One full policy rollout from state0; returns the terminal raw payoffs.
  std::vector<double> rollout(const FollowerLearner& learner,
                              PolicyHandle& policy, Rng& rng, ActMode mode,
                              PomdpState state0, int episode_id, int subepisode,
                              EpisodeTrace& trace) const;

  const BayesianGame* game_;
  EpisodeSchedule schedule_;
  double mw_epsilon_;
};

}  // namespace stackrl
