#include "stackrl/pomdp.hpp"

#include <algorithm>
#include <cstdio>
#include <stdexcept>
#include <utility>

namespace stackrl {
namespace {

bool is_mechanism(const BayesianGame& game) {
  return game.leader_space.kind == LeaderKind::mechanism;
}

void append_one_hot(std::vector<double>& out, int index, int size) {
  for (int i = 0; i < size; ++i) out.push_back(i == index ? 1.0 : 0.0);
}

int subepisode_step_cap(const BayesianGame& game) {
  return is_mechanism(game) ? game.spm.n_agents + 2 : 1;
}

}  // namespace

void EpisodeSchedule::validate() const {
  if (equilibrium_rounds < 1 || reward_subepisodes < 1)
    throw std::invalid_argument(
        "EpisodeSchedule: both phase lengths must be at least 1");
}

std::vector<int> leader_action_dims(const BayesianGame& game) {
  switch (game.leader_space.kind) {
    case LeaderKind::discrete:
      return {game.leader_space.base_actions};
    case LeaderKind::weight_vector:
      return std::vector<int>(game.leader_space.base_actions, kWeightLevels);
    case LeaderKind::mechanism:
      return {game.spm.n_agents, static_cast<int>(game.spm.price_grid.size())};
  }
  throw std::logic_error("leader_action_dims: unknown leader kind");
}

int observation_feature_dim(const BayesianGame& game) {
  switch (game.kind) {
    case SettingKind::normal_form:
    case SettingKind::matrix_design:
      return 1;
    case SettingKind::allocation:
      return game.n_actions[0];
    case SettingKind::mu_spm:
      return game.spm.n_agents * game.spm.n_messages + game.spm.n_agents +
             game.spm.n_items;
  }
  throw std::logic_error("observation_feature_dim: unknown setting");
}

int state_feature_dim(const BayesianGame& game) {
  int dim = 3;
  for (int i = 0; i < game.n_followers; ++i)
    dim += game.n_types[i] * game.n_actions[i] + game.n_types[i] +
           game.n_actions[i];
  if (game.kind == SettingKind::mu_spm)
    dim += game.spm.n_agents + game.spm.n_items;
  return dim;
}

int observation_key_space(const BayesianGame& game) {
  switch (game.kind) {
    case SettingKind::normal_form:
    case SettingKind::matrix_design:
      return 1;
    case SettingKind::allocation:
      return game.n_actions[0];
    case SettingKind::mu_spm: {
      int space = 1;
      for (int i = 0; i < game.spm.n_agents; ++i) space *= game.spm.n_messages;
      for (int i = 0; i < game.spm.n_agents + game.spm.n_items; ++i)
        space *= 2;
      return space;
    }
  }
  throw std::logic_error("observation_key_space: unknown setting");
}

PomdpState make_subepisode_state(const BayesianGame& game, bool reward_phase,
                                 TypeProfile types, ActionProfile messages,
                                 int target_follower, int probe_action) {
  PomdpState state;
  state.reward_phase = reward_phase;
  state.types = std::move(types);
  state.messages = std::move(messages);
  if (is_mechanism(game)) {
    state.visited.assign(game.spm.n_agents, false);
    state.item_owner.assign(game.spm.n_items, -1);
    state.payments.assign(game.spm.n_agents, 0.0);
  }
  state.target_follower = target_follower;
  state.probe_action = probe_action;
  return state;
}

Observation observe(const BayesianGame& game, const PomdpState& state) {
  Observation obs;
  switch (game.kind) {
    case SettingKind::normal_form:
    case SettingKind::matrix_design:
      obs.key = 0;
      obs.features = {1.0};
      return obs;
    case SettingKind::allocation:
      obs.key = static_cast<std::uint64_t>(state.messages[0]);
      append_one_hot(obs.features, state.messages[0], game.n_actions[0]);
      return obs;
    case SettingKind::mu_spm: {
      const SpmSetting& spm = game.spm;
      std::uint64_t key = 0;
      std::uint64_t radix = 1;
      for (int i = 0; i < spm.n_agents; ++i) {
        key += radix * static_cast<std::uint64_t>(state.messages[i]);
        radix *= static_cast<std::uint64_t>(spm.n_messages);
      }
      for (int i = 0; i < spm.n_agents; ++i) {
        if (state.visited[i]) key += radix;
        radix *= 2;
      }
      for (int j = 0; j < spm.n_items; ++j) {
        if (state.item_owner[j] >= 0) key += radix;
        radix *= 2;
      }
      obs.key = key;
      for (int i = 0; i < spm.n_agents; ++i)
        append_one_hot(obs.features, state.messages[i], spm.n_messages);
      for (int i = 0; i < spm.n_agents; ++i)
        obs.features.push_back(state.visited[i] ? 1.0 : 0.0);
      for (int j = 0; j < spm.n_items; ++j)
        obs.features.push_back(state.item_owner[j] >= 0 ? 1.0 : 0.0);
      return obs;
    }
  }
  throw std::logic_error("observe: unknown setting");
}

LeaderAction leader_action_from_levels(const BayesianGame& game,
                                       const std::vector<int>& levels) {
  if (is_mechanism(game))
    throw std::invalid_argument(
        "leader_action_from_levels: mechanism actions are not commitments");
  if (game.leader_space.kind == LeaderKind::discrete)
    return LeaderAction::pure(levels.at(0));
  std::vector<double> weights(levels.begin(), levels.end());
  bool all_zero = std::all_of(weights.begin(), weights.end(),
                              [](double w) { return w == 0.0; });
  if (all_zero) weights.assign(weights.size(), 1.0);
  return LeaderAction::mixed(weights);
}

std::vector<std::vector<std::uint8_t>> action_masks(const BayesianGame& game,
                                                    const PomdpState& state) {
  auto dims = leader_action_dims(game);
  std::vector<std::vector<std::uint8_t>> masks;
  masks.reserve(dims.size());
  for (int levels : dims)
    masks.emplace_back(static_cast<std::size_t>(levels), std::uint8_t{1});
  if (is_mechanism(game))
    for (int i = 0; i < game.spm.n_agents; ++i)
      if (state.visited[i]) masks[0][static_cast<std::size_t>(i)] = 0;
  return masks;
}

std::vector<double> state_features(const BayesianGame& game,
                                   const FollowerLearner& learner,
                                   const PomdpState& state) {
  std::vector<double> f;
  f.reserve(static_cast<std::size_t>(state_feature_dim(game)));
  f.push_back(state.reward_phase ? 1.0 : 0.0);
  for (int i = 0; i < game.n_followers; ++i)
    for (int t = 0; t < game.n_types[i]; ++t) {
      auto row = learner.distribution(i, t);
      f.insert(f.end(), row.begin(), row.end());
    }
  for (int i = 0; i < game.n_followers; ++i)
    append_one_hot(f, state.types[i], game.n_types[i]);
  for (int i = 0; i < game.n_followers; ++i)
    append_one_hot(f, state.messages[i], game.n_actions[i]);
  if (game.kind == SettingKind::mu_spm) {
    for (int i = 0; i < game.spm.n_agents; ++i)
      f.push_back(state.visited[i] ? 1.0 : 0.0);
    for (int j = 0; j < game.spm.n_items; ++j)
      f.push_back(state.item_owner[j] >= 0 ? 1.0 : 0.0);
  }
  f.push_back(state.equilibrium_remaining);
  f.push_back(state.reward_remaining);
  return f;
}

StepResult step(const BayesianGame& game, const PomdpState& state,
                const std::vector<int>& leader_action) {
  if (state.steps_taken >= subepisode_step_cap(game))
    throw std::runtime_error("step: sub-episode exceeded its step cap");
  auto dims = leader_action_dims(game);
  if (leader_action.size() != dims.size())
    throw std::invalid_argument("step: wrong action dimension count");
  for (std::size_t d = 0; d < dims.size(); ++d)
    if (leader_action[d] < 0 || leader_action[d] >= dims[d])
      throw std::invalid_argument("step: action index out of range");

  StepResult result;
  result.state = state;
  result.state.steps_taken = state.steps_taken + 1;

  if (!is_mechanism(game)) {
    result.terminal_payoffs = game.payoff(
        leader_action_from_levels(game, leader_action), state.types,
        state.messages);
    result.done = true;
    result.reward = state.reward_phase ? result.terminal_payoffs[0] : 0.0;
    result.observation = observe(game, result.state);
    return result;
  }

  const SpmSetting& spm = game.spm;
  int agent = leader_action[0];
  int price_index = leader_action[1];
  if (state.visited[agent])
    throw std::invalid_argument("step: agent already visited");
  bool any_item = false;
  for (int owner : state.item_owner) any_item = any_item || owner < 0;
  if (!any_item)
    throw std::invalid_argument("step: no item left to offer");

  double price = spm.price_grid[price_index];
  result.state.visited[agent] = true;

  // Unit demand over a single remaining item: buy on a strict gain only.
  for (int j = 0; j < spm.n_items; ++j) {
    if (result.state.item_owner[j] >= 0) continue;
    double value = spm.agents[agent].support[state.types[agent]].item_values[j];
    if (value - price > 0.0) {
      result.state.item_owner[j] = agent;
      result.state.payments[agent] += price;
    }
    break;
  }

  bool items_left = false;
  for (int owner : result.state.item_owner) items_left = items_left || owner < 0;
  bool all_visited = std::all_of(result.state.visited.begin(),
                                 result.state.visited.end(),
                                 [](bool v) { return v; });
  result.done = !items_left || all_visited;
  result.observation = observe(game, result.state);
  if (result.done) {
    double welfare = 0.0;
    std::vector<double> utilities(static_cast<std::size_t>(spm.n_agents), 0.0);
    for (int j = 0; j < spm.n_items; ++j) {
      int owner = result.state.item_owner[j];
      if (owner < 0) continue;
      double value = spm.agents[owner].support[state.types[owner]].item_values[j];
      welfare += value;
      utilities[static_cast<std::size_t>(owner)] += value;
    }
    for (int i = 0; i < spm.n_agents; ++i)
      utilities[static_cast<std::size_t>(i)] -= result.state.payments[i];
    result.terminal_payoffs.push_back(
        reward_from_welfare(welfare, spm_max_welfare(spm, state.types)));
    result.terminal_payoffs.insert(result.terminal_payoffs.end(),
                                   utilities.begin(), utilities.end());
    result.reward = state.reward_phase ? result.terminal_payoffs[0] : 0.0;
  }
  return result;
}

double normalized_reward(const BayesianGame& game, double raw) {
  if (game.kind == SettingKind::mu_spm || game.leader_payoff_max <= 0.0)
    return raw;
  return raw / game.leader_payoff_max;
}

void EpisodeTrace::write_csv(std::ostream& out) const {
  out << "episode,phase,subepisode,observation,action,reward\n";
  char buf[64];
  for (const StepRecord& rec : records) {
    out << rec.episode << ',' << (rec.reward_phase ? "reward" : "equilibrium")
        << ',' << rec.subepisode << ',' << rec.obs.key << ',';
    for (std::size_t d = 0; d < rec.action.size(); ++d) {
      if (d > 0) out << ':';
      out << rec.action[d];
    }
    std::snprintf(buf, sizeof(buf), "%.12g", rec.reward);
    out << ',' << buf << '\n';
  }
}

EpisodeRunner::EpisodeRunner(const BayesianGame& game, EpisodeSchedule schedule,
                             double mw_epsilon)
    : game_(&game), schedule_(schedule), mw_epsilon_(mw_epsilon) {
  schedule_.validate();
  if (is_mechanism(game) && game.spm.n_items != 1)
    throw std::invalid_argument(
        "EpisodeRunner: posted-price mechanisms support a single item");
}

std::vector<double> EpisodeRunner::rollout(const FollowerLearner& learner,
                                           PolicyHandle& policy, Rng& rng,
                                           ActMode mode, PomdpState state0,
                                           int episode_id, int subepisode,
                                           EpisodeTrace& trace) const {
  PomdpState state = std::move(state0);
  while (true) {
    Observation obs = observe(*game_, state);
    auto masks = action_masks(*game_, state);
    auto features = state_features(*game_, learner, state);
    PolicyDecision decision = policy.act(obs, masks, mode, rng);
    StepResult result = step(*game_, state, decision.action);
    trace.records.push_back(StepRecord{episode_id, state.reward_phase,
                                       subepisode, std::move(obs),
                                       std::move(features), decision.action,
                                       std::move(masks), decision.logprob,
                                       decision.first_use, result.done,
                                       result.reward});
    if (result.done) return std::move(result.terminal_payoffs);
    state = std::move(result.state);
  }
}

void EpisodeRunner::run_equilibrium_phase(FollowerLearner& learner,
                                          PolicyHandle& policy, Rng& rng,
                                          ActMode mode, int episode_id,
                                          EpisodeTrace& trace) const {
  for (int round = 0; round < schedule_.equilibrium_rounds; ++round) {
    TypeProfile types = game_->sample_types(rng);
    ActionProfile realized = learner.sample_actions(types, rng);
    std::vector<std::vector<double>> utilities(
        static_cast<std::size_t>(game_->n_followers));
    for (int i = 0; i < game_->n_followers; ++i) {
      auto& row = utilities[static_cast<std::size_t>(i)];
      row.resize(static_cast<std::size_t>(game_->n_actions[i]));
      for (int k = 0; k < game_->n_actions[i]; ++k) {
        ActionProfile probe = realized;
        probe[static_cast<std::size_t>(i)] = k;
        PomdpState state0 =
            make_subepisode_state(*game_, false, types, probe, i, k);
        state0.equilibrium_remaining =
            static_cast<double>(schedule_.equilibrium_rounds - round) /
            schedule_.equilibrium_rounds;
        auto payoffs =
            rollout(learner, policy, rng, mode, std::move(state0), episode_id,
                    round, trace);
        row[static_cast<std::size_t>(k)] = payoffs[static_cast<std::size_t>(i) + 1];
      }
    }
    learner.update_weights(types, utilities);
  }
}

void EpisodeRunner::run_reward_phase(const FollowerLearner& learner,
                                     PolicyHandle& policy, Rng& rng,
                                     ActMode mode, int episode_id,
                                     EpisodeTrace& trace) const {
  for (int r = 0; r < schedule_.reward_subepisodes; ++r) {
    TypeProfile types = game_->sample_types(rng);
    ActionProfile messages = learner.sample_actions(types, rng);
    PomdpState state0 =
        make_subepisode_state(*game_, true, types, messages, -1, -1);
    state0.equilibrium_remaining = 0.0;
    state0.reward_remaining =
        static_cast<double>(schedule_.reward_subepisodes - r) /
        schedule_.reward_subepisodes;
    auto payoffs = rollout(learner, policy, rng, mode, std::move(state0),
                           episode_id, r, trace);
    trace.total_reward += payoffs[0];
    trace.reward_subepisodes += 1;
  }
}

EpisodeTrace EpisodeRunner::run_episode(PolicyHandle& policy,
                                        std::uint64_t seed, ActMode mode,
                                        int episode_id) const {
  Rng rng(seed);
  policy.begin_episode();
  FollowerLearner learner(*game_, mw_epsilon_);
  EpisodeTrace trace;
  run_equilibrium_phase(learner, policy, rng, mode, episode_id, trace);
  run_reward_phase(learner, policy, rng, mode, episode_id, trace);
  return trace;
}

}  // namespace stackrl
