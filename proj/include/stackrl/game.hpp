#pragma once

#include <array>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "stackrl/rng.hpp"

namespace stackrl {

using TypeProfile = std::vector<int>;
using ActionProfile = std::vector<int>;

/// How the leader commits: a single base action, a weight vector normalized
/// into a distribution over base actions, or an adaptive posted-price
/// mechanism (sequential sale settings).
enum class LeaderKind { discrete, weight_vector, mechanism };

struct LeaderActionSpace {
  LeaderKind kind = LeaderKind::discrete;
  int base_actions = 0;
};

/// One support point of an agent's valuation distribution.
struct SpmValuation {
  double probability = 0.0;
  std::vector<double> item_values;
};

struct SpmAgentModel {
  std::vector<SpmValuation> support;
};

/// Sequential posted-price sale with an initial simultaneous messaging round.
struct SpmSetting {
  int n_agents = 0;
  int n_items = 0;
  int n_messages = 0;
  std::vector<double> price_grid;
  std::vector<SpmAgentModel> agents;

  /// Throws std::invalid_argument on malformed settings.
  void validate() const;
};

/// Public record of a sale in progress: who was visited, who owns what,
/// and what each agent has paid.
struct SpmHistory {
  std::vector<int> visit_order;
  std::vector<int> item_owner;    // -1 while unallocated
  std::vector<double> payments;   // per agent

  bool visited(int agent) const;
  bool item_available(int item) const;
  int items_remaining() const;
};

/// Deterministic adaptive mechanism: given the agents' messages and the sale
/// history so far, pick the next agent to visit and the posted price per item.
using SpmMechanismFn = std::function<std::pair<int, std::vector<double>>(
    const std::vector<int>& messages, const SpmHistory& history)>;

struct SpmOutcome {
  SpmHistory history;
  double welfare = 0.0;            // sum of values of allocated items
  std::vector<double> utilities;   // per agent: value received minus payments
};

/// Runs a mechanism to completion for fixed types and messages. Each visited
/// agent buys every still-available item priced strictly below their value
/// (indifferent agents decline). Stops when all agents were visited or no
/// items remain. Throws if the mechanism revisits an agent.
SpmOutcome run_spm(const SpmSetting& setting, const SpmMechanismFn& mechanism,
                   const TypeProfile& types, const std::vector<int>& messages);

/// Highest welfare attainable for one type realization (each item to the
/// agent valuing it most).
double spm_max_welfare(const SpmSetting& setting, const TypeProfile& types);

/// One leader commitment. Exactly one representation is filled in, matching
/// the game's LeaderActionSpace kind.
struct LeaderAction {
  int index = -1;
  std::vector<double> weights;
  SpmMechanismFn mechanism;

  static LeaderAction pure(int i) { return LeaderAction{i, {}, nullptr}; }
  static LeaderAction mixed(std::vector<double> w) {
    return LeaderAction{-1, std::move(w), nullptr};
  }
  static LeaderAction adaptive(SpmMechanismFn m) {
    return LeaderAction{-1, {}, std::move(m)};
  }
};

/// Normalizes nonnegative weights into a probability vector. Throws on
/// negative entries or an all-zero vector.
std::vector<double> normalize_weights(const std::vector<double>& weights);

/// Joint payoff: component 0 is the leader's, component i is follower i's.
using PayoffFn = std::function<std::vector<double>(
    const LeaderAction&, const TypeProfile&, const ActionProfile&)>;

enum class SettingKind { normal_form, matrix_design, allocation, mu_spm };

/// A Bayesian game from the leader's point of view: follower type and action
/// spaces, a joint (possibly correlated) type distribution, and the payoff
/// function parameterized by the leader's commitment.
struct BayesianGame {
  std::string name;
  SettingKind kind = SettingKind::normal_form;
  int n_followers = 0;
  std::vector<int> n_types;    // per follower
  std::vector<int> n_actions;  // per follower
  std::vector<std::pair<TypeProfile, double>> type_distribution;
  LeaderActionSpace leader_space;
  PayoffFn payoff;

  // Payoff ranges used for learner scaling and reward normalization.
  double follower_payoff_min = 0.0;
  double follower_payoff_max = 1.0;
  double leader_payoff_max = 1.0;

  // Populated for mu_spm games only.
  SpmSetting spm;

  /// Throws std::invalid_argument if the distribution is not a probability
  /// table over well-formed type profiles.
  void validate() const;

  TypeProfile sample_types(Rng& rng) const;
  double type_probability(const TypeProfile& types) const;
};

struct PayoffPair {
  double leader = 0.0;
  double follower = 0.0;
};

/// Square bimatrix game: the leader picks a row (or a weight vector over
/// rows), the single follower picks a column.
BayesianGame make_normal_form(const std::vector<std::vector<PayoffPair>>& matrix,
                              bool randomized);

BayesianGame make_maintain(bool randomized);
BayesianGame make_escape(bool randomized);

struct FollowerPair {
  double row = 0.0;
  double column = 0.0;
};

/// Two followers play a 2x2 base game the leader can sweeten: payment tau is
/// added to the row player's (A,A) entry and the column player's (B,B) entry.
/// The leader scores 1 whenever the rule on the followers' joint action holds.
BayesianGame make_matrix_design(
    const std::array<std::array<FollowerPair, 2>, 2>& base_matrix,
    const std::vector<double>& payment_set,
    std::function<bool(const ActionProfile&)> leader_reward_rule);

/// The standard instance: base matrix ((3,3),(6,4) / (4,6),(2,2)), payments
/// {0..10}, reward for the followers playing different actions.
BayesianGame make_matrix_design();

/// One follower wants exactly one of n_items (uniformly), sends one of m
/// messages, and the leader allocates an item; both score 1 on a match.
BayesianGame make_simple_allocation(int n_items, int n_messages);

/// Sequential posted-price sale with messages; follower action = message,
/// leader commitment = adaptive mechanism. Leader payoff is the (negated)
/// welfare loss against the realization's first-best.
BayesianGame make_mu_spm(const SpmSetting& setting);

/// Two agents, one item: agent 1 values it 1/2 or 1/(2*epsilon) with
/// probabilities (1-epsilon, epsilon); agent 2 values it 0 or 1 equally.
/// Price grid 0.0..3.0 in steps of 0.1, two messages.
SpmSetting make_agrawal_setting(double epsilon = 0.2);

/// Leader reward as negated welfare loss: exactly 0 at the optimum.
double reward_from_welfare(double realized_welfare, double optimal_welfare);

}  // namespace stackrl
