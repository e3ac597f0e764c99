#pragma once

#include <functional>
#include <optional>
#include <ostream>
#include <vector>

#include "stackrl/game.hpp"
#include "stackrl/rng.hpp"

namespace stackrl {

/// Multiplicative-weights learner for every follower at once. Each follower
/// keeps one weight row per private type; rows start uniform at 1 and only
/// the sampled type's row is touched by an update. Raw payoffs are affinely
/// mapped into [0, 1] before exponentiation so large payoffs cannot overflow.
class FollowerLearner {
 public:
  FollowerLearner(const BayesianGame& game, double epsilon_mw);

  double epsilon() const { return epsilon_; }

  /// Affine map from raw payoffs into [0, 1]. Throws if the result leaves
  /// [0, 1] by more than a rounding margin (the declared range is too small).
  double scale_payoff(double raw) const;

  /// Normalized weight row: the follower's mixed strategy for this type.
  std::vector<double> distribution(int follower, int type) const;

  const std::vector<double>& weight_row(int follower, int type) const {
    return weights_[follower][type];
  }

  ActionProfile sample_actions(const TypeProfile& types, Rng& rng) const;

  /// Scales every weight of the sampled type's row by (1+eps)^scaled_payoff,
  /// one exponent per own action, holding the other followers fixed at their
  /// realized actions. counterfactual_raw[i][a] is follower i's raw payoff
  /// when deviating to action a.
  void update_weights(const TypeProfile& types,
                      const std::vector<std::vector<double>>& counterfactual_raw);

  void reset();

  /// Throws std::logic_error if any weight is non-positive or non-finite.
  void check_invariants() const;

 private:
  double epsilon_;
  double payoff_min_;
  double payoff_max_;
  std::vector<int> n_actions_;
  std::vector<std::vector<std::vector<double>>> weights_;  // [follower][type][action]
};

/// One round of dynamics: sampled types, realized actions, and the realized
/// payoff vector (leader first).
struct PlayRecord {
  TypeProfile types;
  ActionProfile actions;
  std::vector<double> payoffs;
};

/// Full trace of a dynamics run plus the cumulative counterfactual payoffs
/// the regret and equilibrium checks need.
class PlayHistory {
 public:
  PlayHistory(const std::vector<int>& n_types, const std::vector<int>& n_actions);

  /// Appends one round. counterfactual_raw[i][a] must agree with the realized
  /// payoff at the realized action (they come from the same payoff queries).
  void append(PlayRecord record,
              const std::vector<std::vector<double>>& counterfactual_raw);

  int rounds() const { return static_cast<int>(records_.size()); }
  const std::vector<PlayRecord>& records() const { return records_; }
  int type_count(int follower, int type) const {
    return type_counts_[follower][type];
  }
  double realized_sum(int follower, int type) const {
    return realized_sum_[follower][type];
  }
  const std::vector<double>& counterfactual_sum(int follower, int type) const {
    return counterfactual_sum_[follower][type];
  }

  /// Row-per-round delimited text: round, types, actions, payoffs.
  void write_csv(std::ostream& out) const;

 private:
  std::vector<PlayRecord> records_;
  std::vector<std::vector<std::vector<double>>> counterfactual_sum_;
  std::vector<std::vector<double>> realized_sum_;
  std::vector<std::vector<int>> type_counts_;
};

/// The leader's committed reaction: maps the followers' joint action (their
/// messages, in signaling settings) to a leader action. Constant for plain
/// normal-form commitments.
using LeaderStrategyFn = std::function<LeaderAction(const ActionProfile&)>;

LeaderStrategyFn constant_leader(LeaderAction action);

/// Runs rounds of type sampling, action sampling, counterfactual payoff
/// queries against the leader's strategy, and weight updates, mutating the
/// given learner.
PlayHistory run_dynamics(const BayesianGame& game,
                         const LeaderStrategyFn& leader_strategy, int rounds,
                         FollowerLearner& learner, Rng& rng);

/// Convenience overload with a fresh learner.
PlayHistory run_dynamics(const BayesianGame& game,
                         const LeaderStrategyFn& leader_strategy, int rounds,
                         double epsilon_mw, Rng& rng);

/// Empirical joint strategy: for each observed type profile, the observed
/// distribution over action profiles.
struct EmpiricalStrategy {
  std::vector<TypeProfile> type_profiles;
  std::vector<std::vector<std::pair<ActionProfile, double>>> action_distributions;

  const std::vector<std::pair<ActionProfile, double>>* find(
      const TypeProfile& types) const;
};

EmpiricalStrategy empirical_strategy(const PlayHistory& history);

/// Time-averaged external regret of one follower for one type, in raw payoff
/// units; absent when the type was never sampled. Hindsight ties resolve to
/// the lowest-index action.
std::optional<double> external_regret(const PlayHistory& history, int follower,
                                      int type);

struct BcceWitness {
  int follower = -1;
  int type = -1;
  int deviation = -1;
};

struct BcceReport {
  bool holds = false;
  double worst_violation = 0.0;  // raw payoff units; <= 0 means no gain
  BcceWitness witness;
};

/// Exhaustively checks that no follower can gain more than epsilon_raw (raw
/// payoff units) by committing to a fixed action before types are drawn,
/// conditional on each own type, against the joint strategy sigma under the
/// leader's committed strategy. sigma must cover every positive-probability
/// type profile.
BcceReport verify_epsilon_bcce(const BayesianGame& game,
                               const LeaderStrategyFn& leader_strategy,
                               const EmpiricalStrategy& sigma,
                               double epsilon_raw);

}  // namespace stackrl
