#pragma once

#include <functional>
#include <string>
#include <vector>

#include "stackrl/game.hpp"
#include "stackrl/pomdp.hpp"

namespace stackrl {

/// Ground-truth answer for a leader-commitment problem at desk scale.
struct StackelbergSolution {
  LeaderAction leader_strategy;
  std::vector<std::vector<int>> follower_response;  // [follower][type] -> action
  double leader_value = 0.0;
  std::vector<double> follower_values;
  long long enumerated = 0;

  std::string report(const std::string& setting_name) const;
};

/// Enumerates pure leader commitments. Single-follower games best-respond per
/// type (follower ties resolved in the leader's favor, then lowest index).
/// Multi-follower games are scored by the weakly-dominant action profile when
/// every follower has one, and by the leader's worst case over all action
/// profiles otherwise. Supports constant-commitment settings (normal form and
/// matrix design).
StackelbergSolution solve_deterministic_stackelberg(const BayesianGame& game);

/// Grid search over leader mixtures for single-follower normal-form games at
/// the given resolution, followed by three tenfold local refinements around
/// the best grid point. Follower ties are resolved against the leader (weak
/// Stackelberg), so reported values are guaranteed achievable limits.
StackelbergSolution solve_randomized_stackelberg(const BayesianGame& game,
                                                 double grid_resolution);

/// One deterministic branch of a two-agent, one-item posted-price sale:
/// visit first_agent at first_price; if the item survives, visit the other
/// agent at second_price.
struct SpmBranch {
  int first_agent = 0;
  double first_price = 0.0;
  double second_price = 0.0;
};

/// A sale mechanism, optionally switching branch on agent 0's message.
struct SpmMechanismSpec {
  bool uses_messages = false;
  std::vector<SpmBranch> branches;  // one, or one per message of agent 0

  SpmMechanismFn to_mechanism(const SpmSetting& setting) const;
};

struct SpmSolution {
  SpmMechanismSpec mechanism;
  double expected_welfare = 0.0;
  double first_best_welfare = 0.0;
  std::vector<int> agent0_messages;  // equilibrium message per type of agent 0
  bool dominant_messaging = false;   // no message deviation ever pays, any type
  long long enumerated = 0;

  std::string report() const;
};

/// Expected welfare of the efficient allocation under the type distribution.
double first_best_welfare(const SpmSetting& setting);

/// Exhaustive search over deterministic two-agent, one-item mechanisms on the
/// setting's price grid. Without messages the search covers visit orders and
/// prices; with messages each branch is chosen per message of agent 0 and
/// agent 0 plays a per-type best response to the mechanism (ties toward the
/// lower message). Agent 1's messages never influence these mechanisms, so
/// its messaging is fixed at 0.
SpmSolution solve_spm_exhaustive(const SpmSetting& setting, bool with_messages);

/// Best deterministic message-to-item rule for an allocation setting.
struct AllocationSolution {
  std::vector<int> decoder;  // message index -> allocated item
  double value = 0.0;        // expected leader payoff, best-responding sender
  long long enumerated = 0;

  std::string report(const std::string& setting_name) const;
};

/// Enumerates every deterministic decoder. The sender best-responds per type
/// (ties in the leader's favor), so a type scores exactly when some message
/// maps to its item; the optimum covers min(messages, items) items.
AllocationSolution solve_allocation_commitment(const BayesianGame& game);

/// Per-observation action probabilities, one simplex per leader action
/// dimension (the shape LeaderPolicy::action_probs produces).
using PolicyTableFn =
    std::function<std::vector<std::vector<double>>(const Observation&)>;

struct ObjectiveResult {
  double value = 0.0;        // expected normalized reward per sub-episode
  long long enumerated = 0;  // policy configurations expanded

  std::string report(const std::string& setting_name) const;
};

/// Exact training objective for a tabular policy: the expected normalized
/// leader reward per scoring sub-episode of one long episode, with the
/// policy's per-episode caching and the followers' full weight evolution
/// integrated out in closed form. Serves as the finite-difference target for
/// gradient checks. Supported for single-follower settings and for
/// two-follower settings with one type and two actions each; throws when the
/// policy configuration space exceeds 1e5.
ObjectiveResult exact_objective(const BayesianGame& game,
                                const EpisodeSchedule& schedule,
                                double mw_epsilon, const PolicyTableFn& policy);

/// Objective when the followers never learn: expected normalized leader
/// reward per sub-episode under a frozen behavior strategy, indexed as
/// follower_strategy[follower][type] -> action distribution.
double exact_frozen_value(
    const BayesianGame& game, const PolicyTableFn& policy,
    const std::vector<std::vector<std::vector<double>>>& follower_strategy);

}  // namespace stackrl
