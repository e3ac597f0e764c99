#include "stackrl/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace stackrl {

namespace {

void require(bool ok, const std::string& message) {
  if (!ok) throw std::invalid_argument(message);
}

// Enumerates every action profile over the given space sizes.
std::vector<ActionProfile> all_profiles(const std::vector<int>& sizes) {
  std::vector<ActionProfile> profiles = {ActionProfile(sizes.size(), 0)};
  for (std::size_t i = 0; i < sizes.size(); ++i) {
    std::vector<ActionProfile> next;
    next.reserve(profiles.size() * sizes[i]);
    for (const auto& profile : profiles)
      for (int a = 0; a < sizes[i]; ++a) {
        auto extended = profile;
        extended[i] = a;
        next.push_back(std::move(extended));
      }
    profiles = std::move(next);
  }
  return profiles;
}

// Single follower: best response per type, follower ties resolved in the
// leader's favor, then lowest index.
StackelbergSolution solve_single_follower(const BayesianGame& game) {
  StackelbergSolution best;
  best.leader_value = -std::numeric_limits<double>::infinity();
  for (int l = 0; l < game.leader_space.base_actions; ++l) {
    const LeaderAction leader = LeaderAction::pure(l);
    double value = 0.0;
    double follower_value = 0.0;
    std::vector<int> responses(game.n_types[0], 0);
    for (const auto& [types, prob] : game.type_distribution) {
      if (prob <= 0.0) continue;
      int chosen = 0;
      double chosen_follower = -std::numeric_limits<double>::infinity();
      double chosen_leader = -std::numeric_limits<double>::infinity();
      for (int a = 0; a < game.n_actions[0]; ++a) {
        auto payoff = game.payoff(leader, types, {a});
        best.enumerated++;
        const bool better =
            payoff[1] > chosen_follower + 1e-12 ||
            (payoff[1] > chosen_follower - 1e-12 && payoff[0] > chosen_leader);
        if (better) {
          chosen = a;
          chosen_follower = payoff[1];
          chosen_leader = payoff[0];
        }
      }
      responses[types[0]] = chosen;
      value += prob * chosen_leader;
      follower_value += prob * chosen_follower;
    }
    if (value > best.leader_value) {
      best.leader_value = value;
      best.leader_strategy = leader;
      best.follower_response = {responses};
      best.follower_values = {follower_value};
    }
  }
  return best;
}

// Multiple followers: predict the weakly-dominant profile when every
// follower has a weakly dominant action; otherwise score the leader action
// by its worst case over all action profiles.
StackelbergSolution solve_multi_follower(const BayesianGame& game) {
  const auto profiles = all_profiles(game.n_actions);
  StackelbergSolution best;
  best.leader_value = -std::numeric_limits<double>::infinity();
  for (int l = 0; l < game.leader_space.base_actions; ++l) {
    const LeaderAction leader = LeaderAction::pure(l);

    // Weak dominance per follower, checked across every opponent action
    // profile and every positive-probability type profile.
    std::vector<int> dominant(game.n_followers, -1);
    bool all_dominant = true;
    for (int i = 0; i < game.n_followers && all_dominant; ++i) {
      for (int a = 0; a < game.n_actions[i] && dominant[i] < 0; ++a) {
        bool dominates = true;
        for (const auto& profile : profiles) {
          if (!dominates) break;
          for (const auto& [types, prob] : game.type_distribution) {
            if (prob <= 0.0) continue;
            ActionProfile own = profile;
            own[i] = a;
            const double own_payoff = game.payoff(leader, types, own)[i + 1];
            best.enumerated++;
            if (own_payoff < game.payoff(leader, types, profile)[i + 1] - 1e-12) {
              dominates = false;
              break;
            }
          }
        }
        if (dominates) dominant[i] = a;
      }
      if (dominant[i] < 0) all_dominant = false;
    }

    double value;
    std::vector<int> predicted;
    if (all_dominant) {
      predicted = dominant;
      value = 0.0;
      for (const auto& [types, prob] : game.type_distribution)
        value += prob * game.payoff(leader, types, predicted)[0];
    } else {
      value = std::numeric_limits<double>::infinity();
      for (const auto& profile : profiles) {
        double candidate = 0.0;
        for (const auto& [types, prob] : game.type_distribution)
          candidate += prob * game.payoff(leader, types, profile)[0];
        if (candidate < value) {
          value = candidate;
          predicted = profile;
        }
      }
    }

    if (value > best.leader_value) {
      best.leader_value = value;
      best.leader_strategy = leader;
      best.follower_response.assign(game.n_followers, {});
      best.follower_values.assign(game.n_followers, 0.0);
      for (int i = 0; i < game.n_followers; ++i) {
        best.follower_response[i].assign(game.n_types[i], predicted[i]);
        for (const auto& [types, prob] : game.type_distribution)
          best.follower_values[i] +=
              prob * game.payoff(leader, types, predicted)[i + 1];
      }
    }
  }
  return best;
}

}  // namespace

StackelbergSolution solve_deterministic_stackelberg(const BayesianGame& game) {
  require(game.kind == SettingKind::normal_form ||
              game.kind == SettingKind::matrix_design,
          "solve_deterministic_stackelberg: supports constant-commitment "
          "settings only");
  require(game.leader_space.base_actions >= 1,
          "solve_deterministic_stackelberg: empty leader space");
  return game.n_followers == 1 ? solve_single_follower(game)
                               : solve_multi_follower(game);
}

namespace {

struct MixtureEval {
  double leader_value = 0.0;
  double follower_value = 0.0;
  std::vector<int> responses;
};

// Follower best-responds to the mixture; ties go against the leader.
MixtureEval evaluate_mixture(const BayesianGame& game,
                             const std::vector<double>& weights) {
  const LeaderAction leader = LeaderAction::mixed(weights);
  MixtureEval eval;
  eval.responses.assign(game.n_types[0], 0);
  for (const auto& [types, prob] : game.type_distribution) {
    if (prob <= 0.0) continue;
    std::vector<std::vector<double>> payoffs(game.n_actions[0]);
    double best_follower = -std::numeric_limits<double>::infinity();
    for (int a = 0; a < game.n_actions[0]; ++a) {
      payoffs[a] = game.payoff(leader, types, {a});
      best_follower = std::max(best_follower, payoffs[a][1]);
    }
    const double tolerance = 1e-12 * std::max(1.0, std::abs(best_follower));
    double worst_leader = std::numeric_limits<double>::infinity();
    int chosen = 0;
    for (int a = 0; a < game.n_actions[0]; ++a) {
      if (payoffs[a][1] >= best_follower - tolerance &&
          payoffs[a][0] < worst_leader) {
        worst_leader = payoffs[a][0];
        chosen = a;
      }
    }
    eval.responses[types[0]] = chosen;
    eval.leader_value += prob * worst_leader;
    eval.follower_value += prob * best_follower;
  }
  return eval;
}

}  // namespace

StackelbergSolution solve_randomized_stackelberg(const BayesianGame& game,
                                                 double grid_resolution) {
  require(game.kind == SettingKind::normal_form && game.n_followers == 1,
          "solve_randomized_stackelberg: single-follower normal form only");
  require(grid_resolution > 0.0 && grid_resolution <= 0.5,
          "solve_randomized_stackelberg: bad resolution");
  const int k = game.leader_space.base_actions;
  require(k <= 4, "solve_randomized_stackelberg: too many base actions");

  StackelbergSolution best;
  best.leader_value = -std::numeric_limits<double>::infinity();
  std::vector<long long> best_coords;
  long long total = std::llround(1.0 / grid_resolution);

  auto consider = [&](const std::vector<long long>& coords, long long scale) {
    std::vector<double> weights(coords.size());
    for (std::size_t i = 0; i < coords.size(); ++i)
      weights[i] = static_cast<double>(coords[i]) / scale;
    auto eval = evaluate_mixture(game, weights);
    best.enumerated++;
    if (eval.leader_value > best.leader_value) {
      best.leader_value = eval.leader_value;
      best.leader_strategy = LeaderAction::mixed(weights);
      best.follower_response = {eval.responses};
      best.follower_values = {eval.follower_value};
      best_coords = coords;
      return true;
    }
    return false;
  };

  // Coarse pass over the full simplex grid.
  std::vector<long long> coords(k, 0);
  std::function<void(int, long long)> sweep = [&](int dim, long long left) {
    if (dim == k - 1) {
      coords[dim] = left;
      consider(coords, total);
      return;
    }
    for (long long c = 0; c <= left; ++c) {
      coords[dim] = c;
      sweep(dim + 1, left - c);
    }
  };
  sweep(0, total);

  // Three tenfold refinements around the incumbent.
  for (int level = 0; level < 3; ++level) {
    total *= 10;
    for (auto& c : best_coords) c *= 10;
    const auto center = best_coords;
    std::vector<long long> point(k, 0);
    std::function<void(int, long long)> refine = [&](int dim, long long left) {
      if (dim == k - 1) {
        if (left >= 0 && std::llabs(left - center[dim]) <= 10) {
          point[dim] = left;
          consider(point, total);
        }
        return;
      }
      const long long lo = std::max<long long>(0, center[dim] - 10);
      const long long hi = std::min(left, center[dim] + 10);
      for (long long c = lo; c <= hi; ++c) {
        point[dim] = c;
        refine(dim + 1, left - c);
      }
    };
    refine(0, total);
  }
  return best;
}

SpmMechanismFn SpmMechanismSpec::to_mechanism(const SpmSetting& setting) const {
  require(setting.n_items == 1,
          "SpmMechanismSpec: single-item settings only");
  require(!branches.empty(), "SpmMechanismSpec: no branches");
  if (uses_messages)
    require(static_cast<int>(branches.size()) == setting.n_messages,
            "SpmMechanismSpec: one branch per message required");
  auto spec = *this;
  return [spec](const std::vector<int>& messages, const SpmHistory& history)
             -> std::pair<int, std::vector<double>> {
    const SpmBranch& branch =
        spec.uses_messages ? spec.branches[messages[0]] : spec.branches[0];
    if (history.visit_order.empty())
      return {branch.first_agent, {branch.first_price}};
    return {1 - branch.first_agent, {branch.second_price}};
  };
}

double first_best_welfare(const SpmSetting& setting) {
  auto game = make_mu_spm(setting);
  double total = 0.0;
  for (const auto& [types, prob] : game.type_distribution)
    total += prob * spm_max_welfare(setting, types);
  return total;
}

SpmSolution solve_spm_exhaustive(const SpmSetting& setting, bool with_messages) {
  setting.validate();
  require(setting.n_agents == 2 && setting.n_items == 1,
          "solve_spm_exhaustive: two agents and one item only");
  if (with_messages)
    require(setting.n_messages == 2,
            "solve_spm_exhaustive: message search supports two messages");

  const auto game = make_mu_spm(setting);
  const int prices = static_cast<int>(setting.price_grid.size());

  // Every deterministic branch with its exact per-type-profile outcome.
  std::vector<SpmBranch> branches;
  branches.reserve(2 * prices * prices);
  for (int first = 0; first < 2; ++first)
    for (int p1 = 0; p1 < prices; ++p1)
      for (int p2 = 0; p2 < prices; ++p2)
        branches.push_back(
            {first, setting.price_grid[p1], setting.price_grid[p2]});

  struct Outcome {
    double welfare = 0.0;
    double u0 = 0.0;
  };
  const auto& profiles = game.type_distribution;
  std::vector<std::vector<Outcome>> table(
      branches.size(), std::vector<Outcome>(profiles.size()));
  for (std::size_t b = 0; b < branches.size(); ++b) {
    SpmMechanismSpec spec{false, {branches[b]}};
    auto mechanism = spec.to_mechanism(setting);
    for (std::size_t p = 0; p < profiles.size(); ++p) {
      auto outcome = run_spm(setting, mechanism, profiles[p].first, {0, 0});
      table[b][p] = {outcome.welfare, outcome.utilities[0]};
    }
  }

  SpmSolution solution;
  solution.first_best_welfare = first_best_welfare(setting);
  solution.expected_welfare = -std::numeric_limits<double>::infinity();

  if (!with_messages) {
    for (std::size_t b = 0; b < branches.size(); ++b) {
      double welfare = 0.0;
      for (std::size_t p = 0; p < profiles.size(); ++p)
        welfare += profiles[p].second * table[b][p].welfare;
      solution.enumerated++;
      if (welfare > solution.expected_welfare + 1e-12) {
        solution.expected_welfare = welfare;
        solution.mechanism = {false, {branches[b]}};
      }
    }
    return solution;
  }

  // Message-conditioned search: one branch per message of agent 0, who then
  // best-responds with a message per type (ties toward the lower message).
  const int agent0_types = static_cast<int>(setting.agents[0].support.size());

  // Interim utility and welfare of a branch conditional on agent 0's type.
  std::vector<std::vector<double>> interim_u0(
      branches.size(), std::vector<double>(agent0_types, 0.0));
  std::vector<std::vector<double>> interim_welfare(
      branches.size(), std::vector<double>(agent0_types, 0.0));
  std::vector<double> type0_marginal(agent0_types, 0.0);
  for (std::size_t p = 0; p < profiles.size(); ++p)
    type0_marginal[profiles[p].first[0]] += profiles[p].second;
  for (std::size_t b = 0; b < branches.size(); ++b)
    for (std::size_t p = 0; p < profiles.size(); ++p) {
      const int t0 = profiles[p].first[0];
      const double conditional = profiles[p].second / type0_marginal[t0];
      interim_u0[b][t0] += conditional * table[b][p].u0;
      interim_welfare[b][t0] += conditional * table[b][p].welfare;
    }

  for (std::size_t low = 0; low < branches.size(); ++low) {
    for (std::size_t high = 0; high < branches.size(); ++high) {
      solution.enumerated++;
      double welfare = 0.0;
      std::vector<int> messaging(agent0_types, 0);
      bool dominant = true;
      for (int t0 = 0; t0 < agent0_types; ++t0) {
        const double u_low = interim_u0[low][t0];
        const double u_high = interim_u0[high][t0];
        const int chosen = u_high > u_low + 1e-12 ? 1 : 0;
        messaging[t0] = chosen;
        if (std::abs(u_high - u_low) <= 1e-12) dominant = false;
        welfare += type0_marginal[t0] *
                   interim_welfare[chosen == 0 ? low : high][t0];
      }
      const bool better = welfare > solution.expected_welfare + 1e-12;
      const bool equal_but_dominant =
          welfare > solution.expected_welfare - 1e-12 && dominant &&
          !solution.dominant_messaging;
      if (better || equal_but_dominant) {
        solution.expected_welfare = welfare;
        solution.mechanism = {true, {branches[low], branches[high]}};
        solution.agent0_messages = messaging;
        solution.dominant_messaging = dominant;
      }
    }
  }
  return solution;
}

namespace {

// Exact Binomial(total, p) probability mass over 0..total.
std::vector<double> binomial_pmf(int total, double p) {
  std::vector<double> pmf(static_cast<std::size_t>(total) + 1, 0.0);
  if (p <= 0.0) {
    pmf.front() = 1.0;
    return pmf;
  }
  if (p >= 1.0) {
    pmf.back() = 1.0;
    return pmf;
  }
  const double log_p = std::log(p);
  const double log_q = std::log1p(-p);
  const double lg_total = std::lgamma(total + 1.0);
  for (int n = 0; n <= total; ++n)
    pmf[static_cast<std::size_t>(n)] =
        std::exp(lg_total - std::lgamma(n + 1.0) -
                 std::lgamma(total - n + 1.0) + n * log_p + (total - n) * log_q);
  return pmf;
}

std::vector<double> softmax_from_logs(const std::vector<double>& logw) {
  double top = *std::max_element(logw.begin(), logw.end());
  std::vector<double> probs(logw.size());
  double total = 0.0;
  for (std::size_t k = 0; k < logw.size(); ++k) {
    probs[k] = std::exp(logw[k] - top);
    total += probs[k];
  }
  for (double& p : probs) p /= total;
  return probs;
}

// Expected raw reward per scoring sub-episode for one fixed leader
// assignment, single follower. Each multiplicative-weights row depends only
// on how often its type was drawn, so the binomial marginals are exact.
double config_value_single(const BayesianGame& game,
                           const EpisodeSchedule& schedule,
                           const FollowerLearner& scaler, double log_base,
                           const std::vector<LeaderAction>& leader_per_obs,
                           bool per_message_obs) {
  const int m = game.n_actions[0];
  double value = 0.0;
  for (const auto& [types, type_prob] : game.type_distribution) {
    if (type_prob == 0.0) continue;
    std::vector<double> scaled(static_cast<std::size_t>(m));
    std::vector<double> reward(static_cast<std::size_t>(m));
    for (int k = 0; k < m; ++k) {
      const LeaderAction& leader =
          leader_per_obs[per_message_obs ? static_cast<std::size_t>(k) : 0];
      auto payoffs = game.payoff(leader, types, ActionProfile{k});
      scaled[static_cast<std::size_t>(k)] = scaler.scale_payoff(payoffs[1]);
      reward[static_cast<std::size_t>(k)] = payoffs[0];
    }
    auto pmf = binomial_pmf(schedule.equilibrium_rounds, type_prob);
    std::vector<double> logw(static_cast<std::size_t>(m));
    double expected = 0.0;
    for (int n = 0; n <= schedule.equilibrium_rounds; ++n) {
      if (pmf[static_cast<std::size_t>(n)] == 0.0) continue;
      for (int k = 0; k < m; ++k)
        logw[static_cast<std::size_t>(k)] =
            n * scaled[static_cast<std::size_t>(k)] * log_base;
      auto probs = softmax_from_logs(logw);
      double sub = 0.0;
      for (int k = 0; k < m; ++k)
        sub += probs[static_cast<std::size_t>(k)] *
               reward[static_cast<std::size_t>(k)];
      expected += pmf[static_cast<std::size_t>(n)] * sub;
    }
    value += type_prob * expected;
  }
  return value;
}

// Expected raw reward per scoring sub-episode for two followers with one
// type and two actions each. Each follower's weight row is determined by how
// often the opponent's realized action was 0, so the pair of counts is a
// Markov chain on a (t+1) x (t+1) grid.
double config_value_pair(const BayesianGame& game,
                         const EpisodeSchedule& schedule,
                         const FollowerLearner& scaler, double log_base,
                         const LeaderAction& leader) {
  const TypeProfile& types = game.type_distribution[0].first;
  double reward[2][2];
  double scaled[2][2][2];  // [follower][own action][opponent action]
  for (int a = 0; a < 2; ++a)
    for (int b = 0; b < 2; ++b)
      reward[a][b] = game.payoff(leader, types, ActionProfile{a, b})[0];
  for (int i = 0; i < 2; ++i)
    for (int k = 0; k < 2; ++k)
      for (int o = 0; o < 2; ++o) {
        ActionProfile profile(2);
        profile[static_cast<std::size_t>(i)] = k;
        profile[static_cast<std::size_t>(1 - i)] = o;
        scaled[i][k][o] =
            scaler.scale_payoff(game.payoff(leader, types, profile)[i + 1]);
      }

  // Probability this follower plays action 0, given the opponent played
  // action 0 in count0 of t rounds so far.
  auto plays_zero = [&](const double s[2][2], int count0, int t) {
    double l0 = (count0 * s[0][0] + (t - count0) * s[0][1]) * log_base;
    double l1 = (count0 * s[1][0] + (t - count0) * s[1][1]) * log_base;
    double top = std::max(l0, l1);
    double e0 = std::exp(l0 - top);
    return e0 / (e0 + std::exp(l1 - top));
  };

  const int rounds = schedule.equilibrium_rounds;
  std::vector<std::vector<double>> dist{{1.0}};
  for (int t = 0; t < rounds; ++t) {
    std::vector<double> p1(static_cast<std::size_t>(t) + 1);
    std::vector<double> p2(static_cast<std::size_t>(t) + 1);
    for (int x = 0; x <= t; ++x) p1[static_cast<std::size_t>(x)] =
        plays_zero(scaled[0], x, t);
    for (int y = 0; y <= t; ++y) p2[static_cast<std::size_t>(y)] =
        plays_zero(scaled[1], y, t);
    std::vector<std::vector<double>> next(
        static_cast<std::size_t>(t) + 2,
        std::vector<double>(static_cast<std::size_t>(t) + 2, 0.0));
    for (int x = 0; x <= t; ++x)
      for (int y = 0; y <= t; ++y) {
        double mass = dist[static_cast<std::size_t>(x)][static_cast<std::size_t>(y)];
        if (mass == 0.0) continue;
        double a0 = p1[static_cast<std::size_t>(x)];  // follower 1 plays 0
        double b0 = p2[static_cast<std::size_t>(y)];  // follower 2 plays 0
        auto& row_up = next[static_cast<std::size_t>(x) + 1];
        auto& row_same = next[static_cast<std::size_t>(x)];
        row_up[static_cast<std::size_t>(y) + 1] += mass * b0 * a0;
        row_up[static_cast<std::size_t>(y)] += mass * b0 * (1 - a0);
        row_same[static_cast<std::size_t>(y) + 1] += mass * (1 - b0) * a0;
        row_same[static_cast<std::size_t>(y)] += mass * (1 - b0) * (1 - a0);
      }
    dist = std::move(next);
  }

  double value = 0.0;
  for (int x = 0; x <= rounds; ++x)
    for (int y = 0; y <= rounds; ++y) {
      double mass = dist[static_cast<std::size_t>(x)][static_cast<std::size_t>(y)];
      if (mass == 0.0) continue;
      double a0 = plays_zero(scaled[0], x, rounds);
      double b0 = plays_zero(scaled[1], y, rounds);
      value += mass * (a0 * b0 * reward[0][0] + a0 * (1 - b0) * reward[0][1] +
                       (1 - a0) * b0 * reward[1][0] +
                       (1 - a0) * (1 - b0) * reward[1][1]);
    }
  return value;
}

}  // namespace

ObjectiveResult exact_objective(const BayesianGame& game,
                                const EpisodeSchedule& schedule,
                                double mw_epsilon,
                                const PolicyTableFn& policy) {
  schedule.validate();
  require(static_cast<bool>(policy), "exact_objective: missing policy table");
  require(game.kind != SettingKind::mu_spm,
          "exact_objective: mechanism settings exceed the branch cap");

  const auto dims = leader_action_dims(game);
  const int obs_count = observation_key_space(game);
  long double joint_per_obs = 1.0L;
  for (int d : dims) joint_per_obs *= d;
  long double config_count = 1.0L;
  for (int o = 0; o < obs_count; ++o) {
    config_count *= joint_per_obs;
    if (config_count > 1e5L)
      throw std::invalid_argument(
          "exact_objective: policy configuration space exceeds 1e5 branches");
  }

  const bool single = game.n_followers == 1;
  const bool pair2 = game.n_followers == 2 &&
                     game.n_types == std::vector<int>{1, 1} &&
                     game.n_actions == std::vector<int>{2, 2};
  require(single || pair2,
          "exact_objective: unsupported follower structure (single follower, "
          "or two followers with one type and two actions each)");

  const bool per_message_obs = game.kind == SettingKind::allocation;
  std::vector<Observation> obs_list;
  if (per_message_obs) {
    for (int msg = 0; msg < game.n_actions[0]; ++msg)
      obs_list.push_back(observe(
          game, make_subepisode_state(game, false, TypeProfile{0},
                                      ActionProfile{msg}, -1, -1)));
  } else {
    obs_list.push_back(observe(
        game,
        make_subepisode_state(game, false, TypeProfile(game.n_followers, 0),
                              ActionProfile(game.n_followers, 0), -1, -1)));
  }

  std::vector<std::vector<std::vector<double>>> tables;
  for (const Observation& obs : obs_list) {
    auto table = policy(obs);
    require(table.size() == dims.size(),
            "exact_objective: policy table has the wrong dimension count");
    for (std::size_t d = 0; d < dims.size(); ++d)
      require(static_cast<int>(table[d].size()) == dims[d],
              "exact_objective: policy table has the wrong level count");
    tables.push_back(std::move(table));
  }

  FollowerLearner scaler(game, mw_epsilon);
  const double log_base = std::log1p(mw_epsilon);
  const std::size_t slots = obs_list.size() * dims.size();
  std::vector<int> choice(slots, 0);
  ObjectiveResult result;
  double total = 0.0;
  while (true) {
    double config_prob = 1.0;
    for (std::size_t s = 0; s < slots; ++s)
      config_prob *= tables[s / dims.size()][s % dims.size()]
                           [static_cast<std::size_t>(choice[s])];
    if (config_prob > 0.0) {
      std::vector<LeaderAction> leader_per_obs;
      for (std::size_t o = 0; o < obs_list.size(); ++o) {
        std::vector<int> levels(dims.size());
        for (std::size_t d = 0; d < dims.size(); ++d)
          levels[d] = choice[o * dims.size() + d];
        leader_per_obs.push_back(leader_action_from_levels(game, levels));
      }
      double value =
          single ? config_value_single(game, schedule, scaler, log_base,
                                       leader_per_obs, per_message_obs)
                 : config_value_pair(game, schedule, scaler, log_base,
                                     leader_per_obs[0]);
      total += config_prob * value;
    }
    result.enumerated += 1;
    std::size_t s = 0;
    while (s < slots) {
      if (++choice[s] < dims[s % dims.size()]) break;
      choice[s] = 0;
      ++s;
    }
    if (s == slots) break;
  }
  result.value = normalized_reward(game, total);
  return result;
}

double exact_frozen_value(
    const BayesianGame& game, const PolicyTableFn& policy,
    const std::vector<std::vector<std::vector<double>>>& follower_strategy) {
  require(game.kind != SettingKind::mu_spm,
          "exact_frozen_value: mechanism settings unsupported");
  require(static_cast<int>(follower_strategy.size()) == game.n_followers,
          "exact_frozen_value: one strategy per follower required");
  const auto dims = leader_action_dims(game);
  const auto message_profiles = all_profiles(game.n_actions);
  const auto level_profiles = all_profiles(dims);
  double total = 0.0;
  for (const auto& [types, type_prob] : game.type_distribution) {
    if (type_prob == 0.0) continue;
    for (const auto& messages : message_profiles) {
      double mass = type_prob;
      for (int i = 0; i < game.n_followers; ++i)
        mass *= follower_strategy[static_cast<std::size_t>(i)]
                                 [static_cast<std::size_t>(types[i])]
                                 [static_cast<std::size_t>(messages[i])];
      if (mass == 0.0) continue;
      Observation obs = observe(
          game, make_subepisode_state(game, true, types, messages, -1, -1));
      auto table = policy(obs);
      require(table.size() == dims.size(),
              "exact_frozen_value: policy table has the wrong dimension count");
      double expected = 0.0;
      for (const auto& levels : level_profiles) {
        double act_prob = 1.0;
        for (std::size_t d = 0; d < dims.size(); ++d)
          act_prob *= table[d][static_cast<std::size_t>(levels[d])];
        if (act_prob == 0.0) continue;
        std::vector<int> level_vec(levels.begin(), levels.end());
        expected += act_prob *
                    game.payoff(leader_action_from_levels(game, level_vec),
                                types, messages)[0];
      }
      total += mass * expected;
    }
  }
  return normalized_reward(game, total);
}

AllocationSolution solve_allocation_commitment(const BayesianGame& game) {
  if (game.kind != SettingKind::allocation)
    throw std::invalid_argument(
        "solve_allocation_commitment: not an allocation setting");
  const int items = game.n_types.at(0);
  const int messages = game.n_actions.at(0);
  double total_configs = 1.0;
  for (int m = 0; m < messages; ++m) {
    total_configs *= items;
    if (total_configs > 1e6)
      throw std::invalid_argument(
          "solve_allocation_commitment: decoder space exceeds 1e6");
  }

  AllocationSolution best;
  std::vector<int> decoder(messages, 0);
  while (true) {
    best.enumerated += 1;
    double value = 0.0;
    for (const auto& [types, prob] : game.type_distribution) {
      const int wanted = types.at(0);
      for (int m = 0; m < messages; ++m) {
        if (decoder[m] == wanted) {
          value += prob;
          break;
        }
      }
    }
    if (best.decoder.empty() || value > best.value) {
      best.decoder = decoder;
      best.value = value;
    }
    int slot = messages - 1;
    while (slot >= 0 && decoder[slot] == items - 1) decoder[slot--] = 0;
    if (slot < 0) break;
    decoder[slot] += 1;
  }
  return best;
}

std::string AllocationSolution::report(const std::string& setting_name) const {
  std::ostringstream out;
  out << "setting: " << setting_name << "\n";
  out << "decoder (message -> item):";
  for (int item : decoder) out << " " << item;
  out << "\n";
  out << "leader value: " << value << "\n";
  out << "decoders enumerated: " << enumerated << "\n";
  return out.str();
}

std::string ObjectiveResult::report(const std::string& setting_name) const {
  std::ostringstream out;
  out << "setting: " << setting_name << "\n";
  out << "exact objective: " << value << "\n";
  out << "policy configurations: " << enumerated << "\n";
  return out.str();
}

std::string StackelbergSolution::report(const std::string& setting_name) const {
  std::ostringstream out;
  out << "setting: " << setting_name << "\n";
  if (!leader_strategy.weights.empty()) {
    out << "leader mixture:";
    for (double w : leader_strategy.weights) out << " " << w;
    out << "\n";
  } else {
    out << "leader action: " << leader_strategy.index << "\n";
  }
  out << "leader value: " << leader_value << "\n";
  for (std::size_t i = 0; i < follower_response.size(); ++i) {
    out << "follower " << i << " response per type:";
    for (int a : follower_response[i]) out << " " << a;
    out << " (value " << follower_values[i] << ")\n";
  }
  out << "points enumerated: " << enumerated << "\n";
  return out.str();
}

std::string SpmSolution::report() const {
  std::ostringstream out;
  out << "setting: posted-price sale, "
      << (mechanism.uses_messages ? "message-conditioned" : "no messages")
      << "\n";
  for (std::size_t b = 0; b < mechanism.branches.size(); ++b) {
    const auto& branch = mechanism.branches[b];
    if (mechanism.uses_messages) out << "message " << b << ": ";
    out << "visit agent " << branch.first_agent << " at "
        << branch.first_price << ", then the other at " << branch.second_price
        << "\n";
  }
  if (!agent0_messages.empty()) {
    out << "agent 0 equilibrium messages per type:";
    for (int m : agent0_messages) out << " " << m;
    out << (dominant_messaging ? " (dominant)" : " (not dominant)") << "\n";
  }
  out << "expected welfare: " << expected_welfare << "\n";
  out << "first-best welfare: " << first_best_welfare << "\n";
  out << "welfare loss: " << first_best_welfare - expected_welfare << "\n";
  out << "mechanisms enumerated: " << enumerated << "\n";
  return out.str();
}

}  // namespace stackrl
