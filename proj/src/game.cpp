#include "stackrl/game.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace stackrl {

namespace {

void require(bool ok, const std::string& message) {
  if (!ok) throw std::invalid_argument(message);
}

bool finite(double x) { return std::isfinite(x); }

}  // namespace

void SpmSetting::validate() const {
  require(n_agents >= 1, "SpmSetting: n_agents must be >= 1");
  require(n_items >= 1, "SpmSetting: n_items must be >= 1");
  require(n_messages >= 2, "SpmSetting: message space must have size >= 2");
  require(!price_grid.empty(), "SpmSetting: price grid is empty");
  for (std::size_t i = 1; i < price_grid.size(); ++i)
    require(price_grid[i] > price_grid[i - 1],
            "SpmSetting: price grid must be strictly increasing");
  require(static_cast<int>(agents.size()) == n_agents,
          "SpmSetting: one valuation model per agent required");
  for (const auto& agent : agents) {
    require(!agent.support.empty(), "SpmSetting: empty valuation support");
    double total = 0.0;
    for (const auto& point : agent.support) {
      require(point.probability >= 0.0, "SpmSetting: negative probability");
      require(static_cast<int>(point.item_values.size()) == n_items,
              "SpmSetting: valuation size does not match item count");
      for (double v : point.item_values)
        require(finite(v) && v >= 0.0, "SpmSetting: item values must be >= 0");
      total += point.probability;
    }
    require(std::abs(total - 1.0) <= 1e-12,
            "SpmSetting: valuation probabilities must sum to 1");
  }
}

bool SpmHistory::visited(int agent) const {
  return std::find(visit_order.begin(), visit_order.end(), agent) !=
         visit_order.end();
}

bool SpmHistory::item_available(int item) const {
  return item_owner[item] < 0;
}

int SpmHistory::items_remaining() const {
  int left = 0;
  for (int owner : item_owner)
    if (owner < 0) ++left;
  return left;
}

SpmOutcome run_spm(const SpmSetting& setting, const SpmMechanismFn& mechanism,
                   const TypeProfile& types, const std::vector<int>& messages) {
  require(static_cast<bool>(mechanism), "run_spm: null mechanism");
  require(static_cast<int>(types.size()) == setting.n_agents,
          "run_spm: type profile size mismatch");
  require(static_cast<int>(messages.size()) == setting.n_agents,
          "run_spm: message profile size mismatch");

  SpmOutcome outcome;
  outcome.history.item_owner.assign(setting.n_items, -1);
  outcome.history.payments.assign(setting.n_agents, 0.0);
  outcome.utilities.assign(setting.n_agents, 0.0);

  while (static_cast<int>(outcome.history.visit_order.size()) <
             setting.n_agents &&
         outcome.history.items_remaining() > 0) {
    auto [agent, prices] = mechanism(messages, outcome.history);
    require(agent >= 0 && agent < setting.n_agents,
            "run_spm: mechanism selected an agent out of range");
    if (outcome.history.visited(agent))
      throw std::runtime_error("run_spm: mechanism revisited an agent");
    require(static_cast<int>(prices.size()) == setting.n_items,
            "run_spm: price vector size mismatch");

    const auto& values =
        setting.agents[agent].support[types[agent]].item_values;
    outcome.history.visit_order.push_back(agent);
    for (int item = 0; item < setting.n_items; ++item) {
      if (!outcome.history.item_available(item)) continue;
      // Buy only at strict gain; indifferent agents decline.
      if (values[item] - prices[item] > 0.0) {
        outcome.history.item_owner[item] = agent;
        outcome.history.payments[agent] += prices[item];
        outcome.utilities[agent] += values[item] - prices[item];
        outcome.welfare += values[item];
      }
    }
  }
  return outcome;
}

double spm_max_welfare(const SpmSetting& setting, const TypeProfile& types) {
  double total = 0.0;
  for (int item = 0; item < setting.n_items; ++item) {
    double best = 0.0;
    for (int agent = 0; agent < setting.n_agents; ++agent) {
      const auto& values =
          setting.agents[agent].support[types[agent]].item_values;
      best = std::max(best, values[item]);
    }
    total += best;
  }
  return total;
}

std::vector<double> normalize_weights(const std::vector<double>& weights) {
  double total = 0.0;
  for (double w : weights) {
    require(finite(w) && w >= 0.0, "leader weights must be nonnegative");
    total += w;
  }
  require(total > 0.0, "leader weight vector must not be all zero");
  std::vector<double> out(weights.size());
  for (std::size_t i = 0; i < weights.size(); ++i) out[i] = weights[i] / total;
  return out;
}

void BayesianGame::validate() const {
  require(n_followers >= 1, "BayesianGame: needs at least one follower");
  require(static_cast<int>(n_types.size()) == n_followers,
          "BayesianGame: type space count mismatch");
  require(static_cast<int>(n_actions.size()) == n_followers,
          "BayesianGame: action space count mismatch");
  for (int k : n_types) require(k >= 1, "BayesianGame: empty type space");
  for (int k : n_actions) require(k >= 1, "BayesianGame: empty action space");
  require(!type_distribution.empty(), "BayesianGame: empty type distribution");
  double total = 0.0;
  for (const auto& [profile, prob] : type_distribution) {
    require(static_cast<int>(profile.size()) == n_followers,
            "BayesianGame: type profile size mismatch");
    for (int i = 0; i < n_followers; ++i)
      require(profile[i] >= 0 && profile[i] < n_types[i],
              "BayesianGame: type index out of range");
    require(prob >= 0.0, "BayesianGame: negative type probability");
    total += prob;
  }
  require(std::abs(total - 1.0) <= 1e-12,
          "BayesianGame: type probabilities must sum to 1");
  require(static_cast<bool>(payoff), "BayesianGame: payoff not set");
}

TypeProfile BayesianGame::sample_types(Rng& rng) const {
  double u = rng.uniform01();
  double acc = 0.0;
  for (const auto& [profile, prob] : type_distribution) {
    acc += prob;
    if (u < acc) return profile;
  }
  return type_distribution.back().first;
}

double BayesianGame::type_probability(const TypeProfile& types) const {
  for (const auto& [profile, prob] : type_distribution)
    if (profile == types) return prob;
  return 0.0;
}

BayesianGame make_normal_form(const std::vector<std::vector<PayoffPair>>& matrix,
                              bool randomized) {
  require(!matrix.empty(), "make_normal_form: empty matrix");
  const int k = static_cast<int>(matrix.size());
  double follower_min = std::numeric_limits<double>::infinity();
  double follower_max = -std::numeric_limits<double>::infinity();
  double leader_max = -std::numeric_limits<double>::infinity();
  for (const auto& row : matrix) {
    require(static_cast<int>(row.size()) == k, "make_normal_form: not square");
    for (const auto& cell : row) {
      require(finite(cell.leader) && finite(cell.follower),
              "make_normal_form: non-finite payoff");
      follower_min = std::min(follower_min, cell.follower);
      follower_max = std::max(follower_max, cell.follower);
      leader_max = std::max(leader_max, cell.leader);
    }
  }

  BayesianGame game;
  game.name = randomized ? "normal_form_randomized" : "normal_form";
  game.kind = SettingKind::normal_form;
  game.n_followers = 1;
  game.n_types = {1};
  game.n_actions = {k};
  game.type_distribution = {{TypeProfile{0}, 1.0}};
  game.leader_space = {randomized ? LeaderKind::weight_vector
                                  : LeaderKind::discrete,
                       k};
  game.follower_payoff_min = follower_min;
  game.follower_payoff_max = follower_max;
  game.leader_payoff_max = leader_max;
  game.payoff = [matrix, k](const LeaderAction& leader, const TypeProfile&,
                            const ActionProfile& actions) {
    const int column = actions[0];
    require(column >= 0 && column < k, "payoff: follower action out of range");
    if (!leader.weights.empty()) {
      auto p = normalize_weights(leader.weights);
      require(static_cast<int>(p.size()) == k,
              "payoff: leader weight vector size mismatch");
      double l = 0.0, f = 0.0;
      for (int row = 0; row < k; ++row) {
        l += p[row] * matrix[row][column].leader;
        f += p[row] * matrix[row][column].follower;
      }
      return std::vector<double>{l, f};
    }
    require(leader.index >= 0 && leader.index < k,
            "payoff: leader action out of range");
    const auto& cell = matrix[leader.index][column];
    return std::vector<double>{cell.leader, cell.follower};
  };
  game.validate();
  return game;
}

BayesianGame make_maintain(bool randomized) {
  auto game = make_normal_form(
      {
          {{20, 15}, {0, 0}, {0, 0}},
          {{30, 0}, {10, 5}, {0, 0}},
          {{0, 0}, {0, 0}, {5, 10}},
      },
      randomized);
  game.name = randomized ? "maintain_randomized" : "maintain";
  return game;
}

BayesianGame make_escape(bool randomized) {
  auto game = make_normal_form(
      {
          {{15, 15}, {10, 10}, {0, 0}},
          {{10, 10}, {10, 10}, {0, 0}},
          {{0, 0}, {0, 0}, {30, 30}},
      },
      randomized);
  game.name = randomized ? "escape_randomized" : "escape";
  return game;
}

BayesianGame make_matrix_design(
    const std::array<std::array<FollowerPair, 2>, 2>& base_matrix,
    const std::vector<double>& payment_set,
    std::function<bool(const ActionProfile&)> leader_reward_rule) {
  require(!payment_set.empty(), "make_matrix_design: empty payment set");
  for (double tau : payment_set)
    require(finite(tau) && tau >= 0.0,
            "make_matrix_design: payments must be nonnegative");
  require(static_cast<bool>(leader_reward_rule),
          "make_matrix_design: null reward rule");

  double follower_min = std::numeric_limits<double>::infinity();
  double follower_max = -std::numeric_limits<double>::infinity();
  const double tau_max = *std::max_element(payment_set.begin(), payment_set.end());
  for (int r = 0; r < 2; ++r)
    for (int c = 0; c < 2; ++c) {
      follower_min = std::min({follower_min, base_matrix[r][c].row,
                               base_matrix[r][c].column});
      follower_max = std::max({follower_max, base_matrix[r][c].row,
                               base_matrix[r][c].column});
    }
  follower_max = std::max({follower_max, base_matrix[0][0].row + tau_max,
                           base_matrix[1][1].column + tau_max});

  BayesianGame game;
  game.name = "matrix_design";
  game.kind = SettingKind::matrix_design;
  game.n_followers = 2;
  game.n_types = {1, 1};
  game.n_actions = {2, 2};
  game.type_distribution = {{TypeProfile{0, 0}, 1.0}};
  game.leader_space = {LeaderKind::discrete,
                       static_cast<int>(payment_set.size())};
  game.follower_payoff_min = follower_min;
  game.follower_payoff_max = follower_max;
  game.leader_payoff_max = 1.0;
  game.payoff = [base_matrix, payment_set, leader_reward_rule](
                    const LeaderAction& leader, const TypeProfile&,
                    const ActionProfile& actions) {
    require(leader.index >= 0 &&
                leader.index < static_cast<int>(payment_set.size()),
            "payoff: payment index out of range");
    const double tau = payment_set[leader.index];
    const int r = actions[0];
    const int c = actions[1];
    require(r >= 0 && r < 2 && c >= 0 && c < 2,
            "payoff: follower action out of range");
    double row_payoff = base_matrix[r][c].row;
    double col_payoff = base_matrix[r][c].column;
    if (r == 0 && c == 0) row_payoff += tau;
    if (r == 1 && c == 1) col_payoff += tau;
    const double leader_payoff = leader_reward_rule(actions) ? 1.0 : 0.0;
    return std::vector<double>{leader_payoff, row_payoff, col_payoff};
  };
  game.validate();
  return game;
}

BayesianGame make_matrix_design() {
  std::array<std::array<FollowerPair, 2>, 2> base = {{
      {{{3, 3}, {6, 4}}},
      {{{4, 6}, {2, 2}}},
  }};
  std::vector<double> payments;
  for (int tau = 0; tau <= 10; ++tau) payments.push_back(tau);
  return make_matrix_design(base, payments, [](const ActionProfile& actions) {
    return actions[0] != actions[1];
  });
}

BayesianGame make_simple_allocation(int n_items, int n_messages) {
  require(n_items >= 1, "make_simple_allocation: n_items must be >= 1");
  require(n_messages >= 1, "make_simple_allocation: n_messages must be >= 1");

  BayesianGame game;
  game.name = "allocation";
  game.kind = SettingKind::allocation;
  game.n_followers = 1;
  game.n_types = {n_items};
  game.n_actions = {n_messages};
  game.type_distribution.reserve(n_items);
  for (int t = 0; t < n_items; ++t)
    game.type_distribution.push_back({TypeProfile{t}, 1.0 / n_items});
  game.leader_space = {LeaderKind::discrete, n_items};
  game.follower_payoff_min = 0.0;
  game.follower_payoff_max = 1.0;
  game.leader_payoff_max = 1.0;
  game.payoff = [n_items](const LeaderAction& leader, const TypeProfile& types,
                          const ActionProfile&) {
    require(leader.index >= 0 && leader.index < n_items,
            "payoff: allocated item out of range");
    const double hit = leader.index == types[0] ? 1.0 : 0.0;
    return std::vector<double>{hit, hit};
  };
  game.validate();
  return game;
}

BayesianGame make_mu_spm(const SpmSetting& setting) {
  setting.validate();

  double value_max = 0.0;
  for (const auto& agent : setting.agents)
    for (const auto& point : agent.support)
      for (double v : point.item_values) value_max = std::max(value_max, v);

  BayesianGame game;
  game.name = "mu_spm";
  game.kind = SettingKind::mu_spm;
  game.n_followers = setting.n_agents;
  game.n_types.reserve(setting.n_agents);
  game.n_actions.assign(setting.n_agents, setting.n_messages);
  for (const auto& agent : setting.agents)
    game.n_types.push_back(static_cast<int>(agent.support.size()));

  // Independent per-agent valuations expanded into the joint table.
  std::vector<std::pair<TypeProfile, double>> table = {{TypeProfile{}, 1.0}};
  for (const auto& agent : setting.agents) {
    std::vector<std::pair<TypeProfile, double>> next;
    next.reserve(table.size() * agent.support.size());
    for (const auto& [profile, prob] : table)
      for (std::size_t t = 0; t < agent.support.size(); ++t) {
        auto extended = profile;
        extended.push_back(static_cast<int>(t));
        next.push_back({std::move(extended), prob * agent.support[t].probability});
      }
    table = std::move(next);
  }
  game.type_distribution = std::move(table);

  game.leader_space = {LeaderKind::mechanism, 0};
  game.follower_payoff_min = 0.0;
  game.follower_payoff_max = value_max;
  game.leader_payoff_max = 1.0;
  game.spm = setting;
  game.payoff = [setting](const LeaderAction& leader, const TypeProfile& types,
                          const ActionProfile& messages) {
    require(static_cast<bool>(leader.mechanism),
            "payoff: mu_spm leader action must carry a mechanism");
    auto outcome = run_spm(setting, leader.mechanism, types, messages);
    std::vector<double> payoffs(setting.n_agents + 1);
    payoffs[0] =
        reward_from_welfare(outcome.welfare, spm_max_welfare(setting, types));
    for (int i = 0; i < setting.n_agents; ++i)
      payoffs[i + 1] = outcome.utilities[i];
    return payoffs;
  };
  game.validate();
  return game;
}

SpmSetting make_agrawal_setting(double epsilon) {
  require(epsilon > 0.0 && epsilon < 1.0,
          "make_agrawal_setting: epsilon must lie in (0, 1)");
  SpmSetting setting;
  setting.n_agents = 2;
  setting.n_items = 1;
  setting.n_messages = 2;
  for (int i = 0; i <= 30; ++i) setting.price_grid.push_back(i / 10.0);
  setting.agents.resize(2);
  setting.agents[0].support = {{1.0 - epsilon, {0.5}},
                               {epsilon, {1.0 / (2.0 * epsilon)}}};
  setting.agents[1].support = {{0.5, {0.0}}, {0.5, {1.0}}};
  setting.validate();
  return setting;
}

double reward_from_welfare(double realized_welfare, double optimal_welfare) {
  require(optimal_welfare >= realized_welfare - 1e-9,
          "reward_from_welfare: realized welfare exceeds the optimum");
  return -(optimal_welfare - realized_welfare);
}

}  // namespace stackrl
