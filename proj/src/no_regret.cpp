#include "stackrl/no_regret.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <stdexcept>

namespace stackrl {

namespace {

constexpr double kWeightRenormThreshold = 1e30;

void require(bool ok, const std::string& message) {
  if (!ok) throw std::invalid_argument(message);
}

}  // namespace

FollowerLearner::FollowerLearner(const BayesianGame& game, double epsilon_mw)
    : epsilon_(epsilon_mw),
      payoff_min_(game.follower_payoff_min),
      payoff_max_(game.follower_payoff_max),
      n_actions_(game.n_actions) {
  require(epsilon_ > 0.0, "FollowerLearner: epsilon must be positive");
  require(payoff_max_ > payoff_min_,
          "FollowerLearner: degenerate payoff range");
  weights_.resize(game.n_followers);
  for (int i = 0; i < game.n_followers; ++i)
    weights_[i].assign(game.n_types[i],
                       std::vector<double>(game.n_actions[i], 1.0));
}

double FollowerLearner::scale_payoff(double raw) const {
  double scaled = (raw - payoff_min_) / (payoff_max_ - payoff_min_);
  if (scaled < -1e-9 || scaled > 1.0 + 1e-9)
    throw std::invalid_argument(
        "FollowerLearner: payoff outside the declared range; widen the "
        "payoff bounds");
  return std::clamp(scaled, 0.0, 1.0);
}

std::vector<double> FollowerLearner::distribution(int follower,
                                                  int type) const {
  const auto& row = weights_[follower][type];
  double total = 0.0;
  for (double w : row) total += w;
  std::vector<double> probs(row.size());
  for (std::size_t a = 0; a < row.size(); ++a) probs[a] = row[a] / total;
  return probs;
}

ActionProfile FollowerLearner::sample_actions(const TypeProfile& types,
                                              Rng& rng) const {
  ActionProfile actions(weights_.size());
  for (std::size_t i = 0; i < weights_.size(); ++i)
    actions[i] = rng.categorical(weights_[i][types[i]]);
  return actions;
}

void FollowerLearner::update_weights(
    const TypeProfile& types,
    const std::vector<std::vector<double>>& counterfactual_raw) {
  require(counterfactual_raw.size() == weights_.size(),
          "update_weights: one payoff vector per follower required");
  const double base = 1.0 + epsilon_;
  for (std::size_t i = 0; i < weights_.size(); ++i) {
    auto& row = weights_[i][types[i]];
    require(counterfactual_raw[i].size() == row.size(),
            "update_weights: payoff vector size mismatch");
    double largest = 0.0;
    for (std::size_t a = 0; a < row.size(); ++a) {
      row[a] *= std::pow(base, scale_payoff(counterfactual_raw[i][a]));
      largest = std::max(largest, row[a]);
    }
    if (largest > kWeightRenormThreshold) {
      double total = 0.0;
      for (double w : row) total += w;
      const double factor = static_cast<double>(row.size()) / total;
      for (double& w : row) w *= factor;
    }
  }
#ifndef NDEBUG
  check_invariants();
#endif
}

void FollowerLearner::reset() {
  for (auto& follower : weights_)
    for (auto& row : follower) std::fill(row.begin(), row.end(), 1.0);
}

void FollowerLearner::check_invariants() const {
  for (const auto& follower : weights_)
    for (const auto& row : follower)
      for (double w : row)
        if (!(w > 0.0) || !std::isfinite(w))
          throw std::logic_error("FollowerLearner: weight left (0, inf)");
}

PlayHistory::PlayHistory(const std::vector<int>& n_types,
                         const std::vector<int>& n_actions) {
  const std::size_t n = n_types.size();
  require(n_actions.size() == n, "PlayHistory: space size mismatch");
  counterfactual_sum_.resize(n);
  realized_sum_.resize(n);
  type_counts_.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    counterfactual_sum_[i].assign(n_types[i],
                                  std::vector<double>(n_actions[i], 0.0));
    realized_sum_[i].assign(n_types[i], 0.0);
    type_counts_[i].assign(n_types[i], 0);
  }
}

void PlayHistory::append(
    PlayRecord record,
    const std::vector<std::vector<double>>& counterfactual_raw) {
  const std::size_t n = counterfactual_sum_.size();
  require(record.types.size() == n && record.actions.size() == n &&
              record.payoffs.size() == n + 1,
          "PlayHistory: malformed record");
  for (std::size_t i = 0; i < n; ++i) {
    const int t = record.types[i];
    const int a = record.actions[i];
    if (std::abs(counterfactual_raw[i][a] - record.payoffs[i + 1]) > 1e-9)
      throw std::logic_error(
          "PlayHistory: realized payoff disagrees with the counterfactual at "
          "the realized action");
    type_counts_[i][t] += 1;
    realized_sum_[i][t] += record.payoffs[i + 1];
    for (std::size_t k = 0; k < counterfactual_raw[i].size(); ++k)
      counterfactual_sum_[i][t][k] += counterfactual_raw[i][k];
  }
  records_.push_back(std::move(record));
}

void PlayHistory::write_csv(std::ostream& out) const {
  const std::size_t n = counterfactual_sum_.size();
  out << "round";
  for (std::size_t i = 0; i < n; ++i) out << ",type_" << i;
  for (std::size_t i = 0; i < n; ++i) out << ",action_" << i;
  out << ",payoff_leader";
  for (std::size_t i = 0; i < n; ++i) out << ",payoff_" << i;
  out << "\n";
  char buffer[32];
  for (std::size_t round = 0; round < records_.size(); ++round) {
    const auto& record = records_[round];
    out << round;
    for (int t : record.types) out << "," << t;
    for (int a : record.actions) out << "," << a;
    for (double p : record.payoffs) {
      std::snprintf(buffer, sizeof(buffer), "%.12g", p);
      out << "," << buffer;
    }
    out << "\n";
  }
}

LeaderStrategyFn constant_leader(LeaderAction action) {
  return [action](const ActionProfile&) { return action; };
}

PlayHistory run_dynamics(const BayesianGame& game,
                         const LeaderStrategyFn& leader_strategy, int rounds,
                         FollowerLearner& learner, Rng& rng) {
  require(rounds >= 1, "run_dynamics: need at least one round");
  PlayHistory history(game.n_types, game.n_actions);
  std::vector<std::vector<double>> counterfactual(game.n_followers);
  for (int round = 0; round < rounds; ++round) {
    const TypeProfile types = game.sample_types(rng);
    const ActionProfile actions = learner.sample_actions(types, rng);
    for (int i = 0; i < game.n_followers; ++i) {
      counterfactual[i].assign(game.n_actions[i], 0.0);
      ActionProfile deviated = actions;
      for (int a = 0; a < game.n_actions[i]; ++a) {
        deviated[i] = a;
        counterfactual[i][a] =
            game.payoff(leader_strategy(deviated), types, deviated)[i + 1];
      }
    }
    auto payoffs = game.payoff(leader_strategy(actions), types, actions);
    history.append({types, actions, std::move(payoffs)}, counterfactual);
    learner.update_weights(types, counterfactual);
  }
  return history;
}

PlayHistory run_dynamics(const BayesianGame& game,
                         const LeaderStrategyFn& leader_strategy, int rounds,
                         double epsilon_mw, Rng& rng) {
  FollowerLearner learner(game, epsilon_mw);
  return run_dynamics(game, leader_strategy, rounds, learner, rng);
}

const std::vector<std::pair<ActionProfile, double>>* EmpiricalStrategy::find(
    const TypeProfile& types) const {
  for (std::size_t i = 0; i < type_profiles.size(); ++i)
    if (type_profiles[i] == types) return &action_distributions[i];
  return nullptr;
}

EmpiricalStrategy empirical_strategy(const PlayHistory& history) {
  require(history.rounds() > 0, "empirical_strategy: empty history");
  EmpiricalStrategy sigma;
  std::vector<int> profile_counts;
  for (const auto& record : history.records()) {
    std::size_t slot = 0;
    while (slot < sigma.type_profiles.size() &&
           sigma.type_profiles[slot] != record.types)
      ++slot;
    if (slot == sigma.type_profiles.size()) {
      sigma.type_profiles.push_back(record.types);
      sigma.action_distributions.emplace_back();
      profile_counts.push_back(0);
    }
    profile_counts[slot] += 1;
    auto& dist = sigma.action_distributions[slot];
    auto it = std::find_if(dist.begin(), dist.end(), [&](const auto& entry) {
      return entry.first == record.actions;
    });
    if (it == dist.end())
      dist.push_back({record.actions, 1.0});
    else
      it->second += 1.0;
  }
  for (std::size_t slot = 0; slot < sigma.type_profiles.size(); ++slot)
    for (auto& entry : sigma.action_distributions[slot])
      entry.second /= profile_counts[slot];
  return sigma;
}

std::optional<double> external_regret(const PlayHistory& history, int follower,
                                      int type) {
  const int count = history.type_count(follower, type);
  if (count == 0) return std::nullopt;
  const auto& totals = history.counterfactual_sum(follower, type);
  double best = totals[0];
  for (double total : totals) best = std::max(best, total);
  return (best - history.realized_sum(follower, type)) / count;
}

BcceReport verify_epsilon_bcce(const BayesianGame& game,
                               const LeaderStrategyFn& leader_strategy,
                               const EmpiricalStrategy& sigma,
                               double epsilon_raw) {
  // Marginal type probabilities per follower.
  std::vector<std::vector<double>> marginals(game.n_followers);
  for (int i = 0; i < game.n_followers; ++i)
    marginals[i].assign(game.n_types[i], 0.0);
  for (const auto& [types, prob] : game.type_distribution)
    for (int i = 0; i < game.n_followers; ++i) marginals[i][types[i]] += prob;

  BcceReport report;
  report.holds = true;
  report.worst_violation = -std::numeric_limits<double>::infinity();

  for (int i = 0; i < game.n_followers; ++i) {
    for (int t = 0; t < game.n_types[i]; ++t) {
      if (marginals[i][t] <= 0.0) continue;
      // Expected payoff under sigma and under each fixed deviation,
      // conditional on follower i having type t.
      double baseline = 0.0;
      std::vector<double> deviation_value(game.n_actions[i], 0.0);
      for (const auto& [types, prob] : game.type_distribution) {
        if (prob <= 0.0 || types[i] != t) continue;
        const double conditional = prob / marginals[i][t];
        const auto* dist = sigma.find(types);
        require(dist != nullptr,
                "verify_epsilon_bcce: sigma misses a positive-probability "
                "type profile");
        for (const auto& [actions, weight] : *dist) {
          baseline +=
              conditional * weight *
              game.payoff(leader_strategy(actions), types, actions)[i + 1];
          ActionProfile deviated = actions;
          for (int a = 0; a < game.n_actions[i]; ++a) {
            deviated[i] = a;
            deviation_value[a] +=
                conditional * weight *
                game.payoff(leader_strategy(deviated), types, deviated)[i + 1];
          }
        }
      }
      for (int a = 0; a < game.n_actions[i]; ++a) {
        const double violation = deviation_value[a] - baseline;
        if (violation > report.worst_violation) {
          report.worst_violation = violation;
          report.witness = {i, t, a};
        }
        if (violation > epsilon_raw + 1e-12) report.holds = false;
      }
    }
  }
  return report;
}

}  // namespace stackrl
