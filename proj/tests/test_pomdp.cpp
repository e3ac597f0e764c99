#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <map>
#include <sstream>

#include "stackrl/game.hpp"
#include "stackrl/no_regret.hpp"
#include "stackrl/oracle.hpp"
#include "stackrl/pomdp.hpp"

using namespace stackrl;

namespace {

/// Plays a fixed action per observation key, with the per-episode cache
/// semantics a real policy would have.
struct ScriptedPolicy : PolicyHandle {
  std::map<std::uint64_t, std::vector<int>> script;
  int queries = 0;
  int episodes = 0;
  std::map<std::uint64_t, std::vector<int>> cache;

  void begin_episode() override {
    cache.clear();
    ++episodes;
  }

  PolicyDecision act(const Observation& obs,
                     const std::vector<std::vector<std::uint8_t>>&, ActMode,
                     Rng&) override {
    ++queries;
    PolicyDecision decision;
    auto hit = cache.find(obs.key);
    if (hit != cache.end()) {
      decision.action = hit->second;
      decision.first_use = false;
      return decision;
    }
    auto entry = script.find(obs.key);
    REQUIRE(entry != script.end());
    decision.action = entry->second;
    decision.first_use = true;
    cache.emplace(obs.key, decision.action);
    return decision;
  }
};

/// Samples uniformly among mask-allowed levels on first use, then sticks to
/// the cached choice.
struct RandomPolicy : PolicyHandle {
  std::map<std::uint64_t, std::vector<int>> cache;

  void begin_episode() override { cache.clear(); }

  PolicyDecision act(const Observation& obs,
                     const std::vector<std::vector<std::uint8_t>>& masks,
                     ActMode, Rng& rng) override {
    PolicyDecision decision;
    auto hit = cache.find(obs.key);
    if (hit != cache.end()) {
      decision.action = hit->second;
      decision.first_use = false;
      return decision;
    }
    for (const auto& mask : masks) {
      std::vector<int> allowed;
      for (int level = 0; level < static_cast<int>(mask.size()); ++level)
        if (mask[static_cast<std::size_t>(level)]) allowed.push_back(level);
      REQUIRE(!allowed.empty());
      decision.action.push_back(
          allowed[static_cast<std::size_t>(rng.uniform_int(
              static_cast<int>(allowed.size())))]);
    }
    decision.first_use = true;
    cache.emplace(obs.key, decision.action);
    return decision;
  }
};

}  // namespace

TEST_CASE("schedules require at least one sub-episode per phase") {
  CHECK_THROWS(EpisodeSchedule{0, 1}.validate());
  CHECK_THROWS(EpisodeSchedule{1, 0}.validate());
  CHECK_NOTHROW(EpisodeSchedule{1, 1}.validate());
}

TEST_CASE("leader action factorization per setting") {
  CHECK(leader_action_dims(make_maintain(false)) == std::vector<int>{3});
  CHECK(leader_action_dims(make_maintain(true)) ==
        std::vector<int>(3, kWeightLevels));
  CHECK(leader_action_dims(make_matrix_design()) == std::vector<int>{11});
  CHECK(leader_action_dims(make_simple_allocation(3, 3)) ==
        std::vector<int>{3});
  auto spm_dims = leader_action_dims(make_mu_spm(make_agrawal_setting()));
  CHECK(spm_dims == std::vector<int>({2, 31}));
}

TEST_CASE("observations hide the phase and the probe bookkeeping") {
  auto game = make_mu_spm(make_agrawal_setting());
  auto equilibrium =
      make_subepisode_state(game, false, {1, 0}, {1, 0}, 0, 1);
  auto reward = make_subepisode_state(game, true, {0, 1}, {1, 0}, -1, -1);
  auto obs_a = observe(game, equilibrium);
  auto obs_b = observe(game, reward);
  CHECK(obs_a.key == obs_b.key);
  CHECK(obs_a.features == obs_b.features);
  CHECK(static_cast<int>(obs_a.features.size()) ==
        observation_feature_dim(game));

  // Different public information must produce different cache keys.
  auto other_messages = observe(
      game, make_subepisode_state(game, true, {0, 1}, {0, 0}, -1, -1));
  CHECK(other_messages.key != obs_a.key);
  auto visited = equilibrium;
  visited.visited[1] = true;
  CHECK(observe(game, visited).key != obs_a.key);

  auto maintain = make_maintain(false);
  auto m0 = observe(maintain, make_subepisode_state(maintain, false, {0}, {2}, 0, 2));
  auto m1 = observe(maintain, make_subepisode_state(maintain, true, {0}, {1}, -1, -1));
  CHECK(m0.key == m1.key);
  CHECK(m0.features == std::vector<double>{1.0});

  auto alloc = make_simple_allocation(3, 3);
  auto a2 = observe(alloc, make_subepisode_state(alloc, true, {0}, {2}, -1, -1));
  CHECK(a2.key == 2);
  CHECK(a2.features == std::vector<double>({0.0, 0.0, 1.0}));
}

TEST_CASE("critic features expose phase, strategies, types, and messages") {
  auto game = make_maintain(false);
  FollowerLearner learner(game, 0.1);
  auto state = make_subepisode_state(game, false, {0}, {1}, 0, 1);
  auto f = state_features(game, learner, state);
  REQUIRE(static_cast<int>(f.size()) == state_feature_dim(game));
  CHECK(f[0] == 0.0);
  // Uniform initial strategy occupies the next three slots.
  CHECK(f[1] == doctest::Approx(1.0 / 3));
  auto reward_state = make_subepisode_state(game, true, {0}, {1}, -1, -1);
  CHECK(state_features(game, learner, reward_state)[0] == 1.0);
}

TEST_CASE("row-pick rollouts count one query per counterfactual action") {
  auto game = make_maintain(false);
  EpisodeRunner runner(game, {5, 2});
  ScriptedPolicy policy;
  policy.script[0] = {0};
  auto trace = runner.run_episode(policy, 123);
  // 5 rounds x 3 probes + 2 scoring sub-episodes, one step each.
  CHECK(trace.env_steps() == 17);
  CHECK(policy.queries == 17);
  CHECK(policy.episodes == 1);
  int first_uses = 0;
  for (const auto& rec : trace.records) first_uses += rec.first_use ? 1 : 0;
  CHECK(first_uses == 1);
}

TEST_CASE("allocation probes one rollout per message") {
  auto game = make_simple_allocation(3, 3);
  EpisodeRunner runner(game, {1, 1});
  ScriptedPolicy policy;
  policy.script[0] = {0};
  policy.script[1] = {1};
  policy.script[2] = {2};
  auto trace = runner.run_episode(policy, 9);
  CHECK(trace.env_steps() == 4);
}

TEST_CASE("posted-price probes run one mechanism rollout per message pair") {
  auto game = make_mu_spm(make_agrawal_setting());
  EpisodeRunner runner(game, {1, 1});
  ScriptedPolicy policy;
  // Offer at the top of the grid: nobody ever buys, every rollout visits
  // both agents, so the query count is exact.
  for (std::uint64_t m0 = 0; m0 < 2; ++m0)
    for (std::uint64_t m1 = 0; m1 < 2; ++m1) {
      policy.script[m0 + 2 * m1] = {0, 30};
      policy.script[m0 + 2 * m1 + 4] = {1, 30};       // agent 0 visited
      policy.script[m0 + 2 * m1 + 8] = {0, 30};       // agent 1 visited
    }
  auto trace = runner.run_episode(policy, 4);
  // 1 round x (2 followers x 2 actions) x 2 steps + 1 scoring x 2 steps.
  CHECK(trace.env_steps() == 10);
  CHECK(trace.reward_subepisodes == 1);
  // A failed sale forfeits the whole first-best welfare.
  CHECK(trace.total_reward < 0.0);
}

TEST_CASE("rewards appear only at terminal steps of scoring sub-episodes") {
  auto game = make_mu_spm(make_agrawal_setting());
  EpisodeRunner runner(game, {20, 10});
  RandomPolicy policy;
  auto trace = runner.run_episode(policy, 77);
  for (std::size_t i = 0; i < trace.records.size(); ++i) {
    const auto& rec = trace.records[i];
    if (!rec.reward_phase) CHECK(rec.reward == 0.0);
    if (rec.reward != 0.0) {
      CHECK(rec.reward_phase);
      CHECK(rec.terminal);
    }
    CHECK(static_cast<int>(rec.obs.features.size()) ==
          observation_feature_dim(game));
    CHECK(static_cast<int>(rec.state_features.size()) ==
          state_feature_dim(game));
    CHECK(rec.state_features[0] == (rec.reward_phase ? 1.0 : 0.0));
  }
}

TEST_CASE("a fixed leader row drives the follower to its best response") {
  auto game = make_maintain(false);
  EpisodeRunner runner(game, {100, 1});
  ScriptedPolicy policy;
  policy.script[0] = {0};
  Rng rng(5);
  FollowerLearner learner(game, 0.1);
  EpisodeTrace trace;
  policy.begin_episode();
  runner.run_equilibrium_phase(learner, policy, rng, ActMode::sample, 0, trace);
  double expected = std::pow(1.1, 100) / (std::pow(1.1, 100) + 2.0);
  CHECK(learner.distribution(0, 0)[0] == doctest::Approx(expected).epsilon(1e-9));
}

TEST_CASE("a truthful decoder teaches each type its own message") {
  auto game = make_simple_allocation(3, 3);
  EpisodeRunner runner(game, {1000, 1});
  ScriptedPolicy policy;
  policy.script[0] = {0};
  policy.script[1] = {1};
  policy.script[2] = {2};
  Rng rng(11);
  FollowerLearner learner(game, 0.1);
  EpisodeTrace trace;
  policy.begin_episode();
  runner.run_equilibrium_phase(learner, policy, rng, ActMode::sample, 0, trace);
  for (int t = 0; t < 3; ++t)
    CHECK(learner.distribution(0, t)[static_cast<std::size_t>(t)] > 0.95);
}

TEST_CASE("converged payment play earns the designer reward every time") {
  auto game = make_matrix_design();
  double eps = std::pow(1.1, 11) - 1.0;
  EpisodeRunner runner(game, {100, 10}, eps);
  ScriptedPolicy policy;
  policy.script[0] = {4};
  auto trace = runner.run_episode(policy, 3);
  CHECK(trace.mean_reward() >= 0.9);
}

TEST_CASE("uniform one-message allocation succeeds a third of the time") {
  auto game = make_simple_allocation(3, 1);
  EpisodeRunner runner(game, {1, 3000});
  RandomPolicy policy;
  Rng rng(21);
  FollowerLearner learner(game, 0.1);
  EpisodeTrace trace;
  policy.begin_episode();
  runner.run_reward_phase(learner, policy, rng, ActMode::sample, 0, trace);
  CHECK(trace.reward_subepisodes == 3000);
  CHECK(trace.mean_reward() == doctest::Approx(1.0 / 3).epsilon(0.15));
  CHECK(std::abs(trace.mean_reward() - 1.0 / 3) < 0.05);
}

TEST_CASE("posted-price machine follows the buy and tie rules") {
  auto game = make_mu_spm(make_agrawal_setting());

  // High-value first agent buys at 1.0: strict gain, sale ends the rollout.
  auto state = make_subepisode_state(game, true, {1, 1}, {0, 0}, -1, -1);
  auto bought = step(game, state, {0, 10});
  CHECK(bought.done);
  CHECK(bought.state.item_owner[0] == 0);
  CHECK(bought.terminal_payoffs[0] == doctest::Approx(0.0));
  CHECK(bought.terminal_payoffs[1] == doctest::Approx(1.5));
  CHECK(bought.reward == doctest::Approx(0.0));

  // Low-value first agent declines at 1.0 and the rollout continues.
  auto low = make_subepisode_state(game, true, {0, 1}, {0, 0}, -1, -1);
  auto declined = step(game, low, {0, 10});
  CHECK(!declined.done);
  CHECK(declined.state.item_owner[0] == -1);
  CHECK(declined.state.visited[0]);
  auto second = step(game, declined.state, {1, 0});
  CHECK(second.done);
  CHECK(second.state.item_owner[0] == 1);
  CHECK(second.terminal_payoffs[0] == doctest::Approx(0.0));

  // A zero-value agent offered price zero ties and declines.
  auto tie = make_subepisode_state(game, true, {1, 0}, {0, 0}, -1, -1);
  auto passed = step(game, tie, {1, 0});
  CHECK(!passed.done);
  CHECK(passed.state.item_owner[0] == -1);
  // The item stays available for the other agent.
  auto finish = step(game, passed.state, {0, 0});
  CHECK(finish.done);
  CHECK(finish.terminal_payoffs[0] == doctest::Approx(0.0));
  CHECK(finish.terminal_payoffs[1] == doctest::Approx(2.5));
}

TEST_CASE("invalid actions and overlong rollouts are rejected") {
  auto game = make_mu_spm(make_agrawal_setting());
  auto state = make_subepisode_state(game, true, {0, 0}, {0, 0}, -1, -1);
  CHECK_THROWS_AS(step(game, state, {0}), std::invalid_argument);
  CHECK_THROWS_AS(step(game, state, {2, 0}), std::invalid_argument);
  CHECK_THROWS_AS(step(game, state, {0, 31}), std::invalid_argument);
  auto once = step(game, state, {0, 30});
  CHECK_THROWS_AS(step(game, once.state, {0, 30}), std::invalid_argument);

  auto maintain = make_maintain(false);
  auto mstate = make_subepisode_state(maintain, true, {0}, {0}, -1, -1);
  auto done = step(maintain, mstate, {0});
  CHECK(done.done);
  CHECK_THROWS_AS(step(maintain, done.state, {0}), std::runtime_error);

  auto masked = action_masks(game, once.state);
  CHECK(masked[0][0] == 0);
  CHECK(masked[0][1] == 1);
}

TEST_CASE("mechanism rollouts match the reference sale procedure") {
  auto setting = make_agrawal_setting();
  auto game = make_mu_spm(setting);
  for (int first : {0, 1})
    for (int p1 : {0, 10})
      for (int p2 : {0, 5}) {
        SpmMechanismSpec spec;
        spec.uses_messages = false;
        spec.branches = {SpmBranch{first, setting.price_grid[p1],
                                   setting.price_grid[p2]}};
        auto leader = LeaderAction::adaptive(spec.to_mechanism(setting));
        for (int t0 = 0; t0 < 2; ++t0)
          for (int t1 = 0; t1 < 2; ++t1) {
            TypeProfile types{t0, t1};
            ActionProfile messages{0, 0};
            auto expected = game.payoff(leader, types, messages);
            auto state =
                make_subepisode_state(game, true, types, messages, -1, -1);
            auto res = step(game, state, {first, p1});
            if (!res.done) res = step(game, res.state, {1 - first, p2});
            REQUIRE(res.done);
            REQUIRE(res.terminal_payoffs.size() == expected.size());
            for (std::size_t c = 0; c < expected.size(); ++c)
              CHECK(res.terminal_payoffs[c] ==
                    doctest::Approx(expected[c]).epsilon(1e-12));
          }
      }
}

TEST_CASE("weight levels feed the expected-payoff machinery") {
  auto game = make_maintain(true);
  auto state = make_subepisode_state(game, true, {0}, {0}, -1, -1);
  auto res = step(game, state, {2, 5, 0});
  auto expected = game.payoff(LeaderAction::mixed({2.0, 5.0, 0.0}), {0}, {0});
  CHECK(res.terminal_payoffs[0] == doctest::Approx(expected[0]));
  CHECK(res.terminal_payoffs[1] == doctest::Approx(expected[1]));

  auto zero = step(game, state, {0, 0, 0});
  auto uniform = game.payoff(LeaderAction::mixed({1.0, 1.0, 1.0}), {0}, {0});
  CHECK(zero.terminal_payoffs[0] == doctest::Approx(uniform[0]));
}

TEST_CASE("reported rewards normalize by the leader maximum") {
  CHECK(normalized_reward(make_maintain(false), 20.0) ==
        doctest::Approx(2.0 / 3));
  CHECK(normalized_reward(make_simple_allocation(3, 3), 1.0) == 1.0);
  CHECK(normalized_reward(make_mu_spm(make_agrawal_setting()), -0.15) ==
        doctest::Approx(-0.15));
}

TEST_CASE("identical seeds reproduce traces byte for byte") {
  auto game = make_mu_spm(make_agrawal_setting());
  EpisodeRunner runner(game, {50, 10});
  RandomPolicy policy;
  auto trace_a = runner.run_episode(policy, 42);
  auto trace_b = runner.run_episode(policy, 42);
  std::ostringstream csv_a, csv_b;
  trace_a.write_csv(csv_a);
  trace_b.write_csv(csv_b);
  CHECK(csv_a.str() == csv_b.str());
  CHECK(!csv_a.str().empty());

  auto trace_c = runner.run_episode(policy, 43);
  std::ostringstream csv_c;
  trace_c.write_csv(csv_c);
  CHECK(csv_a.str() != csv_c.str());
}

TEST_CASE("mechanism runners require a single item") {
  auto setting = make_agrawal_setting();
  setting.n_items = 2;
  for (auto& agent : setting.agents)
    for (auto& valuation : agent.support)
      valuation.item_values.push_back(0.0);
  auto game = make_mu_spm(setting);
  CHECK_THROWS_AS(EpisodeRunner(game, {1, 1}), std::invalid_argument);
}
