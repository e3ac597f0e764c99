#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <map>

#include "stackrl/game.hpp"
#include "stackrl/rng.hpp"

using namespace stackrl;

TEST_CASE("uniform01 stays in range and is seed-deterministic") {
  Rng a(42), b(42), c(7);
  bool differs = false;
  for (int i = 0; i < 1000; ++i) {
    double x = a.uniform01();
    CHECK(x >= 0.0);
    CHECK(x < 1.0);
    CHECK(x == b.uniform01());
    if (x != c.uniform01()) differs = true;
  }
  CHECK(differs);
}

TEST_CASE("categorical follows the weights") {
  Rng rng(123);
  std::vector<double> weights = {1.0, 3.0};
  int hits = 0;
  const int n = 200000;
  for (int i = 0; i < n; ++i)
    if (rng.categorical(weights) == 1) ++hits;
  CHECK(std::abs(hits / double(n) - 0.75) < 0.01);

  CHECK_THROWS(rng.categorical({0.0, 0.0}));
  CHECK_THROWS(rng.categorical({1.0, -0.5}));
}

TEST_CASE("mix_seed produces distinct derived streams") {
  CHECK(mix_seed(1, 2) != mix_seed(2, 1));
  CHECK(mix_seed(0, 0) != mix_seed(0, 1));
}

TEST_CASE("maintain payoffs read the table") {
  auto game = make_maintain(false);
  game.validate();
  auto p = game.payoff(LeaderAction::pure(0), {0}, {0});
  CHECK(p[0] == doctest::Approx(20.0));
  CHECK(p[1] == doctest::Approx(15.0));
  auto q = game.payoff(LeaderAction::pure(1), {0}, {0});
  CHECK(q[0] == doctest::Approx(30.0));
  CHECK(q[1] == doctest::Approx(0.0));
  CHECK(game.leader_payoff_max == doctest::Approx(30.0));
  CHECK(game.follower_payoff_max == doctest::Approx(15.0));
}

TEST_CASE("weighted rows mix leader and follower payoffs") {
  auto game = make_maintain(true);
  auto p = game.payoff(LeaderAction::mixed({0.25, 0.75, 0.0}), {0}, {0});
  CHECK(p[0] == doctest::Approx(27.5));
  CHECK(p[1] == doctest::Approx(0.25 * 15.0));
}

TEST_CASE("weight scaling does not change induced payoffs") {
  auto game = make_maintain(true);
  for (int column = 0; column < 3; ++column) {
    auto a = game.payoff(LeaderAction::mixed({0.2, 0.5, 0.3}), {0}, {column});
    auto b = game.payoff(LeaderAction::mixed({0.74, 1.85, 1.11}), {0}, {column});
    CHECK(a[0] == doctest::Approx(b[0]));
    CHECK(a[1] == doctest::Approx(b[1]));
  }
}

TEST_CASE("all-zero weight vectors are rejected") {
  auto game = make_maintain(true);
  CHECK_THROWS(game.payoff(LeaderAction::mixed({0.0, 0.0, 0.0}), {0}, {0}));
  CHECK_THROWS(normalize_weights({0.0, 0.0}));
  CHECK_THROWS(normalize_weights({1.0, -1.0}));
}

TEST_CASE("single-cell game returns its only payoffs") {
  auto game = make_normal_form({{{5.5, 5.5}}}, false);
  auto p = game.payoff(LeaderAction::pure(0), {0}, {0});
  CHECK(p[0] == doctest::Approx(5.5));
  CHECK(p[1] == doctest::Approx(5.5));
}

TEST_CASE("escape payoffs read the table") {
  auto game = make_escape(false);
  auto p = game.payoff(LeaderAction::pure(2), {0}, {2});
  CHECK(p[0] == doctest::Approx(30.0));
  CHECK(p[1] == doctest::Approx(30.0));
  auto q = game.payoff(LeaderAction::pure(0), {0}, {1});
  CHECK(q[0] == doctest::Approx(10.0));
  CHECK(q[1] == doctest::Approx(10.0));
}

TEST_CASE("payment sweetens the intended diagonal cells") {
  auto game = make_matrix_design();
  CHECK(game.n_followers == 2);

  auto p = game.payoff(LeaderAction::pure(4), {0, 0}, {0, 1});
  CHECK(p[1] == doctest::Approx(6.0));
  CHECK(p[2] == doctest::Approx(4.0));
  CHECK(p[0] == doctest::Approx(1.0));

  auto q = game.payoff(LeaderAction::pure(0), {0, 0}, {0, 0});
  CHECK(q[1] == doctest::Approx(3.0));
  CHECK(q[2] == doctest::Approx(3.0));
  CHECK(q[0] == doctest::Approx(0.0));

  auto r = game.payoff(LeaderAction::pure(10), {0, 0}, {1, 0});
  CHECK(r[0] == doctest::Approx(1.0));

  auto aa = game.payoff(LeaderAction::pure(7), {0, 0}, {0, 0});
  CHECK(aa[1] == doctest::Approx(3.0 + 7.0));
  CHECK(aa[2] == doctest::Approx(3.0));
  auto bb = game.payoff(LeaderAction::pure(7), {0, 0}, {1, 1});
  CHECK(bb[1] == doctest::Approx(2.0));
  CHECK(bb[2] == doctest::Approx(2.0 + 7.0));
}

TEST_CASE("leader scores exactly when the followers differ") {
  auto game = make_matrix_design();
  for (int tau = 0; tau <= 10; ++tau)
    for (int r = 0; r < 2; ++r)
      for (int c = 0; c < 2; ++c) {
        auto p = game.payoff(LeaderAction::pure(tau), {0, 0}, {r, c});
        CHECK(p[0] == doctest::Approx(r != c ? 1.0 : 0.0));
      }
}

TEST_CASE("allocation pays off exactly on a match") {
  auto game = make_simple_allocation(3, 2);
  auto hit = game.payoff(LeaderAction::pure(2), {2}, {0});
  CHECK(hit[0] == doctest::Approx(1.0));
  CHECK(hit[1] == doctest::Approx(1.0));
  auto miss = game.payoff(LeaderAction::pure(1), {2}, {0});
  CHECK(miss[0] == doctest::Approx(0.0));
  CHECK(miss[1] == doctest::Approx(0.0));

  for (int type = 0; type < 3; ++type) {
    double total = 0.0;
    for (int item = 0; item < 3; ++item)
      total += game.payoff(LeaderAction::pure(item), {type}, {0})[1];
    CHECK(total == doctest::Approx(1.0));
  }
}

TEST_CASE("uniform random allocation succeeds one third of the time") {
  auto game = make_simple_allocation(3, 1);
  for (int item = 0; item < 3; ++item) {
    double expected = 0.0;
    for (const auto& [types, prob] : game.type_distribution)
      expected += prob * game.payoff(LeaderAction::pure(item), types, {0})[0];
    CHECK(expected == doctest::Approx(1.0 / 3.0));
  }
}

TEST_CASE("two-agent single-item setting carries the stated distribution") {
  auto setting = make_agrawal_setting();
  CHECK(setting.n_agents == 2);
  CHECK(setting.n_items == 1);
  CHECK(setting.n_messages == 2);
  CHECK(setting.price_grid.size() == 31);
  CHECK(setting.price_grid.front() == doctest::Approx(0.0));
  CHECK(setting.price_grid.back() == doctest::Approx(3.0));

  CHECK(setting.agents[0].support[0].probability == doctest::Approx(0.8));
  CHECK(setting.agents[0].support[0].item_values[0] == doctest::Approx(0.5));
  CHECK(setting.agents[0].support[1].probability == doctest::Approx(0.2));
  CHECK(setting.agents[0].support[1].item_values[0] == doctest::Approx(2.5));
  CHECK(setting.agents[1].support[0].item_values[0] == doctest::Approx(0.0));
  CHECK(setting.agents[1].support[1].item_values[0] == doctest::Approx(1.0));

  auto game = make_mu_spm(setting);
  CHECK(game.type_distribution.size() == 4);
  CHECK(game.type_probability({0, 0}) == doctest::Approx(0.4));
  CHECK(game.type_probability({0, 1}) == doctest::Approx(0.4));
  CHECK(game.type_probability({1, 0}) == doctest::Approx(0.1));
  CHECK(game.type_probability({1, 1}) == doctest::Approx(0.1));
}

namespace {

// Visits agents in a fixed order at fixed prices, ignoring messages.
SpmMechanismFn fixed_order_mechanism(std::vector<int> order, double price) {
  return [order, price](const std::vector<int>&, const SpmHistory& history) {
    int next = order[history.visit_order.size()];
    return std::make_pair(next, std::vector<double>{price});
  };
}

}  // namespace

TEST_CASE("buyers buy at strict gain and decline on ties") {
  auto setting = make_agrawal_setting();

  auto high = run_spm(setting, fixed_order_mechanism({0, 1}, 1.0), {1, 0},
                      {0, 0});
  CHECK(high.utilities[0] == doctest::Approx(1.5));
  CHECK(high.welfare == doctest::Approx(2.5));
  CHECK(high.history.visit_order.size() == 1);

  auto low = run_spm(setting, fixed_order_mechanism({0, 1}, 0.5), {0, 1},
                     {0, 0});
  CHECK(low.utilities[0] == doctest::Approx(0.0));
  CHECK(low.history.item_owner[0] == 1);
  CHECK(low.welfare == doctest::Approx(1.0));
  CHECK(low.utilities[1] == doctest::Approx(0.5));

  auto tie = run_spm(setting, fixed_order_mechanism({1, 0}, 0.0), {0, 0},
                     {0, 0});
  CHECK(tie.utilities[1] == doctest::Approx(0.0));
  CHECK(tie.history.item_owner[0] == 0);
  CHECK(tie.welfare == doctest::Approx(0.5));
}

TEST_CASE("revisiting an agent is a mechanism bug") {
  auto setting = make_agrawal_setting();
  auto broken = [](const std::vector<int>&, const SpmHistory&) {
    return std::make_pair(0, std::vector<double>{3.0});
  };
  CHECK_THROWS_AS(run_spm(setting, broken, {0, 0}, {0, 0}),
                  std::runtime_error);
}

TEST_CASE("mechanism payoff reports negated welfare loss and utilities") {
  auto setting = make_agrawal_setting();
  auto game = make_mu_spm(setting);
  auto leader = LeaderAction::adaptive(fixed_order_mechanism({0, 1}, 1.0));

  auto efficient = game.payoff(leader, {1, 1}, {0, 0});
  CHECK(efficient[0] == doctest::Approx(0.0));
  CHECK(efficient[1] == doctest::Approx(1.5));
  CHECK(efficient[2] == doctest::Approx(0.0));

  // Both decline at price 1.0 (0.5 below, 1.0 a tie): the full first-best
  // welfare of 1.0 is lost.
  auto lossy = game.payoff(leader, {0, 1}, {0, 0});
  CHECK(lossy[0] == doctest::Approx(-1.0));

  auto stranded = run_spm(setting, fixed_order_mechanism({0, 1}, 3.0), {0, 0},
                          {0, 0});
  CHECK(stranded.welfare == doctest::Approx(0.0));
  auto p = game.payoff(
      LeaderAction::adaptive(fixed_order_mechanism({0, 1}, 3.0)), {0, 0},
      {0, 0});
  CHECK(p[0] == doctest::Approx(-0.5));
}

TEST_CASE("first-best welfare for the two-agent setting is 1.1") {
  auto setting = make_agrawal_setting();
  auto game = make_mu_spm(setting);
  double first_best = 0.0;
  for (const auto& [types, prob] : game.type_distribution)
    first_best += prob * spm_max_welfare(setting, types);
  CHECK(first_best == doctest::Approx(1.1));
}

TEST_CASE("welfare loss reward is zero exactly at the optimum") {
  CHECK(reward_from_welfare(1.1, 1.1) == doctest::Approx(0.0));
  CHECK(reward_from_welfare(0.5, 1.1) == doctest::Approx(-0.6));
  CHECK_THROWS(reward_from_welfare(1.2, 1.1));
}

TEST_CASE("type sampling is deterministic and matches the table") {
  auto game = make_simple_allocation(3, 3);
  Rng a(9), b(9);
  std::map<int, int> counts;
  for (int i = 0; i < 30000; ++i) {
    auto t = game.sample_types(a);
    CHECK(t == game.sample_types(b));
    counts[t[0]]++;
  }
  for (int t = 0; t < 3; ++t)
    CHECK(std::abs(counts[t] / 30000.0 - 1.0 / 3.0) < 0.02);
}

TEST_CASE("malformed games are rejected") {
  CHECK_THROWS(make_normal_form({}, false));
  CHECK_THROWS(make_simple_allocation(0, 1));
  CHECK_THROWS(make_simple_allocation(3, 0));
  CHECK_THROWS(make_agrawal_setting(0.0));

  auto setting = make_agrawal_setting();
  setting.price_grid = {0.3, 0.2};
  CHECK_THROWS(setting.validate());

  auto bad = make_maintain(false);
  bad.type_distribution = {{TypeProfile{0}, 0.5}};
  CHECK_THROWS(bad.validate());
}
