#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <sstream>

#include "stackrl/game.hpp"
#include "stackrl/no_regret.hpp"

using namespace stackrl;

TEST_CASE("fresh learner plays uniformly") {
  auto game = make_maintain(false);
  FollowerLearner learner(game, 0.1);
  auto dist = learner.distribution(0, 0);
  for (double p : dist) CHECK(p == doctest::Approx(1.0 / 3.0));

  Rng rng(1);
  std::vector<int> counts(3, 0);
  for (int i = 0; i < 30000; ++i) counts[learner.sample_actions({0}, rng)[0]]++;
  for (int c : counts) CHECK(std::abs(c / 30000.0 - 1.0 / 3.0) < 0.02);
}

TEST_CASE("weights one and three give a 25/75 split") {
  auto game = make_simple_allocation(2, 2);
  FollowerLearner learner(game, 2.0);  // base 3: payoff 1 scales a weight by 3
  learner.update_weights({0}, {{0.0, 1.0}});
  auto dist = learner.distribution(0, 0);
  CHECK(dist[0] == doctest::Approx(0.25));
  CHECK(dist[1] == doctest::Approx(0.75));
}

TEST_CASE("payoff endpoints scale weights by the expected factors") {
  auto game = make_simple_allocation(2, 2);
  FollowerLearner learner(game, 0.1);
  learner.update_weights({0}, {{0.0, 1.0}});
  CHECK(learner.weight_row(0, 0)[0] == doctest::Approx(1.0));
  CHECK(learner.weight_row(0, 0)[1] == doctest::Approx(1.1));
}

TEST_CASE("half payoffs twice equal a full payoff once") {
  auto game = make_simple_allocation(2, 2);
  FollowerLearner twice(game, 0.1), once(game, 0.1);
  twice.update_weights({0}, {{0.5, 0.5}});
  twice.update_weights({0}, {{0.5, 0.5}});
  once.update_weights({0}, {{1.0, 1.0}});
  CHECK(twice.weight_row(0, 0)[0] ==
        doctest::Approx(once.weight_row(0, 0)[0]).epsilon(1e-12));
}

TEST_CASE("payoffs outside the declared range are a configuration error") {
  auto game = make_maintain(false);
  FollowerLearner learner(game, 0.1);
  CHECK_THROWS(learner.update_weights({0}, {{16.0, 0.0, 0.0}}));
  CHECK_THROWS(learner.update_weights({0}, {{-1.0, 0.0, 0.0}}));
}

TEST_CASE("dominant action weight matches the closed-form power") {
  auto game = make_simple_allocation(2, 2);
  FollowerLearner learner(game, 0.1);
  const int rounds = 1000;
  for (int t = 0; t < rounds; ++t) learner.update_weights({0}, {{1.0, 0.0}});
  auto dist = learner.distribution(0, 0);
  CHECK(dist[0] > 0.99);
  // Renormalization preserves the ratio, which must equal (1+eps)^rounds.
  const auto& row = learner.weight_row(0, 0);
  CHECK(std::log(row[0] / row[1]) ==
        doctest::Approx(rounds * std::log(1.1)).epsilon(1e-9));
  for (double w : row) CHECK(w < 1e31);
  learner.check_invariants();
}

TEST_CASE("untouched type rows stay at initialization") {
  auto game = make_simple_allocation(3, 3);
  FollowerLearner learner(game, 0.1);
  learner.update_weights({1}, {{0.0, 1.0, 0.0}});
  for (double w : learner.weight_row(0, 0)) CHECK(w == doctest::Approx(1.0));
  for (double w : learner.weight_row(0, 2)) CHECK(w == doctest::Approx(1.0));
  CHECK(learner.weight_row(0, 1)[1] == doctest::Approx(1.1));
}

TEST_CASE("dynamics on a fixed leader row concentrate on the best column") {
  auto game = make_maintain(false);
  Rng rng(3);
  FollowerLearner learner(game, 0.1);
  auto history =
      run_dynamics(game, constant_leader(LeaderAction::pure(0)), 100, learner, rng);
  CHECK(history.rounds() == 100);

  // Column A earns 15 (scaled 1) every round, the others 0, so its weight is
  // exactly (1.1)^100 against 1.
  auto dist = learner.distribution(0, 0);
  const double power = std::pow(1.1, 100);
  CHECK(dist[0] == doctest::Approx(power / (power + 2.0)).epsilon(1e-6));
}

TEST_CASE("a single round is recorded and rounds must be positive") {
  auto game = make_maintain(false);
  Rng rng(5);
  auto history =
      run_dynamics(game, constant_leader(LeaderAction::pure(0)), 1, 0.1, rng);
  CHECK(history.rounds() == 1);
  CHECK_THROWS(
      run_dynamics(game, constant_leader(LeaderAction::pure(0)), 0, 0.1, rng));
}

TEST_CASE("regret of a dominant action run is small") {
  auto game = make_maintain(false);
  Rng rng(7);
  auto history = run_dynamics(game, constant_leader(LeaderAction::pure(0)),
                              1000, 0.1, rng);
  auto regret = external_regret(history, 0, 0);
  REQUIRE(regret.has_value());
  CHECK(*regret / 15.0 < 0.05);
  CHECK(*regret > -1e-9);
}

TEST_CASE("regret handbook cases") {
  // Always-optimal play has nonpositive regret.
  auto solo = make_simple_allocation(1, 1);
  Rng rng(1);
  auto history =
      run_dynamics(solo, constant_leader(LeaderAction::pure(0)), 10, 0.1, rng);
  auto regret = external_regret(history, 0, 0);
  REQUIRE(regret.has_value());
  CHECK(*regret <= 1e-12);

  // One round, played payoff 0 while the best action paid 1.
  PlayHistory manual({1}, {2});
  manual.append({{0}, {0}, {0.0, 0.0}}, {{0.0, 1.0}});
  auto single = external_regret(manual, 0, 0);
  REQUIRE(single.has_value());
  CHECK(*single == doctest::Approx(1.0));

  // Unobserved types report no regret value.
  PlayHistory empty({2}, {2});
  empty.append({{0}, {0}, {0.0, 1.0}}, {{1.0, 0.0}});
  CHECK(!external_regret(empty, 0, 1).has_value());
}

TEST_CASE("regret stays below the multiplicative-weights bound") {
  // Adversarial payoffs: reward only the currently least likely action.
  auto game = make_simple_allocation(3, 3);
  FollowerLearner learner(game, 0.1);
  PlayHistory history({3}, {3});
  Rng rng(11);
  const int rounds = 1000;
  for (int t = 0; t < rounds; ++t) {
    auto dist = learner.distribution(0, 0);
    int target = 0;
    for (int a = 1; a < 3; ++a)
      if (dist[a] < dist[target]) target = a;
    std::vector<std::vector<double>> payoffs = {{0.0, 0.0, 0.0}};
    payoffs[0][target] = 1.0;
    auto actions = learner.sample_actions({0}, rng);
    history.append({{0}, actions, {0.0, payoffs[0][actions[0]]}}, payoffs);
    learner.update_weights({0}, payoffs);
  }
  auto regret = external_regret(history, 0, 0);
  REQUIRE(regret.has_value());
  CHECK(*regret < std::log(3.0) / 0.1 / rounds + 0.1);
}

TEST_CASE("empirical strategy aggregates observed play") {
  PlayHistory history({1}, {2});
  history.append({{0}, {0}, {0.0, 1.0}}, {{1.0, 0.0}});
  auto sigma = empirical_strategy(history);
  REQUIRE(sigma.find({0}) != nullptr);
  CHECK(sigma.find({0})->size() == 1);
  CHECK(sigma.find({0})->front().second == doctest::Approx(1.0));

  history.append({{0}, {1}, {0.0, 0.0}}, {{1.0, 0.0}});
  auto sigma2 = empirical_strategy(history);
  REQUIRE(sigma2.find({0}) != nullptr);
  CHECK(sigma2.find({0})->size() == 2);
  for (const auto& entry : *sigma2.find({0}))
    CHECK(entry.second == doctest::Approx(0.5));
}

TEST_CASE("long-run empirical play tracks the learner's final strategy") {
  auto game = make_maintain(false);
  Rng rng(13);
  FollowerLearner learner(game, 0.1);
  auto history = run_dynamics(game, constant_leader(LeaderAction::pure(0)),
                              1000, learner, rng);
  auto sigma = empirical_strategy(history);
  auto final_dist = learner.distribution(0, 0);

  std::vector<double> empirical(3, 0.0);
  for (const auto& [actions, weight] : *sigma.find({0}))
    empirical[actions[0]] = weight;
  double tv = 0.0;
  for (int a = 0; a < 3; ++a) tv += std::abs(empirical[a] - final_dist[a]);
  CHECK(tv / 2.0 < 0.1);
}

TEST_CASE("dominant-strategy point mass is an exact equilibrium") {
  auto game = make_matrix_design();
  EmpiricalStrategy sigma;
  sigma.type_profiles = {{0, 0}};
  sigma.action_distributions = {{{{0, 1}, 1.0}}};
  auto report = verify_epsilon_bcce(
      game, constant_leader(LeaderAction::pure(10)), sigma, 0.0);
  CHECK(report.holds);
  CHECK(report.worst_violation <= 0.0);
}

TEST_CASE("profitable deviation is found and witnessed") {
  auto game = make_maintain(false);
  EmpiricalStrategy sigma;
  sigma.type_profiles = {{0}};
  sigma.action_distributions = {{{{1}, 1.0}}};  // point mass on column B
  auto report =
      verify_epsilon_bcce(game, constant_leader(LeaderAction::pure(0)), sigma, 0.0);
  CHECK(!report.holds);
  CHECK(report.worst_violation == doctest::Approx(15.0));
  CHECK(report.witness.follower == 0);
  CHECK(report.witness.deviation == 0);
}

TEST_CASE("uniform play in a flat game is an exact equilibrium") {
  auto game = make_normal_form({{{0, 0}, {0, 0}}, {{0, 0}, {0, 0}}}, false);
  EmpiricalStrategy sigma;
  sigma.type_profiles = {{0}};
  sigma.action_distributions = {{{{0}, 0.5}, {{1}, 0.5}}};
  auto report =
      verify_epsilon_bcce(game, constant_leader(LeaderAction::pure(0)), sigma, 0.0);
  CHECK(report.holds);
}

TEST_CASE("sigma must cover every positive-probability type profile") {
  auto game = make_simple_allocation(2, 2);
  EmpiricalStrategy sigma;
  sigma.type_profiles = {{0}};
  sigma.action_distributions = {{{{0}, 1.0}}};
  CHECK_THROWS(verify_epsilon_bcce(game, constant_leader(LeaderAction::pure(0)),
                                   sigma, 0.0));
}

TEST_CASE("dynamics reach an approximate equilibrium on matrix settings") {
  struct Case {
    BayesianGame game;
    LeaderAction leader;
  };
  std::vector<Case> cases;
  cases.push_back({make_maintain(false), LeaderAction::pure(0)});
  cases.push_back({make_escape(false), LeaderAction::pure(2)});
  cases.push_back({make_matrix_design(), LeaderAction::pure(0)});
  cases.push_back({make_matrix_design(), LeaderAction::pure(4)});
  cases.push_back(
      {make_maintain(true), LeaderAction::mixed({0.25, 0.75, 0.0})});

  for (const auto& test_case : cases) {
    const double range = test_case.game.follower_payoff_max -
                         test_case.game.follower_payoff_min;
    for (std::uint64_t seed = 0; seed < 3; ++seed) {
      Rng rng(mix_seed(99, seed));
      auto history = run_dynamics(test_case.game,
                                  constant_leader(test_case.leader), 1000, 0.1,
                                  rng);
      auto report = verify_epsilon_bcce(test_case.game,
                                        constant_leader(test_case.leader),
                                        empirical_strategy(history),
                                        0.1 * range);
      CHECK(report.holds);
    }
  }
}

TEST_CASE("matrix design play locks onto the sweetened profile") {
  auto game = make_matrix_design();
  Rng rng(17);
  // Experiment-scale update magnitude: one unit of raw payoff per exponent.
  const double eps = std::pow(1.1, game.follower_payoff_max -
                                       game.follower_payoff_min) -
                     1.0;
  FollowerLearner learner(game, eps);
  auto history = run_dynamics(game, constant_leader(LeaderAction::pure(4)), 300,
                              learner, rng);
  int hits = 0, window = 0;
  for (int round = 100; round < 300; ++round) {
    const auto& record = history.records()[round];
    window++;
    if (record.actions[0] == 0 && record.actions[1] == 1) hits++;
  }
  CHECK(hits / double(window) > 0.95);
}

TEST_CASE("average regret does not grow with the horizon") {
  auto game = make_maintain(false);
  double short_mean = 0.0, long_mean = 0.0;
  const int seeds = 20;
  for (std::uint64_t seed = 0; seed < seeds; ++seed) {
    Rng a(mix_seed(1, seed)), b(mix_seed(1, seed));
    auto short_run = run_dynamics(game, constant_leader(LeaderAction::pure(0)),
                                  200, 0.1, a);
    auto long_run = run_dynamics(game, constant_leader(LeaderAction::pure(0)),
                                 2000, 0.1, b);
    short_mean += *external_regret(short_run, 0, 0) / 15.0 / seeds;
    long_mean += *external_regret(long_run, 0, 0) / 15.0 / seeds;
  }
  CHECK(long_mean <= short_mean + 0.02);
}

TEST_CASE("identical seeds reproduce the history byte for byte") {
  auto game = make_matrix_design();
  std::ostringstream first, second;
  Rng a(21), b(21);
  run_dynamics(game, constant_leader(LeaderAction::pure(3)), 200, 0.1, a)
      .write_csv(first);
  run_dynamics(game, constant_leader(LeaderAction::pure(3)), 200, 0.1, b)
      .write_csv(second);
  CHECK(first.str() == second.str());
  CHECK(first.str().substr(0, 5) == "round");
}

TEST_CASE("history rejects inconsistent realized payoffs") {
  PlayHistory history({1}, {2});
  CHECK_THROWS_AS(history.append({{0}, {0}, {0.0, 1.0}}, {{0.5, 0.0}}),
                  std::logic_error);
}
