#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <random>

#include "mbac/harness.hpp"
#include "mbac/mdp.hpp"
#include "mbac/rng.hpp"

using namespace mbac;

TEST_CASE("uniform doubles follow the documented 53-bit construction") {
  DetRng rng(42);
  std::mt19937_64 engine(42);
  for (int i = 0; i < 16; ++i) {
    const double expected = (engine() >> 11) * 0x1.0p-53;
    CHECK(rng.uniform() == expected);
  }
}

TEST_CASE("categorical sampling is deterministic and matches probabilities") {
  const double probs[3] = {0.25, 0.25, 0.5};
  DetRng a(9), b(9);
  int counts[3] = {0, 0, 0};
  for (int i = 0; i < 20000; ++i) {
    const int draw = a.categorical(probs, 3);
    CHECK(draw == b.categorical(probs, 3));
    REQUIRE(draw >= 0);
    REQUIRE(draw < 3);
    ++counts[draw];
  }
  CHECK(counts[0] / 20000.0 == doctest::Approx(0.25).epsilon(0.05));
  CHECK(counts[2] / 20000.0 == doctest::Approx(0.5).epsilon(0.05));
}

TEST_CASE("below produces unbiased indices inside the range") {
  DetRng rng(5);
  int counts[7] = {0};
  for (int i = 0; i < 14000; ++i) {
    const int v = rng.below(7);
    REQUIRE(v >= 0);
    REQUIRE(v < 7);
    ++counts[v];
  }
  for (int k = 0; k < 7; ++k) CHECK(counts[k] > 1600);
}

TEST_CASE("two-state chain has the canonical deterministic structure") {
  const FiniteMdp mdp = generate_mdp("two_state_chain", {{"discount", 0.9}}, 0);
  REQUIRE(mdp.num_states == 2);
  REQUIRE(mdp.num_actions == 2);
  CHECK(validate(mdp).empty());
  CHECK(mdp.discount == 0.9);
  CHECK(mdp.r_max == 1.0);
  CHECK(mdp.init_dist[0] == 0.5);
  // action 0 stays, action 1 switches, reward 1 iff the successor is state 1
  CHECK(mdp.p(0, 0, 0) == 1.0);
  CHECK(mdp.p(1, 0, 1) == 1.0);
  CHECK(mdp.p(0, 1, 1) == 1.0);
  CHECK(mdp.p(1, 1, 0) == 1.0);
  CHECK(mdp.r(0, 1, 1) == 1.0);
  CHECK(mdp.r(1, 0, 1) == 1.0);
  CHECK(mdp.r(0, 0, 0) == 0.0);
  CHECK(mdp.r(1, 1, 0) == 0.0);
}

TEST_CASE("validate reports broken rows and bad scalars") {
  FiniteMdp mdp = generate_mdp("two_state_chain", {}, 0);
  CHECK(validate(mdp).empty());
  mdp.transition[0](0, 0) = 0.7;
  CHECK(!validate(mdp).empty());
  mdp = generate_mdp("two_state_chain", {}, 0);
  mdp.discount = 1.0;
  CHECK(!validate(mdp).empty());
  mdp = generate_mdp("two_state_chain", {}, 0);
  mdp.init_dist[0] = -0.1;
  CHECK(!validate(mdp).empty());
}

TEST_CASE("raw kernel steps are deterministic transitions on this chain") {
  const FiniteMdp mdp = generate_mdp("two_state_chain", {}, 0);
  PathCursor cursor(0, 3);
  TransitionSample s = step(mdp, cursor, 0, KernelChoice::Raw);
  CHECK(s.state == 0);
  CHECK(s.next_state == 0);
  CHECK(s.reward == 0.0);
  CHECK(!s.restarted);
  s = step(mdp, cursor, 1, KernelChoice::Raw);
  CHECK(s.next_state == 1);
  CHECK(s.reward == 1.0);
  CHECK(cursor.state == 1);
  CHECK(cursor.samples_drawn == 2);
  CHECK_THROWS_AS(step(mdp, cursor, 5, KernelChoice::Raw), std::out_of_range);
}

TEST_CASE("visitation kernel restarts at roughly the 1 - gamma rate") {
  const FiniteMdp mdp = generate_mdp("two_state_chain", {{"discount", 0.9}}, 0);
  PathCursor cursor(0, 17);
  int restarts = 0;
  const int n = 20000;
  for (int i = 0; i < n; ++i) {
    const TransitionSample s = step(mdp, cursor, 0, KernelChoice::Visitation);
    if (s.restarted) ++restarts;
    // action 0 stays put, so any state change must be flagged as a restart
    if (s.next_state != s.state) CHECK(s.restarted);
    CHECK(s.reward == mdp.r(s.state, s.action, s.next_state));
  }
  CHECK(restarts / static_cast<double>(n) == doctest::Approx(0.1).epsilon(0.15));
}

TEST_CASE("identical seeds give bitwise identical paths") {
  const FiniteMdp mdp = generate_mdp("garnet",
                                     {{"S", 5}, {"A", 3}, {"branching", 2}}, 11);
  PathCursor a(0, 99), b(0, 99);
  const ActionSampler uniform = [&](PathCursor& c, int) {
    return c.rng.below(mdp.num_actions);
  };
  const auto ta = sample_trajectory(mdp, a, uniform, 500, KernelChoice::Visitation);
  const auto tb = sample_trajectory(mdp, b, uniform, 500, KernelChoice::Visitation);
  REQUIRE(ta.size() == 500);
  CHECK(a.samples_drawn == 500);
  for (std::size_t i = 0; i < ta.size(); ++i) {
    CHECK(ta[i].state == tb[i].state);
    CHECK(ta[i].action == tb[i].action);
    CHECK(ta[i].next_state == tb[i].next_state);
    CHECK(ta[i].reward == tb[i].reward);
    CHECK(ta[i].restarted == tb[i].restarted);
  }
}

TEST_CASE("mdp json round trip") {
  const std::string text = R"({
    "num_states": 2,
    "num_actions": 2,
    "transition": [[[1.0, 0.0], [0.0, 1.0]], [[0.0, 1.0], [1.0, 0.0]]],
    "reward_fn": "indicator_next_state=1",
    "init_dist": [0.5, 0.5],
    "discount": 0.9,
    "r_max": 1.0
  })";
  const FiniteMdp mdp = parse_mdp(text);
  CHECK(validate(mdp).empty());
  CHECK(mdp.p(0, 1, 1) == 1.0);
  CHECK(mdp.r(0, 1, 1) == 1.0);
  CHECK(mdp.r(1, 1, 0) == 0.0);
  CHECK_THROWS_AS(parse_mdp("{\"num_states\": 2}"), std::runtime_error);
  CHECK_THROWS_AS(parse_mdp("not json"), std::runtime_error);
  CHECK_THROWS_AS(load_mdp("/nonexistent/mdp.json"), std::runtime_error);
}
