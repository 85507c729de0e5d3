#include <cmath>
#include <sstream>
#include <vector>

#include <catch_amalgamated.hpp>

#include "idleq/generator.hpp"
#include "support/oracles.hpp"

using namespace idleq;

namespace {

SystemParams heterogeneous22() { return SystemParams{1.0, {2.0, 3.0}, Capacity::finite(2)}; }

// Arrival edges go to states with one job more (one fewer idle server or a
// longer queue); departures go the other way.
bool is_arrival_edge(const StateSpace& space, int from, int to) {
  const int n = space.n_servers();
  return space.state(to).jobs(n) == space.state(from).jobs(n) + 1;
}

}  // namespace

TEST_CASE("M/M/1/2 birth-death chain carries the full rate set", "[generator]") {
  const SystemParams params{0.7, {1.3}, Capacity::finite(2)};
  const StateSpace space = StateSpace::enumerate(1, 2);
  const GeneratorMatrix q = build_generator(space, params, Policy::random());

  const int b = space.index_of(ChainState::queue(0));
  const int m1 = space.index_of(ChainState::queue(1));
  const int idle = space.index_of(ChainState::ordered({1}));

  CHECK(q.rate(idle, b) == Catch::Approx(0.7));   // arrival seizes the idle server
  CHECK(q.rate(b, idle) == Catch::Approx(1.3));   // departure frees it
  CHECK(q.rate(b, m1) == Catch::Approx(0.7));     // arrival queues
  CHECK(q.rate(m1, b) == Catch::Approx(1.3));     // departure serves the head job
  CHECK(q.rate(idle, m1) == 0.0);
  CHECK(q.rate(m1, idle) == 0.0);
  for (int i = 0; i < q.dim(); ++i) CHECK(std::abs(q.row_sum(i)) < 1e-12);
}

TEST_CASE("arrivals split lambda by idle-order position", "[generator]") {
  const SystemParams params = heterogeneous22();
  const StateSpace space = StateSpace::enumerate(2, 2);

  SECTION("LISF sends everything to the longest-idle server") {
    const GeneratorMatrix q = build_generator(space, params, Policy::lisf());
    const int both = space.index_of(ChainState::ordered({1, 2}));
    // dispatching s_1 = server 1 leaves (2)
    CHECK(q.rate(both, space.index_of(ChainState::ordered({2}))) == Catch::Approx(1.0));
    CHECK(q.rate(both, space.index_of(ChainState::ordered({1}))) == 0.0);
  }
  SECTION("random splits lambda uniformly") {
    const GeneratorMatrix q = build_generator(space, params, Policy::random());
    const int both = space.index_of(ChainState::ordered({2, 1}));
    CHECK(q.rate(both, space.index_of(ChainState::ordered({1}))) == Catch::Approx(0.5));
    CHECK(q.rate(both, space.index_of(ChainState::ordered({2}))) == Catch::Approx(0.5));
  }
}

TEST_CASE("a departing server joins the end of the idle order", "[generator]") {
  const SystemParams params = heterogeneous22();
  const StateSpace space = StateSpace::enumerate(2, 2);
  const GeneratorMatrix q = build_generator(space, params, Policy::random());

  const int one_idle = space.index_of(ChainState::ordered({1}));
  CHECK(q.rate(one_idle, space.index_of(ChainState::ordered({1, 2}))) == Catch::Approx(3.0));
  CHECK(q.rate(one_idle, space.index_of(ChainState::ordered({2, 1}))) == 0.0);

  const int b = space.index_of(ChainState::queue(0));
  CHECK(q.rate(b, one_idle) == Catch::Approx(2.0));
  CHECK(q.rate(b, space.index_of(ChainState::ordered({2}))) == Catch::Approx(3.0));
}

TEST_CASE("arrivals at a full system are dropped", "[generator]") {
  const SystemParams params{1.0, {2.0, 3.0}, Capacity::finite(4)};
  const StateSpace space = StateSpace::enumerate(2, 4);
  const GeneratorMatrix q = build_generator(space, params, Policy::sisf());

  const int full = space.index_of(ChainState::queue(2));
  CHECK(q.exit_rate(full) == Catch::Approx(5.0));  // aggregate mu only, no arrival edge
  CHECK(q.rate(full, space.index_of(ChainState::queue(1))) == Catch::Approx(5.0));

  const int mid = space.index_of(ChainState::queue(1));
  CHECK(q.exit_rate(mid) == Catch::Approx(6.0));  // lambda + mu
}

TEST_CASE("generator invariants hold on random instances", "[generator][property]") {
  idleq::detail::RandomStream rng(0xfeedbeef, 7);
  for (int round = 0; round < 20; ++round) {
    const int n = 2 + static_cast<int>(rng.uniform() * 3);  // 2..4
    const int k = n + static_cast<int>(rng.uniform() * 4);
    const SystemParams params = oracles::random_params(rng, n, k);
    const StateSpace space = StateSpace::enumerate(n, k);
    const Policy policy = round % 2 == 0 ? oracles::random_custom_policy(rng, n) : Policy::random();
    const GeneratorMatrix q = build_generator(space, params, policy);

    for (int i = 0; i < q.dim(); ++i) {
      REQUIRE(std::abs(q.row_sum(i)) < 1e-12);
      for (const auto& [j, rate] : q.row(i)) {
        REQUIRE(j != i);
        REQUIRE(rate >= 0.0);
      }
      // total outflow: lambda plus the busy servers' rates for ordered
      // states; all-busy states emit lambda + mu, minus lambda when full
      const ChainState& st = space.state(i);
      double expected;
      if (st.is_ordered()) {
        expected = params.lambda;
        for (int s = 1; s <= n; ++s)
          if (!st.contains(s)) expected += params.rate_of(s);
      } else {
        expected = params.total_mu() + (st.queue_len() < k - n ? params.lambda : 0.0);
      }
      REQUIRE(q.exit_rate(i) == Catch::Approx(expected).margin(1e-9));
    }
  }
}

TEST_CASE("policies only redistribute the arrival rate", "[generator][property]") {
  const SystemParams params{1.7, {0.4, 2.0, 3.3}, Capacity::finite(5)};
  const StateSpace space = StateSpace::enumerate(3, 5);
  idleq::detail::RandomStream rng(99, 1);
  const GeneratorMatrix qa = build_generator(space, params, Policy::random());
  const GeneratorMatrix qb = build_generator(space, params, oracles::random_custom_policy(rng, 3));

  for (int i = 0; i < space.size(); ++i) {
    double arr_a = 0.0, arr_b = 0.0;
    std::map<int, double> dep_a, dep_b;
    for (const auto& [j, rate] : qa.row(i))
      (is_arrival_edge(space, i, j) ? arr_a : dep_a[j]) += rate;
    for (const auto& [j, rate] : qb.row(i))
      (is_arrival_edge(space, i, j) ? arr_b : dep_b[j]) += rate;
    REQUIRE(dep_a == dep_b);  // departures identical under every policy
    if (space.state(i).is_queue() && space.state(i).queue_len() == space.capacity() - 3) {
      REQUIRE(arr_a == 0.0);
      REQUIRE(arr_b == 0.0);
    } else {
      REQUIRE(arr_a == Catch::Approx(params.lambda).margin(1e-12));
      REQUIRE(arr_b == Catch::Approx(params.lambda).margin(1e-12));
    }
  }
}

TEST_CASE("arrival edge count equals the support of the position distribution", "[generator]") {
  Policy::CustomTable table;
  table[{1}] = {1.0};
  table[{2}] = {1.0};
  table[{1, 2}] = {0.0, 1.0};  // support size 1
  const Policy policy = Policy::custom(table);
  const SystemParams params = heterogeneous22();
  const StateSpace space = StateSpace::enumerate(2, 2);
  const GeneratorMatrix q = build_generator(space, params, policy);

  const int both = space.index_of(ChainState::ordered({1, 2}));
  int arrival_edges = 0;
  for (const auto& [j, rate] : q.row(both)) {
    (void)rate;
    if (is_arrival_edge(space, both, j)) ++arrival_edges;
  }
  CHECK(arrival_edges == 1);
}

TEST_CASE("generator matches the exact rational assembly", "[generator][oracle]") {
  const SystemParams params{1.0, {2.0, 3.0}, Capacity::finite(4)};
  const StateSpace space = StateSpace::enumerate(2, 4);
  const GeneratorMatrix q = build_generator(space, params, Policy::random());

  const oracles::RationalRates rates{1, {2, 3}, 4};
  std::map<std::pair<int, int>, double> expected;
  for (const auto& [i, j, rate] : oracles::rational_transitions(space, rates, oracles::rational_random()))
    expected[{i, j}] += boost::rational_cast<double>(rate);
  for (int i = 0; i < space.size(); ++i)
    for (int j = 0; j < space.size(); ++j) {
      if (i == j) continue;
      const auto it = expected.find({i, j});
      const double want = it == expected.end() ? 0.0 : it->second;
      REQUIRE(q.rate(i, j) == Catch::Approx(want).margin(1e-15));
    }
}

TEST_CASE("coordinate CSV export", "[generator]") {
  const SystemParams params{0.5, {1.0}, Capacity::finite(1)};
  const StateSpace space = StateSpace::enumerate(1, 1);
  const GeneratorMatrix q = build_generator(space, params, Policy::random());
  std::ostringstream out;
  write_generator_csv(out, q);
  CHECK(out.str() == "row,col,rate\n0,0,-1\n0,1,1\n1,0,0.5\n1,1,-0.5\n");
}

TEST_CASE("build_generator preconditions", "[generator]") {
  const StateSpace space = StateSpace::enumerate(2, 2);
  SECTION("unbounded capacity is rejected") {
    const SystemParams params{1.0, {1.0, 1.0}, Capacity::unbounded()};
    CHECK_THROWS_WITH(build_generator(space, params, Policy::random()),
                      Catch::Matchers::ContainsSubstring("finite K"));
  }
  SECTION("mismatched space is rejected") {
    const SystemParams params{1.0, {1.0, 1.0, 1.0}, Capacity::finite(3)};
    CHECK_THROWS_AS(build_generator(space, params, Policy::random()), std::invalid_argument);
  }
  SECTION("invalid rates are rejected") {
    const SystemParams params{-1.0, {1.0, 1.0}, Capacity::finite(2)};
    CHECK_THROWS_AS(build_generator(space, params, Policy::random()), std::invalid_argument);
  }
  SECTION("direct construction rejects bad entries") {
    CHECK_THROWS_AS(GeneratorMatrix(2, {{0, 1, -0.5}}), std::invalid_argument);
    CHECK_THROWS_AS(GeneratorMatrix(2, {{0, 0, 0.5}}), std::invalid_argument);
    CHECK_THROWS_AS(GeneratorMatrix(2, {{0, 5, 0.5}}), std::invalid_argument);
  }
}
