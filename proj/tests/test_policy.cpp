#include <algorithm>
#include <random>
#include <vector>

#include <catch_amalgamated.hpp>

#include "idleq/policy.hpp"
#include "idleq/system.hpp"

using namespace idleq;

namespace {

SystemParams basic_params(double lambda, std::vector<double> mu, int k) {
  return SystemParams{lambda, std::move(mu), Capacity::finite(k)};
}

}  // namespace

TEST_CASE("validate accepts a well-formed system", "[policy]") {
  const auto report = validate(basic_params(1.0, {1.0, 1.0}, 2), Policy::random());
  CHECK(report.ok());
  CHECK(report.violations.empty());
}

TEST_CASE("validate flags violated invariants", "[policy]") {
  SECTION("negative service rate") {
    const auto report = validate(basic_params(1.0, {1.0, -1.0}, 2), Policy::random());
    REQUIRE_FALSE(report.ok());
    CHECK(report.message().find("mu[2] must be positive") != std::string::npos);
  }
  SECTION("nonpositive lambda") {
    const auto report = validate(basic_params(0.0, {1.0}, 1), Policy::random());
    REQUIRE_FALSE(report.ok());
    CHECK(report.message().find("lambda must be positive") != std::string::npos);
  }
  SECTION("capacity below server count") {
    const auto report = validate(basic_params(1.0, {1.0, 1.0}, 1), Policy::random());
    REQUIRE_FALSE(report.ok());
    CHECK(report.message().find("capacity K must be at least N") != std::string::npos);
  }
  SECTION("custom table missing a subset") {
    Policy::CustomTable table;
    table[{1}] = {1.0};
    table[{2}] = {1.0};  // {1,2} missing
    const auto report = validate(basic_params(1.0, {1.0, 1.0}, 2), Policy::custom(table));
    REQUIRE_FALSE(report.ok());
    CHECK(report.message().find("table not total") != std::string::npos);
    CHECK(report.message().find("{1,2}") != std::string::npos);
  }
  SECTION("custom table referencing an unknown server") {
    Policy::CustomTable table;
    table[{1}] = {1.0};
    table[{3}] = {1.0};
    const auto report = validate(basic_params(1.0, {1.0, 1.0}, 2), Policy::custom(table));
    REQUIRE_FALSE(report.ok());
    CHECK(report.message().find("references server 3") != std::string::npos);
  }
}

TEST_CASE("built-in position distributions", "[policy]") {
  SECTION("random is uniform") {
    const auto p = Policy::random().position_distribution({3, 1, 2});
    REQUIRE(p.size() == 3);
    for (double v : p) CHECK(v == Catch::Approx(1.0 / 3).margin(1e-15));
  }
  SECTION("lisf is a point mass on the first position") {
    const auto p = Policy::lisf().position_distribution({2, 1});
    REQUIRE(p == std::vector<double>{1.0, 0.0});
  }
  SECTION("sisf is a point mass on the last position") {
    const auto p = Policy::sisf().position_distribution({3, 1, 2});
    REQUIRE(p == std::vector<double>{0.0, 0.0, 1.0});
  }
  SECTION("empty idle set is rejected") {
    CHECK_THROWS_AS(Policy::random().position_distribution({}), std::invalid_argument);
  }
}

TEST_CASE("custom tables are keyed by the unordered subset", "[policy]") {
  Policy::CustomTable table;
  table[{1}] = {1.0};
  table[{2}] = {1.0};
  table[{1, 2}] = {0.7, 0.3};
  const Policy policy = Policy::custom(table);

  const auto forward = policy.position_distribution({1, 2});
  const auto reversed = policy.position_distribution({2, 1});
  REQUIRE(forward == reversed);  // position semantics, set-keyed
  CHECK(forward[0] == Catch::Approx(0.7));
  CHECK(forward[1] == Catch::Approx(0.3));

  CHECK_THROWS_WITH(policy.position_distribution({1, 2, 3}),
                    Catch::Matchers::ContainsSubstring("policy undefined on subset"));
}

TEST_CASE("custom table construction enforces normalization", "[policy]") {
  SECTION("round-off within 1e-12 is renormalized") {
    Policy::CustomTable table;
    table[{1, 2}] = {0.5, 0.5 + 5e-13};
    const Policy policy = Policy::custom(table);
    const auto p = policy.position_distribution({1, 2});
    CHECK(p[0] + p[1] == Catch::Approx(1.0).margin(1e-15));
  }
  SECTION("a sum beyond tolerance is rejected") {
    Policy::CustomTable table;
    table[{1, 2}] = {0.6, 0.3};
    CHECK_THROWS_AS(Policy::custom(table), std::invalid_argument);
  }
  SECTION("negative entries are rejected") {
    Policy::CustomTable table;
    table[{1, 2}] = {1.2, -0.2};
    CHECK_THROWS_AS(Policy::custom(table), std::invalid_argument);
  }
  SECTION("length must match the subset size") {
    Policy::CustomTable table;
    table[{1, 2}] = {1.0};
    CHECK_THROWS_AS(Policy::custom(table), std::invalid_argument);
  }
  SECTION("keys must be sorted distinct 1-based subsets") {
    Policy::CustomTable unsorted;
    unsorted[{2, 1}] = {0.5, 0.5};
    CHECK_THROWS_AS(Policy::custom(unsorted), std::invalid_argument);
    Policy::CustomTable zero_based;
    zero_based[{0, 1}] = {0.5, 0.5};
    CHECK_THROWS_AS(Policy::custom(zero_based), std::invalid_argument);
  }
}

TEST_CASE("position distributions are proper and order-independent", "[policy][property]") {
  std::mt19937_64 gen(20240811);
  Policy::CustomTable table;
  table[{1}] = {1.0};
  table[{2}] = {1.0};
  table[{3}] = {1.0};
  table[{1, 2}] = {0.25, 0.75};
  table[{1, 3}] = {0.5, 0.5};
  table[{2, 3}] = {0.9, 0.1};
  table[{1, 2, 3}] = {0.2, 0.3, 0.5};
  const std::vector<Policy> policies{Policy::random(), Policy::lisf(), Policy::sisf(),
                                     Policy::custom(table)};

  for (const Policy& policy : policies) {
    std::vector<int> order{1, 2, 3};
    const auto reference = policy.position_distribution(order);
    for (int round = 0; round < 10; ++round) {
      std::shuffle(order.begin(), order.end(), gen);
      const auto p = policy.position_distribution(order);
      REQUIRE(p == reference);  // depends on the set only
      double sum = 0.0;
      for (double v : p) {
        CHECK(v >= 0.0);
        sum += v;
      }
      CHECK(sum == Catch::Approx(1.0).margin(1e-12));
    }
  }
}
