#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "idleq/closed_form.hpp"
#include "idleq/generator.hpp"
#include "idleq/solver.hpp"
#include "idleq/state_space.hpp"
#include "idleq/system.hpp"

namespace idleq {

namespace detail {

inline nlohmann::json instance_json(const SystemParams& params) {
  return nlohmann::json{{"lambda", params.lambda},
                        {"mu", params.mu},
                        {"K", params.capacity.is_finite() ? nlohmann::json(params.capacity.value())
                                                          : nlohmann::json("inf")}};
}

inline double relative_gap(double a, double b) {
  const double denom = std::max(std::abs(a), std::abs(b));
  return denom == 0.0 ? 0.0 : std::abs(a - b) / denom;
}

}  // namespace detail

/// Machine check that every policy in the class has the same stationary
/// vector, compared entrywise per ordered state.
struct EquivalenceReport {
  bool pass = false;
  double tol = 0.0;
  double max_pairwise_diff = 0.0;
  std::vector<std::string> policy_names;
  std::vector<double> closed_form_diff;  // per policy, vs the product form
  nlohmann::json instance;

  nlohmann::json to_json() const {
    return nlohmann::json{{"check", "equivalence"},
                          {"pass", pass},
                          {"tol", tol},
                          {"max_pairwise_diff", max_pairwise_diff},
                          {"policies", policy_names},
                          {"closed_form_diff", closed_form_diff},
                          {"instance", instance}};
  }
};

inline EquivalenceReport check_equivalence(const SystemParams& params,
                                           const std::vector<Policy>& policies, double tol = 1e-8,
                                           const SolveOptions& solve_opts = {}) {
  if (policies.size() < 2) throw std::invalid_argument("need >= 2 policies");
  if (!params.capacity.is_finite())
    throw std::invalid_argument("finite K required for the equivalence check");

  const StateSpace space = StateSpace::enumerate(params.n_servers(), params.capacity.value());
  const std::vector<double> reference = closed_form(params, space).probs;

  EquivalenceReport report;
  report.tol = tol;
  report.instance = detail::instance_json(params);

  std::vector<std::vector<double>> solutions;
  solutions.reserve(policies.size());
  for (const Policy& policy : policies) {
    report.policy_names.push_back(policy.name());
    solutions.push_back(solve_stationary(build_generator(space, params, policy), solve_opts).probs);
    double gap = 0.0;
    for (int i = 0; i < space.size(); ++i)
      gap = std::max(gap, std::abs(solutions.back()[static_cast<std::size_t>(i)] -
                                   reference[static_cast<std::size_t>(i)]));
    report.closed_form_diff.push_back(gap);
  }

  for (std::size_t a = 0; a < solutions.size(); ++a)
    for (std::size_t b = a + 1; b < solutions.size(); ++b)
      for (int i = 0; i < space.size(); ++i)
        report.max_pairwise_diff =
            std::max(report.max_pairwise_diff,
                     std::abs(solutions[a][static_cast<std::size_t>(i)] -
                              solutions[b][static_cast<std::size_t>(i)]));

  report.pass = report.max_pairwise_diff <= tol;
  return report;
}

/// Checks the two balance identities from the equivalence proof at every
/// ordered state s with idle set I, against a given distribution:
///
///   (i)  lambda * sum_{s' not in I} sum_{j=1..|I|+1} pi[s[s',j]] p^{I+s'}(j)
///          = (sum_{s' not in I} mu_{s'}) * pi[s]
///   (ii) mu_{s_|I|} * pi[(s_1..s_{|I|-1})] = lambda * pi[s]
///
/// Violations are relative gaps; the report keeps the per-identity maxima.
struct BalanceReport {
  bool pass = false;
  double tol = 0.0;
  double max_arrival_violation = 0.0;    // identity (i)
  double max_departure_violation = 0.0;  // identity (ii)
  std::string policy_name;
  nlohmann::json instance;

  double max_violation() const { return std::max(max_arrival_violation, max_departure_violation); }

  nlohmann::json to_json() const {
    return nlohmann::json{{"check", "balance"},
                          {"pass", pass},
                          {"tol", tol},
                          {"max_arrival_violation", max_arrival_violation},
                          {"max_departure_violation", max_departure_violation},
                          {"policy", policy_name},
                          {"instance", instance}};
  }
};

inline BalanceReport check_balance(const StateSpace& space, const SystemParams& params,
                                   const Policy& policy, const std::vector<double>& pi,
                                   double tol = 1e-10) {
  if (static_cast<int>(pi.size()) != space.size())
    throw std::invalid_argument("distribution does not match state space");
  BalanceReport report;
  report.tol = tol;
  report.policy_name = policy.name();
  report.instance = detail::instance_json(params);

  const int n = params.n_servers();
  for (int i = 0; i < space.size(); ++i) {
    const ChainState& st = space.state(i);
    if (!st.is_ordered()) continue;
    const std::vector<int>& order = st.idle_order();
    const int k = st.n_idle();

    // (ii) departure inflow along the chain's append-at-end structure
    std::vector<int> shorter(order.begin(), order.end() - 1);
    const ChainState prev = shorter.empty() ? ChainState::queue(0) : ChainState::ordered(shorter);
    const double inflow = params.rate_of(order.back()) * pi[static_cast<std::size_t>(space.index_of(prev))];
    const double outflow = params.lambda * pi[static_cast<std::size_t>(i)];
    report.max_departure_violation =
        std::max(report.max_departure_violation, detail::relative_gap(inflow, outflow));

    // (i) arrival inflow from every insertion of every busy server
    double busy_rate = 0.0;
    double arrival_in = 0.0;
    for (int s = 1; s <= n; ++s) {
      if (st.contains(s)) continue;
      busy_rate += params.rate_of(s);
      const std::vector<double> p = policy.position_distribution(insert_idle(order, s, 1));
      for (int j = 1; j <= k + 1; ++j) {
        if (p[static_cast<std::size_t>(j - 1)] == 0.0) continue;
        const int src = space.index_of(ChainState::ordered(insert_idle(order, s, j)));
        arrival_in += pi[static_cast<std::size_t>(src)] * p[static_cast<std::size_t>(j - 1)];
      }
    }
    report.max_arrival_violation = std::max(
        report.max_arrival_violation,
        detail::relative_gap(params.lambda * arrival_in, busy_rate * pi[static_cast<std::size_t>(i)]));
  }
  report.pass = report.max_violation() <= tol;
  return report;
}

/// Convenience overload: evaluates the identities at the closed-form
/// distribution, which the proof asserts satisfies both exactly.
inline BalanceReport check_balance(const SystemParams& params, const Policy& policy,
                                   double tol = 1e-10) {
  if (!params.capacity.is_finite())
    throw std::invalid_argument("finite K required for the balance check");
  const StateSpace space = StateSpace::enumerate(params.n_servers(), params.capacity.value());
  return check_balance(space, params, policy, closed_form(params, space).probs, tol);
}

/// Checks that ordered states sharing an idle set carry equal probability
/// ("pi_s does not depend on the order in which the servers became idle").
struct OrderInvarianceReport {
  bool pass = false;
  double tol = 0.0;
  double max_spread = 0.0;  // max over idle sets of (max - min) within the set

  nlohmann::json to_json() const {
    return nlohmann::json{{"check", "order_invariance"},
                          {"pass", pass},
                          {"tol", tol},
                          {"max_spread", max_spread}};
  }
};

inline OrderInvarianceReport order_invariance(const std::vector<double>& pi,
                                              const StateSpace& space, double tol) {
  if (static_cast<int>(pi.size()) != space.size())
    throw std::invalid_argument("distribution does not match state space");
  std::map<std::uint32_t, std::pair<double, double>> extremes;  // mask -> (min, max)
  for (int i = 0; i < space.size(); ++i) {
    const ChainState& st = space.state(i);
    if (!st.is_ordered()) continue;
    const double p = pi[static_cast<std::size_t>(i)];
    auto [it, fresh] = extremes.try_emplace(st.idle_mask(), std::pair<double, double>{p, p});
    if (!fresh) {
      it->second.first = std::min(it->second.first, p);
      it->second.second = std::max(it->second.second, p);
    }
  }
  OrderInvarianceReport report;
  report.tol = tol;
  for (const auto& [mask, mm] : extremes) {
    (void)mask;
    report.max_spread = std::max(report.max_spread, mm.second - mm.first);
  }
  report.pass = report.max_spread <= tol;
  return report;
}

}  // namespace idleq
