#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "idleq/distribution.hpp"
#include "idleq/policy.hpp"
#include "idleq/state_space.hpp"
#include "idleq/system.hpp"

namespace idleq {

namespace detail {

// Direct products are fine for moderate rate ratios; switch to log space
// when any mu_s/lambda leaves [1e-6, 1e6] or the queue tail exponent could
// get near the double range.
inline bool needs_log_space(const SystemParams& params, int queue_levels) {
  double log_budget = 0.0;
  for (double m : params.mu) {
    const double ratio = m / params.lambda;
    if (ratio < 1e-6 || ratio > 1e6) return true;
    log_budget += std::abs(std::log(ratio));
  }
  const double rho = params.lambda / params.total_mu();
  log_budget += static_cast<double>(queue_levels) * std::abs(std::log(rho));
  return log_budget > 600.0;
}

inline void normalize_in_place(std::vector<double>& w) {
  double total = 0.0;
  for (double v : w) total += v;
  for (double& v : w) v /= total;
}

inline void exp_normalize_in_place(std::vector<double>& lw) {
  const double lmax = *std::max_element(lw.begin(), lw.end());
  double total = 0.0;
  for (double v : lw) total += std::exp(v - lmax);
  for (double& v : lw) v = std::exp(v - lmax) / total;
}

inline void require_valid_rates(const SystemParams& params) {
  const ValidationReport report = validate(params, Policy::random());
  if (!report.ok()) throw std::invalid_argument("invalid params: " + report.message());
}

}  // namespace detail

/// The product-form stationary distribution of the chain, valid for every
/// idle-time-order-based policy (no policy argument is needed):
///
///   pi_m = (lambda/mu)^m * pi_B            for queue states, mu = sum mu_j
///   pi_s = pi_B * prod_{s in I} mu_s/lambda  for ordered states with idle set I
///
/// pi_B follows from normalization; each idle set I contributes |I|! ordered
/// states of equal probability, which is why pi_s cannot depend on the order
/// in which the servers became idle.
inline StationaryDistribution closed_form(const SystemParams& params, const StateSpace& space) {
  detail::require_valid_rates(params);
  if (!params.capacity.is_finite())
    throw std::invalid_argument("finite K required; use closed_form_unbounded");
  if (space.n_servers() != params.n_servers() || space.capacity() != params.capacity.value())
    throw std::invalid_argument("state space does not match params");

  const double lambda = params.lambda;
  const double rho = lambda / params.total_mu();
  const int queue_levels = params.capacity.value() - params.n_servers();

  std::vector<double> w(static_cast<std::size_t>(space.size()));
  if (!detail::needs_log_space(params, queue_levels)) {
    for (int i = 0; i < space.size(); ++i) {
      const ChainState& st = space.state(i);
      double v = 1.0;
      if (st.is_queue()) {
        v = std::pow(rho, st.queue_len());
      } else {
        for (int s : st.idle_order()) v *= params.rate_of(s) / lambda;
      }
      w[static_cast<std::size_t>(i)] = v;
    }
    detail::normalize_in_place(w);
  } else {
    const double log_rho = std::log(rho);
    for (int i = 0; i < space.size(); ++i) {
      const ChainState& st = space.state(i);
      double lv = 0.0;
      if (st.is_queue()) {
        lv = st.queue_len() * log_rho;
      } else {
        for (int s : st.idle_order()) lv += std::log(params.rate_of(s) / lambda);
      }
      w[static_cast<std::size_t>(i)] = lv;
    }
    detail::exp_normalize_in_place(w);
  }
  return StationaryDistribution{std::move(w), SolutionSource::ClosedForm, 0.0, {}};
}

/// Closed form for unbounded K: the ordered part is a finite StateSpace
/// (B plus every ordered state, i.e. enumerate(N, N)) and the queue tail is
/// geometric, pi_m = pi_B * queue_ratio^m for all m >= 0.
struct UnboundedClosedForm {
  StateSpace ordered_part;
  std::vector<double> probs;  // aligned with ordered_part; entry at B is pi_B
  double queue_ratio = 0.0;   // lambda/mu
};

inline UnboundedClosedForm closed_form_unbounded(const SystemParams& params,
                                                 int max_servers = kDefaultServerCap) {
  detail::require_valid_rates(params);
  if (!params.stable())
    throw std::domain_error("unstable: closed form undefined (lambda >= total mu)");

  const int n = params.n_servers();
  const double lambda = params.lambda;
  const double rho = lambda / params.total_mu();
  StateSpace space = StateSpace::enumerate(n, n, max_servers);

  std::vector<double> w(static_cast<std::size_t>(space.size()));
  // Tail mass beyond B: sum_{m>=1} rho^m = rho/(1-rho), with weight(B) = 1.
  const double tail = rho / (1.0 - rho);
  if (!detail::needs_log_space(params, 0)) {
    double total = tail;
    for (int i = 0; i < space.size(); ++i) {
      const ChainState& st = space.state(i);
      double v = 1.0;
      if (st.is_ordered())
        for (int s : st.idle_order()) v *= params.rate_of(s) / lambda;
      w[static_cast<std::size_t>(i)] = v;
      total += v;
    }
    for (double& v : w) v /= total;
  } else {
    std::vector<double> lw(w.size() + 1);
    for (int i = 0; i < space.size(); ++i) {
      const ChainState& st = space.state(i);
      double lv = 0.0;
      if (st.is_ordered())
        for (int s : st.idle_order()) lv += std::log(params.rate_of(s) / lambda);
      lw[static_cast<std::size_t>(i)] = lv;
    }
    lw.back() = std::log(tail);
    detail::exp_normalize_in_place(lw);
    std::copy(lw.begin(), lw.end() - 1, w.begin());
  }
  return UnboundedClosedForm{std::move(space), std::move(w), rho};
}

}  // namespace idleq
