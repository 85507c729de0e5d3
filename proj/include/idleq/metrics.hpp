#pragma once

#include <stdexcept>
#include <vector>

#include "idleq/closed_form.hpp"
#include "idleq/distribution.hpp"
#include "idleq/state_space.hpp"
#include "idleq/system.hpp"

namespace idleq {

/// Standard performance measures of a stationary distribution.
struct Metrics {
  double p_block = 0.0;     ///< probability an arrival is lost
  double mean_jobs = 0.0;   ///< expected number in system
  double mean_queue = 0.0;  ///< expected number waiting
  double throughput = 0.0;  ///< effective departure rate
  double mean_wait = 0.0;   ///< mean sojourn time (Little's law)
  std::vector<double> util; ///< per-server busy probability, util[i] is server i+1
};

inline Metrics compute_metrics(const std::vector<double>& probs, const SystemParams& params,
                               const StateSpace& space) {
  if (static_cast<int>(probs.size()) != space.size())
    throw std::invalid_argument("distribution does not match state space");
  const int n = space.n_servers();
  Metrics m;
  m.util.assign(static_cast<std::size_t>(n), 1.0);
  for (int i = 0; i < space.size(); ++i) {
    const ChainState& st = space.state(i);
    const double p = probs[static_cast<std::size_t>(i)];
    m.mean_jobs += p * st.jobs(n);
    if (st.is_queue()) {
      m.mean_queue += p * st.queue_len();
    } else {
      for (int s : st.idle_order()) m.util[static_cast<std::size_t>(s) - 1] -= p;
    }
  }
  m.p_block = probs[static_cast<std::size_t>(
      space.index_of(ChainState::queue(space.capacity() - n)))];
  m.throughput = params.lambda * (1.0 - m.p_block);
  m.mean_wait = m.throughput > 0.0 ? m.mean_jobs / m.throughput : 0.0;
  return m;
}

/// Metrics for the unbounded-K closed form; the geometric queue tail is
/// integrated analytically.
inline Metrics compute_metrics(const UnboundedClosedForm& cf, const SystemParams& params) {
  const StateSpace& space = cf.ordered_part;
  const int n = space.n_servers();
  const double rho = cf.queue_ratio;
  const double pi_b = cf.probs[static_cast<std::size_t>(space.index_of(ChainState::queue(0)))];

  Metrics m;
  m.util.assign(static_cast<std::size_t>(n), 1.0);
  for (int i = 0; i < space.size(); ++i) {
    const ChainState& st = space.state(i);
    if (!st.is_ordered()) continue;
    const double p = cf.probs[static_cast<std::size_t>(i)];
    m.mean_jobs += p * st.jobs(n);
    for (int s : st.idle_order()) m.util[static_cast<std::size_t>(s) - 1] -= p;
  }
  // sum_{m>=0} (n+m) pi_B rho^m and sum_{m>=0} m pi_B rho^m
  const double geo = 1.0 / (1.0 - rho);
  m.mean_queue = pi_b * rho * geo * geo;
  m.mean_jobs += pi_b * n * geo + m.mean_queue;
  m.p_block = 0.0;
  m.throughput = params.lambda;
  m.mean_wait = m.mean_jobs / params.lambda;
  return m;
}

}  // namespace idleq
