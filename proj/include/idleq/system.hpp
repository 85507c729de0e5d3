#pragma once

#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

namespace idleq {

/// System capacity K: the total number of jobs (in service plus waiting)
/// the system can hold. Unbounded capacity is the classic M/M/N system.
class Capacity {
 public:
  static Capacity finite(int k) {
    if (k < 0) throw std::invalid_argument("capacity must be nonnegative");
    return Capacity(k);
  }
  static Capacity unbounded() { return Capacity(-1); }

  bool is_finite() const { return k_ >= 0; }

  /// The value K; only meaningful for finite capacities.
  int value() const {
    if (!is_finite()) throw std::logic_error("capacity is unbounded");
    return k_;
  }

  std::string label() const { return is_finite() ? std::to_string(k_) : "inf"; }

  bool operator==(const Capacity&) const = default;

 private:
  explicit Capacity(int k) : k_(k) {}
  int k_;
};

/// Parameters of a heterogeneous M/M/N/K/FCFS system: Poisson arrivals at
/// rate lambda into a central FCFS queue, N exponential servers with rates
/// mu[0..N-1]. Servers are identified by 1-based indices 1..N throughout.
struct SystemParams {
  double lambda = 1.0;
  std::vector<double> mu;
  Capacity capacity = Capacity::unbounded();

  int n_servers() const { return static_cast<int>(mu.size()); }

  /// Service rate of server `s` (1-based).
  double rate_of(int s) const { return mu.at(static_cast<std::size_t>(s) - 1); }

  /// Aggregate service rate, the mu = sum of mu_j appearing in the queue
  /// states' birth-death dynamics.
  double total_mu() const { return std::accumulate(mu.begin(), mu.end(), 0.0); }

  /// Whether an unbounded-capacity system reaches steady state.
  bool stable() const { return lambda < total_mu(); }
};

}  // namespace idleq
