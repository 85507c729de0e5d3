#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <ostream>
#include <stdexcept>
#include <utility>
#include <vector>

#include "idleq/detail/format.hpp"
#include "idleq/policy.hpp"
#include "idleq/state_space.hpp"
#include "idleq/system.hpp"

namespace idleq {

/// Sparse transition-rate matrix Q of the chain. Off-diagonal entries are
/// nonnegative transition rates; each diagonal entry is minus the row's
/// total exit rate, so rows sum to zero by construction.
class GeneratorMatrix {
 public:
  struct Entry {
    int row;
    int col;
    double rate;
  };

  /// Builds Q from off-diagonal rates. Duplicate (row, col) pairs
  /// accumulate; zero rates are dropped.
  GeneratorMatrix(int dim, const std::vector<Entry>& off_diagonal)
      : dim_(dim), rows_(static_cast<std::size_t>(dim)), diag_(static_cast<std::size_t>(dim), 0.0) {
    if (dim < 1) throw std::invalid_argument("generator dimension must be at least 1");
    std::vector<std::map<int, double>> accum(static_cast<std::size_t>(dim));
    for (const Entry& e : off_diagonal) {
      if (e.row < 0 || e.row >= dim || e.col < 0 || e.col >= dim)
        throw std::invalid_argument("generator entry out of range");
      if (e.row == e.col)
        throw std::invalid_argument("diagonal entries are derived, not supplied");
      if (!(e.rate >= 0.0) || !std::isfinite(e.rate))
        throw std::invalid_argument("transition rates must be finite and nonnegative");
      if (e.rate > 0.0) accum[static_cast<std::size_t>(e.row)][e.col] += e.rate;
    }
    for (int i = 0; i < dim; ++i) {
      auto& row = rows_[static_cast<std::size_t>(i)];
      row.assign(accum[static_cast<std::size_t>(i)].begin(), accum[static_cast<std::size_t>(i)].end());
      double exit = 0.0;
      for (const auto& [col, rate] : row) exit += rate;
      diag_[static_cast<std::size_t>(i)] = -exit;
    }
  }

  int dim() const { return dim_; }

  /// Off-diagonal entries of one row, sorted by column.
  const std::vector<std::pair<int, double>>& row(int i) const {
    return rows_.at(static_cast<std::size_t>(i));
  }

  double diagonal(int i) const { return diag_.at(static_cast<std::size_t>(i)); }
  double exit_rate(int i) const { return -diagonal(i); }

  double row_sum(int i) const {
    double sum = diagonal(i);
    for (const auto& [col, rate] : row(i)) sum += rate;
    return sum;
  }

  double max_exit_rate() const {
    double out = 0.0;
    for (double d : diag_) out = std::max(out, -d);
    return out;
  }

  /// Single off-diagonal rate (0 if absent); diagonal via diagonal(i).
  double rate(int from, int to) const {
    for (const auto& [col, r] : row(from))
      if (col == to) return r;
    return 0.0;
  }

  /// Left product pi^T Q.
  std::vector<double> apply_left(const std::vector<double>& pi) const {
    if (static_cast<int>(pi.size()) != dim_)
      throw std::invalid_argument("dimension mismatch between pi and Q");
    std::vector<double> out(static_cast<std::size_t>(dim_), 0.0);
    for (int i = 0; i < dim_; ++i) {
      const double w = pi[static_cast<std::size_t>(i)];
      if (w == 0.0) continue;
      out[static_cast<std::size_t>(i)] += w * diag_[static_cast<std::size_t>(i)];
      for (const auto& [j, r] : rows_[static_cast<std::size_t>(i)])
        out[static_cast<std::size_t>(j)] += w * r;
    }
    return out;
  }

 private:
  int dim_;
  std::vector<std::vector<std::pair<int, double>>> rows_;
  std::vector<double> diag_;
};

/// Assembles Q for a (params, policy) pair over a finite state space.
///
/// Transitions:
///  - arrival in an ordered state (s_1,...,s_k): rate lambda*p^I(j) to the
///    state with s_j removed (B when k = 1);
///  - arrival in queue state m < K-N: rate lambda to m+1; arrivals at
///    m = K-N are lost (no transition);
///  - departure of busy server s' in an ordered state: rate mu_{s'} to the
///    state with s' appended at the end (it just became idle);
///  - departure in queue state m >= 1: aggregate rate mu to m-1; departure
///    of server i in B: rate mu_i to the singleton state (i).
inline GeneratorMatrix build_generator(const StateSpace& space, const SystemParams& params,
                                       const Policy& policy) {
  const ValidationReport report = validate(params, policy);
  if (!report.ok())
    throw std::invalid_argument("invalid system or policy: " + report.message());
  if (!params.capacity.is_finite())
    throw std::invalid_argument("finite K required to build the generator");
  if (space.n_servers() != params.n_servers() || space.capacity() != params.capacity.value())
    throw std::invalid_argument("state space does not match params");

  const int n = params.n_servers();
  const int queue_cap = params.capacity.value() - n;
  const double lambda = params.lambda;

  std::vector<GeneratorMatrix::Entry> entries;
  for (int i = 0; i < space.size(); ++i) {
    const ChainState& st = space.state(i);
    if (st.is_ordered()) {
      const std::vector<int>& order = st.idle_order();
      const int k = st.n_idle();
      const std::vector<double> p = policy.position_distribution(order);
      for (int j = 0; j < k; ++j) {
        if (p[static_cast<std::size_t>(j)] == 0.0) continue;
        ChainState dest = ChainState::queue(0);
        if (k > 1) {
          std::vector<int> rest = order;
          rest.erase(rest.begin() + j);
          dest = ChainState::ordered(std::move(rest));
        }
        entries.push_back({i, space.index_of(dest), lambda * p[static_cast<std::size_t>(j)]});
      }
      for (int s = 1; s <= n; ++s) {
        if (st.contains(s)) continue;
        std::vector<int> longer = order;
        longer.push_back(s);
        entries.push_back({i, space.index_of(ChainState::ordered(std::move(longer))), params.rate_of(s)});
      }
    } else {
      const int m = st.queue_len();
      if (m == 0) {
        for (int s = 1; s <= n; ++s)
          entries.push_back({i, space.index_of(ChainState::ordered({s})), params.rate_of(s)});
      } else {
        entries.push_back({i, space.index_of(ChainState::queue(m - 1)), params.total_mu()});
      }
      if (m < queue_cap)
        entries.push_back({i, space.index_of(ChainState::queue(m + 1)), lambda});
    }
  }
  return GeneratorMatrix(space.size(), entries);
}

/// Coordinate-format dump (row, col, rate), diagonal included, row-major
/// with columns ascending. Header: row,col,rate
inline void write_generator_csv(std::ostream& out, const GeneratorMatrix& q) {
  out << "row,col,rate\n";
  for (int i = 0; i < q.dim(); ++i) {
    bool diag_done = false;
    for (const auto& [j, rate] : q.row(i)) {
      if (!diag_done && i < j) {
        out << i << ',' << i << ',' << detail::fmt(q.diagonal(i)) << '\n';
        diag_done = true;
      }
      out << i << ',' << j << ',' << detail::fmt(rate) << '\n';
    }
    if (!diag_done)
      out << i << ',' << i << ',' << detail::fmt(q.diagonal(i)) << '\n';
  }
}

}  // namespace idleq
