#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/SparseCore>
#include <Eigen/SparseLU>

#include "idleq/distribution.hpp"
#include "idleq/generator.hpp"

namespace idleq {

class SolverError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class SolveMethod { Auto, Direct, Iterative };

/// Direct is a sparse LU factorization; Iterative is power iteration on the
/// uniformized chain. Auto picks Direct up to kDirectSolveLimit states.
struct SolveOptions {
  SolveMethod method = SolveMethod::Auto;
  double tol = 1e-12;
  long long max_iterations = 10'000'000;  // Iterative only
};

inline constexpr int kDirectSolveLimit = 20'000;

namespace detail {

inline bool strongly_connected(const GeneratorMatrix& q) {
  const int n = q.dim();
  std::vector<std::vector<int>> rev(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i)
    for (const auto& [j, rate] : q.row(i)) {
      (void)rate;
      rev[static_cast<std::size_t>(j)].push_back(i);
    }
  auto covers_all = [n](auto&& neighbors) {
    std::vector<char> seen(static_cast<std::size_t>(n), 0);
    std::vector<int> stack{0};
    seen[0] = 1;
    int count = 1;
    while (!stack.empty()) {
      const int u = stack.back();
      stack.pop_back();
      for (int v : neighbors(u)) {
        if (!seen[static_cast<std::size_t>(v)]) {
          seen[static_cast<std::size_t>(v)] = 1;
          ++count;
          stack.push_back(v);
        }
      }
    }
    return count == n;
  };
  std::vector<int> scratch;
  const bool fwd = covers_all([&](int u) {
    scratch.clear();
    for (const auto& [j, rate] : q.row(u)) {
      (void)rate;
      scratch.push_back(j);
    }
    return scratch;
  });
  if (!fwd) return false;
  return covers_all([&](int u) { return rev[static_cast<std::size_t>(u)]; });
}

inline StationaryDistribution solve_direct(const GeneratorMatrix& q, const SolveOptions& opts) {
  (void)opts;
  const int n = q.dim();
  // pi Q = 0 transposes to A pi = b with one balance equation (the last)
  // replaced by the normalization row.
  std::vector<Eigen::Triplet<double>> trips;
  for (int i = 0; i < n; ++i) {
    if (i != n - 1) trips.emplace_back(i, i, q.diagonal(i));
    for (const auto& [j, rate] : q.row(i))
      if (j != n - 1) trips.emplace_back(j, i, rate);
  }
  for (int i = 0; i < n; ++i) trips.emplace_back(n - 1, i, 1.0);

  Eigen::SparseMatrix<double> a(n, n);
  a.setFromTriplets(trips.begin(), trips.end());
  a.makeCompressed();

  Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
  lu.analyzePattern(a);
  lu.factorize(a);
  if (lu.info() != Eigen::Success)
    throw SolverError("direct solve failed: generator factorization unsuccessful");
  Eigen::VectorXd b = Eigen::VectorXd::Zero(n);
  b(n - 1) = 1.0;
  const Eigen::VectorXd x = lu.solve(b);
  if (lu.info() != Eigen::Success)
    throw SolverError("direct solve failed: back substitution unsuccessful");

  std::vector<double> pi(static_cast<std::size_t>(n));
  double total = 0.0;
  for (int i = 0; i < n; ++i) {
    double v = x(i);
    if (v < 0.0) {
      if (v < -1e-14)
        throw SolverError("direct solve produced a negative probability: " + std::to_string(v));
      v = 0.0;  // round-off
    }
    pi[static_cast<std::size_t>(i)] = v;
    total += v;
  }
  for (double& v : pi) v /= total;

  double residual = 0.0;
  for (double r : q.apply_left(pi)) residual = std::max(residual, std::abs(r));
  return StationaryDistribution{std::move(pi), SolutionSource::NumericSolve, residual, {}};
}

inline StationaryDistribution solve_iterative(const GeneratorMatrix& q, const SolveOptions& opts) {
  const int n = q.dim();
  // Uniformize: P = I + Q/Lambda is stochastic for Lambda above the max exit
  // rate; the 1.05 margin keeps P aperiodic.
  const double big = 1.05 * q.max_exit_rate();
  std::vector<double> pi(static_cast<std::size_t>(n), 1.0 / n);
  // Successive-iterate difference is residual/Lambda, so this threshold
  // enforces both the step criterion and a max |pi Q| certificate <= tol.
  const double target = opts.tol * std::min(1.0, big);
  long long iterations = 0;
  double residual = 0.0;
  for (;;) {
    const std::vector<double> flow = q.apply_left(pi);
    residual = 0.0;
    for (double r : flow) residual = std::max(residual, std::abs(r));
    if (residual <= target) break;
    if (++iterations > opts.max_iterations)
      throw SolverError("power iteration did not converge after " +
                        std::to_string(opts.max_iterations) +
                        " iterations; last residual=" + std::to_string(residual));
    double total = 0.0;
    for (int i = 0; i < n; ++i) {
      pi[static_cast<std::size_t>(i)] += flow[static_cast<std::size_t>(i)] / big;
      total += pi[static_cast<std::size_t>(i)];
    }
    for (double& v : pi) v /= total;
  }
  return StationaryDistribution{std::move(pi), SolutionSource::NumericSolve, residual, {}};
}

}  // namespace detail

/// Solves pi Q = 0, sum(pi) = 1 for an irreducible generator, independent of
/// any closed form. The reported residual is max |(pi Q)_i|.
inline StationaryDistribution solve_stationary(const GeneratorMatrix& q,
                                               const SolveOptions& opts = {}) {
  if (!(opts.tol > 0.0)) throw std::invalid_argument("tol must be positive");
  const int n = q.dim();
  for (int i = 0; i < n; ++i)
    if (std::abs(q.row_sum(i)) > 1e-12)
      throw SolverError("malformed generator: row " + std::to_string(i) + " does not sum to 0");
  if (n == 1)
    return StationaryDistribution{{1.0}, SolutionSource::NumericSolve, 0.0, {}};
  if (!detail::strongly_connected(q))
    throw SolverError("generator is reducible: no unique stationary distribution");

  SolveMethod method = opts.method;
  if (method == SolveMethod::Auto)
    method = n <= kDirectSolveLimit ? SolveMethod::Direct : SolveMethod::Iterative;
  return method == SolveMethod::Direct ? detail::solve_direct(q, opts)
                                       : detail::solve_iterative(q, opts);
}

/// Entrywise balance residuals (pi Q); the max-abs entry certifies pi.
inline std::vector<double> balance_residuals(const std::vector<double>& pi,
                                             const GeneratorMatrix& q) {
  return q.apply_left(pi);
}

}  // namespace idleq
