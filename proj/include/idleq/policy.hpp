#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "idleq/system.hpp"

namespace idleq {

/// Tolerance for user-supplied probability vectors: sums within this of 1
/// are renormalized exactly, anything further off is rejected.
inline constexpr double kDistributionTol = 1e-12;

enum class PolicyKind { Random, Lisf, Sisf, Custom };

/// Renders a server subset as "{1,3}".
inline std::string subset_label(const std::vector<int>& subset) {
  std::string out = "{";
  for (std::size_t i = 0; i < subset.size(); ++i) {
    if (i > 0) out += ',';
    out += std::to_string(subset[i]);
  }
  out += '}';
  return out;
}

/// An idle-time-order-based routing policy.
///
/// For every nonempty subset S of servers the policy fixes a probability
/// distribution p^S over the idle-order positions 1..|S|. When a job must be
/// dispatched while the idle servers, ordered by the time they became idle
/// (earliest first), are (s_1,...,s_k), position j is drawn with probability
/// p^S(j) and the job goes to server s_j. The distribution may depend on the
/// set of idle servers but never on their order; that restriction is what
/// defines the class.
///
/// Built-ins: Random (uniform over positions), LISF (point mass on position
/// 1, the server idle longest), SISF (point mass on the last position).
class Policy {
 public:
  /// Custom tables map each subset (sorted, 1-based, distinct) to its
  /// distribution over positions 1..|S|.
  using CustomTable = std::map<std::vector<int>, std::vector<double>>;

  static Policy random() { return Policy(PolicyKind::Random); }
  static Policy lisf() { return Policy(PolicyKind::Lisf); }
  static Policy sisf() { return Policy(PolicyKind::Sisf); }

  /// Builds a custom policy. Each distribution must be nonnegative with the
  /// right length and sum to 1 within kDistributionTol; compliant vectors
  /// are renormalized, anything else is rejected.
  static Policy custom(CustomTable table) {
    Policy p(PolicyKind::Custom);
    for (auto& [subset, dist] : table) {
      if (subset.empty())
        throw std::invalid_argument("custom table keys must be nonempty subsets");
      if (!std::is_sorted(subset.begin(), subset.end()) ||
          std::adjacent_find(subset.begin(), subset.end()) != subset.end())
        throw std::invalid_argument("custom table key " + subset_label(subset) +
                                    " must be a sorted set of distinct servers");
      if (subset.front() < 1)
        throw std::invalid_argument("server indices are 1-based");
      if (dist.size() != subset.size())
        throw std::invalid_argument("distribution for subset " + subset_label(subset) +
                                    " must have one entry per idle-order position");
      double sum = 0.0;
      for (double v : dist) {
        if (!(v >= 0.0) || !std::isfinite(v))
          throw std::invalid_argument("distribution for subset " + subset_label(subset) +
                                      " has a negative or non-finite entry");
        sum += v;
      }
      if (std::abs(sum - 1.0) > kDistributionTol)
        throw std::invalid_argument("distribution for subset " + subset_label(subset) +
                                    " must sum to 1, got " + std::to_string(sum));
      for (double& v : dist) v /= sum;
    }
    p.table_ = std::move(table);
    return p;
  }

  PolicyKind kind() const { return kind_; }
  const CustomTable& custom_table() const { return table_; }

  std::string name() const {
    switch (kind_) {
      case PolicyKind::Random: return "random";
      case PolicyKind::Lisf: return "lisf";
      case PolicyKind::Sisf: return "sisf";
      case PolicyKind::Custom: return "custom";
    }
    return "?";
  }

  /// The distribution p^S over positions 1..|S| for the current idle-order
  /// vector. Depends only on the set of entries, never on their order.
  std::vector<double> position_distribution(const std::vector<int>& idle_order) const {
    const std::size_t k = idle_order.size();
    if (k == 0) throw std::invalid_argument("idle set must be nonempty");
    switch (kind_) {
      case PolicyKind::Random:
        return std::vector<double>(k, 1.0 / static_cast<double>(k));
      case PolicyKind::Lisf: {
        std::vector<double> p(k, 0.0);
        p.front() = 1.0;
        return p;
      }
      case PolicyKind::Sisf: {
        std::vector<double> p(k, 0.0);
        p.back() = 1.0;
        return p;
      }
      case PolicyKind::Custom: {
        std::vector<int> key = idle_order;
        std::sort(key.begin(), key.end());
        auto it = table_.find(key);
        if (it == table_.end())
          throw std::out_of_range("policy undefined on subset " + subset_label(key));
        return it->second;
      }
    }
    throw std::logic_error("unreachable");
  }

 private:
  explicit Policy(PolicyKind k) : kind_(k) {}

  PolicyKind kind_;
  CustomTable table_;
};

/// Outcome of validating a (params, policy) pair; carries every violated
/// invariant rather than stopping at the first.
struct ValidationReport {
  std::vector<std::string> violations;
  bool ok() const { return violations.empty(); }

  std::string message() const {
    std::string out;
    for (std::size_t i = 0; i < violations.size(); ++i) {
      if (i > 0) out += "; ";
      out += violations[i];
    }
    return out;
  }
};

inline ValidationReport validate(const SystemParams& params, const Policy& policy) {
  ValidationReport report;
  auto fail = [&report](std::string msg) { report.violations.push_back(std::move(msg)); };

  if (!(params.lambda > 0.0) || !std::isfinite(params.lambda))
    fail("lambda must be positive");
  const int n = params.n_servers();
  if (n < 1) fail("at least one server is required");
  for (int s = 1; s <= n; ++s) {
    const double rate = params.mu[static_cast<std::size_t>(s) - 1];
    if (!(rate > 0.0) || !std::isfinite(rate))
      fail("mu[" + std::to_string(s) + "] must be positive");
  }
  if (params.capacity.is_finite() && params.capacity.value() < n)
    fail("capacity K must be at least N");

  if (policy.kind() == PolicyKind::Custom && n >= 1) {
    for (const auto& [subset, dist] : policy.custom_table()) {
      (void)dist;
      if (subset.back() > n)
        fail("custom table references server " + std::to_string(subset.back()) +
             " but the system has N=" + std::to_string(n) + " servers");
    }
    if (n <= 24) {
      for (std::uint32_t mask = 1; mask < (1u << n); ++mask) {
        std::vector<int> subset;
        for (int s = 1; s <= n; ++s)
          if (mask & (1u << (s - 1))) subset.push_back(s);
        if (policy.custom_table().find(subset) == policy.custom_table().end()) {
          fail("custom table not total: missing subset " + subset_label(subset));
          break;
        }
      }
    }
  }
  return report;
}

}  // namespace idleq
