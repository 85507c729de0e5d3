#pragma once

#include <algorithm>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

namespace idleq {

/// One state of the routing Markov chain. Either an ordered idle vector
/// (s_1,...,s_k), listing the idle servers by the time they became idle
/// (earliest first), or a queue state m: all servers busy with m jobs
/// waiting. Queue state 0 is the all-busy, empty-queue state B; the empty
/// ordered vector is never stored.
class ChainState {
 public:
  static ChainState queue(int m) {
    if (m < 0) throw std::invalid_argument("queue length must be nonnegative");
    ChainState st;
    st.queue_len_ = m;
    return st;
  }

  static ChainState ordered(std::vector<int> idle_order) {
    if (idle_order.empty())
      throw std::invalid_argument("ordered state needs at least one idle server; B is queue(0)");
    std::vector<int> sorted = idle_order;
    std::sort(sorted.begin(), sorted.end());
    if (sorted.front() < 1)
      throw std::invalid_argument("server indices are 1-based");
    if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
      throw std::invalid_argument("idle servers must be distinct");
    ChainState st;
    st.idle_order_ = std::move(idle_order);
    return st;
  }

  bool is_queue() const { return idle_order_.empty(); }
  bool is_ordered() const { return !idle_order_.empty(); }

  int queue_len() const {
    if (is_ordered()) throw std::logic_error("not a queue state");
    return queue_len_;
  }

  const std::vector<int>& idle_order() const {
    if (is_queue()) throw std::logic_error("not an ordered state");
    return idle_order_;
  }

  int n_idle() const { return static_cast<int>(idle_order_.size()); }

  /// Bitmask of the idle set (bit s-1 for server s); 0 for queue states.
  std::uint32_t idle_mask() const {
    std::uint32_t mask = 0;
    for (int s : idle_order_) mask |= 1u << (s - 1);
    return mask;
  }

  bool contains(int server) const {
    return std::find(idle_order_.begin(), idle_order_.end(), server) != idle_order_.end();
  }

  /// Jobs in the system for an N-server configuration.
  int jobs(int n_servers) const {
    return is_queue() ? n_servers + queue_len_ : n_servers - n_idle();
  }

  /// "m=<k>" for queue states, "(s1,s2,...)" for ordered states.
  std::string label() const {
    if (is_queue()) return "m=" + std::to_string(queue_len_);
    std::string out = "(";
    for (std::size_t i = 0; i < idle_order_.size(); ++i) {
      if (i > 0) out += ',';
      out += std::to_string(idle_order_[i]);
    }
    out += ')';
    return out;
  }

  bool operator==(const ChainState&) const = default;

  /// Canonical order: queue states ascending, then ordered states grouped by
  /// idle set (bitmask ascending), permutations lexicographic within a set.
  bool operator<(const ChainState& other) const {
    if (is_queue() != other.is_queue()) return is_queue();
    if (is_queue()) return queue_len_ < other.queue_len_;
    const std::uint32_t ma = idle_mask(), mb = other.idle_mask();
    if (ma != mb) return ma < mb;
    return idle_order_ < other.idle_order_;
  }

 private:
  ChainState() = default;

  std::vector<int> idle_order_;
  int queue_len_ = 0;
};

struct ChainStateHash {
  std::size_t operator()(const ChainState& st) const {
    std::size_t h = 0xcbf29ce484222325ull;
    auto mix = [&h](std::size_t v) {
      h ^= v + 0x9e3779b97f4a7c15ull + (h << 6) + (h >> 2);
    };
    if (st.is_queue()) {
      mix(0x51ull);
      mix(static_cast<std::size_t>(st.queue_len()));
    } else {
      for (int s : st.idle_order()) mix(static_cast<std::size_t>(s));
    }
    return h;
  }
};

/// The spliced vector s[s',j]: s' inserted at 1-based position j with the
/// tail shifted right; j = |s|+1 appends.
inline std::vector<int> insert_idle(const std::vector<int>& s, int s_new, int position) {
  if (s_new < 1) throw std::invalid_argument("server indices are 1-based");
  if (std::find(s.begin(), s.end(), s_new) != s.end())
    throw std::invalid_argument("server " + std::to_string(s_new) + " is already in the idle vector");
  if (position < 1 || position > static_cast<int>(s.size()) + 1)
    throw std::invalid_argument("insertion position out of range");
  std::vector<int> out;
  out.reserve(s.size() + 1);
  out.assign(s.begin(), s.begin() + (position - 1));
  out.push_back(s_new);
  out.insert(out.end(), s.begin() + (position - 1), s.end());
  return out;
}

/// Cap on N for exact state enumeration; the ordered part grows as
/// sum_{k=1..N} N!/(N-k)! (109,600 states at N=8).
inline constexpr int kDefaultServerCap = 8;

/// Dense, deterministically ordered enumeration of every chain state for an
/// N-server system with finite capacity K, with a hash-based inverse lookup.
class StateSpace {
 public:
  /// Queue states m=0..K-N first (queue(0) = B), then the ordered idle
  /// vectors grouped by idle set in ascending bitmask order, permutations in
  /// lexicographic order within each set. Pass `max_servers` to override the
  /// default cap on N.
  static StateSpace enumerate(int n_servers, int capacity, int max_servers = kDefaultServerCap) {
    if (n_servers < 1) throw std::invalid_argument("need at least one server");
    if (n_servers > max_servers)
      throw std::invalid_argument("state space too large: N=" + std::to_string(n_servers) +
                                  " exceeds the cap of " + std::to_string(max_servers) +
                                  " (raise max_servers to override)");
    if (capacity < n_servers)
      throw std::invalid_argument("capacity K must be at least N");

    StateSpace space;
    space.n_servers_ = n_servers;
    space.capacity_ = capacity;
    for (int m = 0; m <= capacity - n_servers; ++m)
      space.push(ChainState::queue(m));
    for (std::uint32_t mask = 1; mask < (1u << n_servers); ++mask) {
      std::vector<int> subset;
      for (int s = 1; s <= n_servers; ++s)
        if (mask & (1u << (s - 1))) subset.push_back(s);
      std::vector<int> perm = subset;  // sorted = lexicographically first
      do {
        space.push(ChainState::ordered(perm));
      } while (std::next_permutation(perm.begin(), perm.end()));
    }
    return space;
  }

  int size() const { return static_cast<int>(states_.size()); }
  const std::vector<ChainState>& states() const { return states_; }
  const ChainState& state(int index) const { return states_.at(static_cast<std::size_t>(index)); }
  bool contains(const ChainState& st) const { return index_.find(st) != index_.end(); }

  int index_of(const ChainState& st) const {
    auto it = index_.find(st);
    if (it == index_.end())
      throw std::out_of_range("state not in space: " + st.label());
    return it->second;
  }

  int n_servers() const { return n_servers_; }
  int capacity() const { return capacity_; }

 private:
  StateSpace() = default;

  void push(ChainState st) {
    index_.emplace(st, size());
    states_.push_back(std::move(st));
  }

  int n_servers_ = 0;
  int capacity_ = 0;
  std::vector<ChainState> states_;
  std::unordered_map<ChainState, int, ChainStateHash> index_;
};

}  // namespace idleq
