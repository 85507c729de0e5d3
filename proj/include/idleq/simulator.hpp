#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <ostream>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "idleq/detail/format.hpp"
#include "idleq/metrics.hpp"
#include "idleq/policy.hpp"
#include "idleq/state_space.hpp"
#include "idleq/system.hpp"

namespace idleq {

/// Simulation budget and reproducibility knobs. A run is deterministic given
/// (seed, config, params, policy); the trace sink does not perturb sampling.
struct SimConfig {
  std::uint64_t seed = 1;
  std::uint64_t warmup_events = 10'000;
  std::uint64_t measured_events = 100'000;  ///< must be divisible by batches
  int batches = 32;                         ///< batch-means batches, >= 10
  bool check_invariants = false;  ///< per-event bookkeeping checks (tests)
};

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// One substream of the run's random source. Interarrivals, policy position
/// draws, and each server's service times get their own substream so that
/// runs under a common seed share arrival processes across policies.
/// Draws avoid std:: distributions to stay bit-stable across platforms.
class RandomStream {
 public:
  RandomStream(std::uint64_t seed, std::uint64_t stream)
      : gen_(splitmix64(seed ^ splitmix64(stream ^ 0x5bd1e995ULL))) {}

  double uniform() {  // [0, 1)
    return static_cast<double>(gen_() >> 11) * 0x1.0p-53;
  }

  double exponential(double rate) { return -std::log1p(-uniform()) / rate; }

 private:
  std::mt19937_64 gen_;
};

}  // namespace detail

struct StateOccupancy {
  ChainState state;
  double probability = 0.0;
  double std_error = 0.0;
};

/// Time-average estimates from one run. Occupancy covers visited states in
/// canonical state order and sums to 1 over the measured window; standard
/// errors come from batch means.
struct SimEstimate {
  std::vector<StateOccupancy> occupancy;
  Metrics metrics;
  Metrics metrics_std_error;
  std::uint64_t measured_events = 0;
  double measured_time = 0.0;

  const StateOccupancy* find(const ChainState& st) const {
    for (const auto& o : occupancy)
      if (o.state == st) return &o;
    return nullptr;
  }

  double occupancy_of(const ChainState& st) const {
    const StateOccupancy* o = find(st);
    return o ? o->probability : 0.0;
  }

  double std_error_of(const ChainState& st) const {
    const StateOccupancy* o = find(st);
    return o ? o->std_error : 0.0;
  }
};

namespace detail {

struct SimBatch {
  std::map<ChainState, double> state_time;
  std::vector<double> busy_time;  // index 0 unused
  double jobs_integral = 0.0;
  double queue_integral = 0.0;
  double duration = 0.0;
  std::uint64_t offered = 0;
  std::uint64_t dropped = 0;
  std::uint64_t completions = 0;
};

inline double batch_std_error(const std::vector<double>& xs) {
  const std::size_t b = xs.size();
  double mean = 0.0;
  for (double x : xs) mean += x;
  mean /= static_cast<double>(b);
  double ss = 0.0;
  for (double x : xs) ss += (x - mean) * (x - mean);
  return std::sqrt(ss / static_cast<double>(b - 1) / static_cast<double>(b));
}

class SimulationRun {
 public:
  SimulationRun(const SystemParams& params, const Policy& policy, const SimConfig& cfg,
                std::ostream* trace)
      : params_(params),
        policy_(policy),
        cfg_(cfg),
        trace_(trace),
        n_(params.n_servers()),
        finite_(params.capacity.is_finite()),
        queue_cap_(finite_ ? params.capacity.value() - n_ : 0),
        arrival_rng_(cfg.seed, 0),
        policy_rng_(cfg.seed, 1),
        busy_(static_cast<std::size_t>(n_) + 1, 0),
        completion_(static_cast<std::size_t>(n_) + 1, 0.0),
        completion_seq_(static_cast<std::size_t>(n_) + 1, 0),
        idle_since_(static_cast<std::size_t>(n_) + 1, 0.0) {
    service_rng_.reserve(static_cast<std::size_t>(n_));
    for (int s = 1; s <= n_; ++s)
      service_rng_.emplace_back(cfg.seed, static_cast<std::uint64_t>(1 + s));
    idle_order_.reserve(static_cast<std::size_t>(n_));
    for (int s = 1; s <= n_; ++s) idle_order_.push_back(s);  // all idle at t=0
    batches_.assign(static_cast<std::size_t>(cfg.batches), SimBatch{});
    for (auto& b : batches_) b.busy_time.assign(static_cast<std::size_t>(n_) + 1, 0.0);
    if (trace_) *trace_ << "time,event,server,state\n";
  }

  SimEstimate execute() {
    const std::uint64_t total = cfg_.warmup_events + cfg_.measured_events;
    const std::uint64_t per_batch = cfg_.measured_events / static_cast<std::uint64_t>(cfg_.batches);
    next_arrival_ = arrival_rng_.exponential(params_.lambda);
    arrival_seq_ = ++seq_;

    for (std::uint64_t event = 1; event <= total; ++event) {
      // Next event: earliest pending time, ties by scheduling sequence.
      double t = next_arrival_;
      std::uint64_t tie = arrival_seq_;
      int server = 0;  // 0 = arrival
      for (int s = 1; s <= n_; ++s) {
        if (!busy_[static_cast<std::size_t>(s)]) continue;
        const double ct = completion_[static_cast<std::size_t>(s)];
        const std::uint64_t cs = completion_seq_[static_cast<std::size_t>(s)];
        if (ct < t || (ct == t && cs < tie)) {
          t = ct;
          tie = cs;
          server = s;
        }
      }

      SimBatch* batch = nullptr;
      if (event > cfg_.warmup_events)
        batch = &batches_[static_cast<std::size_t>((event - cfg_.warmup_events - 1) / per_batch)];
      if (batch) accumulate(*batch, t - now_);
      now_ = t;

      if (server == 0)
        on_arrival(batch);
      else
        on_completion(server, batch);
      if (cfg_.check_invariants) check_state();
    }
    return summarize();
  }

 private:
  ChainState current_state() const {
    return idle_order_.empty() ? ChainState::queue(queue_len_) : ChainState::ordered(idle_order_);
  }

  void accumulate(SimBatch& b, double dt) {
    b.state_time[current_state()] += dt;
    for (int s = 1; s <= n_; ++s)
      if (busy_[static_cast<std::size_t>(s)]) b.busy_time[static_cast<std::size_t>(s)] += dt;
    b.jobs_integral += dt * (n_ - static_cast<int>(idle_order_.size()) + queue_len_);
    b.queue_integral += dt * queue_len_;
    b.duration += dt;
  }

  void start_service(int s) {
    busy_[static_cast<std::size_t>(s)] = 1;
    completion_[static_cast<std::size_t>(s)] =
        now_ + service_rng_[static_cast<std::size_t>(s) - 1].exponential(params_.rate_of(s));
    completion_seq_[static_cast<std::size_t>(s)] = ++seq_;
  }

  int sample_position(const std::vector<double>& p) {
    const double u = policy_rng_.uniform();
    double acc = 0.0;
    int last_support = -1;
    for (int j = 0; j < static_cast<int>(p.size()); ++j) {
      if (p[static_cast<std::size_t>(j)] == 0.0) continue;
      last_support = j;
      acc += p[static_cast<std::size_t>(j)];
      if (u < acc) return j;
    }
    return last_support;  // u landed in the rounding gap below 1
  }

  void on_arrival(SimBatch* batch) {
    if (batch) ++batch->offered;
    if (!idle_order_.empty()) {
      const std::vector<double> p = policy_.position_distribution(idle_order_);
      const int j = sample_position(p);
      const int s = idle_order_[static_cast<std::size_t>(j)];
      if (cfg_.check_invariants) {
        if (policy_.kind() == PolicyKind::Lisf && j != 0)
          throw std::logic_error("LISF dispatched a non-head position");
        if (policy_.kind() == PolicyKind::Sisf && j != static_cast<int>(idle_order_.size()) - 1)
          throw std::logic_error("SISF dispatched a non-tail position");
      }
      idle_order_.erase(idle_order_.begin() + j);
      start_service(s);
      trace_row("dispatch", s);
    } else if (!finite_ || queue_len_ < queue_cap_) {
      ++queue_len_;
      trace_row("enqueue", 0);
    } else {
      if (batch) ++batch->dropped;
      trace_row("drop", 0);
    }
    next_arrival_ = now_ + arrival_rng_.exponential(params_.lambda);
    arrival_seq_ = ++seq_;
  }

  void on_completion(int s, SimBatch* batch) {
    if (batch) ++batch->completions;
    if (queue_len_ > 0) {
      --queue_len_;
      start_service(s);  // same server takes the head job
    } else {
      busy_[static_cast<std::size_t>(s)] = 0;
      idle_order_.push_back(s);  // most recently idle goes last
      idle_since_[static_cast<std::size_t>(s)] = now_;
    }
    trace_row("departure", s);
  }

  void trace_row(const char* event, int server) {
    if (!trace_) return;
    *trace_ << fmt(now_) << ',' << event << ',' << server << ",\"" << current_state().label()
            << "\"\n";
  }

  void check_state() const {
    if (queue_len_ > 0 && !idle_order_.empty())
      throw std::logic_error("work conservation violated: queue with idle servers");
    if (finite_ && queue_len_ > queue_cap_)
      throw std::logic_error("queue exceeded capacity");
    std::vector<char> seen(static_cast<std::size_t>(n_) + 1, 0);
    double last = -1.0;
    for (int s : idle_order_) {
      if (s < 1 || s > n_ || seen[static_cast<std::size_t>(s)] || busy_[static_cast<std::size_t>(s)])
        throw std::logic_error("idle-order vector inconsistent with server flags");
      seen[static_cast<std::size_t>(s)] = 1;
      if (idle_since_[static_cast<std::size_t>(s)] < last)
        throw std::logic_error("idle-order vector not sorted by became-idle time");
      last = idle_since_[static_cast<std::size_t>(s)];
    }
    for (int s = 1; s <= n_; ++s)
      if (!busy_[static_cast<std::size_t>(s)] && !seen[static_cast<std::size_t>(s)])
        throw std::logic_error("idle server missing from idle-order vector");
  }

  SimEstimate summarize() const {
    const int b = cfg_.batches;
    SimEstimate est;
    est.measured_events = cfg_.measured_events;

    double total_time = 0.0;
    for (const auto& batch : batches_) total_time += batch.duration;
    est.measured_time = total_time;

    // Per-state occupancy: totals for the point estimate, per-batch shares
    // for the standard error (unvisited batches contribute a 0 share).
    std::map<ChainState, double> totals;
    for (const auto& batch : batches_)
      for (const auto& [st, t] : batch.state_time) totals[st] += t;
    est.occupancy.reserve(totals.size());
    for (const auto& [st, t] : totals) {
      std::vector<double> shares(static_cast<std::size_t>(b), 0.0);
      for (int k = 0; k < b; ++k) {
        const auto& batch = batches_[static_cast<std::size_t>(k)];
        auto it = batch.state_time.find(st);
        if (it != batch.state_time.end())
          shares[static_cast<std::size_t>(k)] = it->second / batch.duration;
      }
      est.occupancy.push_back({st, t / total_time, batch_std_error(shares)});
    }

    std::uint64_t offered = 0, dropped = 0, completions = 0;
    double jobs_integral = 0.0, queue_integral = 0.0;
    std::vector<double> busy(static_cast<std::size_t>(n_) + 1, 0.0);
    for (const auto& batch : batches_) {
      offered += batch.offered;
      dropped += batch.dropped;
      completions += batch.completions;
      jobs_integral += batch.jobs_integral;
      queue_integral += batch.queue_integral;
      for (int s = 1; s <= n_; ++s)
        busy[static_cast<std::size_t>(s)] += batch.busy_time[static_cast<std::size_t>(s)];
    }

    Metrics& m = est.metrics;
    m.p_block = offered > 0 ? static_cast<double>(dropped) / static_cast<double>(offered) : 0.0;
    m.mean_jobs = jobs_integral / total_time;
    m.mean_queue = queue_integral / total_time;
    m.throughput = static_cast<double>(completions) / total_time;
    m.mean_wait = completions > 0 ? jobs_integral / static_cast<double>(completions) : 0.0;
    m.util.assign(static_cast<std::size_t>(n_), 0.0);
    for (int s = 1; s <= n_; ++s)
      m.util[static_cast<std::size_t>(s) - 1] = busy[static_cast<std::size_t>(s)] / total_time;

    auto per_batch = [&](auto&& f) {
      std::vector<double> xs(static_cast<std::size_t>(b));
      for (int k = 0; k < b; ++k) xs[static_cast<std::size_t>(k)] = f(batches_[static_cast<std::size_t>(k)]);
      return batch_std_error(xs);
    };
    Metrics& se = est.metrics_std_error;
    se.p_block = per_batch([](const SimBatch& x) {
      return x.offered > 0 ? static_cast<double>(x.dropped) / static_cast<double>(x.offered) : 0.0;
    });
    se.mean_jobs = per_batch([](const SimBatch& x) { return x.jobs_integral / x.duration; });
    se.mean_queue = per_batch([](const SimBatch& x) { return x.queue_integral / x.duration; });
    se.throughput = per_batch(
        [](const SimBatch& x) { return static_cast<double>(x.completions) / x.duration; });
    se.mean_wait = per_batch([](const SimBatch& x) {
      return x.completions > 0 ? x.jobs_integral / static_cast<double>(x.completions) : 0.0;
    });
    se.util.assign(static_cast<std::size_t>(n_), 0.0);
    for (int s = 1; s <= n_; ++s)
      se.util[static_cast<std::size_t>(s) - 1] = per_batch([s](const SimBatch& x) {
        return x.busy_time[static_cast<std::size_t>(s)] / x.duration;
      });
    return est;
  }

  const SystemParams& params_;
  const Policy& policy_;
  const SimConfig& cfg_;
  std::ostream* trace_;

  const int n_;
  const bool finite_;
  const int queue_cap_;

  RandomStream arrival_rng_;
  RandomStream policy_rng_;
  std::vector<RandomStream> service_rng_;

  double now_ = 0.0;
  std::vector<int> idle_order_;
  int queue_len_ = 0;
  std::vector<char> busy_;
  std::vector<double> completion_;
  std::vector<std::uint64_t> completion_seq_;
  std::vector<double> idle_since_;
  double next_arrival_ = 0.0;
  std::uint64_t arrival_seq_ = 0;
  std::uint64_t seq_ = 0;

  std::vector<SimBatch> batches_;
};

}  // namespace detail

/// Discrete-event simulation of the M/M/N/K/FCFS system under `policy`,
/// fully independent of the chain construction. Arrivals to a full system
/// are dropped; a completing server takes the head job when the queue is
/// nonempty and otherwise joins the end of the idle-order vector. The
/// optional trace sink receives one CSV row per event.
inline SimEstimate simulate(const SystemParams& params, const Policy& policy,
                            const SimConfig& config, std::ostream* trace = nullptr) {
  const ValidationReport report = validate(params, policy);
  if (!report.ok())
    throw std::invalid_argument("invalid system or policy: " + report.message());
  if (config.batches < 10) throw std::invalid_argument("batches must be >= 10");
  if (config.measured_events == 0 ||
      config.measured_events % static_cast<std::uint64_t>(config.batches) != 0)
    throw std::invalid_argument("measured_events must be positive and divisible by batches");
  if (!params.capacity.is_finite() && !params.stable())
    throw std::domain_error("unstable unbounded system: lambda >= total mu");

  detail::SimulationRun run(params, policy, config, trace);
  return run.execute();
}

}  // namespace idleq
