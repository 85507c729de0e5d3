// Command-line front end: analyze, simulate, verify and sweep subcommands
// over one JSON config file. Emits plot-ready CSV or JSON.
//
// Exit codes: 0 success, 1 invalid config or inputs, 2 solver failure,
// 3 verification failure.

#include <atomic>
#include <exception>
#include <fstream>
#include <functional>
#include <iostream>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "idleq/idleq.hpp"

namespace {

using namespace idleq;
using nlohmann::json;

constexpr int kOk = 0;
constexpr int kBadInput = 1;
constexpr int kSolverFailure = 2;
constexpr int kVerifyFailure = 3;

struct OutputOptions {
  std::string format = "csv";
  std::string path;  // empty = stdout
};

void emit(const OutputOptions& opts, const std::string& body) {
  if (opts.path.empty()) {
    std::cout << body;
    return;
  }
  std::ofstream out(opts.path);
  if (!out) throw std::runtime_error("cannot write output file: " + opts.path);
  out << body;
}

std::string quoted(const std::string& label) { return "\"" + label + "\""; }

std::vector<std::pair<std::string, double>> metric_rows(const Metrics& m) {
  std::vector<std::pair<std::string, double>> rows{{"p_block", m.p_block},
                                                   {"mean_jobs", m.mean_jobs},
                                                   {"mean_queue", m.mean_queue},
                                                   {"throughput", m.throughput},
                                                   {"mean_wait", m.mean_wait}};
  for (std::size_t i = 0; i < m.util.size(); ++i)
    rows.emplace_back("util[" + std::to_string(i + 1) + "]", m.util[i]);
  return rows;
}

json metrics_json(const Metrics& m) {
  return json{{"p_block", m.p_block},     {"mean_jobs", m.mean_jobs},
              {"mean_queue", m.mean_queue}, {"throughput", m.throughput},
              {"mean_wait", m.mean_wait},   {"util", m.util}};
}

void parallel_for(int jobs, int n_tasks, const std::function<void(int)>& fn) {
  jobs = std::max(1, std::min(jobs, n_tasks));
  if (jobs <= 1) {
    for (int i = 0; i < n_tasks; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  std::mutex error_mutex;
  std::exception_ptr first_error;
  std::vector<std::thread> workers;
  workers.reserve(static_cast<std::size_t>(jobs));
  for (int t = 0; t < jobs; ++t) {
    workers.emplace_back([&] {
      for (;;) {
        const int i = next.fetch_add(1);
        if (i >= n_tasks) return;
        try {
          fn(i);
        } catch (...) {
          const std::lock_guard<std::mutex> lock(error_mutex);
          if (!first_error) first_error = std::current_exception();
        }
      }
    });
  }
  for (std::thread& w : workers) w.join();
  if (first_error) std::rethrow_exception(first_error);
}

// ---------------------------------------------------------------------------

int cmd_analyze(const RunConfig& cfg, const OutputOptions& opts) {
  const SystemParams& params = cfg.params;
  const Policy& policy = cfg.policies.front();
  std::ostringstream body;

  if (params.capacity.is_finite()) {
    const StateSpace space =
        StateSpace::enumerate(params.n_servers(), params.capacity.value(), cfg.max_servers);
    const StationaryDistribution closed = closed_form(params, space);
    const StationaryDistribution numeric =
        solve_stationary(build_generator(space, params, policy), cfg.solver);
    const Metrics mc = compute_metrics(closed.probs, params, space);
    const Metrics mn = compute_metrics(numeric.probs, params, space);

    if (opts.format == "csv") {
      body << "kind,label,closed_form,numeric\n";
      for (int i = 0; i < space.size(); ++i)
        body << "state," << quoted(space.state(i).label()) << ','
             << detail::fmt(closed.probs[static_cast<std::size_t>(i)]) << ','
             << detail::fmt(numeric.probs[static_cast<std::size_t>(i)]) << '\n';
      const auto closed_rows = metric_rows(mc);
      const auto numeric_rows = metric_rows(mn);
      for (std::size_t i = 0; i < closed_rows.size(); ++i)
        body << "metric," << quoted(closed_rows[i].first) << ','
             << detail::fmt(closed_rows[i].second) << ',' << detail::fmt(numeric_rows[i].second)
             << '\n';
    } else {
      json states = json::array();
      for (int i = 0; i < space.size(); ++i)
        states.push_back(json{{"state", space.state(i).label()},
                              {"closed_form", closed.probs[static_cast<std::size_t>(i)]},
                              {"numeric", numeric.probs[static_cast<std::size_t>(i)]}});
      body << json{{"instance", detail::instance_json(params)},
                   {"policy", policy.name()},
                   {"residual", numeric.residual},
                   {"states", states},
                   {"metrics",
                    json{{"closed_form", metrics_json(mc)}, {"numeric", metrics_json(mn)}}}}
                  .dump(2)
           << '\n';
    }
  } else {
    const UnboundedClosedForm cf = closed_form_unbounded(params, cfg.max_servers);
    const Metrics mc = compute_metrics(cf, params);
    if (opts.format == "csv") {
      body << "kind,label,closed_form,numeric\n";
      for (int i = 0; i < cf.ordered_part.size(); ++i)
        body << "state," << quoted(cf.ordered_part.state(i).label()) << ','
             << detail::fmt(cf.probs[static_cast<std::size_t>(i)]) << ",\n";
      body << "metric,queue_ratio," << detail::fmt(cf.queue_ratio) << ",\n";
      for (const auto& [name, value] : metric_rows(mc))
        body << "metric," << quoted(name) << ',' << detail::fmt(value) << ",\n";
    } else {
      json states = json::array();
      for (int i = 0; i < cf.ordered_part.size(); ++i)
        states.push_back(json{{"state", cf.ordered_part.state(i).label()},
                              {"closed_form", cf.probs[static_cast<std::size_t>(i)]}});
      body << json{{"instance", detail::instance_json(params)},
                   {"policy", policy.name()},
                   {"queue_ratio", cf.queue_ratio},
                   {"states", states},
                   {"metrics", json{{"closed_form", metrics_json(mc)}}}}
                  .dump(2)
           << '\n';
    }
  }
  emit(opts, body.str());
  return kOk;
}

int cmd_simulate(const RunConfig& cfg, const OutputOptions& opts, const std::string& trace_path) {
  std::optional<std::ofstream> trace;
  if (!trace_path.empty()) {
    trace.emplace(trace_path);
    if (!*trace) throw std::runtime_error("cannot write trace file: " + trace_path);
  }
  const SimEstimate est = simulate(cfg.params, cfg.policies.front(), cfg.sim,
                                   trace ? &*trace : nullptr);

  std::ostringstream body;
  if (opts.format == "csv") {
    body << "kind,label,estimate,std_error\n";
    for (const auto& o : est.occupancy)
      body << "state," << quoted(o.state.label()) << ',' << detail::fmt(o.probability) << ','
           << detail::fmt(o.std_error) << '\n';
    const auto values = metric_rows(est.metrics);
    const auto errors = metric_rows(est.metrics_std_error);
    for (std::size_t i = 0; i < values.size(); ++i)
      body << "metric," << quoted(values[i].first) << ',' << detail::fmt(values[i].second) << ','
           << detail::fmt(errors[i].second) << '\n';
  } else {
    json occupancy = json::array();
    for (const auto& o : est.occupancy)
      occupancy.push_back(json{{"state", o.state.label()},
                               {"probability", o.probability},
                               {"std_error", o.std_error}});
    body << json{{"instance", detail::instance_json(cfg.params)},
                 {"policy", cfg.policies.front().name()},
                 {"seed", cfg.sim.seed},
                 {"measured_events", est.measured_events},
                 {"measured_time", est.measured_time},
                 {"occupancy", occupancy},
                 {"metrics", metrics_json(est.metrics)},
                 {"metrics_std_error", metrics_json(est.metrics_std_error)}}
                .dump(2)
         << '\n';
  }
  emit(opts, body.str());
  return kOk;
}

int cmd_verify(const RunConfig& cfg, const OutputOptions& opts, int jobs) {
  const SystemParams& params = cfg.params;
  const EquivalenceReport equivalence =
      check_equivalence(params, cfg.policies, cfg.verify_tol, cfg.solver);

  const StateSpace space = StateSpace::enumerate(params.n_servers(), params.capacity.value(),
                                                 cfg.max_servers);
  const int n_policies = static_cast<int>(cfg.policies.size());
  std::vector<BalanceReport> balance(static_cast<std::size_t>(n_policies));
  std::vector<OrderInvarianceReport> invariance(static_cast<std::size_t>(n_policies));
  parallel_for(jobs, n_policies, [&](int i) {
    const Policy& policy = cfg.policies[static_cast<std::size_t>(i)];
    balance[static_cast<std::size_t>(i)] = check_balance(params, policy, cfg.balance_tol);
    const auto numeric =
        solve_stationary(build_generator(space, params, policy), cfg.solver);
    invariance[static_cast<std::size_t>(i)] =
        order_invariance(numeric.probs, space, cfg.verify_tol);
  });

  bool pass = equivalence.pass;
  for (const auto& r : balance) pass = pass && r.pass;
  for (const auto& r : invariance) pass = pass && r.pass;

  std::ostringstream body;
  if (opts.format == "csv") {
    body << "check,policy,pass,tol,max_deviation\n";
    body << "equivalence,," << equivalence.pass << ',' << detail::fmt(equivalence.tol) << ','
         << detail::fmt(equivalence.max_pairwise_diff) << '\n';
    for (int i = 0; i < n_policies; ++i)
      body << "closed_form_agreement," << cfg.policy_names[static_cast<std::size_t>(i)] << ','
           << equivalence.pass << ',' << detail::fmt(equivalence.tol) << ','
           << detail::fmt(equivalence.closed_form_diff[static_cast<std::size_t>(i)]) << '\n';
    for (int i = 0; i < n_policies; ++i) {
      const auto& r = balance[static_cast<std::size_t>(i)];
      body << "balance," << cfg.policy_names[static_cast<std::size_t>(i)] << ',' << r.pass << ','
           << detail::fmt(r.tol) << ',' << detail::fmt(r.max_violation()) << '\n';
    }
    for (int i = 0; i < n_policies; ++i) {
      const auto& r = invariance[static_cast<std::size_t>(i)];
      body << "order_invariance," << cfg.policy_names[static_cast<std::size_t>(i)] << ','
           << r.pass << ',' << detail::fmt(r.tol) << ',' << detail::fmt(r.max_spread) << '\n';
    }
  } else {
    json balance_json = json::array();
    for (const auto& r : balance) balance_json.push_back(r.to_json());
    json invariance_json = json::array();
    for (const auto& r : invariance) invariance_json.push_back(r.to_json());
    body << json{{"pass", pass},
                 {"policies", cfg.policy_names},
                 {"equivalence", equivalence.to_json()},
                 {"balance", balance_json},
                 {"order_invariance", invariance_json}}
                .dump(2)
         << '\n';
  }
  emit(opts, body.str());
  return pass ? kOk : kVerifyFailure;
}

int cmd_sweep(const RunConfig& cfg, const OutputOptions& opts, int jobs) {
  if (!cfg.sweep.has_value())
    throw ConfigError("sweep requires a \"sweep\" block in the config");
  const SweepSpec& spec = *cfg.sweep;
  if (spec.values.empty()) throw ConfigError("empty sweep grid");

  int mu_component = 0;  // 0 = lambda sweep
  if (spec.parameter != "lambda") {
    if (spec.parameter.rfind("mu[", 0) == 0 && spec.parameter.back() == ']') {
      mu_component = std::stoi(spec.parameter.substr(3, spec.parameter.size() - 4));
      if (mu_component < 1 || mu_component > cfg.params.n_servers())
        throw ConfigError("sweep parameter out of range: " + spec.parameter);
    } else {
      throw ConfigError("sweep param must be \"lambda\" or \"mu[i]\"");
    }
  }

  struct Cell {
    Metrics closed;
    std::optional<Metrics> sim;
    std::optional<Metrics> sim_err;
  };
  const int n_policies = static_cast<int>(cfg.policies.size());
  const int n_tasks = static_cast<int>(spec.values.size()) * n_policies;
  std::vector<Cell> cells(static_cast<std::size_t>(n_tasks));

  parallel_for(jobs, n_tasks, [&](int task) {
    const int vi = task / n_policies;
    const int pi = task % n_policies;
    SystemParams params = cfg.params;
    const double value = spec.values[static_cast<std::size_t>(vi)];
    if (mu_component == 0)
      params.lambda = value;
    else
      params.mu[static_cast<std::size_t>(mu_component) - 1] = value;

    Cell& cell = cells[static_cast<std::size_t>(task)];
    if (params.capacity.is_finite()) {
      const StateSpace space =
          StateSpace::enumerate(params.n_servers(), params.capacity.value(), cfg.max_servers);
      cell.closed = compute_metrics(closed_form(params, space).probs, params, space);
    } else {
      cell.closed = compute_metrics(closed_form_unbounded(params, cfg.max_servers), params);
    }
    if (spec.simulate) {
      SimConfig sim_cfg = cfg.sim;
      sim_cfg.seed = cfg.sim.seed + static_cast<std::uint64_t>(task);
      const SimEstimate est = simulate(params, cfg.policies[static_cast<std::size_t>(pi)], sim_cfg);
      cell.sim = est.metrics;
      cell.sim_err = est.metrics_std_error;
    }
  });

  std::ostringstream body;
  json rows_json = json::array();
  if (opts.format == "csv")
    body << "param,value,policy,metric,closed_form,simulation,sim_std_error\n";
  for (int task = 0; task < n_tasks; ++task) {
    const int vi = task / n_policies;
    const int pi = task % n_policies;
    const Cell& cell = cells[static_cast<std::size_t>(task)];
    const double value = spec.values[static_cast<std::size_t>(vi)];
    const std::string& policy = cfg.policy_names[static_cast<std::size_t>(pi)];

    const auto closed_rows = metric_rows(cell.closed);
    const auto sim_rows = cell.sim ? metric_rows(*cell.sim) : closed_rows;
    const auto err_rows = cell.sim_err ? metric_rows(*cell.sim_err) : closed_rows;
    for (std::size_t r = 0; r < closed_rows.size(); ++r) {
      if (opts.format == "csv") {
        body << spec.parameter << ',' << detail::fmt(value) << ',' << policy << ','
             << quoted(closed_rows[r].first) << ',' << detail::fmt(closed_rows[r].second) << ',';
        if (cell.sim)
          body << detail::fmt(sim_rows[r].second) << ',' << detail::fmt(err_rows[r].second);
        else
          body << ',';
        body << '\n';
      } else {
        json row{{"param", spec.parameter},
                 {"value", value},
                 {"policy", policy},
                 {"metric", closed_rows[r].first},
                 {"closed_form", closed_rows[r].second}};
        if (cell.sim) {
          row["simulation"] = sim_rows[r].second;
          row["sim_std_error"] = err_rows[r].second;
        }
        rows_json.push_back(std::move(row));
      }
    }
  }
  if (opts.format == "json") body << rows_json.dump(2) << '\n';
  emit(opts, body.str());
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"exact analysis and simulation of heterogeneous M/M/N/K/FCFS systems "
               "under idle-time-order-based routing policies"};
  app.require_subcommand(1);

  std::string config_path;
  OutputOptions opts;
  std::string trace_path;
  int jobs = static_cast<int>(std::thread::hardware_concurrency());
  if (jobs < 1) jobs = 1;

  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--config", config_path, "JSON config file")->required();
    cmd->add_option("--format", opts.format, "output format")
        ->check(CLI::IsMember({"csv", "json"}));
    cmd->add_option("--out", opts.path, "write output to this file instead of stdout");
    cmd->add_option("--jobs", jobs, "worker threads for sweeps and policy lists");
  };

  CLI::App* analyze =
      app.add_subcommand("analyze", "closed form and numeric solve of one instance");
  add_common(analyze);
  CLI::App* simulate_cmd = app.add_subcommand("simulate", "discrete-event simulation estimate");
  add_common(simulate_cmd);
  simulate_cmd->add_option("--trace", trace_path, "write a per-event CSV trace to this file");
  CLI::App* verify =
      app.add_subcommand("verify", "equivalence, balance and order-invariance checks");
  add_common(verify);
  CLI::App* sweep = app.add_subcommand("sweep", "metric grid over lambda or one mu component");
  add_common(sweep);

  CLI11_PARSE(app, argc, argv);

  try {
    const idleq::RunConfig cfg = idleq::load_config(config_path);
    if (analyze->parsed()) return cmd_analyze(cfg, opts);
    if (simulate_cmd->parsed()) return cmd_simulate(cfg, opts, trace_path);
    if (verify->parsed()) return cmd_verify(cfg, opts, jobs);
    if (sweep->parsed()) return cmd_sweep(cfg, opts, jobs);
    return kBadInput;
  } catch (const idleq::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kBadInput;
  } catch (const idleq::SolverError& e) {
    std::cerr << "solver error: " << e.what() << '\n';
    return kSolverFailure;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kBadInput;
  } catch (const std::domain_error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kBadInput;
  } catch (const std::out_of_range& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kBadInput;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kSolverFailure;
  }
}
