#pragma once

#include <fstream>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "idleq/policy.hpp"
#include "idleq/simulator.hpp"
#include "idleq/solver.hpp"
#include "idleq/state_space.hpp"
#include "idleq/system.hpp"

namespace idleq {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct SweepSpec {
  std::string parameter;       // "lambda" or "mu[i]" (1-based component)
  std::vector<double> values;  // grid, must be nonempty
  bool simulate = false;       // add paired simulation columns
};

/// One JSON document drives every command. Fields: lambda, mu (array),
/// K (integer or "inf"), policy or policies, and optional solver, sim,
/// verify, sweep and max_servers blocks.
struct RunConfig {
  SystemParams params;
  std::vector<Policy> policies;
  std::vector<std::string> policy_names;
  SolveOptions solver;
  SimConfig sim;
  double verify_tol = 1e-8;
  double balance_tol = 1e-10;
  int max_servers = kDefaultServerCap;
  std::optional<SweepSpec> sweep;
};

namespace detail {

inline Policy parse_policy(const nlohmann::json& node, std::string& name) {
  if (node.is_string()) {
    const std::string kind = node.get<std::string>();
    name = kind;
    if (kind == "random") return Policy::random();
    if (kind == "lisf") return Policy::lisf();
    if (kind == "sisf") return Policy::sisf();
    throw ConfigError("unknown policy \"" + kind + "\" (expected random, lisf, sisf or a custom table)");
  }
  if (node.is_object() && node.contains("custom")) {
    name = node.value("name", "custom");
    const nlohmann::json& table = node.at("custom");
    if (!table.is_object()) throw ConfigError("custom policy table must be an object");
    Policy::CustomTable parsed;
    for (const auto& [key, dist] : table.items()) {
      std::vector<int> subset;
      std::stringstream ss(key);
      std::string part;
      while (std::getline(ss, part, ',')) {
        try {
          subset.push_back(std::stoi(part));
        } catch (const std::exception&) {
          throw ConfigError("bad subset key \"" + key + "\": entries must be server indices");
        }
      }
      if (!dist.is_array()) throw ConfigError("distribution for subset \"" + key + "\" must be an array");
      parsed[subset] = dist.get<std::vector<double>>();
    }
    try {
      return Policy::custom(std::move(parsed));
    } catch (const std::invalid_argument& e) {
      throw ConfigError(e.what());
    }
  }
  throw ConfigError("policy must be a string or an object with a \"custom\" table");
}

}  // namespace detail

inline RunConfig parse_config(const nlohmann::json& doc) {
  RunConfig cfg;
  try {
    if (!doc.contains("lambda")) throw ConfigError("missing field \"lambda\"");
    if (!doc.contains("mu")) throw ConfigError("missing field \"mu\"");
    cfg.params.lambda = doc.at("lambda").get<double>();
    cfg.params.mu = doc.at("mu").get<std::vector<double>>();

    if (!doc.contains("K")) throw ConfigError("missing field \"K\" (integer or \"inf\")");
    const nlohmann::json& k = doc.at("K");
    if (k.is_string()) {
      if (k.get<std::string>() != "inf")
        throw ConfigError("K must be an integer or the string \"inf\"");
      cfg.params.capacity = Capacity::unbounded();
    } else {
      cfg.params.capacity = Capacity::finite(k.get<int>());
    }

    if (doc.contains("policies")) {
      for (const auto& node : doc.at("policies")) {
        std::string name;
        cfg.policies.push_back(detail::parse_policy(node, name));
        cfg.policy_names.push_back(name);
      }
    } else if (doc.contains("policy")) {
      std::string name;
      cfg.policies.push_back(detail::parse_policy(doc.at("policy"), name));
      cfg.policy_names.push_back(name);
    } else {
      throw ConfigError("missing field \"policy\" or \"policies\"");
    }
    // Disambiguate repeated names ("custom" -> "custom1", "custom2", ...).
    for (std::size_t i = 0; i < cfg.policy_names.size(); ++i) {
      int repeats = 0;
      for (std::size_t j = 0; j < cfg.policy_names.size(); ++j)
        if (cfg.policy_names[j] == cfg.policy_names[i]) ++repeats;
      if (repeats > 1) {
        int counter = 0;
        const std::string base = cfg.policy_names[i];
        for (std::size_t j = 0; j < cfg.policy_names.size(); ++j)
          if (cfg.policy_names[j] == base) cfg.policy_names[j] = base + std::to_string(++counter);
      }
    }

    if (doc.contains("solver")) {
      const nlohmann::json& s = doc.at("solver");
      const std::string method = s.value("method", "auto");
      if (method == "auto")
        cfg.solver.method = SolveMethod::Auto;
      else if (method == "direct")
        cfg.solver.method = SolveMethod::Direct;
      else if (method == "iterative")
        cfg.solver.method = SolveMethod::Iterative;
      else
        throw ConfigError("solver.method must be auto, direct or iterative");
      cfg.solver.tol = s.value("tol", cfg.solver.tol);
      cfg.solver.max_iterations = s.value("max_iterations", cfg.solver.max_iterations);
    }

    if (doc.contains("sim")) {
      const nlohmann::json& s = doc.at("sim");
      cfg.sim.seed = s.value("seed", cfg.sim.seed);
      cfg.sim.warmup_events = s.value("warmup_events", cfg.sim.warmup_events);
      cfg.sim.measured_events = s.value("measured_events", cfg.sim.measured_events);
      cfg.sim.batches = s.value("batches", cfg.sim.batches);
    }

    if (doc.contains("verify")) {
      const nlohmann::json& v = doc.at("verify");
      cfg.verify_tol = v.value("tol", cfg.verify_tol);
      cfg.balance_tol = v.value("balance_tol", cfg.balance_tol);
    }

    cfg.max_servers = doc.value("max_servers", cfg.max_servers);

    if (doc.contains("sweep")) {
      const nlohmann::json& s = doc.at("sweep");
      SweepSpec spec;
      spec.parameter = s.value("param", "lambda");
      if (s.contains("values")) spec.values = s.at("values").get<std::vector<double>>();
      spec.simulate = s.value("simulate", false);
      cfg.sweep = std::move(spec);
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed config: ") + e.what());
  }

  for (std::size_t i = 0; i < cfg.policies.size(); ++i) {
    const ValidationReport report = validate(cfg.params, cfg.policies[i]);
    if (!report.ok())
      throw ConfigError("invalid config (policy " + cfg.policy_names[i] + "): " + report.message());
  }
  return cfg;
}

inline RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  return parse_config(doc);
}

}  // namespace idleq
