#pragma once

// Flat run configuration. Every setting has a snake_case file key and an
// environment variable; layers are applied defaults < file < env < flags.

#include <cctype>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "agentga/engine.hpp"
#include "agentga/errors.hpp"
#include "agentga/external_executor.hpp"
#include "agentga/simulated_executor.hpp"
#include "json.hpp"

namespace agentga {

struct RunConfig {
  int population = 5;
  std::map<Operator, double> base_probs{{Operator::Initial, 0.1}, {Operator::Continue, 0.2},
                                        {Operator::Ablation, 0.1}, {Operator::Merge, 0.1},
                                        {Operator::Jumpstart, 0.0}, {Operator::EDA, 0.5}};
  std::map<Operator, double> floors{{Operator::Initial, 0.05}, {Operator::Continue, 0.10},
                                    {Operator::Ablation, 0.05}, {Operator::Merge, 0.05},
                                    {Operator::Jumpstart, 0.05}, {Operator::EDA, 0.05}};
  std::map<Operator, double> ceilings{{Operator::Merge, 0.30}};
  double eta = 0.15;
  double kappa = 4.0;
  int max_bound_iterations = 10;
  int max_iterations = 30;
  int patience = 5;
  double convergence_threshold = 0.0;
  int workers = 3;
  int continue_parents_min = 1;
  int continue_parents_max = 1;
  int num_training_runs = 5;
  bool higher_is_better = true;
  std::string executor = "simulated";
  std::string command;
  double timeout_seconds = 1800.0;
  std::string data_path;
  std::string data_mode = "link";
  std::uint64_t seed = 0;
  std::string output_root = "agentga-run";
  std::string sim_params;  // optional JSON file with simulator parameters
};

namespace detail {

inline std::string lower(std::string s) {
  for (auto& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

inline std::string upper(std::string s) {
  for (auto& c : s) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  return s;
}

inline double parse_real(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    double d = std::stod(v, &used);
    if (used != v.size() || !std::isfinite(d)) throw std::invalid_argument(v);
    return d;
  } catch (const std::exception&) {
    throw ConfigError("config field '" + key + "': expected a number, got '" + v + "'");
  }
}

inline long long parse_int(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    long long i = std::stoll(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return i;
  } catch (const std::exception&) {
    throw ConfigError("config field '" + key + "': expected an integer, got '" + v + "'");
  }
}

inline bool parse_bool(const std::string& key, const std::string& v) {
  const auto s = lower(v);
  if (s == "1" || s == "true" || s == "yes" || s == "on") return true;
  if (s == "0" || s == "false" || s == "no" || s == "off") return false;
  throw ConfigError("config field '" + key + "': expected a boolean, got '" + v + "'");
}

struct FieldSpec {
  std::string key;
  std::string env;
  std::function<void(RunConfig&, const std::string&)> set;
  std::function<nlohmann::json(const RunConfig&)> get;
};

inline const std::vector<FieldSpec>& field_specs() {
  static const std::vector<FieldSpec> specs = [] {
    std::vector<FieldSpec> f;
    auto add_int = [&](std::string key, std::string env, int RunConfig::*field, int min) {
      f.push_back({key, env,
                   [key, field, min](RunConfig& c, const std::string& v) {
                     auto i = parse_int(key, v);
                     if (i < min) throw ConfigError("config field '" + key + "': must be >= " + std::to_string(min));
                     c.*field = static_cast<int>(i);
                   },
                   [field](const RunConfig& c) { return nlohmann::json(c.*field); }});
    };
    auto add_real = [&](std::string key, std::string env, double RunConfig::*field) {
      f.push_back({key, env, [key, field](RunConfig& c, const std::string& v) { c.*field = parse_real(key, v); },
                   [field](const RunConfig& c) { return nlohmann::json(c.*field); }});
    };
    auto add_string = [&](std::string key, std::string env, std::string RunConfig::*field) {
      f.push_back({key, env, [field](RunConfig& c, const std::string& v) { c.*field = v; },
                   [field](const RunConfig& c) { return nlohmann::json(c.*field); }});
    };

    add_int("population_size", "GA_POPULATION_SIZE", &RunConfig::population, 1);
    for (Operator op : kAllOperators) {
      const std::string name(to_string(op));
      const std::string lo = lower(name), up = upper(name);
      f.push_back({"prob_" + lo, "GA_PROB_" + up,
                   [op, lo](RunConfig& c, const std::string& v) { c.base_probs[op] = parse_real("prob_" + lo, v); },
                   [op](const RunConfig& c) { return nlohmann::json(c.base_probs.count(op) ? c.base_probs.at(op) : 0.0); }});
      f.push_back({"floor_" + lo, "GA_FLOOR_" + up,
                   [op, lo](RunConfig& c, const std::string& v) { c.floors[op] = parse_real("floor_" + lo, v); },
                   [op](const RunConfig& c) { return nlohmann::json(c.floors.count(op) ? c.floors.at(op) : 0.0); }});
      f.push_back({"ceiling_" + lo, "GA_CEILING_" + up,
                   [op, lo](RunConfig& c, const std::string& v) {
                     if (v.empty() || lower(v) == "none" || lower(v) == "null") c.ceilings.erase(op);
                     else c.ceilings[op] = parse_real("ceiling_" + lo, v);
                   },
                   [op](const RunConfig& c) {
                     return c.ceilings.count(op) ? nlohmann::json(c.ceilings.at(op)) : nlohmann::json(nullptr);
                   }});
    }
    add_real("hedge_eta", "GA_HEDGE_ETA", &RunConfig::eta);
    add_real("hedge_kappa", "GA_HEDGE_KAPPA", &RunConfig::kappa);
    add_int("hedge_max_bound_iterations", "GA_HEDGE_MAX_BOUND_ITERATIONS", &RunConfig::max_bound_iterations, 1);
    add_int("max_iterations", "GA_MAX_ITERATIONS", &RunConfig::max_iterations, 1);
    add_int("patience", "GA_PATIENCE", &RunConfig::patience, 1);
    add_real("convergence_threshold", "GA_CONVERGENCE_THRESHOLD", &RunConfig::convergence_threshold);
    add_int("parallel_workers", "GA_PARALLEL_WORKERS", &RunConfig::workers, 1);
    add_int("continue_parents_min", "GA_CONTINUE_PARENTS_MIN", &RunConfig::continue_parents_min, 1);
    add_int("continue_parents_max", "GA_CONTINUE_PARENTS_MAX", &RunConfig::continue_parents_max, 1);
    add_int("num_training_runs", "NUM_TRAINING_RUNS", &RunConfig::num_training_runs, 1);
    f.push_back({"higher_is_better", "GA_HIGHER_IS_BETTER",
                 [](RunConfig& c, const std::string& v) { c.higher_is_better = parse_bool("higher_is_better", v); },
                 [](const RunConfig& c) { return nlohmann::json(c.higher_is_better); }});
    add_string("executor", "GA_EXECUTOR", &RunConfig::executor);
    add_string("command", "GA_COMMAND", &RunConfig::command);
    add_real("timeout_seconds", "GA_TIMEOUT_SECONDS", &RunConfig::timeout_seconds);
    add_string("data_path", "GA_DATA_PATH", &RunConfig::data_path);
    add_string("data_mode", "GA_DATA_MODE", &RunConfig::data_mode);
    f.push_back({"seed", "GA_SEED",
                 [](RunConfig& c, const std::string& v) {
                   auto i = parse_int("seed", v);
                   if (i < 0) throw ConfigError("config field 'seed': must be >= 0");
                   c.seed = static_cast<std::uint64_t>(i);
                 },
                 [](const RunConfig& c) { return nlohmann::json(c.seed); }});
    add_string("output_root", "GA_OUTPUT_ROOT", &RunConfig::output_root);
    add_string("sim_params", "GA_SIM_PARAMS", &RunConfig::sim_params);
    return f;
  }();
  return specs;
}

inline std::string json_scalar_text(const std::string& key, const nlohmann::json& v) {
  if (v.is_string()) return v.get<std::string>();
  if (v.is_null()) return "none";
  if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
  if (v.is_number()) return v.dump();
  throw ConfigError("config field '" + key + "': expected a scalar value");
}

}  // namespace detail

/// Sets one field from its textual value; unknown keys are rejected.
inline void set_field(RunConfig& cfg, const std::string& key, const std::string& value) {
  for (const auto& f : detail::field_specs()) {
    if (f.key == key) {
      f.set(cfg, value);
      return;
    }
  }
  throw ConfigError("unknown config field '" + key + "'");
}

inline nlohmann::json to_json(const RunConfig& cfg) {
  nlohmann::json j = nlohmann::json::object();
  for (const auto& f : detail::field_specs()) j[f.key] = f.get(cfg);
  j["schema_version"] = 1;
  return j;
}

inline void apply_json(RunConfig& cfg, const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("config file must hold a JSON object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (it.key() == "schema_version") continue;
    set_field(cfg, it.key(), detail::json_scalar_text(it.key(), it.value()));
  }
}

inline void apply_file(RunConfig& cfg, const fs::path& file) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(detail::read_text_file(file));
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("config file " + file.string() + " is not valid JSON: " + e.what());
  } catch (const WorkspaceError& e) {
    throw ConfigError(e.what());
  }
  apply_json(cfg, j);
}

/// `lookup` returns the value of an environment variable, if set.
inline void apply_env(RunConfig& cfg, const std::function<std::optional<std::string>(const std::string&)>& lookup) {
  for (const auto& f : detail::field_specs()) {
    if (auto v = lookup(f.env)) f.set(cfg, *v);
  }
  // Alias: GA_MOUNT_DATA=true bind-links the data, false copies it in.
  if (auto v = lookup("GA_MOUNT_DATA")) cfg.data_mode = detail::parse_bool("GA_MOUNT_DATA", *v) ? "link" : "copy";
}

inline void apply_process_env(RunConfig& cfg) {
  apply_env(cfg, [](const std::string& name) -> std::optional<std::string> {
    if (const char* v = std::getenv(name.c_str())) return std::string(v);
    return std::nullopt;
  });
}

inline HedgeConfig hedge_config_of(const RunConfig& cfg) {
  ProbabilityMap floors, ceilings;
  for (const auto& [op, p] : cfg.base_probs) {
    if (p < 0.0 || p > 1.0) throw ConfigError("config field 'prob_" + detail::lower(std::string(to_string(op))) + "': must be in [0, 1]");
    if (p <= 0.0) continue;
    if (auto it = cfg.floors.find(op); it != cfg.floors.end()) floors[op] = it->second;
    if (auto it = cfg.ceilings.find(op); it != cfg.ceilings.end()) ceilings[op] = it->second;
  }
  return HedgeConfig::from_base(cfg.base_probs, floors, ceilings, cfg.eta, cfg.kappa, cfg.max_bound_iterations);
}

inline EngineConfig engine_config_of(const RunConfig& cfg) {
  EngineConfig e;
  e.planning.population = cfg.population;
  e.planning.continue_min_parents = cfg.continue_parents_min;
  e.planning.continue_max_parents = cfg.continue_parents_max;
  e.planning.num_training_runs = cfg.num_training_runs;
  e.hedge = hedge_config_of(cfg);
  e.stopping.threshold = cfg.convergence_threshold;
  e.stopping.patience = cfg.patience;
  e.stopping.max_iterations = cfg.max_iterations;
  e.direction.higher_is_better = cfg.higher_is_better;
  e.workers = cfg.workers;
  e.master_seed = cfg.seed;
  e.output_root = cfg.output_root;
  e.data_path = cfg.data_path;
  if (cfg.data_mode == "link") e.data_mode = DataMode::Link;
  else if (cfg.data_mode == "copy") e.data_mode = DataMode::Copy;
  else throw ConfigError("config field 'data_mode': expected 'link' or 'copy'");
  return e;
}

/// Full validation; throws ConfigError naming the offending field.
inline void validate(const RunConfig& cfg) {
  if (cfg.executor != "simulated" && cfg.executor != "external")
    throw ConfigError("config field 'executor': expected 'simulated' or 'external'");
  if (cfg.executor == "external") {
    if (cfg.command.empty()) throw ConfigError("config field 'command': required by the external executor");
    if (cfg.data_path.empty()) throw ConfigError("config field 'data_path': required by the external executor");
  }
  if (!(cfg.timeout_seconds > 0.0)) throw ConfigError("config field 'timeout_seconds': must be positive");
  if (cfg.output_root.empty()) throw ConfigError("config field 'output_root': must not be empty");
  try {
    validate(engine_config_of(cfg));
  } catch (const ConfigError& e) {
    throw ConfigError(std::string("invalid configuration: ") + e.what());
  }
}

inline SimModelParams sim_params_of(const RunConfig& cfg) {
  SimModelParams p = SimModelParams::calibrated();
  if (!cfg.sim_params.empty()) {
    try {
      p = sim_params_from_json(nlohmann::json::parse(detail::read_text_file(cfg.sim_params)));
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError("config field 'sim_params': " + std::string(e.what()));
    } catch (const WorkspaceError& e) {
      throw ConfigError("config field 'sim_params': " + std::string(e.what()));
    }
  }
  p.direction.higher_is_better = cfg.higher_is_better;
  return p;
}

inline std::unique_ptr<Executor> make_executor(const RunConfig& cfg) {
  if (cfg.executor == "simulated") return std::make_unique<SimulatedExecutor>(sim_params_of(cfg), cfg.seed);
  ExternalExecutorConfig ext;
  ext.command_template = cfg.command;
  ext.timeout = std::chrono::milliseconds(static_cast<long long>(cfg.timeout_seconds * 1000.0));
  ext.data_path = cfg.data_path;
  ext.direction.higher_is_better = cfg.higher_is_better;
  return std::make_unique<ExternalExecutor>(std::move(ext));
}

}  // namespace agentga
