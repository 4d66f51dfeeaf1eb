#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "agentga/errors.hpp"
#include "agentga/operators.hpp"
#include "json.hpp"

namespace agentga {

namespace fs = std::filesystem;

/// Reference to an immutable archived run.
struct ArchiveRef {
  std::string id;
  fs::path path;
  double score = 0.0;
  Operator op = Operator::Initial;
  int iteration = 0;
  int slot = 0;
  std::vector<std::string> parent_ids;

  friend bool operator==(const ArchiveRef&, const ArchiveRef&) = default;
};

/// The unit the outer loop evolves: which operator to run, for which slot,
/// seeded with which parent archives. parents[0] is always the slot's elite.
struct AgentSeed {
  Operator op = Operator::Initial;
  int iteration = 0;
  int slot = 0;
  std::vector<ArchiveRef> parents;
  std::map<std::string, std::string> context_params;

  friend bool operator==(const AgentSeed&, const AgentSeed&) = default;
};

inline nlohmann::json to_json(const ArchiveRef& a) {
  return {{"id", a.id},
          {"path", a.path.string()},
          {"score", a.score},
          {"operator", std::string(to_string(a.op))},
          {"iteration", a.iteration},
          {"slot", a.slot},
          {"parent_ids", a.parent_ids}};
}

inline ArchiveRef archive_ref_from_json(const nlohmann::json& j) {
  ArchiveRef a;
  a.id = j.at("id").get<std::string>();
  a.path = j.at("path").get<std::string>();
  a.score = j.at("score").get<double>();
  a.op = operator_from_string(j.at("operator").get<std::string>());
  a.iteration = j.at("iteration").get<int>();
  a.slot = j.at("slot").get<int>();
  a.parent_ids = j.at("parent_ids").get<std::vector<std::string>>();
  return a;
}

inline nlohmann::json to_json(const AgentSeed& s) {
  nlohmann::json parents = nlohmann::json::array();
  for (const auto& p : s.parents) parents.push_back(to_json(p));
  return {{"schema_version", 1},
          {"operator", std::string(to_string(s.op))},
          {"iteration", s.iteration},
          {"slot", s.slot},
          {"parents", parents},
          {"context_params", s.context_params}};
}

inline AgentSeed agent_seed_from_json(const nlohmann::json& j) {
  AgentSeed s;
  s.op = operator_from_string(j.at("operator").get<std::string>());
  s.iteration = j.at("iteration").get<int>();
  s.slot = j.at("slot").get<int>();
  for (const auto& p : j.at("parents")) s.parents.push_back(archive_ref_from_json(p));
  s.context_params = j.at("context_params").get<std::map<std::string, std::string>>();
  return s;
}

/// Parent count each operator expects. Continue takes between
/// `continue_min` and `continue_max` parents.
inline bool arity_ok(Operator op, std::size_t parents, int continue_min = 1, int continue_max = 1) {
  switch (op) {
    case Operator::Initial: return parents == 0;
    case Operator::Merge: return parents == 2;
    case Operator::Continue:
      return parents >= static_cast<std::size_t>(continue_min) && parents <= static_cast<std::size_t>(continue_max);
    default: return parents == 1;
  }
}

}  // namespace agentga
