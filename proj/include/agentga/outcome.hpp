#pragma once

#include <cmath>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

namespace agentga {

struct ExperimentRecord {
  std::string run_name;
  double score = 0.0;
  std::string metric_name;
  std::optional<std::string> notes;

  friend bool operator==(const ExperimentRecord&, const ExperimentRecord&) = default;
};

/// What an executor reports back for one run. A run only counts when it is
/// verified: at least one scored experiment and a finite score.
struct RunOutcome {
  std::optional<double> score;
  std::vector<ExperimentRecord> experiments;
  bool verified = false;
  std::map<std::string, std::string> diagnostics;

  bool valid() const { return verified && !experiments.empty() && score && std::isfinite(*score); }

  static RunOutcome failure(std::string reason) {
    RunOutcome o;
    o.diagnostics["error"] = std::move(reason);
    return o;
  }

  friend bool operator==(const RunOutcome&, const RunOutcome&) = default;
};

inline nlohmann::json to_json(const ExperimentRecord& e) {
  nlohmann::json j = {{"run_name", e.run_name}, {"score", e.score}, {"metric", e.metric_name}};
  if (e.notes) j["notes"] = *e.notes;
  return j;
}

inline nlohmann::json to_json(const RunOutcome& o) {
  nlohmann::json exps = nlohmann::json::array();
  for (const auto& e : o.experiments) exps.push_back(to_json(e));
  return {{"score", o.score ? nlohmann::json(*o.score) : nlohmann::json(nullptr)},
          {"verified", o.verified},
          {"experiments", exps},
          {"diagnostics", o.diagnostics}};
}

}  // namespace agentga
