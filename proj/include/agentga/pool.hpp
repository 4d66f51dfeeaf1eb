#pragma once

#include <optional>
#include <string>
#include <vector>

#include "agentga/direction.hpp"
#include "agentga/operators.hpp"
#include "agentga/seed.hpp"
#include "json.hpp"

namespace agentga {

struct Origin {
  int iteration = 0;
  Operator op = Operator::Initial;
  std::vector<int> parent_slots;
  friend bool operator==(const Origin&, const Origin&) = default;
};

/// Best solution held by one population slot. An entry without a score is
/// the empty sentinel left by a failed first-iteration run; any valid child
/// beats it.
struct EliteEntry {
  int slot = 0;
  std::optional<double> score;
  std::optional<ArchiveRef> archive;
  Origin origin;

  bool empty() const { return !score.has_value(); }
  static EliteEntry sentinel(int slot) { return EliteEntry{slot, std::nullopt, std::nullopt, {}}; }
  friend bool operator==(const EliteEntry&, const EliteEntry&) = default;
};

struct ElitePool {
  std::vector<EliteEntry> entries;
  MetricDirection direction;

  bool complete(int n) const { return static_cast<int>(entries.size()) == n; }

  /// Best non-empty entry under the pool direction; ties keep the lower slot.
  std::optional<EliteEntry> best() const {
    std::optional<EliteEntry> top;
    for (const auto& e : entries) {
      if (e.empty()) continue;
      if (!top || better(*e.score, *top->score, direction)) top = e;
    }
    return top;
  }
  friend bool operator==(const ElitePool&, const ElitePool&) = default;
};

/// One parent-vs-child comparison.
struct TournamentRecord {
  int iteration = 0;
  int slot = 0;
  Operator op = Operator::Initial;
  std::optional<double> parent_score;
  std::optional<double> child_score;
  std::optional<double> delta;
  bool child_won = false;
  bool child_valid = false;
  std::optional<std::string> child_id;
  std::vector<std::string> parent_ids;
  friend bool operator==(const TournamentRecord&, const TournamentRecord&) = default;
};

struct StoppingState {
  std::optional<double> best_so_far;
  int stagnation_count = 0;
  double threshold = 0.0;
  int patience = 5;
  int max_iterations = 30;
  friend bool operator==(const StoppingState&, const StoppingState&) = default;
};

enum class StopDecision { Continue, Converged, Budget };

inline std::string_view to_string(StopDecision d) {
  switch (d) {
    case StopDecision::Continue: return "continue";
    case StopDecision::Converged: return "converged";
    case StopDecision::Budget: return "budget";
  }
  return "?";
}

// --- JSON -------------------------------------------------------------------

namespace detail {
inline nlohmann::json opt_json(const std::optional<double>& v) {
  return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
}
inline std::optional<double> opt_double(const nlohmann::json& j, const char* key) {
  const auto& v = j.at(key);
  if (v.is_null()) return std::nullopt;
  return v.get<double>();
}
}  // namespace detail

inline nlohmann::json to_json(const EliteEntry& e) {
  return {{"slot", e.slot},
          {"score", detail::opt_json(e.score)},
          {"archive", e.archive ? to_json(*e.archive) : nlohmann::json(nullptr)},
          {"origin",
           {{"iteration", e.origin.iteration},
            {"operator", std::string(to_string(e.origin.op))},
            {"parent_slots", e.origin.parent_slots}}}};
}

inline EliteEntry elite_entry_from_json(const nlohmann::json& j) {
  EliteEntry e;
  e.slot = j.at("slot").get<int>();
  e.score = detail::opt_double(j, "score");
  if (!j.at("archive").is_null()) e.archive = archive_ref_from_json(j.at("archive"));
  const auto& o = j.at("origin");
  e.origin.iteration = o.at("iteration").get<int>();
  e.origin.op = operator_from_string(o.at("operator").get<std::string>());
  e.origin.parent_slots = o.at("parent_slots").get<std::vector<int>>();
  return e;
}

inline nlohmann::json to_json(const ElitePool& p) {
  nlohmann::json entries = nlohmann::json::array();
  for (const auto& e : p.entries) entries.push_back(to_json(e));
  return {{"higher_is_better", p.direction.higher_is_better}, {"entries", entries}};
}

inline ElitePool elite_pool_from_json(const nlohmann::json& j) {
  ElitePool p;
  p.direction.higher_is_better = j.at("higher_is_better").get<bool>();
  for (const auto& e : j.at("entries")) p.entries.push_back(elite_entry_from_json(e));
  return p;
}

inline nlohmann::json to_json(const TournamentRecord& r) {
  return {{"type", "tournament"},
          {"iteration", r.iteration},
          {"slot", r.slot},
          {"operator", std::string(to_string(r.op))},
          {"parent_score", detail::opt_json(r.parent_score)},
          {"child_score", detail::opt_json(r.child_score)},
          {"delta", detail::opt_json(r.delta)},
          {"child_won", r.child_won},
          {"child_valid", r.child_valid},
          {"child_id", r.child_id ? nlohmann::json(*r.child_id) : nlohmann::json(nullptr)},
          {"parent_ids", r.parent_ids}};
}

inline TournamentRecord tournament_record_from_json(const nlohmann::json& j) {
  TournamentRecord r;
  r.iteration = j.at("iteration").get<int>();
  r.slot = j.at("slot").get<int>();
  r.op = operator_from_string(j.at("operator").get<std::string>());
  r.parent_score = detail::opt_double(j, "parent_score");
  r.child_score = detail::opt_double(j, "child_score");
  r.delta = detail::opt_double(j, "delta");
  r.child_won = j.at("child_won").get<bool>();
  r.child_valid = j.at("child_valid").get<bool>();
  if (!j.at("child_id").is_null()) r.child_id = j.at("child_id").get<std::string>();
  r.parent_ids = j.at("parent_ids").get<std::vector<std::string>>();
  return r;
}

inline nlohmann::json to_json(const StoppingState& s) {
  return {{"best_so_far", detail::opt_json(s.best_so_far)},
          {"stagnation_count", s.stagnation_count},
          {"threshold", s.threshold},
          {"patience", s.patience},
          {"max_iterations", s.max_iterations}};
}

inline StoppingState stopping_state_from_json(const nlohmann::json& j) {
  StoppingState s;
  s.best_so_far = detail::opt_double(j, "best_so_far");
  s.stagnation_count = j.at("stagnation_count").get<int>();
  s.threshold = j.at("threshold").get<double>();
  s.patience = j.at("patience").get<int>();
  s.max_iterations = j.at("max_iterations").get<int>();
  return s;
}

}  // namespace agentga
