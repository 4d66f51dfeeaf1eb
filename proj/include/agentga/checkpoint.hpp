#pragma once

// Engine state persisted after every iteration.
//
// The store directory holds `checkpoint.json` (latest) and
// `checkpoint.prev.json` (the one before). A save writes a temp file, rotates
// the current file to .prev, then renames the temp into place, so a crash at
// any point leaves at least one complete checkpoint behind.

#include <cstdint>
#include <optional>
#include <string>

#include "agentga/errors.hpp"
#include "agentga/hedge.hpp"
#include "agentga/pool.hpp"
#include "agentga/workspace.hpp"
#include "json.hpp"

namespace agentga {

inline constexpr int kCheckpointSchemaVersion = 1;
inline constexpr const char* kCheckpointFile = "checkpoint.json";
inline constexpr const char* kCheckpointPrevFile = "checkpoint.prev.json";
inline constexpr const char* kCheckpointTempFile = "checkpoint.json.tmp";

struct Checkpoint {
  int iteration = 0;  // last fully completed iteration
  ElitePool pool;
  HedgeState hedge;
  StoppingState stopping;
  std::uint64_t master_seed = 0;
  std::uint64_t event_log_offset = 0;  // bytes of the event log covered by this state
  bool finished = false;
  std::string stop_reason;

  friend bool operator==(const Checkpoint& a, const Checkpoint& b) {
    return a.iteration == b.iteration && a.pool == b.pool && a.hedge.log_weights == b.hedge.log_weights &&
           to_json(a.hedge.config) == to_json(b.hedge.config) && a.stopping == b.stopping &&
           a.master_seed == b.master_seed && a.event_log_offset == b.event_log_offset &&
           a.finished == b.finished && a.stop_reason == b.stop_reason;
  }
};

inline nlohmann::json to_json(const Checkpoint& c) {
  return {{"schema_version", kCheckpointSchemaVersion},
          {"iteration", c.iteration},
          {"pool", to_json(c.pool)},
          {"hedge", to_json(c.hedge)},
          {"stopping", to_json(c.stopping)},
          {"rng", {{"master_seed", c.master_seed}, {"next_iteration", c.iteration + 1}}},
          {"event_log_offset", c.event_log_offset},
          {"finished", c.finished},
          {"stop_reason", c.stop_reason}};
}

namespace detail {
template <typename F>
auto checkpoint_field(const char* field, F&& parse) {
  try {
    return parse();
  } catch (const CheckpointError&) {
    throw;
  } catch (const std::exception& e) {
    throw CheckpointError(field, std::string("checkpoint field '") + field + "' is invalid: " + e.what());
  }
}
}  // namespace detail

inline Checkpoint checkpoint_from_json(const nlohmann::json& j) {
  using detail::checkpoint_field;
  Checkpoint c;
  int version = checkpoint_field("schema_version", [&] { return j.at("schema_version").get<int>(); });
  if (version != kCheckpointSchemaVersion)
    throw CheckpointError("schema_version", "unsupported checkpoint schema_version " + std::to_string(version));
  c.iteration = checkpoint_field("iteration", [&] { return j.at("iteration").get<int>(); });
  c.pool = checkpoint_field("pool", [&] { return elite_pool_from_json(j.at("pool")); });
  c.hedge = checkpoint_field("hedge", [&] { return hedge_state_from_json(j.at("hedge")); });
  c.stopping = checkpoint_field("stopping", [&] { return stopping_state_from_json(j.at("stopping")); });
  c.master_seed = checkpoint_field("rng", [&] { return j.at("rng").at("master_seed").get<std::uint64_t>(); });
  c.event_log_offset = checkpoint_field("event_log_offset", [&] { return j.at("event_log_offset").get<std::uint64_t>(); });
  c.finished = checkpoint_field("finished", [&] { return j.at("finished").get<bool>(); });
  c.stop_reason = checkpoint_field("stop_reason", [&] { return j.at("stop_reason").get<std::string>(); });
  return c;
}

inline void save_checkpoint(const Checkpoint& state, const fs::path& store) {
  fs::create_directories(store);
  const auto tmp = store / kCheckpointTempFile;
  const auto cur = store / kCheckpointFile;
  const auto prev = store / kCheckpointPrevFile;
  try {
    detail::write_text_file(tmp, to_json(state).dump(2) + "\n");
  } catch (const WorkspaceError& e) {
    throw WorkspaceError(std::string("checkpoint write failed: ") + e.what());
  }
  if (fs::exists(cur)) fs::rename(cur, prev);
  fs::rename(tmp, cur);
}

inline Checkpoint read_checkpoint_file(const fs::path& file) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(detail::read_text_file(file));
  } catch (const std::exception& e) {
    throw CheckpointError("<document>", "checkpoint " + file.string() + " is not valid JSON: " + e.what());
  }
  return checkpoint_from_json(j);
}

/// Latest complete checkpoint, or nullopt when the store holds none.
/// A stray temp file from an interrupted save is ignored.
inline std::optional<Checkpoint> load_checkpoint(const fs::path& store) {
  const auto cur = store / kCheckpointFile;
  const auto prev = store / kCheckpointPrevFile;
  if (fs::exists(cur)) return read_checkpoint_file(cur);
  if (fs::exists(prev)) return read_checkpoint_file(prev);
  return std::nullopt;
}

}  // namespace agentga
