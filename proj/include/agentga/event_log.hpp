#pragma once

#include <cstdint>
#include <fstream>
#include <mutex>
#include <string>
#include <vector>

#include "agentga/errors.hpp"
#include "agentga/seed.hpp"
#include "json.hpp"

namespace agentga {

/// Append-only JSONL event log. Appends are serialized; `offset()` is the
/// byte length covered by completed appends.
class EventLog {
 public:
  explicit EventLog(fs::path path) : path_(std::move(path)) {
    if (fs::exists(path_)) offset_ = fs::file_size(path_);
  }

  const fs::path& path() const { return path_; }

  std::uint64_t offset() const {
    std::lock_guard lock(mu_);
    return offset_;
  }

  void append(const nlohmann::json& record) {
    std::lock_guard lock(mu_);
    const std::string line = record.dump() + "\n";
    std::ofstream out(path_, std::ios::binary | std::ios::app);
    if (!out) throw WorkspaceError("cannot append to event log " + path_.string());
    out << line;
    out.flush();
    if (!out) throw WorkspaceError("short write to event log " + path_.string());
    offset_ += line.size();
  }

  /// Drops everything past `offset`, discarding records of an iteration that
  /// never reached its checkpoint.
  void truncate(std::uint64_t offset) {
    std::lock_guard lock(mu_);
    if (fs::exists(path_) && fs::file_size(path_) > offset) fs::resize_file(path_, offset);
    offset_ = offset;
  }

 private:
  fs::path path_;
  mutable std::mutex mu_;
  std::uint64_t offset_ = 0;
};

struct ParsedLog {
  std::vector<nlohmann::json> records;
  int malformed = 0;
};

/// Reads a JSONL log; unparseable lines are counted, not fatal.
inline ParsedLog read_event_log(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw WorkspaceError("cannot read event log " + path.string());
  ParsedLog log;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    try {
      auto j = nlohmann::json::parse(line);
      if (!j.is_object() || !j.contains("type")) {
        ++log.malformed;
        continue;
      }
      log.records.push_back(std::move(j));
    } catch (const nlohmann::json::exception&) {
      ++log.malformed;
    }
  }
  return log;
}

}  // namespace agentga
