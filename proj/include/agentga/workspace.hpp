#pragma once

// Isolated per-run workspaces and immutable run archives.
//
// Workspace layout:
//   <ws>/seed.json                      seed manifest
//   <ws>/data                           task data (symlink or copy)
//   <ws>/Previous Experiments/parent_i  curated parent archive copies
//
// Archive layout:
//   <archive>/manifest.json   ids, score, lineage, experiment list
//   <archive>/experiments/    one record per experiment
//   <archive>/solution/       code artifacts left in the workspace
//   <archive>/logs/           run logs

#include <fnmatch.h>

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <system_error>
#include <vector>

#include "agentga/errors.hpp"
#include "agentga/outcome.hpp"
#include "agentga/seed.hpp"
#include "json.hpp"

namespace agentga {

inline constexpr const char* kPreviousExperimentsDir = "Previous Experiments";
inline constexpr const char* kSeedManifestFile = "seed.json";
inline constexpr const char* kArchiveManifestFile = "manifest.json";
inline constexpr const char* kArchivedMarker = ".archived";
inline constexpr int kManifestSchemaVersion = 1;

struct CurationRules {
  std::vector<std::string> excluded_dir_names{kPreviousExperimentsDir, "__pycache__", ".git",
                                              "catboost_info"};
  std::uintmax_t max_file_bytes = 64ull * 1024 * 1024;
  std::vector<std::string> excluded_globs{"*.ckpt", "*.pt", "*.pth", "*.npy", "*.npz", "*.tmp"};

  /// The nested previous-experiments folder is always excluded, whatever the
  /// caller configured.
  std::vector<std::string> effective_excluded_dirs() const {
    auto dirs = excluded_dir_names;
    if (std::find(dirs.begin(), dirs.end(), kPreviousExperimentsDir) == dirs.end())
      dirs.emplace_back(kPreviousExperimentsDir);
    return dirs;
  }
};

enum class DataMode { Link, Copy };

struct CopyStep {
  fs::path source;
  fs::path destination;  // relative to the copy root
  friend bool operator==(const CopyStep&, const CopyStep&) = default;
};

struct CopyPlan {
  std::vector<CopyStep> steps;
  std::vector<std::string> warnings;
  std::vector<fs::path> excluded;  // relative paths left out by the rules
};

namespace detail {

inline bool glob_match(const std::string& pattern, const std::string& text) {
  return ::fnmatch(pattern.c_str(), text.c_str(), 0) == 0;
}

inline void write_text_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw WorkspaceError("cannot write " + path.string());
  out << text;
  if (!out) throw WorkspaceError("short write to " + path.string());
}

inline std::string read_text_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw WorkspaceError("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void copy_tree(const fs::path& from, const fs::path& to, const std::set<std::string>& skip_top = {}) {
  fs::create_directories(to);
  for (const auto& entry : fs::directory_iterator(from)) {
    const auto name = entry.path().filename().string();
    if (skip_top.count(name)) continue;
    fs::copy(entry.path(), to / name, fs::copy_options::recursive | fs::copy_options::copy_symlinks);
  }
}

inline std::string sanitize_name(const std::string& s) {
  std::string out;
  for (char c : s) out += (std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_' || c == '.') ? c : '_';
  return out.empty() ? "unnamed" : out;
}

}  // namespace detail

/// Pure, sorted copy plan for a parent archive: every regular file under
/// `source` that is not inside an excluded directory, does not match an
/// excluded glob, and fits under the byte cap.
inline CopyPlan curate_parent_archive(const fs::path& source, const CurationRules& rules) {
  CopyPlan plan;
  const auto dirs = rules.effective_excluded_dirs();
  std::error_code ec;
  fs::recursive_directory_iterator it(source, fs::directory_options::skip_permission_denied, ec);
  if (ec) {
    plan.warnings.push_back("unreadable source " + source.string() + ": " + ec.message());
    return plan;
  }
  for (; it != fs::recursive_directory_iterator(); it.increment(ec)) {
    if (ec) {
      plan.warnings.push_back("unreadable entry under " + source.string() + ": " + ec.message());
      ec.clear();
      continue;
    }
    const auto rel = fs::relative(it->path(), source);
    const auto name = it->path().filename().string();
    std::error_code sec;
    if (it->is_directory(sec)) {
      if (std::find(dirs.begin(), dirs.end(), name) != dirs.end()) {
        plan.excluded.push_back(rel);
        it.disable_recursion_pending();
      }
      continue;
    }
    if (!it->is_regular_file(sec)) continue;
    bool glob_hit = std::any_of(rules.excluded_globs.begin(), rules.excluded_globs.end(), [&](const auto& g) {
      return detail::glob_match(g, name) || detail::glob_match(g, rel.string());
    });
    if (glob_hit) {
      plan.excluded.push_back(rel);
      continue;
    }
    auto size = it->file_size(sec);
    if (sec) {
      plan.warnings.push_back("cannot stat " + rel.string() + ": " + sec.message());
      continue;
    }
    if (size > rules.max_file_bytes) {
      plan.excluded.push_back(rel);
      continue;
    }
    plan.steps.push_back({it->path(), rel});
  }
  std::sort(plan.steps.begin(), plan.steps.end(),
            [](const CopyStep& a, const CopyStep& b) { return a.destination < b.destination; });
  std::sort(plan.excluded.begin(), plan.excluded.end());
  return plan;
}

inline void execute_plan(const CopyPlan& plan, const fs::path& destination_root) {
  fs::create_directories(destination_root);
  for (const auto& step : plan.steps) {
    auto dst = destination_root / step.destination;
    fs::create_directories(dst.parent_path());
    fs::copy_file(step.source, dst, fs::copy_options::none);
  }
}

inline bool archive_resolvable(const ArchiveRef& ref) {
  std::error_code ec;
  return fs::is_directory(ref.path, ec) && fs::is_regular_file(ref.path / kArchiveManifestFile, ec);
}

/// Creates a fresh workspace for `seed` at `workspace`. Never reuses an
/// existing directory.
inline fs::path materialize_seed(const AgentSeed& seed, const fs::path& workspace, const fs::path& data_source,
                                 const CurationRules& rules, DataMode mode = DataMode::Link) {
  for (const auto& parent : seed.parents) {
    if (!archive_resolvable(parent))
      throw WorkspaceError("parent archive '" + parent.id + "' not found at " + parent.path.string());
  }
  if (fs::exists(workspace)) throw WorkspaceError("workspace already exists: " + workspace.string());
  fs::create_directories(workspace.parent_path());
  if (!fs::create_directory(workspace)) throw WorkspaceError("workspace collision: " + workspace.string());

  if (!data_source.empty()) {
    if (!fs::exists(data_source)) throw WorkspaceError("data source missing: " + data_source.string());
    if (mode == DataMode::Link) {
      fs::create_directory_symlink(fs::absolute(data_source), workspace / "data");
    } else if (fs::is_directory(data_source)) {
      fs::copy(data_source, workspace / "data", fs::copy_options::recursive);
    } else {
      fs::create_directory(workspace / "data");
      fs::copy_file(data_source, workspace / "data" / data_source.filename());
    }
  }

  if (!seed.parents.empty()) {
    const auto prev = workspace / kPreviousExperimentsDir;
    for (std::size_t i = 0; i < seed.parents.size(); ++i) {
      auto plan = curate_parent_archive(seed.parents[i].path, rules);
      execute_plan(plan, prev / ("parent_" + std::to_string(i)));
    }
  }

  detail::write_text_file(workspace / kSeedManifestFile, to_json(seed).dump(2) + "\n");
  return workspace;
}

inline std::string archive_id_for(int iteration, int slot) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "it%04d-s%02d", iteration, slot);
  return buf;
}

/// Freezes a finished workspace into `archive_root/<id>`. The workspace's
/// own seed manifest provides identity and lineage.
inline ArchiveRef archive_run(const fs::path& workspace, const RunOutcome& outcome, const fs::path& archive_root) {
  if (!outcome.valid()) throw WorkspaceError("refusing to archive an unverified outcome");
  if (fs::exists(workspace / kArchivedMarker)) throw WorkspaceError("workspace already archived: " + workspace.string());
  const auto seed = agent_seed_from_json(nlohmann::json::parse(detail::read_text_file(workspace / kSeedManifestFile)));

  ArchiveRef ref;
  ref.id = archive_id_for(seed.iteration, seed.slot);
  ref.score = *outcome.score;
  ref.op = seed.op;
  ref.iteration = seed.iteration;
  ref.slot = seed.slot;
  for (const auto& p : seed.parents) ref.parent_ids.push_back(p.id);

  const auto final_dir = archive_root / ref.id;
  if (fs::exists(final_dir)) throw WorkspaceError("archive already exists: " + final_dir.string());
  const auto staging = archive_root / (".staging-" + ref.id);
  fs::remove_all(staging);
  fs::create_directories(staging / "experiments");

  detail::copy_tree(workspace, staging / "solution",
                    {kPreviousExperimentsDir, "data", "logs", kSeedManifestFile, kArchivedMarker});
  if (fs::is_directory(workspace / "logs")) {
    detail::copy_tree(workspace / "logs", staging / "logs");
  } else {
    fs::create_directories(staging / "logs");
  }

  nlohmann::json experiments = nlohmann::json::array();
  for (std::size_t i = 0; i < outcome.experiments.size(); ++i) {
    const auto& e = outcome.experiments[i];
    char prefix[16];
    std::snprintf(prefix, sizeof prefix, "%03zu_", i);
    detail::write_text_file(staging / "experiments" / (prefix + detail::sanitize_name(e.run_name) + ".json"),
                            to_json(e).dump(2) + "\n");
    experiments.push_back(to_json(e));
  }

  nlohmann::json manifest = to_json(ref);
  manifest.erase("path");
  manifest["schema_version"] = kManifestSchemaVersion;
  manifest["experiments"] = experiments;
  manifest["outcome"] = to_json(outcome);
  manifest["seed"] = to_json(seed);
  detail::write_text_file(staging / kArchiveManifestFile, manifest.dump(2) + "\n");

  fs::rename(staging, final_dir);
  detail::write_text_file(workspace / kArchivedMarker, ref.id + "\n");
  ref.path = final_dir;
  return ref;
}

inline ArchiveRef load_archive_ref(const fs::path& archive_dir) {
  auto j = nlohmann::json::parse(detail::read_text_file(archive_dir / kArchiveManifestFile));
  j["path"] = archive_dir.string();
  return archive_ref_from_json(j);
}

/// Serialized index of every archive produced during a run.
class ArchiveRegistry {
 public:
  void add(const ArchiveRef& ref) {
    std::lock_guard lock(mu_);
    if (!by_id_.emplace(ref.id, ref).second) throw WorkspaceError("duplicate archive id " + ref.id);
  }

  std::optional<ArchiveRef> find(const std::string& id) const {
    std::lock_guard lock(mu_);
    auto it = by_id_.find(id);
    if (it == by_id_.end()) return std::nullopt;
    return it->second;
  }

  std::size_t size() const {
    std::lock_guard lock(mu_);
    return by_id_.size();
  }

  /// Ids referenced as parents that have no registered archive.
  std::vector<std::string> dangling_parents() const {
    std::lock_guard lock(mu_);
    std::vector<std::string> missing;
    for (const auto& [id, ref] : by_id_)
      for (const auto& p : ref.parent_ids)
        if (!by_id_.count(p)) missing.push_back(p);
    return missing;
  }

  /// Registers every archive found under `archive_root`.
  void scan(const fs::path& archive_root) {
    if (!fs::is_directory(archive_root)) return;
    for (const auto& entry : fs::directory_iterator(archive_root)) {
      if (!entry.is_directory() || entry.path().filename().string().starts_with(".")) continue;
      add(load_archive_ref(entry.path()));
    }
  }

 private:
  mutable std::mutex mu_;
  std::map<std::string, ArchiveRef> by_id_;
};

}  // namespace agentga
