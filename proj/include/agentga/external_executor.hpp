#pragma once

// Executor that launches an external agent command inside the workspace and
// collects `Experiments/main_training/<run_name>/results.json` files.
//
// results.json schema:
//   {"run_name": str, "score": number, "metric": str, "higher_is_better": bool, ...}

#include <fcntl.h>
#include <signal.h>
#include <sys/types.h>
#include <sys/wait.h>
#include <unistd.h>

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include "agentga/direction.hpp"
#include "agentga/executor.hpp"
#include "agentga/workspace.hpp"
#include "json.hpp"

extern char** environ;

namespace agentga {

struct ExternalExecutorConfig {
  std::string command_template;  // substitutions: {workspace} {manifest} {data}
  std::chrono::milliseconds timeout = std::chrono::minutes(30);
  std::vector<std::string> env_passthrough{"PATH", "HOME", "LANG", "TMPDIR"};
  fs::path data_path;
  MetricDirection direction;
};

inline constexpr const char* kResultsDir = "Experiments/main_training";

namespace detail {

inline std::string shell_quote(const std::string& s) {
  std::string out = "'";
  for (char c : s) {
    if (c == '\'') out += "'\\''";
    else out += c;
  }
  return out + "'";
}

inline std::string substitute(std::string text, const std::string& key, const std::string& value) {
  for (std::size_t pos = text.find(key); pos != std::string::npos; pos = text.find(key, pos + value.size()))
    text.replace(pos, key.size(), value);
  return text;
}

}  // namespace detail

inline std::string render_command(const std::string& tmpl, const fs::path& workspace, const fs::path& data) {
  auto cmd = detail::substitute(tmpl, "{workspace}", detail::shell_quote(workspace.string()));
  cmd = detail::substitute(cmd, "{manifest}", detail::shell_quote((workspace / kSeedManifestFile).string()));
  return detail::substitute(cmd, "{data}", detail::shell_quote(data.string()));
}

/// Parses every results file under the workspace; experiments without a
/// finite numeric score are skipped and noted in `diagnostics`.
inline RunOutcome collect_results(const fs::path& workspace, MetricDirection direction,
                                  std::map<std::string, std::string> diagnostics = {}) {
  RunOutcome out;
  out.diagnostics = std::move(diagnostics);
  const auto root = workspace / kResultsDir;
  std::vector<fs::path> files;
  std::error_code ec;
  if (fs::is_directory(root, ec)) {
    for (const auto& entry : fs::directory_iterator(root, ec)) {
      if (entry.is_directory() && fs::is_regular_file(entry.path() / "results.json")) files.push_back(entry.path() / "results.json");
    }
  }
  std::sort(files.begin(), files.end());

  std::set<std::string> seen;
  int skipped = 0;
  for (const auto& file : files) {
    const auto rel = fs::relative(file, workspace).string();
    try {
      auto j = nlohmann::json::parse(detail::read_text_file(file));
      if (!j.is_object()) throw std::runtime_error("not an object");
      if (!j.contains("score") || !j.at("score").is_number()) throw std::runtime_error("missing numeric score");
      const double score = j.at("score").get<double>();
      if (!std::isfinite(score)) throw std::runtime_error("non-finite score");
      std::string name = j.contains("run_name") && j.at("run_name").is_string() ? j.at("run_name").get<std::string>()
                                                                                : file.parent_path().filename().string();
      if (!seen.insert(name).second) throw std::runtime_error("duplicate run_name '" + name + "'");
      ExperimentRecord rec{name, score, j.value("metric", std::string{}), std::nullopt};
      if (j.contains("notes") && j.at("notes").is_string()) rec.notes = j.at("notes").get<std::string>();
      if (j.contains("higher_is_better") && j.at("higher_is_better").is_boolean() &&
          j.at("higher_is_better").get<bool>() != direction.higher_is_better)
        out.diagnostics["direction_mismatch:" + rel] = "results file disagrees with configured direction";
      out.experiments.push_back(std::move(rec));
    } catch (const std::exception& e) {
      ++skipped;
      out.diagnostics["skipped:" + rel] = e.what();
    }
  }
  out.diagnostics["experiments_skipped"] = std::to_string(skipped);
  for (const auto& e : out.experiments) {
    if (!out.score || better(e.score, *out.score, direction)) out.score = e.score;
  }
  out.verified = !out.experiments.empty();
  return out;
}

/// Spawns the configured command with the workspace as working directory.
/// Timeouts kill the whole process group.
inline RunOutcome external_run(const AgentSeed& seed, const fs::path& workspace, const ExternalExecutorConfig& cfg) {
  (void)seed;
  std::map<std::string, std::string> diag;
  if (cfg.command_template.empty()) return RunOutcome::failure("empty command template");
  std::error_code ec;
  fs::create_directories(workspace / "logs", ec);

  const std::string cmd = render_command(cfg.command_template, workspace, cfg.data_path);
  const std::string log_path = (workspace / "logs" / "agent_output.log").string();
  const std::string cwd = workspace.string();

  std::vector<std::string> env_strings;
  for (const auto& key : cfg.env_passthrough) {
    if (const char* v = std::getenv(key.c_str())) env_strings.push_back(key + "=" + v);
  }
  env_strings.push_back("AGENTGA_WORKSPACE=" + cwd);
  env_strings.push_back("AGENTGA_SEED_MANIFEST=" + (workspace / kSeedManifestFile).string());
  env_strings.push_back("AGENTGA_DATA=" + cfg.data_path.string());
  std::vector<char*> envp;
  for (auto& s : env_strings) envp.push_back(s.data());
  envp.push_back(nullptr);
  std::string sh = "/bin/sh", dash_c = "-c", cmd_copy = cmd;
  std::vector<char*> argv{sh.data(), dash_c.data(), cmd_copy.data(), nullptr};

  const auto started = std::chrono::steady_clock::now();
  pid_t pid = ::fork();
  if (pid < 0) return RunOutcome::failure("fork failed");
  if (pid == 0) {
    ::setpgid(0, 0);
    if (::chdir(cwd.c_str()) != 0) ::_exit(126);
    int fd = ::open(log_path.c_str(), O_WRONLY | O_CREAT | O_TRUNC, 0644);
    if (fd >= 0) {
      ::dup2(fd, STDOUT_FILENO);
      ::dup2(fd, STDERR_FILENO);
      ::close(fd);
    }
    ::execve(argv[0], argv.data(), envp.data());
    ::_exit(127);
  }
  ::setpgid(pid, pid);

  int status = 0;
  bool timed_out = false;
  for (;;) {
    pid_t r = ::waitpid(pid, &status, WNOHANG);
    if (r == pid) break;
    if (r < 0) {
      diag["error"] = "waitpid failed";
      break;
    }
    if (std::chrono::steady_clock::now() - started > cfg.timeout) {
      timed_out = true;
      ::kill(-pid, SIGTERM);
      std::this_thread::sleep_for(std::chrono::milliseconds(200));
      ::kill(-pid, SIGKILL);
      ::waitpid(pid, &status, 0);
      break;
    }
    std::this_thread::sleep_for(std::chrono::milliseconds(5));
  }
  const auto elapsed = std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - started);
  diag["wall_time_ms"] = std::to_string(elapsed.count());

  if (timed_out) {
    diag["error"] = "timeout";
    RunOutcome out;
    out.diagnostics = std::move(diag);
    return out;
  }
  if (WIFEXITED(status)) diag["exit_code"] = std::to_string(WEXITSTATUS(status));
  if (WIFSIGNALED(status)) diag["signal"] = std::to_string(WTERMSIG(status));
  return collect_results(workspace, cfg.direction, std::move(diag));
}

class ExternalExecutor final : public Executor {
 public:
  explicit ExternalExecutor(ExternalExecutorConfig cfg) : cfg_(std::move(cfg)) {}
  RunOutcome execute(const AgentSeed& seed, const fs::path& workspace) override {
    return external_run(seed, workspace, cfg_);
  }

 private:
  ExternalExecutorConfig cfg_;
};

}  // namespace agentga
