#pragma once

// Command implementations behind the `agentga` executable. Each returns a
// process exit code and writes human-readable output to the given streams.

#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "agentga/config.hpp"
#include "agentga/context.hpp"
#include "agentga/engine.hpp"
#include "agentga/lineage.hpp"

namespace agentga::app {

enum ExitCode : int { kOk = 0, kConfig = 1, kRuntime = 2, kCorruptState = 3 };

inline constexpr const char* kEffectiveConfigFile = "config.json";

inline void print_summary(const RunResult& r, std::ostream& out) {
  out << "iterations completed: " << r.iterations_completed << "\n";
  out << "status: " << (r.finished ? "finished (" + r.stop_reason + ")" : std::string("interrupted")) << "\n";
  if (r.best) {
    out << "best score: " << nlohmann::json(*r.best->score).dump() << " (slot " << r.best->slot;
    if (r.best->archive) out << ", archive " << r.best->archive->id;
    out << ")\n";
  } else {
    out << "best score: none\n";
  }
}

inline int write_final_report(const fs::path& root, std::ostream& err) {
  try {
    export_report(build_report(root / "events.jsonl"), ReportFormat::Json, root);
  } catch (const std::exception& e) {
    err << "error: writing report failed: " << e.what() << "\n";
    return kRuntime;
  }
  return kOk;
}

inline int cmd_run(const RunConfig& cfg, std::ostream& out, std::ostream& err,
                   std::optional<int> stop_after = std::nullopt) {
  std::unique_ptr<Executor> executor;
  EngineConfig ecfg;
  try {
    validate(cfg);
    ecfg = engine_config_of(cfg);
    ecfg.stop_after_iteration = stop_after;
    executor = make_executor(cfg);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kConfig;
  }
  const fs::path root = cfg.output_root;
  try {
    if (load_checkpoint(root / "checkpoint")) {
      err << "config error: output root " << root << " already holds a run; use resume\n";
      return kConfig;
    }
  } catch (const CheckpointError&) {
    err << "config error: output root " << root << " already holds a (corrupt) run\n";
    return kConfig;
  }
  try {
    fs::create_directories(root);
    detail::write_text_file(root / kEffectiveConfigFile, to_json(cfg).dump(2) + "\n");
    EvolutionEngine engine(ecfg, *executor);
    auto result = engine.run();
    print_summary(result, out);
    if (result.finished) return write_final_report(root, err);
    return kOk;
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kConfig;
  } catch (const std::exception& e) {
    err << "runtime error: " << e.what() << "\n";
    return kRuntime;
  }
}

inline int cmd_resume(const fs::path& root, std::ostream& out, std::ostream& err) {
  RunConfig cfg;
  try {
    if (!fs::exists(root / kEffectiveConfigFile)) {
      err << "nothing to resume: no run configuration under " << root << "\n";
      return kRuntime;
    }
    apply_file(cfg, root / kEffectiveConfigFile);
    cfg.output_root = root.string();
    validate(cfg);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kConfig;
  }
  try {
    auto executor = make_executor(cfg);
    EvolutionEngine engine(engine_config_of(cfg), *executor);
    auto result = engine.resume();
    if (result.already_complete) {
      out << "run already complete (" << result.stop_reason << ") after " << result.iterations_completed
          << " iterations\n";
      return kOk;
    }
    print_summary(result, out);
    if (result.finished) return write_final_report(root, err);
    return kOk;
  } catch (const NothingToResume& e) {
    err << e.what() << "\n";
    return kRuntime;
  } catch (const CheckpointError& e) {
    err << "corrupt checkpoint (field '" << e.field() << "'): " << e.what() << "\n";
    return kCorruptState;
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kConfig;
  } catch (const std::exception& e) {
    err << "runtime error: " << e.what() << "\n";
    return kRuntime;
  }
}

inline int cmd_report(const fs::path& root, ReportFormat format, const fs::path& out_dir, std::ostream& out,
                      std::ostream& err) {
  const auto log = root / "events.jsonl";
  if (!fs::exists(log)) {
    err << "no event log at " << log << "\n";
    return kRuntime;
  }
  try {
    auto rep = build_report(log);
    auto files = export_report(rep, format, out_dir.empty() ? root : out_dir);
    out << format_stats_table(rep.stats);
    if (rep.malformed_records) out << "malformed records skipped: " << rep.malformed_records << "\n";
    for (const auto& f : files) out << "wrote " << f.string() << "\n";
    return kOk;
  } catch (const std::exception& e) {
    err << "runtime error: " << e.what() << "\n";
    return kRuntime;
  }
}

/// Runs seeded replicates of the full engine with the simulated executor
/// until at least `tournaments` parent-child tournaments have been played,
/// then reports the pooled operator statistics.
struct SimulationSummary {
  std::vector<OperatorStats> stats;
  std::vector<TournamentRecord> records;
  int replicates = 0;
};

inline SimulationSummary simulate_tournaments(const RunConfig& base, const SimModelParams& params,
                                              std::size_t tournaments, std::uint64_t seed, const fs::path& root) {
  SimulationSummary sum;
  std::size_t played = 0;
  while (played < tournaments) {
    RunConfig cfg = base;
    cfg.seed = seed + static_cast<std::uint64_t>(sum.replicates);
    char name[32];
    std::snprintf(name, sizeof name, "rep_%04d", sum.replicates);
    cfg.output_root = (root / name).string();
    cfg.higher_is_better = params.direction.higher_is_better;
    auto ecfg = engine_config_of(cfg);
    SimulatedExecutor executor(params, cfg.seed);
    EvolutionEngine engine(ecfg, executor);
    auto result = engine.run();
    for (auto& r : result.records) {
      if (r.parent_score) ++played;
      sum.records.push_back(std::move(r));
    }
    ++sum.replicates;
  }
  sum.stats = compute_operator_stats(sum.records);
  return sum;
}

inline int cmd_simulate(const RunConfig& base, const std::optional<fs::path>& params_file, std::size_t tournaments,
                        std::uint64_t seed, std::ostream& out, std::ostream& err) {
  SimModelParams params;
  try {
    params = SimModelParams::calibrated();
    params.direction.higher_is_better = base.higher_is_better;
    if (params_file) params = sim_params_from_json(nlohmann::json::parse(detail::read_text_file(*params_file)));
    validate(base);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kConfig;
  } catch (const std::exception& e) {
    err << "config error: invalid simulator params: " << e.what() << "\n";
    return kConfig;
  }
  const fs::path root = base.output_root;
  if (fs::exists(root) && !fs::is_empty(root)) {
    err << "config error: simulation output root " << root << " is not empty\n";
    return kConfig;
  }
  try {
    auto sum = simulate_tournaments(base, params, tournaments, seed, root);
    out << "replicates: " << sum.replicates << "\n";
    out << format_stats_table(sum.stats);
    LineageReport rep;
    rep.stats = sum.stats;
    rep.edges = lineage_edges(sum.records);
    export_report(rep, ReportFormat::Json, root, "simulation");
    return kOk;
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kConfig;
  } catch (const std::exception& e) {
    err << "runtime error: " << e.what() << "\n";
    return kRuntime;
  }
}

struct CompressOptions {
  context::BudgetConfig budget;
  double summary_ratio = 0.10;  // built-in summarizer keeps this share of tokens
  std::size_t reserved_tokens = 0;
  fs::path rendered_out;
  fs::path statuses_out;
};

/// Stand-in summarizer: keeps the first `ratio` share of the tokens.
inline context::Summarizer head_summarizer(double ratio) {
  return [ratio](const std::string& text) {
    const auto& counter = context::default_counter();
    auto keep = static_cast<std::size_t>(static_cast<double>(counter.count(text)) * ratio);
    return counter.head(text, std::max<std::size_t>(1, keep));
  };
}

inline int cmd_compress(const fs::path& transcript, const CompressOptions& opts, std::ostream& out, std::ostream& err) {
  using namespace context;
  MessageHistory history;
  try {
    validate(opts.budget);
    std::ifstream in(transcript);
    if (!in) {
      err << "cannot read transcript " << transcript << "\n";
      return kRuntime;
    }
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (line.empty()) continue;
      try {
        history.add(message_from_json(nlohmann::json::parse(line)));
      } catch (const std::exception& e) {
        err << "transcript line " << lineno << ": " << e.what() << "\n";
        return kConfig;
      }
    }
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kConfig;
  }

  std::vector<std::string> diags;
  const auto groups = group_messages(history.messages, &diags);
  auto report = compress_pending(history, head_summarizer(opts.summary_ratio), opts.budget);
  const auto costs = group_costs(history, groups, opts.budget);
  const auto sel = select_statuses(costs, opts.budget, opts.reserved_tokens);
  const auto rendered = reconstruct_context(history, groups, sel.statuses, opts.budget);

  std::size_t original_total = opts.reserved_tokens;
  for (const auto& c : costs) original_total += c.original;

  nlohmann::json sidecar = {{"schema_version", 1},
                            {"target_tokens", opts.budget.target_tokens},
                            {"reserved_tokens", opts.reserved_tokens},
                            {"original_tokens", original_total},
                            {"total_tokens", sel.total_tokens},
                            {"over_budget", sel.over_budget},
                            {"diagnostics", diags}};
  nlohmann::json gj = nlohmann::json::array();
  for (std::size_t g = 0; g < groups.size(); ++g) {
    std::vector<int> ids;
    for (auto pos : groups[g].members) ids.push_back(history.messages[pos].id);
    gj.push_back({{"index", g}, {"message_ids", ids}, {"status", std::string(to_string(sel.statuses[g]))}});
  }
  sidecar["groups"] = gj;
  for (const auto& d : history.diagnostics) sidecar["diagnostics"].push_back(d);

  try {
    if (!opts.rendered_out.empty()) {
      std::string text;
      for (const auto& r : rendered) text += to_json(r).dump() + "\n";
      agentga::detail::write_text_file(opts.rendered_out, text);
    }
    if (!opts.statuses_out.empty()) agentga::detail::write_text_file(opts.statuses_out, sidecar.dump(2) + "\n");
  } catch (const std::exception& e) {
    err << "runtime error: " << e.what() << "\n";
    return kRuntime;
  }
  out << "messages: " << history.size() << ", groups: " << groups.size() << ", summarized: " << report.summarized
      << "\n";
  out << "tokens: " << original_total << " -> " << sel.total_tokens << " (target " << opts.budget.target_tokens
      << (sel.over_budget ? ", OVER BUDGET" : "") << ")\n";
  return kOk;
}

}  // namespace agentga::app
