#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "agentga/agentga.hpp"

namespace {

using agentga::RunConfig;

struct CommonFlags {
  std::string config_file;
  std::vector<std::string> sets;
  std::optional<std::string> executor, output_root, data_path, command;
  std::optional<long long> seed;
  std::optional<int> max_iterations, population, workers;
  bool higher = false, lower = false;

  void attach(CLI::App* cmd) {
    cmd->add_option("--config", config_file, "JSON config file");
    cmd->add_option("--set", sets, "Override a config field, key=value (repeatable)");
    cmd->add_option("--executor", executor, "simulated | external");
    cmd->add_option("--output-root", output_root, "Directory receiving every run artifact");
    cmd->add_option("--data-path", data_path, "Task data directory");
    cmd->add_option("--command", command, "External agent command template");
    cmd->add_option("--seed", seed, "Master random seed");
    cmd->add_option("--max-iterations", max_iterations, "Iteration cap");
    cmd->add_option("--population", population, "Population size");
    cmd->add_option("--workers", workers, "Concurrent runs per iteration");
    cmd->add_flag("--higher-is-better", higher, "Metric is maximized");
    cmd->add_flag("--lower-is-better", lower, "Metric is minimized");
  }

  RunConfig resolve() const {
    RunConfig cfg;
    if (!config_file.empty()) agentga::apply_file(cfg, config_file);
    agentga::apply_process_env(cfg);
    for (const auto& kv : sets) {
      auto eq = kv.find('=');
      if (eq == std::string::npos) throw agentga::ConfigError("--set expects key=value, got '" + kv + "'");
      agentga::set_field(cfg, kv.substr(0, eq), kv.substr(eq + 1));
    }
    if (executor) cfg.executor = *executor;
    if (output_root) cfg.output_root = *output_root;
    if (data_path) cfg.data_path = *data_path;
    if (command) cfg.command = *command;
    if (seed) agentga::set_field(cfg, "seed", std::to_string(*seed));
    if (max_iterations) agentga::set_field(cfg, "max_iterations", std::to_string(*max_iterations));
    if (population) agentga::set_field(cfg, "population_size", std::to_string(*population));
    if (workers) agentga::set_field(cfg, "parallel_workers", std::to_string(*workers));
    if (higher && lower) throw agentga::ConfigError("--higher-is-better and --lower-is-better are exclusive");
    if (higher) cfg.higher_is_better = true;
    if (lower) cfg.higher_is_better = false;
    return cfg;
  }
};

}  // namespace

int main(int argc, char** argv) {
  namespace app = agentga::app;
  CLI::App cli{"Evolutionary search over agent seeds"};
  cli.require_subcommand(1);

  CommonFlags run_flags;
  bool dump_config = false;
  std::optional<int> stop_after;
  auto* run = cli.add_subcommand("run", "Start a new evolutionary run");
  run_flags.attach(run);
  run->add_flag("--dump-config", dump_config, "Print the effective configuration and exit");
  run->add_option("--stop-after", stop_after, "Stop (resumably) after this iteration")->group("");

  std::string resume_root;
  auto* resume = cli.add_subcommand("resume", "Continue a run from its last checkpoint");
  resume->add_option("output_root", resume_root, "Run output root")->required();

  std::string report_root, report_format = "json", report_out;
  auto* report = cli.add_subcommand("report", "Operator statistics, progression and lineage edges");
  report->add_option("output_root", report_root, "Run output root")->required();
  report->add_option("--format", report_format, "csv | json")->check(CLI::IsMember({"csv", "json"}));
  report->add_option("--out", report_out, "Destination directory (default: output root)");

  CommonFlags sim_flags;
  std::string params_file;
  std::size_t tournaments = 1000;
  long long sim_seed = 0;
  auto* simulate = cli.add_subcommand("simulate", "Play many simulated tournaments and print operator stats");
  sim_flags.attach(simulate);
  simulate->add_option("--params", params_file, "Simulator parameter JSON file");
  simulate->add_option("--tournaments", tournaments, "Minimum number of parent-child tournaments");
  simulate->add_option("--sim-seed", sim_seed, "Seed of the first replicate");

  std::string transcript, rendered_out, statuses_out;
  app::CompressOptions copts;
  auto* compress = cli.add_subcommand("compress", "Compress a JSONL transcript to a token budget");
  compress->add_option("transcript", transcript, "JSONL transcript")->required();
  compress->add_option("--target", copts.budget.target_tokens, "Target tokens including reserved tokens");
  compress->add_option("--trigger", copts.budget.trigger_tokens, "Trigger threshold");
  compress->add_option("--protected", copts.budget.recent_groups_protected, "Newest groups kept original");
  compress->add_option("--window", copts.budget.window_groups, "Sliding window in groups");
  compress->add_option("--min-compress", copts.budget.min_compress_tokens, "Messages below this are copied");
  compress->add_option("--truncate-tokens", copts.budget.truncate_tokens, "Head length of truncated messages");
  compress->add_option("--reserved", copts.reserved_tokens, "Fixed system-prompt tokens");
  compress->add_option("--summary-ratio", copts.summary_ratio, "Share of tokens the built-in summarizer keeps");
  compress->add_option("--out", rendered_out, "Rendered context (JSONL)");
  compress->add_option("--statuses", statuses_out, "Status sidecar (JSON)");

  try {
    cli.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = cli.exit(e);
    return code == 0 ? 0 : app::kConfig;
  }

  try {
    if (*run) {
      auto cfg = run_flags.resolve();
      if (dump_config) {
        std::cout << agentga::to_json(cfg).dump(2) << "\n";
        return app::kOk;
      }
      return app::cmd_run(cfg, std::cout, std::cerr, stop_after);
    }
    if (*resume) return app::cmd_resume(resume_root, std::cout, std::cerr);
    if (*report) {
      auto fmt = report_format == "csv" ? agentga::ReportFormat::Csv : agentga::ReportFormat::Json;
      return app::cmd_report(report_root, fmt, report_out, std::cout, std::cerr);
    }
    if (*simulate) {
      auto cfg = sim_flags.resolve();
      std::optional<agentga::fs::path> pf;
      if (!params_file.empty()) pf = params_file;
      return app::cmd_simulate(cfg, pf, tournaments, static_cast<std::uint64_t>(sim_seed), std::cout, std::cerr);
    }
    if (*compress) {
      copts.rendered_out = rendered_out;
      copts.statuses_out = statuses_out;
      return app::cmd_compress(transcript, copts, std::cout, std::cerr);
    }
  } catch (const agentga::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return app::kConfig;
  } catch (const std::exception& e) {
    std::cerr << "runtime error: " << e.what() << "\n";
    return app::kRuntime;
  }
  return app::kOk;
}
