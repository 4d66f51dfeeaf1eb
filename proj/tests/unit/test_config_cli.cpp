#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <fstream>

#include "agentga/app.hpp"
#include "agentga/config.hpp"
#include "support.hpp"

using namespace agentga;
using testsupport::TempDir;

namespace {

struct CliResult {
  int code = -1;
  std::string out;
  std::string err;
};

std::string quote(const std::string& s) { return detail::shell_quote(s); }

// Runs the agentga binary through the shell; `env` is a prefix like "GA_SEED=3".
CliResult cli(const TempDir& dir, const std::string& args, const std::string& env = "") {
  const auto out = dir / "cli_stdout.txt", err = dir / "cli_stderr.txt";
  const std::string cmd = "cd " + quote(dir.path().string()) + " && env " + env + " " + quote(AGENTGA_CLI_PATH) + " " +
                          args + " >" + quote(out.string()) + " 2>" + quote(err.string());
  int status = std::system(cmd.c_str());
  CliResult r;
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.out = detail::read_text_file(out);
  r.err = detail::read_text_file(err);
  return r;
}

std::optional<std::string> no_env(const std::string&) { return std::nullopt; }

}  // namespace

TEST(RunConfigTest, DefaultsMatchPublishedHyperparameters) {
  RunConfig c;
  EXPECT_EQ(c.population, 5);
  EXPECT_EQ(c.base_probs.at(Operator::Initial), 0.1);
  EXPECT_EQ(c.base_probs.at(Operator::Continue), 0.2);
  EXPECT_EQ(c.base_probs.at(Operator::Ablation), 0.1);
  EXPECT_EQ(c.base_probs.at(Operator::Merge), 0.1);
  EXPECT_EQ(c.base_probs.at(Operator::Jumpstart), 0.0);
  EXPECT_EQ(c.base_probs.at(Operator::EDA), 0.5);
  EXPECT_EQ(c.floors.at(Operator::Continue), 0.10);
  EXPECT_EQ(c.floors.at(Operator::EDA), 0.05);
  EXPECT_EQ(c.ceilings.at(Operator::Merge), 0.30);
  EXPECT_EQ(c.ceilings.size(), 1u);
  EXPECT_EQ(c.eta, 0.15);
  EXPECT_EQ(c.kappa, 4.0);
  EXPECT_EQ(c.max_iterations, 30);
  EXPECT_EQ(c.patience, 5);
  EXPECT_EQ(c.convergence_threshold, 0.0);
  EXPECT_EQ(c.workers, 3);
  EXPECT_EQ(c.continue_parents_min, 1);
  EXPECT_EQ(c.continue_parents_max, 1);
  EXPECT_EQ(c.num_training_runs, 5);
  EXPECT_NO_THROW(validate(c));
  auto h = hedge_config_of(c);
  EXPECT_FALSE(h.is_active(Operator::Jumpstart));
  EXPECT_EQ(h.active_tasks.size(), 5u);
}

TEST(RunConfigTest, PrecedenceDefaultsFileEnvFlags) {
  TempDir d;
  std::ofstream(d / "cfg.json") << R"({"patience": 7, "hedge_eta": 0.3, "max_iterations": 12, "seed": 4})";
  RunConfig c;
  apply_file(c, d / "cfg.json");
  EXPECT_EQ(c.patience, 7);
  std::map<std::string, std::string> env{{"GA_HEDGE_ETA", "0.4"}, {"GA_MAX_ITERATIONS", "20"}, {"GA_MOUNT_DATA", "false"}};
  apply_env(c, [&](const std::string& k) -> std::optional<std::string> {
    if (auto it = env.find(k); it != env.end()) return it->second;
    return std::nullopt;
  });
  EXPECT_EQ(c.eta, 0.4);
  EXPECT_EQ(c.max_iterations, 20);
  EXPECT_EQ(c.data_mode, "copy");
  set_field(c, "max_iterations", "25");
  EXPECT_EQ(c.max_iterations, 25);
  EXPECT_EQ(c.patience, 7);
  EXPECT_EQ(c.seed, 4u);
}

TEST(RunConfigTest, FieldNamedErrors) {
  RunConfig c;
  try {
    set_field(c, "hedge_eta", "fast");
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("hedge_eta"), std::string::npos);
  }
  EXPECT_THROW(set_field(c, "no_such_field", "1"), ConfigError);
  EXPECT_THROW(set_field(c, "population_size", "0"), ConfigError);
  c.executor = "external";
  c.command = "agent {workspace}";
  try {
    validate(c);
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("data_path"), std::string::npos);
  }
  RunConfig f;
  for (auto op : {Operator::Initial, Operator::Continue, Operator::Ablation, Operator::Merge, Operator::EDA})
    f.floors[op] = 0.24;
  EXPECT_THROW(validate(f), ConfigError);
}

TEST(RunConfigTest, JsonRoundTrip) {
  RunConfig c;
  c.seed = 99;
  c.ceilings.erase(Operator::Merge);
  c.ceilings[Operator::EDA] = 0.6;
  RunConfig back;
  apply_json(back, to_json(c));
  EXPECT_EQ(to_json(back), to_json(c));
  EXPECT_EQ(back.ceilings.count(Operator::Merge), 0u);
  apply_env(back, no_env);
  EXPECT_EQ(to_json(back), to_json(c));
}

TEST(Cli, DumpConfigShowsDefaults) {
  TempDir d;
  auto r = cli(d, "run --dump-config");
  ASSERT_EQ(r.code, 0) << r.err;
  auto j = nlohmann::json::parse(r.out);
  EXPECT_EQ(j.at("population_size"), 5);
  EXPECT_EQ(j.at("prob_eda"), 0.5);
  EXPECT_EQ(j.at("prob_jumpstart"), 0.0);
  EXPECT_EQ(j.at("ceiling_merge"), 0.3);
  EXPECT_EQ(j.at("hedge_kappa"), 4.0);
  EXPECT_EQ(j.at("max_iterations"), 30);
}

TEST(Cli, EnvAndFlagPrecedence) {
  TempDir d;
  std::ofstream(d / "c.json") << R"({"max_iterations": 9, "patience": 2})";
  auto r = cli(d, "run --dump-config --config c.json --max-iterations 4", "GA_MAX_ITERATIONS=6 GA_PATIENCE=3");
  ASSERT_EQ(r.code, 0) << r.err;
  auto j = nlohmann::json::parse(r.out);
  EXPECT_EQ(j.at("max_iterations"), 4);
  EXPECT_EQ(j.at("patience"), 3);
}

TEST(Cli, RepeatedRunsGiveIdenticalLogs) {
  TempDir d;
  ASSERT_EQ(cli(d, "run --executor simulated --seed 7 --max-iterations 3 --output-root a").code, 0);
  ASSERT_EQ(cli(d, "run --executor simulated --seed 7 --max-iterations 3 --output-root b").code, 0);
  EXPECT_EQ(detail::read_text_file(d / "a/events.jsonl"), detail::read_text_file(d / "b/events.jsonl"));
  EXPECT_TRUE(fs::exists(d / "a/config.json"));
  EXPECT_TRUE(fs::exists(d / "a/report.json"));
}

TEST(Cli, InvalidConfigExitsOneWithFieldName) {
  TempDir d;
  auto r = cli(d, "run --executor external --command 'true'");
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("data_path"), std::string::npos);
  r = cli(d, "run --set hedge_kappa=abc");
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("hedge_kappa"), std::string::npos);
}

TEST(Cli, RunRefusesExistingOutputRoot) {
  TempDir d;
  ASSERT_EQ(cli(d, "run --seed 1 --max-iterations 1 --output-root r").code, 0);
  EXPECT_EQ(cli(d, "run --seed 1 --max-iterations 1 --output-root r").code, 1);
}

TEST(Cli, InterruptedRunResumesToSameLog) {
  TempDir d;
  ASSERT_EQ(cli(d, "run --seed 5 --max-iterations 5 --output-root full").code, 0);
  auto part = cli(d, "run --seed 5 --max-iterations 5 --output-root part --stop-after 2");
  ASSERT_EQ(part.code, 0) << part.err;
  EXPECT_NE(part.out.find("interrupted"), std::string::npos);
  auto r = cli(d, "resume part");
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(detail::read_text_file(d / "full/events.jsonl"), detail::read_text_file(d / "part/events.jsonl"));
  r = cli(d, "resume part");
  EXPECT_EQ(r.code, 0);
  EXPECT_NE(r.out.find("already complete"), std::string::npos);
}

TEST(Cli, ResumeWithoutRunFails) {
  TempDir d;
  auto r = cli(d, "resume nowhere");
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("nothing to resume"), std::string::npos);
}

TEST(Cli, CorruptCheckpointExitsThree) {
  TempDir d;
  ASSERT_EQ(cli(d, "run --seed 5 --max-iterations 4 --output-root r --stop-after 2").code, 0);
  auto cp = d / "r/checkpoint/checkpoint.json";
  auto j = nlohmann::json::parse(detail::read_text_file(cp));
  j["pool"] = 17;
  std::ofstream(cp) << j.dump();
  auto r = cli(d, "resume r");
  EXPECT_EQ(r.code, 3);
  EXPECT_NE(r.err.find("pool"), std::string::npos);
}

TEST(Cli, ReportFormats) {
  TempDir d;
  ASSERT_EQ(cli(d, "run --seed 2 --max-iterations 4 --output-root r").code, 0);
  auto r = cli(d, "report r --format csv --out out");
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_TRUE(fs::exists(d / "out/report_operators.csv"));
  EXPECT_TRUE(fs::exists(d / "out/report_progression.csv"));
  EXPECT_TRUE(fs::exists(d / "out/report_edges.csv"));
  auto stats = parse_operator_stats_csv(detail::read_text_file(d / "out/report_operators.csv"));
  auto from_json = operator_stats_from_report_json(nlohmann::json::parse(detail::read_text_file(d / "r/report.json")));
  EXPECT_EQ(stats, from_json);
  EXPECT_EQ(cli(d, "report missing").code, 2);
}

TEST(Cli, SimulateIsDeterministic) {
  TempDir d;
  auto a = cli(d, "simulate --tournaments 200 --sim-seed 3 --output-root s1");
  auto b = cli(d, "simulate --tournaments 200 --sim-seed 3 --output-root s2");
  ASSERT_EQ(a.code, 0) << a.err;
  EXPECT_EQ(a.out, b.out);
  EXPECT_NE(a.out.find("Initial"), std::string::npos);
}

TEST(Cli, SimulateNoiselessTableIsPredictable) {
  TempDir d;
  std::ofstream(d / "p.json") << R"({"higher_is_better": true, "base_mean": 0.5, "base_sd": 0.0,
    "experiment_step": 0.001,
    "operators": {"Initial": {"gain_mean": 0.0, "gain_sd": 0.0, "failure_prob": 0.0},
                  "Continue": {"gain_mean": 0.01, "gain_sd": 0.0, "failure_prob": 0.0},
                  "Ablation": {"gain_mean": -0.01, "gain_sd": 0.0, "failure_prob": 0.0},
                  "Merge": {"gain_mean": 0.01, "gain_sd": 0.0, "failure_prob": 0.0},
                  "EDA": {"gain_mean": 0.01, "gain_sd": 0.0, "failure_prob": 0.0}}})";
  auto r = cli(d, "simulate --params p.json --tournaments 50 --output-root s");
  ASSERT_EQ(r.code, 0) << r.err;
  auto rep = nlohmann::json::parse(detail::read_text_file(d / "s/simulation.json"));
  for (const auto& op : rep.at("operators")) {
    const std::string name = op.at("operator");
    if (name == "Continue" || name == "Merge" || name == "EDA") {
      EXPECT_EQ(op.at("win_rate"), 1.0) << name;
    } else if (name == "Ablation") {
      EXPECT_EQ(op.at("win_rate"), 0.0);
    }
  }
  EXPECT_EQ(cli(d, "simulate --params missing.json --output-root s3").code, 1);
}

TEST(Cli, CompressTranscript) {
  TempDir d;
  {
    std::ofstream t(d / "t.jsonl");
    t << R"({"id":0,"role":"system","text":"You are an agent."})" << "\n";
    for (int i = 1; i <= 30; ++i) {
      std::string body;
      for (int k = 0; k < 120; ++k) body += "tok" + std::to_string(k) + " ";
      t << nlohmann::json{{"id", i}, {"role", i % 2 ? "ai" : "human"}, {"text", body}}.dump() << "\n";
    }
  }
  auto r = cli(d, "compress t.jsonl --target 1000 --trigger 5000 --out ctx.jsonl --statuses st.json");
  ASSERT_EQ(r.code, 0) << r.err;
  auto st = nlohmann::json::parse(detail::read_text_file(d / "st.json"));
  EXPECT_FALSE(st.at("over_budget").get<bool>());
  EXPECT_LE(st.at("total_tokens").get<int>(), 1000);
  EXPECT_EQ(st.at("groups").size(), 31u);
  EXPECT_EQ(st.at("groups")[0].at("status"), "original");
  for (int g = 26; g < 31; ++g) EXPECT_EQ(st.at("groups")[g].at("status"), "original");
  EXPECT_EQ(cli(d, "compress missing.jsonl").code, 2);
}
