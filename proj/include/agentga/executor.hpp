#pragma once

#include <functional>
#include <utility>

#include "agentga/outcome.hpp"
#include "agentga/seed.hpp"

namespace agentga {

/// Runs one agent seed inside its materialized workspace. Implementations
/// report failures as unverified outcomes; the engine additionally treats
/// any escaping exception as an unverified child.
class Executor {
 public:
  virtual ~Executor() = default;
  virtual RunOutcome execute(const AgentSeed& seed, const fs::path& workspace) = 0;
};

/// Adapts a callable; handy for scripted runs and tests.
class FunctionExecutor final : public Executor {
 public:
  using Fn = std::function<RunOutcome(const AgentSeed&, const fs::path&)>;
  explicit FunctionExecutor(Fn fn) : fn_(std::move(fn)) {}
  RunOutcome execute(const AgentSeed& seed, const fs::path& workspace) override { return fn_(seed, workspace); }

 private:
  Fn fn_;
};

/// Verified single-experiment outcome with the given score.
inline RunOutcome scored_outcome(double score, std::string run_name = "run_0", std::string metric = "score") {
  RunOutcome o;
  o.score = score;
  o.experiments.push_back({std::move(run_name), score, std::move(metric), std::nullopt});
  o.verified = std::isfinite(score);
  return o;
}

}  // namespace agentga
