#pragma once

// Stochastic stand-in for an autonomous agent run.
//
// Initial runs draw a fresh score around `base_mean`. Parent-conditioned runs
// start from the elite parent's score and apply a Normal gain in the
// favourable direction. Draws are oriented so that negating the means and
// flipping the metric direction mirrors every score exactly.

#include <cstdint>
#include <map>
#include <random>
#include <string>

#include "agentga/direction.hpp"
#include "agentga/errors.hpp"
#include "agentga/executor.hpp"
#include "agentga/operators.hpp"
#include "agentga/rng.hpp"
#include "agentga/workspace.hpp"
#include "json.hpp"

namespace agentga {

struct OperatorModel {
  double gain_mean = 0.0;
  double gain_sd = 0.0;
  double failure_prob = 0.0;
  friend bool operator==(const OperatorModel&, const OperatorModel&) = default;
};

struct SimModelParams {
  MetricDirection direction;
  double base_mean = 0.70;
  double base_sd = 0.03;
  std::map<Operator, OperatorModel> operators;
  double experiment_step = 1e-3;  // spacing between synthetic experiment scores

  const OperatorModel& model(Operator op) const {
    static const OperatorModel kNone{};
    auto it = operators.find(op);
    return it == operators.end() ? kNone : it->second;
  }

  /// Calibration where archive-conditioned operators usually improve on
  /// their parent and fresh Initial proposals rarely beat an evolved elite.
  static SimModelParams calibrated() {
    SimModelParams p;
    p.operators[Operator::Initial] = {0.0, 0.0, 0.05};
    p.operators[Operator::Continue] = {0.004, 0.010, 0.05};
    p.operators[Operator::Merge] = {0.006, 0.010, 0.05};
    p.operators[Operator::EDA] = {0.001, 0.012, 0.05};
    p.operators[Operator::Ablation] = {0.0, 0.010, 0.05};
    p.operators[Operator::Jumpstart] = {0.004, 0.010, 0.05};
    return p;
  }
};

inline void validate(const SimModelParams& p) {
  if (!std::isfinite(p.base_mean) || !(p.base_sd >= 0.0) || !std::isfinite(p.base_sd))
    throw ConfigError("simulator: base_mean must be finite and base_sd >= 0");
  if (!(p.experiment_step >= 0.0)) throw ConfigError("simulator: experiment_step must be >= 0");
  for (const auto& [op, m] : p.operators) {
    const std::string name(to_string(op));
    if (!std::isfinite(m.gain_mean)) throw ConfigError("simulator: gain_mean of " + name + " must be finite");
    if (!(m.gain_sd >= 0.0) || !std::isfinite(m.gain_sd)) throw ConfigError("simulator: gain_sd of " + name + " must be >= 0");
    if (!(m.failure_prob >= 0.0 && m.failure_prob <= 1.0))
      throw ConfigError("simulator: failure_prob of " + name + " must be in [0, 1]");
  }
}

inline nlohmann::json to_json(const SimModelParams& p) {
  nlohmann::json ops = nlohmann::json::object();
  for (const auto& [op, m] : p.operators)
    ops[std::string(to_string(op))] = {{"gain_mean", m.gain_mean}, {"gain_sd", m.gain_sd}, {"failure_prob", m.failure_prob}};
  return {{"higher_is_better", p.direction.higher_is_better},
          {"base_mean", p.base_mean},
          {"base_sd", p.base_sd},
          {"experiment_step", p.experiment_step},
          {"operators", ops}};
}

/// Missing keys fall back to the calibrated defaults.
inline SimModelParams sim_params_from_json(const nlohmann::json& j) {
  auto p = SimModelParams::calibrated();
  try {
    p.direction.higher_is_better = j.value("higher_is_better", p.direction.higher_is_better);
    p.base_mean = j.value("base_mean", p.base_mean);
    p.base_sd = j.value("base_sd", p.base_sd);
    p.experiment_step = j.value("experiment_step", p.experiment_step);
    if (j.contains("operators")) {
      for (auto it = j.at("operators").begin(); it != j.at("operators").end(); ++it) {
        auto& m = p.operators[operator_from_string(it.key())];
        m.gain_mean = it.value().value("gain_mean", m.gain_mean);
        m.gain_sd = it.value().value("gain_sd", m.gain_sd);
        m.failure_prob = it.value().value("failure_prob", m.failure_prob);
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("simulator params: ") + e.what());
  }
  validate(p);
  return p;
}

inline int num_training_runs(const AgentSeed& seed, int fallback = 5) {
  auto it = seed.context_params.find("num_training_runs");
  if (it == seed.context_params.end()) return fallback;
  return std::stoi(it->second);
}

template <std::uniform_random_bit_generator G>
RunOutcome simulate_run(const AgentSeed& seed, const SimModelParams& params, G& rng) {
  const auto& model = params.model(seed.op);
  // Both draws are always consumed so the stream layout is operator-independent.
  const double u = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
  const double z = std::normal_distribution<double>(0.0, 1.0)(rng);

  double score;
  if (seed.op == Operator::Initial || seed.parents.empty()) {
    score = params.direction.higher_is_better ? params.base_mean + params.base_sd * z
                                              : params.base_mean - params.base_sd * z;
  } else {
    const double gain = model.gain_mean + model.gain_sd * z;
    const double parent = seed.parents.front().score;
    score = params.direction.higher_is_better ? parent + gain : parent - gain;
  }

  RunOutcome out;
  out.diagnostics["simulated"] = "true";
  if (u < model.failure_prob) {
    out.diagnostics["error"] = "simulated run produced no scored experiment";
    return out;
  }
  const int runs = num_training_runs(seed);
  for (int k = 0; k < runs; ++k) {
    const double gap = params.experiment_step * static_cast<double>(runs - 1 - k);
    const double s = params.direction.higher_is_better ? score - gap : score + gap;
    out.experiments.push_back({"run_" + std::to_string(k), k == runs - 1 ? score : s, "simulated", std::nullopt});
  }
  if (!out.experiments.empty()) {
    out.score = score;
    out.verified = std::isfinite(score);
  }
  return out;
}

/// Executor backed by `simulate_run`, one random stream per (iteration, slot).
class SimulatedExecutor final : public Executor {
 public:
  SimulatedExecutor(SimModelParams params, std::uint64_t master_seed, bool write_artifacts = true)
      : params_(std::move(params)), master_seed_(master_seed), write_artifacts_(write_artifacts) {
    validate(params_);
  }

  RunOutcome execute(const AgentSeed& seed, const fs::path& workspace) override {
    auto rng = derive_stream(master_seed_, static_cast<std::uint64_t>(seed.iteration),
                             static_cast<std::uint64_t>(seed.slot), StreamPurpose::Simulation);
    auto outcome = simulate_run(seed, params_, rng);
    if (write_artifacts_ && !workspace.empty() && outcome.valid()) {
      fs::create_directories(workspace / "logs");
      detail::write_text_file(workspace / "solution.txt",
                              std::string(to_string(seed.op)) + " solution, score " + nlohmann::json(*outcome.score).dump() + "\n");
      detail::write_text_file(workspace / "logs" / "agent.log", to_json(outcome).dump() + "\n");
    }
    return outcome;
  }

  const SimModelParams& params() const { return params_; }

 private:
  SimModelParams params_;
  std::uint64_t master_seed_;
  bool write_artifacts_;
};

}  // namespace agentga
