#pragma once

// Outer evolutionary loop over agent seeds.
//
// Every iteration each slot gets one child: Initial in the first iteration,
// otherwise an operator sampled from the allocator plus parents drawn from
// the previous elite snapshot. Children are dispatched with bounded
// parallelism; at the barrier each child competes only with its own slot's
// elite, the allocator is updated from the valid children's improvements,
// and the stopping policy decides whether to go on. State is checkpointed
// after every iteration so a run can resume bit-for-bit.

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <optional>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "agentga/checkpoint.hpp"
#include "agentga/direction.hpp"
#include "agentga/event_log.hpp"
#include "agentga/executor.hpp"
#include "agentga/hedge.hpp"
#include "agentga/pool.hpp"
#include "agentga/rng.hpp"
#include "agentga/seed.hpp"
#include "agentga/workspace.hpp"

namespace agentga {

struct PlanningParams {
  int population = 5;
  int continue_min_parents = 1;
  int continue_max_parents = 1;
  int num_training_runs = 5;
};

// ---------------------------------------------------------------------------
// Parent selection and planning

/// parents[0] is the slot's own elite. Merge adds one distinct elite from
/// another slot; Continue adds between min-1 and max-1 distinct random
/// elites. Empty sentinel slots are never chosen as extra parents.
template <std::uniform_random_bit_generator G>
std::vector<EliteEntry> select_parents(Operator op, const ElitePool& pool, int slot, G& rng,
                                       int continue_min = 1, int continue_max = 1) {
  if (op == Operator::Initial) return {};
  const int n = static_cast<int>(pool.entries.size());
  if (slot < 0 || slot >= n) throw ConfigError("select_parents: slot out of range");
  if (op == Operator::Merge && n < 2) throw ConfigError("Merge needs a population of at least 2");

  std::vector<EliteEntry> parents{pool.entries[slot]};
  std::vector<int> others;
  for (int j = 0; j < n; ++j) {
    if (j != slot && !pool.entries[j].empty()) others.push_back(j);
  }
  int extra = 0;
  if (op == Operator::Merge) {
    extra = 1;
  } else if (op == Operator::Continue) {
    int k = std::uniform_int_distribution<int>(continue_min, continue_max)(rng);
    extra = k - 1;
  }
  extra = std::min<int>(extra, static_cast<int>(others.size()));
  // Partial Fisher-Yates over the candidate slots.
  for (int i = 0; i < extra; ++i) {
    int pick = std::uniform_int_distribution<int>(i, static_cast<int>(others.size()) - 1)(rng);
    std::swap(others[i], others[pick]);
    parents.push_back(pool.entries[others[i]]);
  }
  return parents;
}

inline std::vector<AgentSeed> plan_iteration(const ElitePool& pool, const HedgeState& hedge, int iteration,
                                             std::uint64_t master_seed, const PlanningParams& params) {
  if (iteration < 1) throw ConfigError("plan_iteration: iteration must be >= 1");
  std::vector<AgentSeed> seeds;
  seeds.reserve(params.population);
  for (int slot = 0; slot < params.population; ++slot) {
    AgentSeed seed;
    seed.iteration = iteration;
    seed.slot = slot;
    seed.context_params["num_training_runs"] = std::to_string(params.num_training_runs);
    if (iteration == 1) {
      seed.op = Operator::Initial;
    } else if (pool.entries.at(slot).empty()) {
      // Nothing to inherit from: the slot restarts from scratch.
      seed.op = Operator::Initial;
      seed.context_params["reason"] = "empty_elite";
    } else {
      auto rng = derive_stream(master_seed, iteration, slot, StreamPurpose::Planning);
      seed.op = sample_task(hedge, rng);
      auto parents = select_parents(seed.op, pool, slot, rng, params.continue_min_parents, params.continue_max_parents);
      if (seed.op == Operator::Merge && parents.size() < 2) {
        seed.op = Operator::Continue;
        seed.context_params["downgraded_from"] = "Merge";
      }
      for (const auto& p : parents) seed.parents.push_back(*p.archive);
    }
    seeds.push_back(std::move(seed));
  }
  return seeds;
}

// ---------------------------------------------------------------------------
// Tournament and stopping

struct TournamentResult {
  EliteEntry elite;
  TournamentRecord record;
};

/// 1:1 tournament between a child and its slot's incumbent. In the first
/// iteration the child is installed unconditionally (a failed child leaves
/// the empty sentinel).
inline TournamentResult resolve_tournament(const AgentSeed& seed, const std::optional<RunOutcome>& child,
                                           const std::optional<ArchiveRef>& child_archive,
                                           const EliteEntry& incumbent, MetricDirection direction,
                                           bool first_iteration) {
  TournamentRecord rec;
  rec.iteration = seed.iteration;
  rec.slot = seed.slot;
  rec.op = seed.op;
  for (const auto& p : seed.parents) rec.parent_ids.push_back(p.id);
  rec.child_valid = child.has_value() && child->valid();
  if (rec.child_valid) rec.child_score = *child->score;
  if (child_archive) rec.child_id = child_archive->id;

  EliteEntry challenger;
  if (rec.child_valid) {
    challenger.slot = seed.slot;
    challenger.score = *child->score;
    challenger.archive = child_archive;
    challenger.origin.iteration = seed.iteration;
    challenger.origin.op = seed.op;
    for (const auto& p : seed.parents) challenger.origin.parent_slots.push_back(p.slot);
  }

  if (first_iteration) {
    rec.child_won = rec.child_valid;
    return {rec.child_valid ? challenger : EliteEntry::sentinel(seed.slot), rec};
  }

  rec.parent_score = incumbent.score;
  if (rec.child_valid && rec.parent_score) rec.delta = improvement(*rec.child_score, *rec.parent_score, direction);
  rec.child_won = rec.child_valid && (incumbent.empty() || better(*rec.child_score, *incumbent.score, direction));
  return {rec.child_won ? challenger : incumbent, rec};
}

/// Strict improvement beyond `threshold` resets the stagnation counter and
/// records the new best; anything else counts as a stagnant iteration.
inline std::pair<StoppingState, StopDecision> update_stopping(StoppingState state, std::optional<double> iteration_best,
                                                              int iteration, MetricDirection direction) {
  if (iteration_best && !state.best_so_far) {
    state.best_so_far = iteration_best;
    state.stagnation_count = 0;
  } else if (iteration_best && improvement(*iteration_best, *state.best_so_far, direction) > state.threshold) {
    state.best_so_far = iteration_best;
    state.stagnation_count = 0;
  } else {
    ++state.stagnation_count;
  }
  if (state.stagnation_count >= state.patience) return {state, StopDecision::Converged};
  if (iteration >= state.max_iterations) return {state, StopDecision::Budget};
  return {state, StopDecision::Continue};
}

// ---------------------------------------------------------------------------
// Engine

struct EngineConfig {
  PlanningParams planning;
  HedgeConfig hedge;
  StoppingState stopping;  // threshold, patience, max_iterations
  MetricDirection direction;
  int workers = 3;
  std::uint64_t master_seed = 0;
  fs::path output_root;
  fs::path data_path;
  DataMode data_mode = DataMode::Link;
  CurationRules curation;
  std::optional<int> stop_after_iteration;  // simulate an interruption
};

inline void validate(const EngineConfig& cfg) {
  if (cfg.planning.population < 1) throw ConfigError("population must be >= 1");
  if (cfg.planning.continue_min_parents < 1 || cfg.planning.continue_max_parents < cfg.planning.continue_min_parents)
    throw ConfigError("continue parents must satisfy 1 <= min <= max");
  if (cfg.planning.num_training_runs < 1) throw ConfigError("num_training_runs must be >= 1");
  if (cfg.workers < 1) throw ConfigError("workers must be >= 1");
  if (cfg.stopping.patience < 1) throw ConfigError("patience must be >= 1");
  if (cfg.stopping.max_iterations < 1) throw ConfigError("max_iterations must be >= 1");
  if (!std::isfinite(cfg.stopping.threshold) || cfg.stopping.threshold < 0.0)
    throw ConfigError("convergence threshold must be finite and >= 0");
  if (cfg.output_root.empty()) throw ConfigError("output_root must be set");
  validate(cfg.hedge);
  if (cfg.planning.population < 2 && cfg.hedge.is_active(Operator::Merge))
    throw ConfigError("Merge is active but the population has a single slot");
}

struct RunResult {
  std::optional<EliteEntry> best;
  ElitePool pool;
  HedgeState hedge;
  int iterations_completed = 0;
  bool finished = false;
  bool already_complete = false;
  std::string stop_reason;
  std::vector<TournamentRecord> records;        // produced by this invocation
  std::vector<ProbabilityMap> hedge_snapshots;  // post-update probabilities, one per iteration
};

class NothingToResume : public std::runtime_error {
 public:
  NothingToResume() : std::runtime_error("nothing to resume: no checkpoint found") {}
};

struct RunPaths {
  fs::path root;
  fs::path events() const { return root / "events.jsonl"; }
  fs::path checkpoints() const { return root / "checkpoint"; }
  fs::path workspaces() const { return root / "workspaces"; }
  fs::path archives() const { return root / "archives"; }
  fs::path workspace(int iteration, int slot) const {
    char buf[48];
    std::snprintf(buf, sizeof buf, "iter_%04d/slot_%02d", iteration, slot);
    return workspaces() / buf;
  }
};

class EvolutionEngine {
 public:
  EvolutionEngine(EngineConfig config, Executor& executor)
      : cfg_(std::move(config)), executor_(executor), paths_{cfg_.output_root}, log_(paths_.events()) {
    validate(cfg_);
  }

  /// Starts a fresh run. Refuses to clobber an output root that already
  /// holds a checkpoint.
  RunResult run() {
    if (load_checkpoint(paths_.checkpoints())) throw ConfigError("output root already holds a run; use resume");
    fs::create_directories(paths_.root);
    log_.truncate(0);
    log_.append({{"type", "run_start"},
                 {"population", cfg_.planning.population},
                 {"higher_is_better", cfg_.direction.higher_is_better},
                 {"master_seed", cfg_.master_seed},
                 {"max_iterations", cfg_.stopping.max_iterations},
                 {"hedge", to_json(cfg_.hedge)}});
    Checkpoint cp;
    cp.iteration = 0;
    cp.pool.direction = cfg_.direction;
    cp.hedge = new_state(cfg_.hedge);
    cp.stopping = cfg_.stopping;
    cp.stopping.best_so_far.reset();
    cp.stopping.stagnation_count = 0;
    cp.master_seed = cfg_.master_seed;
    cp.event_log_offset = log_.offset();
    save_checkpoint(cp, paths_.checkpoints());
    return loop(std::move(cp));
  }

  RunResult resume() {
    auto cp = load_checkpoint(paths_.checkpoints());
    if (!cp) throw NothingToResume();
    if (cp->finished) {
      RunResult r;
      r.already_complete = true;
      r.finished = true;
      r.stop_reason = cp->stop_reason;
      r.iterations_completed = cp->iteration;
      r.pool = cp->pool;
      r.hedge = cp->hedge;
      r.best = cp->pool.best();
      return r;
    }
    log_.truncate(cp->event_log_offset);
    discard_uncommitted(cp->iteration);
    return loop(std::move(*cp));
  }

  const RunPaths& paths() const { return paths_; }

 private:
  struct SlotResult {
    std::optional<RunOutcome> outcome;
    std::optional<ArchiveRef> archive;
  };

  void discard_uncommitted(int committed_iteration) {
    std::error_code ec;
    if (fs::is_directory(paths_.workspaces())) {
      for (const auto& entry : fs::directory_iterator(paths_.workspaces())) {
        const auto name = entry.path().filename().string();
        if (name.starts_with("iter_") && std::stoi(name.substr(5)) > committed_iteration) fs::remove_all(entry.path(), ec);
      }
    }
    if (fs::is_directory(paths_.archives())) {
      for (const auto& entry : fs::directory_iterator(paths_.archives())) {
        const auto name = entry.path().filename().string();
        if (name.starts_with(".staging-") || (name.starts_with("it") && std::stoi(name.substr(2, 4)) > committed_iteration))
          fs::remove_all(entry.path(), ec);
      }
    }
  }

  SlotResult run_slot(const AgentSeed& seed) {
    SlotResult res;
    const auto ws = paths_.workspace(seed.iteration, seed.slot);
    try {
      materialize_seed(seed, ws, cfg_.data_path, cfg_.curation, cfg_.data_mode);
    } catch (const std::exception& e) {
      res.outcome = RunOutcome::failure(std::string("materialization failed: ") + e.what());
      return res;
    }
    try {
      res.outcome = executor_.execute(seed, ws);
    } catch (const std::exception& e) {
      res.outcome = RunOutcome::failure(std::string("executor failed: ") + e.what());
    } catch (...) {
      res.outcome = RunOutcome::failure("executor failed");
    }
    if (res.outcome->valid()) {
      try {
        res.archive = archive_run(ws, *res.outcome, paths_.archives());
      } catch (const std::exception& e) {
        res.outcome->verified = false;
        res.outcome->diagnostics["error"] = std::string("archiving failed: ") + e.what();
      }
    }
    return res;
  }

  std::vector<SlotResult> dispatch(const std::vector<AgentSeed>& seeds) {
    std::vector<SlotResult> results(seeds.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
      for (std::size_t i = next++; i < seeds.size(); i = next++) results[i] = run_slot(seeds[i]);
    };
    const auto count = std::min<std::size_t>(static_cast<std::size_t>(cfg_.workers), seeds.size());
    std::vector<std::thread> threads;
    for (std::size_t t = 1; t < count; ++t) threads.emplace_back(worker);
    worker();
    for (auto& t : threads) t.join();
    return results;
  }

  RunResult loop(Checkpoint cp) {
    RunResult result;
    const MetricDirection dir = cp.pool.direction;
    for (int t = cp.iteration + 1;; ++t) {
      const ElitePool previous = cp.pool;
      const bool first = (t == 1);
      if (first) {
        cp.pool.entries.clear();
        for (int j = 0; j < cfg_.planning.population; ++j) cp.pool.entries.push_back(EliteEntry::sentinel(j));
      }
      const auto seeds = plan_iteration(first ? cp.pool : previous, cp.hedge, t, cp.master_seed, cfg_.planning);
      const auto slots = dispatch(seeds);

      std::vector<ObservedGain> gains;
      for (std::size_t j = 0; j < seeds.size(); ++j) {
        const auto& incumbent = first ? EliteEntry::sentinel(static_cast<int>(j)) : previous.entries[j];
        auto tr = resolve_tournament(seeds[j], slots[j].outcome, slots[j].archive, incumbent, dir, first);
        cp.pool.entries[j] = tr.elite;
        if (!first && tr.record.delta) gains.push_back({tr.record.op, *tr.record.delta});
        log_.append(to_json(tr.record));
        result.records.push_back(std::move(tr.record));
      }

      bool updated = false;
      if (!first) {
        auto upd = apply_update_traced(cp.hedge, gains);
        updated = !upd.skipped;
        cp.hedge = std::move(upd.state);
      }
      const auto probs = sampling_probabilities(cp.hedge);
      result.hedge_snapshots.push_back(probs);
      nlohmann::json mean_gains = nlohmann::json::object();
      for (const auto& [op, m] : aggregate_gains(gains)) mean_gains[std::string(to_string(op))] = m;
      log_.append({{"type", "hedge"},
                   {"iteration", t},
                   {"updated", updated},
                   {"mean_gains", mean_gains},
                   {"probabilities", probs_to_json(probs)},
                   {"log_weights", probs_to_json(cp.hedge.log_weights)}});

      const auto best = cp.pool.best();
      std::optional<double> iteration_best;
      if (best) iteration_best = best->score;
      auto [stopping, decision] = update_stopping(cp.stopping, iteration_best, t, dir);
      cp.stopping = stopping;
      log_.append({{"type", "stopping"},
                   {"iteration", t},
                   {"iteration_best", detail::opt_json(iteration_best)},
                   {"best_so_far", detail::opt_json(cp.stopping.best_so_far)},
                   {"stagnation_count", cp.stopping.stagnation_count},
                   {"decision", std::string(to_string(decision))}});

      cp.iteration = t;
      if (decision != StopDecision::Continue) {
        cp.finished = true;
        cp.stop_reason = std::string(to_string(decision));
        log_.append({{"type", "run_end"},
                     {"iteration", t},
                     {"reason", cp.stop_reason},
                     {"best_score", detail::opt_json(iteration_best)},
                     {"best_slot", best ? nlohmann::json(best->slot) : nlohmann::json(nullptr)}});
      }
      cp.event_log_offset = log_.offset();
      save_checkpoint(cp, paths_.checkpoints());

      if (cp.finished || (cfg_.stop_after_iteration && t >= *cfg_.stop_after_iteration)) break;
    }
    result.best = cp.pool.best();
    result.pool = cp.pool;
    result.hedge = cp.hedge;
    result.iterations_completed = cp.iteration;
    result.finished = cp.finished;
    result.stop_reason = cp.stop_reason;
    return result;
  }

  EngineConfig cfg_;
  Executor& executor_;
  RunPaths paths_;
  EventLog log_;
};

}  // namespace agentga
