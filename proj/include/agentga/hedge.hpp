#pragma once

// Bounded, rank-based exponential-weights allocator over task operators.
//
// Each iteration the engine samples one operator per slot from the bounded
// softmax of the log-weights. After the tournaments, observed improvements
// are averaged per operator, converted to evenly spaced ranks in [-1, 1],
// scaled by a clipped importance factor min(1/p, kappa) and added to the
// log-weights with step eta. Probabilities are projected onto the configured
// floors and ceilings after every softmax.

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "agentga/errors.hpp"
#include "agentga/operators.hpp"
#include "json.hpp"

namespace agentga {

using ProbabilityMap = std::map<Operator, double>;

struct HedgeConfig {
  std::vector<Operator> active_tasks;
  ProbabilityMap base_probs;
  ProbabilityMap floors;
  ProbabilityMap ceilings;  // absent key = uncapped
  double eta = 0.15;
  double kappa = 4.0;
  int max_bound_iterations = 10;

  /// Builds a config from raw base probabilities; operators with base
  /// probability 0 are left out of the active set.
  static HedgeConfig from_base(const ProbabilityMap& base, ProbabilityMap floors,
                               ProbabilityMap ceilings, double eta, double kappa,
                               int max_bound_iterations = 10) {
    HedgeConfig cfg;
    for (const auto& [op, p] : base) {
      if (p > 0.0) {
        cfg.active_tasks.push_back(op);
        cfg.base_probs[op] = p;
      }
    }
    cfg.floors = std::move(floors);
    cfg.ceilings = std::move(ceilings);
    cfg.eta = eta;
    cfg.kappa = kappa;
    cfg.max_bound_iterations = max_bound_iterations;
    return cfg;
  }

  double floor_of(Operator op) const {
    auto it = floors.find(op);
    return it == floors.end() ? 0.0 : it->second;
  }
  std::optional<double> ceiling_of(Operator op) const {
    auto it = ceilings.find(op);
    if (it == ceilings.end()) return std::nullopt;
    return it->second;
  }
  bool is_active(Operator op) const {
    return std::find(active_tasks.begin(), active_tasks.end(), op) != active_tasks.end();
  }
};

inline void validate(const HedgeConfig& cfg) {
  if (cfg.active_tasks.empty()) throw ConfigError("hedge: no active tasks");
  if (!(cfg.eta > 0.0) || !std::isfinite(cfg.eta)) throw ConfigError("hedge: eta must be positive");
  if (!(cfg.kappa >= 1.0) || !std::isfinite(cfg.kappa)) throw ConfigError("hedge: kappa must be >= 1");
  if (cfg.max_bound_iterations < 1) throw ConfigError("hedge: max_bound_iterations must be >= 1");

  double base_sum = 0.0, floor_sum = 0.0, ceiling_sum = 0.0;
  bool all_capped = true;
  for (Operator op : cfg.active_tasks) {
    auto it = cfg.base_probs.find(op);
    if (it == cfg.base_probs.end() || !(it->second > 0.0) || it->second > 1.0)
      throw ConfigError("hedge: base probability of " + std::string(to_string(op)) +
                        " must be in (0, 1]");
    base_sum += it->second;
    double f = cfg.floor_of(op);
    if (f < 0.0 || f > 1.0) throw ConfigError("hedge: floor of " + std::string(to_string(op)) + " outside [0, 1]");
    floor_sum += f;
    if (auto c = cfg.ceiling_of(op)) {
      if (!(*c > 0.0) || *c > 1.0)
        throw ConfigError("hedge: ceiling of " + std::string(to_string(op)) + " outside (0, 1]");
      if (f > *c)
        throw ConfigError("hedge: floor exceeds ceiling for " + std::string(to_string(op)));
      ceiling_sum += *c;
    } else {
      all_capped = false;
    }
  }
  if (std::abs(base_sum - 1.0) > 1e-9)
    throw ConfigError("hedge: base probabilities of active tasks sum to " + std::to_string(base_sum));
  if (floor_sum > 1.0 + 1e-12)
    throw ConfigError("hedge: floors sum to " + std::to_string(floor_sum) + " > 1");
  if (all_capped && ceiling_sum < 1.0 - 1e-12)
    throw ConfigError("hedge: ceilings sum below 1 with every task capped");
}

struct HedgeState {
  ProbabilityMap log_weights;
  HedgeConfig config;

  friend bool operator==(const HedgeState& a, const HedgeState& b) {
    return a.log_weights == b.log_weights;
  }
};

struct ObservedGain {
  Operator op;
  double delta;
};

inline HedgeState new_state(const HedgeConfig& config) {
  validate(config);
  HedgeState state{{}, config};
  for (Operator op : config.active_tasks) state.log_weights[op] = std::log(config.base_probs.at(op));
  return state;
}

// ---------------------------------------------------------------------------
// Bounds projection

struct BoundsResult {
  ProbabilityMap probs;
  int rounds = 0;       // rounds that changed at least one probability
  bool stable = false;  // a no-change round was observed within the budget
};

/// Two-pass ceiling/floor projection, repeated until a round leaves every
/// probability unchanged (or `max_iterations` rounds elapse), then
/// renormalized.
///
/// Ceiling pass: excess above each ceiling is handed to tasks below their
/// ceiling in proportion to their current mass (equal split when that mass
/// is zero). Floor pass: the total deficit is taken from above-floor tasks in
/// proportion to their surplus over the floor.
inline BoundsResult enforce_bounds_detailed(ProbabilityMap probs, const ProbabilityMap& floors,
                                            const ProbabilityMap& ceilings, int max_iterations) {
  auto floor_of = [&](Operator op) {
    auto it = floors.find(op);
    return it == floors.end() ? 0.0 : it->second;
  };
  double floor_sum = 0.0;
  for (const auto& [op, p] : probs) floor_sum += floor_of(op);
  if (floor_sum > 1.0 + 1e-12) throw ConfigError("bounds: floors sum above 1");

  constexpr double kChangeTol = 1e-13;
  BoundsResult result;
  for (int round = 0; round < max_iterations; ++round) {
    const ProbabilityMap before = probs;

    double excess = 0.0;
    for (auto& [op, p] : probs) {
      auto c = ceilings.find(op);
      if (c != ceilings.end() && p > c->second) {
        excess += p - c->second;
        p = c->second;
      }
    }
    if (excess > 0.0) {
      std::vector<Operator> recipients;
      double mass = 0.0;
      for (const auto& [op, p] : probs) {
        auto c = ceilings.find(op);
        if (c == ceilings.end() || p < c->second) {
          recipients.push_back(op);
          mass += p;
        }
      }
      for (Operator op : recipients) {
        double share = mass > 0.0 ? probs[op] / mass : 1.0 / static_cast<double>(recipients.size());
        probs[op] += excess * share;
      }
    }

    double deficit = 0.0;
    for (auto& [op, p] : probs) {
      double f = floor_of(op);
      if (p < f) {
        deficit += f - p;
        p = f;
      }
    }
    if (deficit > 0.0) {
      double surplus = 0.0;
      for (const auto& [op, p] : probs) surplus += std::max(0.0, p - floor_of(op));
      if (surplus > 0.0) {
        for (auto& [op, p] : probs) {
          double s = p - floor_of(op);
          if (s > 0.0) p -= deficit * s / surplus;
        }
      }
    }

    bool changed = false;
    for (const auto& [op, p] : probs) {
      if (std::abs(p - before.at(op)) > kChangeTol) changed = true;
    }
    if (!changed) {
      result.stable = true;
      break;
    }
    ++result.rounds;
  }

  double total = 0.0;
  for (const auto& [op, p] : probs) total += p;
  if (total > 0.0) {
    for (auto& [op, p] : probs) p /= total;
  }
  result.probs = std::move(probs);
  return result;
}

inline ProbabilityMap enforce_bounds(ProbabilityMap probs, const ProbabilityMap& floors,
                                     const ProbabilityMap& ceilings, int max_iterations) {
  return enforce_bounds_detailed(std::move(probs), floors, ceilings, max_iterations).probs;
}

// ---------------------------------------------------------------------------
// Sampling

inline ProbabilityMap softmax(const ProbabilityMap& log_weights) {
  double hi = -std::numeric_limits<double>::infinity();
  for (const auto& [op, w] : log_weights) hi = std::max(hi, w);
  ProbabilityMap out;
  double total = 0.0;
  for (const auto& [op, w] : log_weights) {
    out[op] = std::exp(w - hi);
    total += out[op];
  }
  for (auto& [op, p] : out) p /= total;
  return out;
}

inline ProbabilityMap sampling_probabilities(const HedgeState& state) {
  return enforce_bounds(softmax(state.log_weights), state.config.floors, state.config.ceilings,
                        state.config.max_bound_iterations);
}

template <std::uniform_random_bit_generator G>
Operator sample_from(const ProbabilityMap& probs, G& rng) {
  double u = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
  double acc = 0.0;
  std::optional<Operator> last;
  for (const auto& [op, p] : probs) {
    if (p <= 0.0) continue;
    acc += p;
    last = op;
    if (u < acc) return op;
  }
  if (!last) throw ConfigError("hedge: no operator with positive probability");
  return *last;
}

template <std::uniform_random_bit_generator G>
Operator sample_task(const HedgeState& state, G& rng) {
  return sample_from(sampling_probabilities(state), rng);
}

// ---------------------------------------------------------------------------
// Update

inline std::map<Operator, double> aggregate_gains(const std::vector<ObservedGain>& gains) {
  std::map<Operator, std::pair<double, int>> sums;
  for (const auto& g : gains) {
    auto& [sum, count] = sums[g.op];
    sum += g.delta;
    ++count;
  }
  std::map<Operator, double> means;
  for (const auto& [op, sc] : sums) means[op] = sc.first / sc.second;
  return means;
}

/// Evenly spaced rank rewards: worst mean -> -1, best -> +1. Ties are broken
/// by operator identifier order (the lexicographically smaller name ranks
/// lower). Returns nullopt when fewer than two operators were observed,
/// which means the update must be skipped.
inline std::optional<std::map<Operator, double>> rank_rewards(const std::map<Operator, double>& means) {
  if (means.size() < 2) return std::nullopt;
  std::vector<std::pair<double, Operator>> order;
  order.reserve(means.size());
  for (const auto& [op, m] : means) order.emplace_back(m, op);
  std::sort(order.begin(), order.end());
  const double denom = static_cast<double>(order.size() - 1);
  std::map<Operator, double> rewards;
  for (std::size_t rank = 0; rank < order.size(); ++rank)
    rewards[order[rank].second] = 2.0 * static_cast<double>(rank) / denom - 1.0;
  return rewards;
}

inline double clipped_importance(double probability, double kappa) {
  if (!(probability > 0.0)) return kappa;
  return std::min(1.0 / probability, kappa);
}

struct HedgeUpdate {
  HedgeState state;
  bool skipped = true;
  ProbabilityMap probs_used;               // bounded probabilities before the update
  std::map<Operator, double> rewards;      // rank rewards r_k
  std::map<Operator, double> scaled;       // r_k * min(1/p_k, kappa)
};

inline HedgeUpdate apply_update_traced(const HedgeState& state, const std::vector<ObservedGain>& gains) {
  for (const auto& g : gains) {
    if (!state.config.is_active(g.op))
      throw ConfigError("hedge: gain for inactive operator " + std::string(to_string(g.op)));
  }
  HedgeUpdate upd{state, true, sampling_probabilities(state), {}, {}};
  auto rewards = rank_rewards(aggregate_gains(gains));
  if (!rewards) return upd;

  upd.skipped = false;
  upd.rewards = *rewards;
  for (const auto& [op, r] : *rewards) {
    double scaled = r * clipped_importance(upd.probs_used.at(op), state.config.kappa);
    upd.scaled[op] = scaled;
    upd.state.log_weights[op] += state.config.eta * scaled;
  }
  double hi = -std::numeric_limits<double>::infinity();
  for (const auto& [op, w] : upd.state.log_weights) hi = std::max(hi, w);
  for (auto& [op, w] : upd.state.log_weights) w -= hi;
  return upd;
}

inline HedgeState apply_update(const HedgeState& state, const std::vector<ObservedGain>& gains) {
  return apply_update_traced(state, gains).state;
}

// ---------------------------------------------------------------------------
// Serialization

inline nlohmann::json probs_to_json(const ProbabilityMap& m) {
  nlohmann::json j = nlohmann::json::object();
  for (const auto& [op, v] : m) j[std::string(to_string(op))] = v;
  return j;
}

inline ProbabilityMap probs_from_json(const nlohmann::json& j) {
  ProbabilityMap m;
  for (auto it = j.begin(); it != j.end(); ++it) m[operator_from_string(it.key())] = it.value().get<double>();
  return m;
}

inline nlohmann::json to_json(const HedgeConfig& cfg) {
  nlohmann::json active = nlohmann::json::array();
  for (Operator op : cfg.active_tasks) active.push_back(std::string(to_string(op)));
  return {{"active_tasks", active},
          {"base_probs", probs_to_json(cfg.base_probs)},
          {"floors", probs_to_json(cfg.floors)},
          {"ceilings", probs_to_json(cfg.ceilings)},
          {"eta", cfg.eta},
          {"kappa", cfg.kappa},
          {"max_bound_iterations", cfg.max_bound_iterations}};
}

inline HedgeConfig hedge_config_from_json(const nlohmann::json& j) {
  HedgeConfig cfg;
  for (const auto& name : j.at("active_tasks")) cfg.active_tasks.push_back(operator_from_string(name.get<std::string>()));
  cfg.base_probs = probs_from_json(j.at("base_probs"));
  cfg.floors = probs_from_json(j.at("floors"));
  cfg.ceilings = probs_from_json(j.at("ceilings"));
  cfg.eta = j.at("eta").get<double>();
  cfg.kappa = j.at("kappa").get<double>();
  cfg.max_bound_iterations = j.at("max_bound_iterations").get<int>();
  return cfg;
}

inline nlohmann::json to_json(const HedgeState& s) {
  return {{"log_weights", probs_to_json(s.log_weights)}, {"config", to_json(s.config)}};
}

inline HedgeState hedge_state_from_json(const nlohmann::json& j) {
  HedgeState s;
  s.config = hedge_config_from_json(j.at("config"));
  validate(s.config);
  s.log_weights = probs_from_json(j.at("log_weights"));
  for (Operator op : s.config.active_tasks) {
    if (!s.log_weights.count(op)) throw ConfigError("hedge: missing log-weight for an active task");
  }
  if (s.log_weights.size() != s.config.active_tasks.size())
    throw ConfigError("hedge: log-weights not keyed by active tasks");
  for (const auto& [op, w] : s.log_weights) {
    if (!std::isfinite(w)) throw ConfigError("hedge: non-finite log-weight");
  }
  return s;
}

}  // namespace agentga
