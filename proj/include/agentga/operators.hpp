#pragma once

#include <array>
#include <optional>
#include <string>
#include <string_view>

#include "agentga/errors.hpp"

namespace agentga {

// Task operators. Enumerators are declared in lexicographic order of their
// names so that the natural enum order doubles as the identifier order used
// for tie-breaking.
enum class Operator { Ablation, Continue, EDA, Initial, Jumpstart, Merge };

inline constexpr std::array<Operator, 6> kAllOperators = {
    Operator::Ablation, Operator::Continue, Operator::EDA,
    Operator::Initial,  Operator::Jumpstart, Operator::Merge};

inline std::string_view to_string(Operator op) {
  switch (op) {
    case Operator::Ablation: return "Ablation";
    case Operator::Continue: return "Continue";
    case Operator::EDA: return "EDA";
    case Operator::Initial: return "Initial";
    case Operator::Jumpstart: return "Jumpstart";
    case Operator::Merge: return "Merge";
  }
  return "?";
}

inline std::optional<Operator> parse_operator(std::string_view name) {
  for (Operator op : kAllOperators) {
    if (to_string(op) == name) return op;
  }
  return std::nullopt;
}

inline Operator operator_from_string(std::string_view name) {
  if (auto op = parse_operator(name)) return *op;
  throw ConfigError("unknown operator '" + std::string(name) + "'");
}

/// True for every operator that builds on the slot's elite archive.
inline bool is_parent_conditioned(Operator op) { return op != Operator::Initial; }

}  // namespace agentga
