#pragma once

#include <cmath>
#include <string>

#include "agentga/errors.hpp"

namespace agentga {

struct MetricDirection {
  bool higher_is_better = true;

  static MetricDirection higher() { return {true}; }
  static MetricDirection lower() { return {false}; }
  MetricDirection flipped() const { return {!higher_is_better}; }
  friend bool operator==(MetricDirection, MetricDirection) = default;
};

inline void require_finite(double v, const char* what) {
  if (!std::isfinite(v)) throw EvaluationError(std::string("non-finite ") + what);
}

/// Strict comparison under the metric direction; ties are never better.
inline bool better(double a, double b, MetricDirection dir) {
  require_finite(a, "score");
  require_finite(b, "score");
  return dir.higher_is_better ? a > b : a < b;
}

/// Direction-aware improvement: positive iff the child beats the parent.
inline double improvement(double child, double parent, MetricDirection dir) {
  require_finite(child, "child score");
  require_finite(parent, "parent score");
  return dir.higher_is_better ? child - parent : parent - child;
}

}  // namespace agentga
