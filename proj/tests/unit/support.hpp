#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <unistd.h>

#include "agentga/hedge.hpp"

namespace testsupport {

namespace fs = std::filesystem;

// Scratch directory removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag = "t") {
    static std::atomic<int> counter{0};
    auto stamp = std::chrono::steady_clock::now().time_since_epoch().count();
    path_ = fs::temp_directory_path() /
            ("agentga-" + tag + "-" + std::to_string(::getpid()) + "-" + std::to_string(stamp) + "-" +
             std::to_string(counter++));
    fs::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const fs::path& path() const { return path_; }
  fs::path operator/(const std::string& s) const { return path_ / s; }

 private:
  fs::path path_;
};

inline agentga::ProbabilityMap default_floors() {
  using agentga::Operator;
  return {{Operator::Ablation, 0.05}, {Operator::Continue, 0.10}, {Operator::EDA, 0.05},
          {Operator::Initial, 0.05}, {Operator::Merge, 0.05}};
}

inline agentga::ProbabilityMap default_ceilings() { return {{agentga::Operator::Merge, 0.30}}; }

inline agentga::HedgeConfig default_hedge() {
  using agentga::Operator;
  return agentga::HedgeConfig::from_base({{Operator::Ablation, 0.1},
                                          {Operator::Continue, 0.2},
                                          {Operator::EDA, 0.5},
                                          {Operator::Initial, 0.1},
                                          {Operator::Jumpstart, 0.0},
                                          {Operator::Merge, 0.1}},
                                         default_floors(), default_ceilings(), 0.15, 4.0);
}

// Uniform point on the simplex over the given operators.
template <class G>
agentga::ProbabilityMap random_simplex(const std::vector<agentga::Operator>& ops, G& rng) {
  std::exponential_distribution<double> e(1.0);
  agentga::ProbabilityMap p;
  double total = 0.0;
  for (auto op : ops) total += (p[op] = e(rng));
  for (auto& [op, v] : p) v /= total;
  return p;
}

inline double sum(const agentga::ProbabilityMap& m) {
  double s = 0.0;
  for (const auto& [k, v] : m) s += v;
  return s;
}

}  // namespace testsupport
