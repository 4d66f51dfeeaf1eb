#pragma once

#include <cstdint>
#include <random>

namespace agentga {

using Rng = std::mt19937_64;

/// Independent random streams. Each (master seed, iteration, slot, purpose)
/// tuple maps to its own generator, so the order in which slots are
/// dispatched never changes what any slot draws.
enum class StreamPurpose : std::uint32_t { Planning = 1, Simulation = 2 };

inline Rng derive_stream(std::uint64_t master_seed, std::uint64_t iteration, std::uint64_t slot,
                         StreamPurpose purpose) {
  std::seed_seq seq{static_cast<std::uint32_t>(master_seed & 0xffffffffu),
                    static_cast<std::uint32_t>(master_seed >> 32),
                    static_cast<std::uint32_t>(iteration & 0xffffffffu),
                    static_cast<std::uint32_t>(iteration >> 32),
                    static_cast<std::uint32_t>(slot & 0xffffffffu),
                    static_cast<std::uint32_t>(purpose)};
  return Rng(seq);
}

}  // namespace agentga
