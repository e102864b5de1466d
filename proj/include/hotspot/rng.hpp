#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace hotspot {

using Rng = std::mt19937_64;

/// SplitMix64 finaliser; a bijection on 64-bit words.
constexpr std::uint64_t mix64(std::uint64_t z) {
  z += 0x9E3779B97F4A7C15ULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

constexpr std::uint64_t fnv1a(std::string_view text) {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (char c : text) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001B3ULL;
  }
  return h;
}

/// Seed of run `run_index` under a master seed.
constexpr std::uint64_t run_seed(std::uint64_t master, std::uint64_t run_index) {
  return mix64(mix64(master ^ fnv1a("run")) + run_index);
}

/// Independent sub-stream of a run for a named stage.
constexpr std::uint64_t stage_seed(std::uint64_t seed, std::string_view stage) {
  return mix64(seed ^ mix64(fnv1a(stage)));
}

inline Rng make_rng(std::uint64_t seed) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed),
                    static_cast<std::uint32_t>(seed >> 32)};
  return Rng(seq);
}

// Stage names used for sub-streams.
inline constexpr std::string_view kStageCandidates = "candidates";
inline constexpr std::string_view kStageTrue = "true-thinning";
inline constexpr std::string_view kStageReported = "reported-thinning";

}  // namespace hotspot
