#pragma once

#include <cstdint>
#include <random>

namespace cfmimo {

using Engine = std::mt19937_64;

/// splitmix64 finalizer; maps (master, index) to a well-mixed child seed.
constexpr std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index) {
  std::uint64_t z = master + 0x9E3779B97F4A7C15ULL * (index + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

/// Independent engine for draw `index` of a stream rooted at `seed`.
inline Engine substream(std::uint64_t seed, std::uint64_t index) {
  return Engine(derive_seed(seed, index));
}

}  // namespace cfmimo
