#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <utility>

namespace armgraph {

// The standard distributions are implementation-defined; these helpers draw
// from mt19937_64 directly so results match across standard libraries.
using Rng = std::mt19937_64;

// Uniform integer in [0, bound) by rejection sampling.
inline std::uint64_t uniform_index(Rng& rng, std::uint64_t bound) {
  const std::uint64_t limit = Rng::max() - Rng::max() % bound;
  std::uint64_t x;
  do {
    x = rng();
  } while (x >= limit);
  return x % bound;
}

// Uniform double in [0, 1) with 53 random bits.
inline double uniform_unit(Rng& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

template <typename T>
void shuffle(std::span<T> items, Rng& rng) {
  for (std::size_t i = items.size(); i > 1; --i) {
    using std::swap;
    swap(items[i - 1], items[uniform_index(rng, i)]);
  }
}

}  // namespace armgraph
