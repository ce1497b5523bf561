#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace mtb {

// splitmix64: tiny, well-mixed generator used for seed derivation and
// keyed per-sample randomness. Stable across platforms by construction.
struct SplitMix64 {
  std::uint64_t state;

  explicit SplitMix64(std::uint64_t seed) : state(seed) {}

  std::uint64_t next() {
    state += 0x9E3779B97F4A7C15ULL;
    std::uint64_t z = state;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  // Uniform in [0, 1).
  double next_double() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  float next_float() { return static_cast<float>(next_double()); }

  // Uniform integer in [0, bound).
  std::uint64_t next_below(std::uint64_t bound) {
    // Modulo bias is negligible for bounds far below 2^64.
    return next() % bound;
  }
};

// Derives an independent substream seed from (seed, tag). Used wherever one
// configured seed feeds several stochastic steps.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t tag) {
  SplitMix64 mix(seed ^ (0xA076'1D64'78BD'642FULL + tag * 0xE703'7ED1'A0B4'28DBULL));
  mix.next();
  return mix.next();
}

inline std::uint64_t derive_seed(std::uint64_t seed, std::string_view tag) {
  // FNV-1a over the tag, then mix with the seed.
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (char c : tag) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001B3ULL;
  }
  return derive_seed(seed, h);
}

// mt19937_64 seeded via splitmix, for shuffles and distributions where the
// standard library engine is convenient.
inline std::mt19937_64 make_engine(std::uint64_t seed) {
  return std::mt19937_64(derive_seed(seed, 0x6D74'3139'3337ULL));
}

}  // namespace mtb
