#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace relamix {

using Rng = std::mt19937_64;

/// splitmix64 finalizer; used to derive independent substream seeds.
constexpr std::uint64_t mix_seed(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Folds a parent seed and a path of tags into one child seed. Distinct tag
/// paths give statistically independent streams, so enabling or disabling one
/// consumer never shifts the draws seen by another.
inline std::uint64_t derive_seed(std::uint64_t seed,
                                 std::initializer_list<std::uint64_t> tags) {
  std::uint64_t s = mix_seed(seed);
  for (auto t : tags) s = mix_seed(s ^ mix_seed(t + 0x632be59bd9b4e019ULL));
  return s;
}

// Stream tags.
enum class Stream : std::uint64_t {
  kSplit = 1,
  kSynthetic,
  kSdfm,
  kPlan,
  kInit,
  kBatch,
  kDropout,
  kPermutation,
  kNegatives,
  kBaseline,
};

inline std::uint64_t tag(Stream s) { return static_cast<std::uint64_t>(s); }

}  // namespace relamix
