#pragma once

#include <cstdint>
#include <map>
#include <vector>

namespace relamix {

/// Strictly increasing, 0-based snippet indices.
using RelationTuple = std::vector<int>;

/// Multi-scale relation index sets for one sequence length. Scales run over
/// [2, N_T]; each scale holds up to `tuples_per_scale` sampled tuples.
struct RelationPlan {
  int sequence_length = 0;
  std::vector<int> scales;
  std::map<int, std::vector<RelationTuple>> tuples;
  int tuples_per_scale = 0;
  std::uint64_t seed = 0;

  std::size_t scale_count() const { return scales.size(); }
};

inline constexpr int kDefaultTuplesPerScale = 3;

/// [2, 3, ..., sequence_length]. Throws for sequence_length < 2.
std::vector<int> enumerate_scales(int sequence_length);

/// C(n, k) as a 64-bit integer (saturates at UINT64_MAX).
std::uint64_t binomial(int n, int k);

/// All C(n, r) strictly increasing tuples in lexicographic order.
std::vector<RelationTuple> enumerate_tuples(int sequence_length, int scale);

/// `count` distinct tuples drawn uniformly without replacement, reported in
/// lexicographic order. Throws when count exceeds C(sequence_length, scale).
std::vector<RelationTuple> sample_relation_tuples(int sequence_length, int scale,
                                                  int count, std::uint64_t seed);

/// One plan covering every scale with min(tuples_per_scale, C(N_T, r)) tuples.
RelationPlan make_relation_plan(int sequence_length, int tuples_per_scale,
                                std::uint64_t seed);

}  // namespace relamix
