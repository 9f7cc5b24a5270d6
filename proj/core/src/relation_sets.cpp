#include "relamix/relation_sets.hpp"

#include <algorithm>
#include <limits>
#include <numeric>
#include <string>

#include "relamix/errors.hpp"
#include "relamix/random.hpp"

namespace relamix {

std::vector<int> enumerate_scales(int sequence_length) {
  if (sequence_length < 2)
    throw InvalidArgument("relation sets need at least 2 snippets, got " +
                          std::to_string(sequence_length));
  std::vector<int> scales(static_cast<std::size_t>(sequence_length - 1));
  std::iota(scales.begin(), scales.end(), 2);
  return scales;
}

std::uint64_t binomial(int n, int k) {
  if (k < 0 || n < 0 || k > n) return 0;
  k = std::min(k, n - k);
  std::uint64_t r = 1;
  for (int i = 1; i <= k; ++i) {
    const auto num = static_cast<std::uint64_t>(n - k + i);
    if (r > std::numeric_limits<std::uint64_t>::max() / num)
      return std::numeric_limits<std::uint64_t>::max();
    r = r * num / static_cast<std::uint64_t>(i);
  }
  return r;
}

namespace {

void check_scale(int n, int r) {
  if (n < 2) throw InvalidArgument("sequence_length must be >= 2");
  if (r < 2 || r > n)
    throw InvalidArgument("scale " + std::to_string(r) + " outside [2, " +
                          std::to_string(n) + "]");
}

// Tuple of the given lexicographic rank among C(n, r) combinations.
RelationTuple unrank(int n, int r, std::uint64_t rank) {
  RelationTuple out;
  out.reserve(static_cast<std::size_t>(r));
  int next = 0;
  for (int slot = r; slot > 0; --slot) {
    for (int v = next;; ++v) {
      const auto block = binomial(n - v - 1, slot - 1);
      if (rank < block) {
        out.push_back(v);
        next = v + 1;
        break;
      }
      rank -= block;
    }
  }
  return out;
}

}  // namespace

std::vector<RelationTuple> enumerate_tuples(int sequence_length, int scale) {
  check_scale(sequence_length, scale);
  const auto total = binomial(sequence_length, scale);
  std::vector<RelationTuple> out;
  out.reserve(static_cast<std::size_t>(total));
  for (std::uint64_t i = 0; i < total; ++i) out.push_back(unrank(sequence_length, scale, i));
  return out;
}

std::vector<RelationTuple> sample_relation_tuples(int sequence_length, int scale,
                                                  int count, std::uint64_t seed) {
  check_scale(sequence_length, scale);
  const auto total = binomial(sequence_length, scale);
  if (count < 1 || static_cast<std::uint64_t>(count) > total)
    throw InvalidArgument("cannot sample " + std::to_string(count) +
                          " tuples at scale " + std::to_string(scale) +
                          "; maximum is " + std::to_string(total));
  Rng rng(derive_seed(seed, {tag(Stream::kPlan), static_cast<std::uint64_t>(scale)}));
  std::vector<std::uint64_t> ranks;
  if (total <= 4096) {
    std::vector<std::uint64_t> all(static_cast<std::size_t>(total));
    std::iota(all.begin(), all.end(), std::uint64_t{0});
    std::sample(all.begin(), all.end(), std::back_inserter(ranks),
                static_cast<std::size_t>(count), rng);
  } else {
    // Rejection sampling when the tuple space is too large to materialize.
    std::uniform_int_distribution<std::uint64_t> pick(0, total - 1);
    while (ranks.size() < static_cast<std::size_t>(count)) {
      const auto r = pick(rng);
      if (std::find(ranks.begin(), ranks.end(), r) == ranks.end()) ranks.push_back(r);
    }
    std::sort(ranks.begin(), ranks.end());
  }
  std::vector<RelationTuple> out;
  out.reserve(ranks.size());
  for (auto r : ranks) out.push_back(unrank(sequence_length, scale, r));
  return out;
}

RelationPlan make_relation_plan(int sequence_length, int tuples_per_scale,
                                std::uint64_t seed) {
  if (tuples_per_scale < 1) throw InvalidArgument("tuples_per_scale must be >= 1");
  RelationPlan plan;
  plan.sequence_length = sequence_length;
  plan.scales = enumerate_scales(sequence_length);
  plan.tuples_per_scale = tuples_per_scale;
  plan.seed = seed;
  for (int r : plan.scales) {
    const auto total = binomial(sequence_length, r);
    const int m = static_cast<int>(
        std::min<std::uint64_t>(total, static_cast<std::uint64_t>(tuples_per_scale)));
    plan.tuples[r] = sample_relation_tuples(sequence_length, r, m, seed);
  }
  return plan;
}

}  // namespace relamix
