#include <doctest.h>

#include <algorithm>
#include <set>

#include "relamix/errors.hpp"
#include "relamix/relation_sets.hpp"

using namespace relamix;

namespace {

// Every strictly increasing r-subset of [0, n) via bitmasks, sorted.
std::vector<RelationTuple> brute_force_tuples(int n, int r) {
  std::vector<RelationTuple> out;
  for (unsigned mask = 0; mask < (1u << n); ++mask) {
    if (__builtin_popcount(mask) != r) continue;
    RelationTuple t;
    for (int i = 0; i < n; ++i)
      if (mask & (1u << i)) t.push_back(i);
    out.push_back(t);
  }
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace

TEST_SUITE("relation_sets") {

TEST_CASE("scales") {
  CHECK(enumerate_scales(5) == std::vector<int>{2, 3, 4, 5});
  CHECK(enumerate_scales(2) == std::vector<int>{2});
  CHECK_THROWS_AS(enumerate_scales(1), InvalidArgument);
}

TEST_CASE("small tuple sets") {
  const auto all_pairs = sample_relation_tuples(3, 2, 3, 0);
  CHECK(std::set<RelationTuple>(all_pairs.begin(), all_pairs.end()) ==
        std::set<RelationTuple>{{0, 1}, {0, 2}, {1, 2}});
  CHECK(sample_relation_tuples(2, 2, 1, 9) == std::vector<RelationTuple>{{0, 1}});
  CHECK(enumerate_tuples(5, 3).size() == 10);
}

TEST_CASE("asking for more tuples than exist reports the maximum") {
  CHECK_THROWS_WITH_AS(sample_relation_tuples(4, 2, 7, 0), doctest::Contains("6"),
                       InvalidArgument);
}

TEST_CASE("enumeration matches brute force for N_T in [2, 8]") {
  for (int n = 2; n <= 8; ++n) {
    CHECK(enumerate_scales(n).size() == static_cast<std::size_t>(n - 1));
    for (int r = 2; r <= n; ++r) {
      const auto tuples = enumerate_tuples(n, r);
      CHECK(tuples == brute_force_tuples(n, r));
      CHECK(tuples.size() == binomial(n, r));
    }
  }
}

TEST_CASE("sampled tuples are distinct, increasing and seed-determined") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto a = sample_relation_tuples(8, 3, 5, seed);
    CHECK(a == sample_relation_tuples(8, 3, 5, seed));
    CHECK(std::set<RelationTuple>(a.begin(), a.end()).size() == 5);
    for (const auto& t : a) {
      CHECK(std::is_sorted(t.begin(), t.end()));
      CHECK(std::adjacent_find(t.begin(), t.end()) == t.end());
      CHECK(t.front() >= 0);
      CHECK(t.back() < 8);
    }
  }
}

TEST_CASE("plan caps tuples at the number available") {
  const auto plan = make_relation_plan(5, 3, 1);
  CHECK(plan.scale_count() == 4);
  CHECK(plan.tuples.at(2).size() == 3);
  CHECK(plan.tuples.at(5).size() == 1);
  CHECK(make_relation_plan(2, 3, 0).tuples.at(2) == std::vector<RelationTuple>{{0, 1}});
}

}  // TEST_SUITE
