#include <doctest.h>

#include "relamix/baselines.hpp"
#include "relamix/errors.hpp"
#include "relamix/synthetic_domains.hpp"
#include "relamix/tensor_file.hpp"

using namespace relamix;

TEST_SUITE("synthetic_domains") {

TEST_CASE("zero shift leaves the generative means untouched") {
  const auto pair = generate_pair({}, {.rotation_strength = 0, .bias_strength = 0, .noise_std = 0, .seed = 4});
  REQUIRE(pair.source_means.size() == 5);
  for (std::size_t c = 0; c < 5; ++c) CHECK(pair.target_means[c] == pair.source_means[c]);
  // Without noise every sample sits on its class mean.
  CHECK(pair.target_test[0].features == pair.target_means[0].cast<float>());
}

TEST_CASE("default layout shapes") {
  const auto pair = generate_pair({}, default_shift(0));
  CHECK(pair.source.size() == 500);
  CHECK(pair.target_train_pool.size() + pair.target_test.size() == 200);
  CHECK(pair.target_train_pool.size() == 100);
  for (const auto* ds : {&pair.source, &pair.target_train_pool, &pair.target_test}) {
    CHECK(ds->snippet_count() == 5);
    CHECK(ds->dim() == 16);
    CHECK(ds->class_count() == 5);
  }
  CHECK(pair.source[0].domain == Domain::kSource);
  CHECK(pair.target_test[0].domain == Domain::kTarget);
}

TEST_CASE("same seed gives byte-identical datasets") {
  const auto a = generate_pair({}, default_shift(11));
  const auto b = generate_pair({}, default_shift(11));
  CHECK(a.source == b.source);
  CHECK(a.target_train_pool == b.target_train_pool);
  CHECK(a.target_test == b.target_test);
  CHECK(encode_tensor(a.source[7].features) == encode_tensor(b.source[7].features));
  const auto c = generate_pair({}, default_shift(12));
  CHECK_FALSE(a.source == c.source);
}

TEST_CASE("rotation is orthogonal") {
  for (double angle : {0.0, 0.3, 1.2, 3.0}) {
    const auto r = random_rotation(7, angle, 5);
    CHECK((r.transpose() * r - Eigen::MatrixXd::Identity(7, 7)).cwiseAbs().maxCoeff() < 1e-6);
  }
  CHECK_THROWS_AS(random_rotation(1, 0.5, 0), InvalidArgument);
  SyntheticLayout flat;
  flat.dim = 1;
  CHECK_THROWS_AS(generate_pair(flat, default_shift(0)), InvalidArgument);
}

TEST_CASE("well separated classes without shift are recognised by nearest center") {
  SyntheticLayout layout;
  layout.snippet_spread = 0.5;
  // Class centers on the radius-5 sphere sit about 7 apart; noise 0.3 keeps
  // the pooled features far inside their own cluster.
  const auto pair = generate_pair(layout, {.rotation_strength = 0, .bias_strength = 0, .noise_std = 0.3, .seed = 2});
  const auto reports = run_baselines(pair.source, pair.target_test, 0);
  for (const auto& r : reports)
    if (r.method == BaselineMethod::kNearestCenter) CHECK(r.accuracy >= 99.0);
}

TEST_CASE("stronger rotation does not help source-only nearest center") {
  auto nc_accuracy = [](double angle) {
    double sum = 0;
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
      auto shift = default_shift(seed);
      shift.rotation_strength = angle;
      const auto pair = generate_pair({}, shift);
      const auto src = pool_dataset(pair.source), tst = pool_dataset(pair.target_test);
      sum += accuracy_percent(
          predict_nearest_center(src, labels_of(pair.source), tst, 5), labels_of(pair.target_test));
    }
    return sum / 5;
  };
  double previous = 101;
  for (double angle : {0.0, 0.6, 1.2, 1.8, 2.4}) {
    const double acc = nc_accuracy(angle);
    CHECK(acc <= previous);
    previous = acc;
  }
}

}  // TEST_SUITE
