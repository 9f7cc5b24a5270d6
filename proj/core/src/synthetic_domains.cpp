#include "relamix/synthetic_domains.hpp"

#include <cmath>
#include <cstdio>

#include <Eigen/QR>

#include "relamix/errors.hpp"
#include "relamix/random.hpp"

namespace relamix {
namespace {

Eigen::VectorXd random_direction(int dim, Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::VectorXd v(dim);
  do {
    for (int i = 0; i < dim; ++i) v[i] = normal(rng);
  } while (v.norm() < 1e-12);
  return v.normalized();
}

std::string sample_name(const char* prefix, int cls, int index) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%s_c%03d_%05d", prefix, cls, index);
  return buf;
}

SnippetSequence draw(const Eigen::MatrixXd& mean, double noise_std, int label,
                     Domain domain, std::string id, Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::MatrixXd x = mean;
  for (Eigen::Index r = 0; r < x.rows(); ++r)
    for (Eigen::Index c = 0; c < x.cols(); ++c) x(r, c) += noise_std * normal(rng);
  return {std::move(id), label, domain, x.cast<float>()};
}

}  // namespace

Eigen::MatrixXd random_rotation(int dim, double angle, std::uint64_t seed) {
  if (dim < 2) throw InvalidArgument("random_rotation: dim must be >= 2");
  if (angle == 0.0) return Eigen::MatrixXd::Identity(dim, dim);
  Rng rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::MatrixXd g(dim, dim);
  for (int i = 0; i < dim; ++i)
    for (int j = 0; j < dim; ++j) g(i, j) = normal(rng);
  const Eigen::MatrixXd basis = Eigen::HouseholderQR<Eigen::MatrixXd>(g).householderQ();
  Eigen::MatrixXd planar = Eigen::MatrixXd::Identity(dim, dim);
  const double c = std::cos(angle), s = std::sin(angle);
  for (int p = 0; p + 1 < dim; p += 2) {
    planar(p, p) = c;
    planar(p, p + 1) = -s;
    planar(p + 1, p) = s;
    planar(p + 1, p + 1) = c;
  }
  return basis * planar * basis.transpose();
}

DomainShiftSpec default_shift(std::uint64_t seed) {
  return {.rotation_strength = 1.2, .bias_strength = 1.0, .noise_std = 1.0, .seed = seed};
}

SyntheticPair generate_pair(const SyntheticLayout& layout,
                            const DomainShiftSpec& shift) {
  const int C = layout.class_count, T = layout.snippet_count, d = layout.dim;
  if (C < 2) throw InvalidArgument("generate_pair: class_count must be >= 2");
  if (layout.per_class_source < 2 || layout.per_class_target < 2)
    throw InvalidArgument("generate_pair: need >= 2 samples per class per domain");
  if (d < 2) throw InvalidArgument("generate_pair: dim must be >= 2 (rotation undefined)");
  if (T < 1) throw InvalidArgument("generate_pair: snippet_count must be >= 1");
  if (shift.rotation_strength < 0 || shift.bias_strength < 0 || shift.noise_std < 0)
    throw InvalidArgument("generate_pair: shift magnitudes must be non-negative");

  SyntheticPair pair;
  pair.rotation = random_rotation(
      d, shift.rotation_strength,
      derive_seed(shift.seed, {tag(Stream::kSynthetic), 0}));

  Rng means_rng(derive_seed(shift.seed, {tag(Stream::kSynthetic), 1}));
  for (int c = 0; c < C; ++c) {
    const Eigen::VectorXd center = layout.class_radius * random_direction(d, means_rng);
    Eigen::MatrixXd m(T, d);
    for (int t = 0; t < T; ++t)
      m.row(t) = (center + layout.snippet_spread * random_direction(d, means_rng)).transpose();
    // Always consumed so the class means do not depend on the shift.
    const Eigen::VectorXd direction = random_direction(d, means_rng);
    const Eigen::VectorXd bias = shift.bias_strength == 0.0
                                     ? Eigen::VectorXd::Zero(d)
                                     : Eigen::VectorXd(shift.bias_strength * direction);
    Eigen::MatrixXd tm = m * pair.rotation.transpose();
    tm.rowwise() += bias.transpose();
    pair.source_means.push_back(std::move(m));
    pair.target_means.push_back(std::move(tm));
  }

  const int n_train = std::clamp(
      static_cast<int>(std::lround(layout.per_class_target * layout.target_train_fraction)),
      1, layout.per_class_target - 1);

  std::vector<SnippetSequence> src, pool, test;
  for (int c = 0; c < C; ++c) {
    Rng rng(derive_seed(shift.seed, {tag(Stream::kSynthetic), 2, static_cast<std::uint64_t>(c)}));
    for (int i = 0; i < layout.per_class_source; ++i)
      src.push_back(draw(pair.source_means[c], shift.noise_std, c, Domain::kSource,
                         sample_name("src", c, i), rng));
    for (int i = 0; i < layout.per_class_target; ++i) {
      const bool train = i < n_train;
      auto s = draw(pair.target_means[c], shift.noise_std, c, Domain::kTarget,
                    sample_name(train ? "tgt" : "tst", c, i), rng);
      (train ? pool : test).push_back(std::move(s));
    }
  }
  pair.source = FeatureDataset::make(std::move(src), C, T, d);
  pair.target_train_pool = FeatureDataset::make(std::move(pool), C, T, d);
  pair.target_test = FeatureDataset::make(std::move(test), C, T, d);
  return pair;
}

}  // namespace relamix
