#pragma once

#include <cstdint>

#include <Eigen/Core>

#include "relamix/data_model.hpp"

namespace relamix {

struct DomainShiftSpec {
  double rotation_strength = 0.0;  ///< rotation angle (radians) in every plane
  double bias_strength = 0.0;      ///< per-class translation length
  double noise_std = 1.0;
  std::uint64_t seed = 0;
};

struct SyntheticLayout {
  int class_count = 5;
  int per_class_source = 100;
  int per_class_target = 40;
  int snippet_count = 5;
  int dim = 16;
  double class_radius = 5.0;    ///< class centers lie on this sphere
  double snippet_spread = 1.0;  ///< per-snippet offset length around a center
  double target_train_fraction = 0.5;
};

struct SyntheticPair {
  FeatureDataset source;
  FeatureDataset target_train_pool;
  FeatureDataset target_test;
  /// Generative means, one (T_snip x d) matrix per class.
  std::vector<Eigen::MatrixXd> source_means;
  std::vector<Eigen::MatrixXd> target_means;
  Eigen::MatrixXd rotation;
};

/// Orthogonal d x d matrix rotating by `angle` in each of floor(d/2) random
/// planes. angle == 0 returns the exact identity.
Eigen::MatrixXd random_rotation(int dim, double angle, std::uint64_t seed);

/// The moderate shift used by the default synthetic experiments.
DomainShiftSpec default_shift(std::uint64_t seed);

SyntheticPair generate_pair(const SyntheticLayout& layout,
                            const DomainShiftSpec& shift);

}  // namespace relamix
