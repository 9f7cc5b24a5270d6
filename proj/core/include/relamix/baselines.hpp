#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "relamix/data_model.hpp"

namespace relamix {

enum class BaselineMethod { kRandom, kKnn, kNearestCenter, kNearestNeighbor };
enum class DistanceMetric { kEuclidean, kCosine };

std::string_view to_string(BaselineMethod m);

struct BaselineReport {
  BaselineMethod method = BaselineMethod::kRandom;
  std::map<int, double> per_k_accuracy;  ///< kNN only
  double accuracy = 0.0;                 ///< percent
  std::uint64_t seed = 0;
};

inline const std::vector<int> kKnnNeighbourCounts = {3, 5, 10};

/// Mean over snippets.
Eigen::VectorXd pool_video_feature(const SnippetSequence& seq);
/// Pooled vectors of a whole dataset, one row per sequence.
Eigen::MatrixXd pool_dataset(const FeatureDataset& ds);

std::vector<int> predict_random(std::size_t test_count, int class_count, std::uint64_t seed);

/// Majority vote of the k nearest source vectors; vote ties go to the
/// smaller label, distance ties to the earlier source row.
std::vector<int> predict_knn(const Eigen::MatrixXd& source, const std::vector<int>& source_labels,
                             const Eigen::MatrixXd& test, int k,
                             DistanceMetric metric = DistanceMetric::kEuclidean);
std::vector<int> predict_nearest_neighbor(const Eigen::MatrixXd& source,
                                          const std::vector<int>& source_labels,
                                          const Eigen::MatrixXd& test,
                                          DistanceMetric metric = DistanceMetric::kEuclidean);
std::vector<int> predict_nearest_center(const Eigen::MatrixXd& source,
                                        const std::vector<int>& source_labels,
                                        const Eigen::MatrixXd& test, int class_count,
                                        DistanceMetric metric = DistanceMetric::kEuclidean);

double accuracy_percent(const std::vector<int>& predicted, const std::vector<int>& truth);
std::vector<int> labels_of(const FeatureDataset& ds);

/// Runs all four baselines: source-only fit, evaluated on `test`.
std::vector<BaselineReport> run_baselines(const FeatureDataset& source, const FeatureDataset& test,
                                          std::uint64_t seed,
                                          DistanceMetric metric = DistanceMetric::kEuclidean);

}  // namespace relamix
