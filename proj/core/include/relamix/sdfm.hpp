#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "relamix/data_model.hpp"

namespace relamix {

/// Per-class, per-snippet source statistics. mean[c] and std[c] are
/// (T_snip x d); std uses the N_c - 1 denominator.
struct ClassSnippetStatistics {
  std::vector<Eigen::MatrixXd> mean;
  std::vector<Eigen::MatrixXd> std;
  std::vector<int> counts;

  int class_count() const { return static_cast<int>(mean.size()); }
  int snippet_count() const { return mean.empty() ? 0 : static_cast<int>(mean[0].rows()); }
  int dim() const { return mean.empty() ? 0 : static_cast<int>(mean[0].cols()); }
};

/// Gaussian a synthesized target sample is drawn from.
struct SynthesizedDistribution {
  std::string anchor_id;
  int label = 0;
  Eigen::MatrixXd mean;  ///< (T_snip x d)
  Eigen::MatrixXd std;   ///< (T_snip x d), >= alpha elementwise
  std::vector<std::vector<int>> selected_classes;  ///< K classes per snippet
};

inline constexpr int kDefaultTopK = 2;
inline constexpr double kDefaultAlpha = 0.21;
inline constexpr int kDefaultPerClassSynth = 200;

/// Statistics over the source-domain sequences of `source`. Throws if any
/// class has fewer than two source sequences.
ClassSnippetStatistics compute_source_statistics(const FeatureDataset& source);

/// The K classes whose snippet-t centers score highest under
/// exp(1 - ||mu_c^t - anchor||); ties go to the lower class index.
std::vector<int> select_topk_centers(const Eigen::VectorXd& anchor_snippet,
                                     const ClassSnippetStatistics& stats,
                                     int snippet_index, int k);

/// Per snippet: mean = (anchor + sum of K selected means) / (K + 1),
/// std = (sum of K selected stds) / K + alpha.
SynthesizedDistribution synthesize_distribution(const SnippetSequence& anchor,
                                                const ClassSnippetStatistics& stats,
                                                int k, double alpha);

/// `count` sequences drawn from the diagonal Gaussian, labelled like the anchor.
std::vector<SnippetSequence> sample_features(const SynthesizedDistribution& dist,
                                             int count, std::uint64_t seed);

/// per_class_total sequences per class, split as evenly as possible among that
/// class's anchors; the first anchors (by sample id) take the remainder.
FeatureDataset build_synthesized_set(const FeatureDataset& target_fewshot,
                                     const ClassSnippetStatistics& stats, int k,
                                     double alpha, int per_class_total,
                                     std::uint64_t seed);

/// Share of per_class_total assigned to each of `anchors` anchors.
std::vector<int> split_evenly(int per_class_total, int anchors);

/// Statistics as a dataset (ids mean_cNNN / std_cNNN) for inspection.
FeatureDataset statistics_as_dataset(const ClassSnippetStatistics& stats);

}  // namespace relamix
