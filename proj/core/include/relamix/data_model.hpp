#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

namespace relamix {

enum class Domain { kSource, kTarget, kSynthesized };

std::string_view to_string(Domain d);
Domain parse_domain(std::string_view s);

/// One sample: a (T_snip x d) matrix of snippet features plus its label.
struct SnippetSequence {
  std::string sample_id;
  int label = 0;
  Domain domain = Domain::kSource;
  Eigen::MatrixXf features;

  Eigen::Index snippet_count() const { return features.rows(); }
  Eigen::Index dim() const { return features.cols(); }
};

/// An ordered collection of equally shaped sequences. Construction through
/// make() sorts by sample_id and validates shapes, labels and finiteness.
class FeatureDataset {
 public:
  FeatureDataset() = default;

  static FeatureDataset make(std::vector<SnippetSequence> sequences,
                             int class_count);
  /// Same as make() but allows an empty set with a known shape.
  static FeatureDataset make(std::vector<SnippetSequence> sequences,
                             int class_count, int snippet_count, int dim);

  const std::vector<SnippetSequence>& sequences() const { return sequences_; }
  std::size_t size() const { return sequences_.size(); }
  bool empty() const { return sequences_.empty(); }
  const SnippetSequence& operator[](std::size_t i) const { return sequences_[i]; }

  int class_count() const { return class_count_; }
  int snippet_count() const { return snippet_count_; }
  int dim() const { return dim_; }

  /// Indices of the sequences of each class, in dataset order.
  std::vector<std::vector<std::size_t>> indices_by_class() const;
  /// Subset by sample id, in dataset order. Unknown ids throw.
  FeatureDataset select(const std::vector<std::string>& ids) const;

  friend bool operator==(const FeatureDataset& a, const FeatureDataset& b);

 private:
  std::vector<SnippetSequence> sequences_;
  int class_count_ = 0;
  int snippet_count_ = 0;
  int dim_ = 0;
};

struct FewShotSplit {
  int shot_count = 0;
  std::uint64_t seed = 0;
  /// selected_ids[c] holds min(shot_count, |class c|) ids in dataset order.
  std::vector<std::vector<std::string>> selected_ids;
  std::vector<std::string> warnings;

  std::vector<std::string> all_ids() const;
};

/// Mean-pools sliding windows over a zero-padded frame stream. Row t of the
/// result is the mean of padded rows [t*stride, t*stride + window).
Eigen::MatrixXf window_snippets(const Eigen::MatrixXf& frame_features,
                                int window, int stride, int pad);

/// Number of windows window_snippets() would emit.
int snippet_count_for(int frame_count, int window, int stride, int pad);

/// Per-class uniform sampling without replacement; classes smaller than
/// shot_count contribute every sample and add a warning.
FewShotSplit sample_few_shot_split(const FeatureDataset& dataset,
                                   int shot_count, std::uint64_t seed);

inline constexpr int kManifestVersion = 1;

/// Dataset directory: manifest.json plus one RMFX payload per sample.
void write_dataset(const FeatureDataset& dataset,
                   const std::filesystem::path& dir);
FeatureDataset read_dataset(const std::filesystem::path& dir);

}  // namespace relamix
