#pragma once

#include <string>
#include <vector>

#include <Eigen/Core>

namespace relamix {

struct LossWeights {
  double cdia = 1e-4;
  double ce_source = 1.0;
  double ce_target = 1.0;
  double ce_synth = 1e-2;
  double aux = 1e-4;
};

struct LossComponents {
  double cdia = 0.0;
  double ce_source = 0.0;
  double ce_target = 0.0;
  double ce_synth = 0.0;
  double aux = 0.0;
};

/// Target-domain class centers; treated as constants by every loss.
struct PrototypeBank {
  Eigen::MatrixXd prototypes;  ///< (C x d)
  int refresh_epoch = 0;

  int class_count() const { return static_cast<int>(prototypes.rows()); }
};

/// Cosine similarity; 0 when either vector is zero.
double cosine_similarity(const Eigen::VectorXd& a, const Eigen::VectorXd& b);

/// Per-class arithmetic mean of the rows of `embeddings`. Every class in
/// [0, class_count) must occur.
PrototypeBank compute_prototypes(const Eigen::MatrixXd& embeddings,
                                 const std::vector<int>& labels, int class_count,
                                 int refresh_epoch = 0);

/// Batch form shared by the alignment losses:
///   mean_i -log( exp(cos(a_i, p_i)) / sum_j exp(cos(a_i, pool[neg_i[j]])) ).
/// The positive is not part of the denominator, so the value can be negative.
struct ContrastiveBatch {
  const Eigen::MatrixXd* anchors = nullptr;    ///< (N x d)
  const Eigen::MatrixXd* positives = nullptr;  ///< (N x d)
  const Eigen::MatrixXd* pool = nullptr;       ///< (P x d)
  std::vector<std::vector<int>> negatives;     ///< N lists of row indices into pool
};

struct ContrastiveResult {
  double loss = 0.0;
  Eigen::MatrixXd d_anchors, d_positives, d_pool;
};

ContrastiveResult contrastive_loss(const ContrastiveBatch& batch);

/// Source anchors pulled to the prototype of their own class, pushed from
/// negatives of other classes. negatives[i] is (N_n x d).
double cdia_loss(const Eigen::MatrixXd& source_embeddings, const std::vector<int>& labels,
                 const PrototypeBank& bank, const std::vector<Eigen::MatrixXd>& negatives,
                 const std::vector<std::vector<int>>& negative_labels);

/// Synthesized anchors pulled to their temporally permuted copies.
double aux_loss(const Eigen::MatrixXd& synth_embeddings, const std::vector<int>& labels,
                const Eigen::MatrixXd& permuted_positives,
                const std::vector<Eigen::MatrixXd>& negatives,
                const std::vector<std::vector<int>>& negative_labels);

struct CrossEntropyResult {
  double loss = 0.0;
  Eigen::MatrixXd d_logits;  ///< (N x C)
};

/// Mean negative log-softmax of the true class; logits are (N x C).
CrossEntropyResult cross_entropy_with_grad(const Eigen::MatrixXd& logits,
                                           const std::vector<int>& labels);
double cross_entropy(const Eigen::MatrixXd& logits, const std::vector<int>& labels);

/// Weighted sum; throws NonFiniteLoss naming the first non-finite term.
double total_loss(const LossComponents& components, const LossWeights& weights);

}  // namespace relamix
