#include "relamix/losses.hpp"

#include <cmath>

#include "relamix/errors.hpp"

namespace relamix {

using Eigen::MatrixXd;
using Eigen::VectorXd;

double cosine_similarity(const VectorXd& a, const VectorXd& b) {
  const double na = a.norm(), nb = b.norm();
  if (na == 0.0 || nb == 0.0) return 0.0;
  return a.dot(b) / (na * nb);
}

namespace {

// d cos(x, y) / dx, scaled by `g`.
VectorXd cosine_grad(const VectorXd& x, const VectorXd& y, double cos, double g) {
  const double nx = x.norm(), ny = y.norm();
  if (nx == 0.0 || ny == 0.0) return VectorXd::Zero(x.size());
  return g * (y / (nx * ny) - cos * x / (nx * nx));
}

}  // namespace

PrototypeBank compute_prototypes(const MatrixXd& embeddings, const std::vector<int>& labels,
                                 int class_count, int refresh_epoch) {
  if (static_cast<std::size_t>(embeddings.rows()) != labels.size())
    throw InvalidArgument("compute_prototypes: embeddings/labels size mismatch");
  PrototypeBank bank;
  bank.refresh_epoch = refresh_epoch;
  bank.prototypes = MatrixXd::Zero(class_count, embeddings.cols());
  std::vector<int> counts(static_cast<std::size_t>(class_count), 0);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0 || labels[i] >= class_count)
      throw InvalidArgument("compute_prototypes: label out of range");
    bank.prototypes.row(labels[i]) += embeddings.row(static_cast<Eigen::Index>(i));
    ++counts[static_cast<std::size_t>(labels[i])];
  }
  for (int c = 0; c < class_count; ++c) {
    if (counts[static_cast<std::size_t>(c)] == 0)
      throw InvalidArgument("compute_prototypes: class " + std::to_string(c) +
                            " has no target embedding");
    bank.prototypes.row(c) /= counts[static_cast<std::size_t>(c)];
  }
  return bank;
}

ContrastiveResult contrastive_loss(const ContrastiveBatch& batch) {
  const MatrixXd& A = *batch.anchors;
  const MatrixXd& P = *batch.positives;
  const MatrixXd& pool = *batch.pool;
  const Eigen::Index n = A.rows();
  if (P.rows() != n || static_cast<Eigen::Index>(batch.negatives.size()) != n)
    throw InvalidArgument("contrastive_loss: anchors, positives and negative lists differ in size");
  ContrastiveResult res;
  res.d_anchors = MatrixXd::Zero(A.rows(), A.cols());
  res.d_positives = MatrixXd::Zero(P.rows(), P.cols());
  res.d_pool = MatrixXd::Zero(pool.rows(), pool.cols());
  if (n == 0) return res;
  const double inv_n = 1.0 / static_cast<double>(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& negs = batch.negatives[static_cast<std::size_t>(i)];
    if (negs.empty())
      throw InvalidArgument("contrastive_loss: anchor " + std::to_string(i) + " has no negatives");
    const VectorXd a = A.row(i).transpose();
    const VectorXd p = P.row(i).transpose();
    const double cos_pos = cosine_similarity(a, p);
    std::vector<double> cos_neg(negs.size());
    double max_cos = -2.0;
    for (std::size_t j = 0; j < negs.size(); ++j) {
      cos_neg[j] = cosine_similarity(a, pool.row(negs[j]).transpose());
      max_cos = std::max(max_cos, cos_neg[j]);
    }
    double denom = 0.0;
    for (double c : cos_neg) denom += std::exp(c - max_cos);
    res.loss += (-cos_pos + max_cos + std::log(denom)) * inv_n;

    res.d_anchors.row(i) += cosine_grad(a, p, cos_pos, -inv_n).transpose();
    res.d_positives.row(i) += cosine_grad(p, a, cos_pos, -inv_n).transpose();
    for (std::size_t j = 0; j < negs.size(); ++j) {
      const double w = std::exp(cos_neg[j] - max_cos) / denom * inv_n;
      const VectorXd neg = pool.row(negs[j]).transpose();
      res.d_anchors.row(i) += cosine_grad(a, neg, cos_neg[j], w).transpose();
      res.d_pool.row(negs[j]) += cosine_grad(neg, a, cos_neg[j], w).transpose();
    }
  }
  return res;
}

namespace {

// Stacks per-anchor negative blocks into one pool with index lists.
ContrastiveResult stacked_contrastive(const MatrixXd& anchors, const MatrixXd& positives,
                                      const std::vector<MatrixXd>& negatives) {
  Eigen::Index total = 0;
  for (const auto& m : negatives) total += m.rows();
  MatrixXd pool(total, anchors.cols());
  ContrastiveBatch batch;
  Eigen::Index row = 0;
  for (const auto& m : negatives) {
    if (m.cols() != anchors.cols())
      throw InvalidArgument("contrastive loss: negative width differs from anchor width");
    std::vector<int> idx;
    for (Eigen::Index j = 0; j < m.rows(); ++j, ++row) {
      pool.row(row) = m.row(j);
      idx.push_back(static_cast<int>(row));
    }
    batch.negatives.push_back(std::move(idx));
  }
  batch.anchors = &anchors;
  batch.positives = &positives;
  batch.pool = &pool;
  return contrastive_loss(batch);
}

void check_negative_labels(const std::vector<int>& labels,
                           const std::vector<MatrixXd>& negatives,
                           const std::vector<std::vector<int>>& negative_labels,
                           const char* who) {
  if (negatives.size() != labels.size() || negative_labels.size() != labels.size())
    throw InvalidArgument(std::string(who) + ": one negative set per anchor is required");
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (negatives[i].rows() == 0)
      throw InvalidArgument(std::string(who) + ": empty negative pool for anchor " +
                            std::to_string(i));
    if (static_cast<Eigen::Index>(negative_labels[i].size()) != negatives[i].rows())
      throw InvalidArgument(std::string(who) + ": negative label count mismatch");
    for (int l : negative_labels[i])
      if (l == labels[i])
        throw InvalidArgument(std::string(who) + ": negative shares the anchor's label " +
                              std::to_string(l));
  }
}

}  // namespace

double cdia_loss(const MatrixXd& source_embeddings, const std::vector<int>& labels,
                 const PrototypeBank& bank, const std::vector<MatrixXd>& negatives,
                 const std::vector<std::vector<int>>& negative_labels) {
  check_negative_labels(labels, negatives, negative_labels, "cdia_loss");
  MatrixXd positives(source_embeddings.rows(), source_embeddings.cols());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0 || labels[i] >= bank.class_count())
      throw InvalidArgument("cdia_loss: class " + std::to_string(labels[i]) +
                            " missing from the prototype bank");
    positives.row(static_cast<Eigen::Index>(i)) = bank.prototypes.row(labels[i]);
  }
  return stacked_contrastive(source_embeddings, positives, negatives).loss;
}

double aux_loss(const MatrixXd& synth_embeddings, const std::vector<int>& labels,
                const MatrixXd& permuted_positives, const std::vector<MatrixXd>& negatives,
                const std::vector<std::vector<int>>& negative_labels) {
  check_negative_labels(labels, negatives, negative_labels, "aux_loss");
  return stacked_contrastive(synth_embeddings, permuted_positives, negatives).loss;
}

CrossEntropyResult cross_entropy_with_grad(const MatrixXd& logits, const std::vector<int>& labels) {
  if (static_cast<std::size_t>(logits.rows()) != labels.size())
    throw InvalidArgument("cross_entropy: logits/labels size mismatch");
  CrossEntropyResult res;
  res.d_logits = MatrixXd::Zero(logits.rows(), logits.cols());
  if (labels.empty()) return res;
  const double inv_n = 1.0 / static_cast<double>(labels.size());
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    const int y = labels[static_cast<std::size_t>(i)];
    if (y < 0 || y >= logits.cols())
      throw InvalidArgument("cross_entropy: label " + std::to_string(y) + " out of range");
    const double m = logits.row(i).maxCoeff();
    const Eigen::RowVectorXd e = (logits.row(i).array() - m).exp();
    const double z = e.sum();
    res.loss += (m + std::log(z) - logits(i, y)) * inv_n;
    res.d_logits.row(i) = e / z * inv_n;
    res.d_logits(i, y) -= inv_n;
  }
  return res;
}

double cross_entropy(const MatrixXd& logits, const std::vector<int>& labels) {
  return cross_entropy_with_grad(logits, labels).loss;
}

double total_loss(const LossComponents& c, const LossWeights& w) {
  const std::pair<const char*, double> terms[] = {{"L_CDIA", c.cdia},
                                                  {"L_CES", c.ce_source},
                                                  {"L_CET", c.ce_target},
                                                  {"L_CEA", c.ce_synth},
                                                  {"L_aux", c.aux}};
  for (const auto& [name, v] : terms)
    if (!std::isfinite(v)) throw NonFiniteLoss(name, v);
  return w.cdia * c.cdia + w.ce_source * c.ce_source + w.ce_target * c.ce_target +
         w.ce_synth * c.ce_synth + w.aux * c.aux;
}

}  // namespace relamix
