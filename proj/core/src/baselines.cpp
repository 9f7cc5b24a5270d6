#include "relamix/baselines.hpp"

#include <algorithm>
#include <limits>
#include <numeric>

#include "relamix/errors.hpp"
#include "relamix/random.hpp"

namespace relamix {

using Eigen::MatrixXd;
using Eigen::VectorXd;

std::string_view to_string(BaselineMethod m) {
  switch (m) {
    case BaselineMethod::kRandom: return "random";
    case BaselineMethod::kKnn: return "knn";
    case BaselineMethod::kNearestCenter: return "nearest_center";
    case BaselineMethod::kNearestNeighbor: return "nearest_neighbor";
  }
  return "unknown";
}

VectorXd pool_video_feature(const SnippetSequence& seq) {
  return seq.features.cast<double>().colwise().mean().transpose();
}

MatrixXd pool_dataset(const FeatureDataset& ds) {
  MatrixXd out(static_cast<Eigen::Index>(ds.size()), ds.dim());
  for (std::size_t i = 0; i < ds.size(); ++i)
    out.row(static_cast<Eigen::Index>(i)) = pool_video_feature(ds[i]).transpose();
  return out;
}

std::vector<int> labels_of(const FeatureDataset& ds) {
  std::vector<int> out;
  out.reserve(ds.size());
  for (const auto& s : ds.sequences()) out.push_back(s.label);
  return out;
}

namespace {

double distance(const VectorXd& a, const VectorXd& b, DistanceMetric metric) {
  if (metric == DistanceMetric::kEuclidean) return (a - b).norm();
  const double na = a.norm(), nb = b.norm();
  return 1.0 - ((na == 0.0 || nb == 0.0) ? 0.0 : a.dot(b) / (na * nb));
}

void check_source(const MatrixXd& source, const std::vector<int>& labels) {
  if (source.rows() == 0) throw InvalidArgument("baseline: empty source set");
  if (static_cast<std::size_t>(source.rows()) != labels.size())
    throw InvalidArgument("baseline: source/labels size mismatch");
}

}  // namespace

std::vector<int> predict_random(std::size_t test_count, int class_count, std::uint64_t seed) {
  if (class_count < 1) throw InvalidArgument("predict_random: class_count must be >= 1");
  Rng rng(derive_seed(seed, {tag(Stream::kBaseline)}));
  std::uniform_int_distribution<int> pick(0, class_count - 1);
  std::vector<int> out(test_count);
  for (auto& v : out) v = pick(rng);
  return out;
}

std::vector<int> predict_knn(const MatrixXd& source, const std::vector<int>& source_labels,
                             const MatrixXd& test, int k, DistanceMetric metric) {
  check_source(source, source_labels);
  if (k < 1 || k > source.rows())
    throw InvalidArgument("predict_knn: k=" + std::to_string(k) + " outside [1, " +
                          std::to_string(source.rows()) + "]");
  const int classes = *std::max_element(source_labels.begin(), source_labels.end()) + 1;
  std::vector<int> out;
  out.reserve(static_cast<std::size_t>(test.rows()));
  std::vector<std::pair<double, Eigen::Index>> dist(static_cast<std::size_t>(source.rows()));
  for (Eigen::Index t = 0; t < test.rows(); ++t) {
    const VectorXd q = test.row(t).transpose();
    for (Eigen::Index s = 0; s < source.rows(); ++s)
      dist[static_cast<std::size_t>(s)] = {distance(q, source.row(s).transpose(), metric), s};
    std::partial_sort(dist.begin(), dist.begin() + k, dist.end());
    std::vector<int> votes(static_cast<std::size_t>(classes), 0);
    for (int i = 0; i < k; ++i)
      ++votes[static_cast<std::size_t>(source_labels[static_cast<std::size_t>(dist[static_cast<std::size_t>(i)].second)])];
    out.push_back(static_cast<int>(std::max_element(votes.begin(), votes.end()) - votes.begin()));
  }
  return out;
}

std::vector<int> predict_nearest_neighbor(const MatrixXd& source, const std::vector<int>& source_labels,
                                          const MatrixXd& test, DistanceMetric metric) {
  check_source(source, source_labels);
  std::vector<int> out;
  out.reserve(static_cast<std::size_t>(test.rows()));
  for (Eigen::Index t = 0; t < test.rows(); ++t) {
    const VectorXd q = test.row(t).transpose();
    double best = std::numeric_limits<double>::infinity();
    Eigen::Index arg = 0;
    for (Eigen::Index s = 0; s < source.rows(); ++s) {
      const double dd = distance(q, source.row(s).transpose(), metric);
      if (dd < best) {
        best = dd;
        arg = s;
      }
    }
    out.push_back(source_labels[static_cast<std::size_t>(arg)]);
  }
  return out;
}

std::vector<int> predict_nearest_center(const MatrixXd& source, const std::vector<int>& source_labels,
                                        const MatrixXd& test, int class_count, DistanceMetric metric) {
  check_source(source, source_labels);
  MatrixXd centers = MatrixXd::Zero(class_count, source.cols());
  std::vector<int> counts(static_cast<std::size_t>(class_count), 0);
  for (Eigen::Index s = 0; s < source.rows(); ++s) {
    centers.row(source_labels[static_cast<std::size_t>(s)]) += source.row(s);
    ++counts[static_cast<std::size_t>(source_labels[static_cast<std::size_t>(s)])];
  }
  std::vector<int> present;
  for (int c = 0; c < class_count; ++c) {
    if (counts[static_cast<std::size_t>(c)] == 0) continue;
    centers.row(c) /= counts[static_cast<std::size_t>(c)];
    present.push_back(c);
  }
  std::vector<int> out;
  out.reserve(static_cast<std::size_t>(test.rows()));
  for (Eigen::Index t = 0; t < test.rows(); ++t) {
    const VectorXd q = test.row(t).transpose();
    double best = std::numeric_limits<double>::infinity();
    int arg = present.front();
    for (int c : present) {
      const double dd = distance(q, centers.row(c).transpose(), metric);
      if (dd < best) {
        best = dd;
        arg = c;
      }
    }
    out.push_back(arg);
  }
  return out;
}

double accuracy_percent(const std::vector<int>& predicted, const std::vector<int>& truth) {
  if (predicted.size() != truth.size())
    throw InvalidArgument("accuracy: prediction/label size mismatch");
  if (truth.empty()) throw InvalidArgument("accuracy: empty test set");
  std::size_t correct = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) correct += predicted[i] == truth[i];
  return 100.0 * static_cast<double>(correct) / static_cast<double>(truth.size());
}

std::vector<BaselineReport> run_baselines(const FeatureDataset& source, const FeatureDataset& test,
                                          std::uint64_t seed, DistanceMetric metric) {
  if (source.empty()) throw InvalidArgument("run_baselines: empty source set");
  if (test.empty()) throw InvalidArgument("run_baselines: empty test set");
  const MatrixXd src = pool_dataset(source), tst = pool_dataset(test);
  const auto src_labels = labels_of(source), truth = labels_of(test);
  std::vector<BaselineReport> out;

  BaselineReport random{BaselineMethod::kRandom, {}, 0.0, seed};
  random.accuracy = accuracy_percent(predict_random(test.size(), test.class_count(), seed), truth);
  out.push_back(random);

  BaselineReport knn{BaselineMethod::kKnn, {}, 0.0, seed};
  double sum = 0.0;
  for (int k : kKnnNeighbourCounts) {
    const int kk = std::min<int>(k, static_cast<int>(src.rows()));
    const double acc = accuracy_percent(predict_knn(src, src_labels, tst, kk, metric), truth);
    knn.per_k_accuracy[k] = acc;
    sum += acc;
  }
  knn.accuracy = sum / static_cast<double>(kKnnNeighbourCounts.size());
  out.push_back(knn);

  out.push_back({BaselineMethod::kNearestCenter, {},
                 accuracy_percent(predict_nearest_center(src, src_labels, tst,
                                                         source.class_count(), metric), truth),
                 seed});
  out.push_back({BaselineMethod::kNearestNeighbor, {},
                 accuracy_percent(predict_nearest_neighbor(src, src_labels, tst, metric), truth),
                 seed});
  return out;
}

}  // namespace relamix
