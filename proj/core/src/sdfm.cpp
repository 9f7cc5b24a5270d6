#include "relamix/sdfm.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

#include "relamix/errors.hpp"
#include "relamix/random.hpp"

namespace relamix {

using Eigen::MatrixXd;

ClassSnippetStatistics compute_source_statistics(const FeatureDataset& source) {
  const int C = source.class_count(), T = source.snippet_count(), d = source.dim();
  ClassSnippetStatistics stats;
  stats.mean.assign(static_cast<std::size_t>(C), MatrixXd::Zero(T, d));
  stats.std.assign(static_cast<std::size_t>(C), MatrixXd::Zero(T, d));
  stats.counts.assign(static_cast<std::size_t>(C), 0);

  for (const auto& s : source.sequences()) {
    if (s.domain != Domain::kSource) continue;
    stats.mean[static_cast<std::size_t>(s.label)] += s.features.cast<double>();
    ++stats.counts[static_cast<std::size_t>(s.label)];
  }
  for (int c = 0; c < C; ++c) {
    const int n = stats.counts[static_cast<std::size_t>(c)];
    if (n < 2)
      throw InvalidArgument("compute_source_statistics: class " + std::to_string(c) +
                            " has " + std::to_string(n) +
                            " source sequences; the sample std needs at least 2");
    stats.mean[static_cast<std::size_t>(c)] /= n;
  }
  for (const auto& s : source.sequences()) {
    if (s.domain != Domain::kSource) continue;
    const auto c = static_cast<std::size_t>(s.label);
    stats.std[c].array() += (s.features.cast<double>() - stats.mean[c]).array().square();
  }
  for (int c = 0; c < C; ++c) {
    auto& sd = stats.std[static_cast<std::size_t>(c)];
    sd = (sd.array() / (stats.counts[static_cast<std::size_t>(c)] - 1)).sqrt().matrix();
  }
  return stats;
}

std::vector<int> select_topk_centers(const Eigen::VectorXd& anchor_snippet,
                                     const ClassSnippetStatistics& stats,
                                     int snippet_index, int k) {
  const int C = stats.class_count();
  if (k < 1 || k > C)
    throw InvalidArgument("select_topk_centers: K=" + std::to_string(k) +
                          " outside [1, " + std::to_string(C) + "]");
  if (snippet_index < 0 || snippet_index >= stats.snippet_count())
    throw InvalidArgument("select_topk_centers: snippet index out of range");
  // exp(1 - D) is monotone in -D; ranking on -D directly avoids both exp
  // underflow for far centers and the rounding of 1 - D for near ones.
  std::vector<double> log_score(static_cast<std::size_t>(C));
  for (int c = 0; c < C; ++c) {
    const auto center = stats.mean[static_cast<std::size_t>(c)].row(snippet_index).transpose();
    log_score[static_cast<std::size_t>(c)] = -(center - anchor_snippet).norm();
  }
  std::vector<int> order(static_cast<std::size_t>(C));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    return log_score[static_cast<std::size_t>(a)] > log_score[static_cast<std::size_t>(b)];
  });
  order.resize(static_cast<std::size_t>(k));
  return order;
}

SynthesizedDistribution synthesize_distribution(const SnippetSequence& anchor,
                                                const ClassSnippetStatistics& stats,
                                                int k, double alpha) {
  if (anchor.domain != Domain::kTarget)
    throw InvalidArgument("synthesize_distribution: anchor " + anchor.sample_id +
                          " is not a target-domain sample");
  if (!(alpha > 0.0)) throw InvalidArgument("synthesize_distribution: alpha must be > 0");
  if (anchor.features.rows() != stats.snippet_count() || anchor.features.cols() != stats.dim())
    throw InvalidArgument("synthesize_distribution: anchor shape does not match statistics");
  const int T = stats.snippet_count(), d = stats.dim();
  SynthesizedDistribution dist;
  dist.anchor_id = anchor.sample_id;
  dist.label = anchor.label;
  dist.mean = MatrixXd::Zero(T, d);
  dist.std = MatrixXd::Zero(T, d);
  for (int t = 0; t < T; ++t) {
    const Eigen::VectorXd a = anchor.features.row(t).cast<double>().transpose();
    auto chosen = select_topk_centers(a, stats, t, k);
    Eigen::RowVectorXd mean_sum = a.transpose();
    Eigen::RowVectorXd std_sum = Eigen::RowVectorXd::Zero(d);
    for (int c : chosen) {
      mean_sum += stats.mean[static_cast<std::size_t>(c)].row(t);
      std_sum += stats.std[static_cast<std::size_t>(c)].row(t);
    }
    dist.mean.row(t) = mean_sum / (k + 1);
    dist.std.row(t) = (std_sum / k).array() + alpha;
    dist.selected_classes.push_back(std::move(chosen));
  }
  return dist;
}

std::vector<SnippetSequence> sample_features(const SynthesizedDistribution& dist, int count,
                                             std::uint64_t seed) {
  if (count < 1) throw InvalidArgument("sample_features: count must be >= 1");
  Rng rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<SnippetSequence> out;
  out.reserve(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) {
    Eigen::MatrixXf x(dist.mean.rows(), dist.mean.cols());
    for (Eigen::Index t = 0; t < x.rows(); ++t)
      for (Eigen::Index j = 0; j < x.cols(); ++j)
        x(t, j) = static_cast<float>(dist.mean(t, j) + dist.std(t, j) * normal(rng));
    char suffix[32];
    std::snprintf(suffix, sizeof suffix, "#syn%05d", i);
    out.push_back({dist.anchor_id + suffix, dist.label, Domain::kSynthesized, std::move(x)});
  }
  return out;
}

std::vector<int> split_evenly(int per_class_total, int anchors) {
  if (anchors < 1) throw InvalidArgument("split_evenly: need at least one anchor");
  std::vector<int> share(static_cast<std::size_t>(anchors), per_class_total / anchors);
  for (int i = 0; i < per_class_total % anchors; ++i) ++share[static_cast<std::size_t>(i)];
  return share;
}

FeatureDataset build_synthesized_set(const FeatureDataset& target_fewshot,
                                     const ClassSnippetStatistics& stats, int k,
                                     double alpha, int per_class_total,
                                     std::uint64_t seed) {
  if (per_class_total < 1)
    throw InvalidArgument("build_synthesized_set: per_class_total must be >= 1");
  const auto by_class = target_fewshot.indices_by_class();
  std::vector<SnippetSequence> out;
  for (std::size_t c = 0; c < by_class.size(); ++c) {
    if (by_class[c].empty())
      throw InvalidArgument("build_synthesized_set: class " + std::to_string(c) +
                            " has no few-shot anchor");
    const auto shares = split_evenly(per_class_total, static_cast<int>(by_class[c].size()));
    for (std::size_t a = 0; a < by_class[c].size(); ++a) {
      if (shares[a] == 0) continue;
      const auto& anchor = target_fewshot[by_class[c][a]];
      const auto dist = synthesize_distribution(anchor, stats, k, alpha);
      auto drawn = sample_features(
          dist, shares[a], derive_seed(seed, {tag(Stream::kSdfm), c, a}));
      std::move(drawn.begin(), drawn.end(), std::back_inserter(out));
    }
  }
  return FeatureDataset::make(std::move(out), target_fewshot.class_count(),
                              target_fewshot.snippet_count(), target_fewshot.dim());
}

FeatureDataset statistics_as_dataset(const ClassSnippetStatistics& stats) {
  std::vector<SnippetSequence> out;
  for (int c = 0; c < stats.class_count(); ++c) {
    char id[32];
    std::snprintf(id, sizeof id, "mean_c%03d", c);
    out.push_back({id, c, Domain::kSource, stats.mean[static_cast<std::size_t>(c)].cast<float>()});
    std::snprintf(id, sizeof id, "std_c%03d", c);
    out.push_back({id, c, Domain::kSource, stats.std[static_cast<std::size_t>(c)].cast<float>()});
  }
  return FeatureDataset::make(std::move(out), stats.class_count(), stats.snippet_count(),
                              stats.dim());
}

}  // namespace relamix
