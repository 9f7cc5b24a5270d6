#include "relamix/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "relamix/baselines.hpp"
#include "relamix/errors.hpp"
#include "relamix/random.hpp"

namespace relamix {

using Eigen::MatrixXd;
using Eigen::VectorXd;

// ---------------------------------------------------------------------------
// Configuration

void AblationFlags::apply(const std::string& name) {
  if (name == "rd_mhsa") disable_rd_mhsa = true;
  else if (name == "scale_mhsa") disable_scale_mhsa = true;
  else if (name == "rd") disable_rd = true;
  else if (name == "tran_rd") disable_tran_rd = true;
  else if (name == "sdfm") disable_sdfm = true;
  else if (name == "cdia") disable_cdia = true;
  else if (name == "source_only") source_only = true;
  else
    throw InvalidArgument("unknown ablation '" + name +
                          "' (expected rd_mhsa, scale_mhsa, rd, tran_rd, sdfm, cdia, source_only)");
}

std::vector<std::string> AblationFlags::names() const {
  std::vector<std::string> out;
  if (disable_rd_mhsa) out.emplace_back("rd_mhsa");
  if (disable_scale_mhsa) out.emplace_back("scale_mhsa");
  if (disable_rd) out.emplace_back("rd");
  if (disable_tran_rd) out.emplace_back("tran_rd");
  if (disable_sdfm) out.emplace_back("sdfm");
  if (disable_cdia) out.emplace_back("cdia");
  if (source_only) out.emplace_back("source_only");
  return out;
}

double ExperimentConfig::learning_rate(int epoch) const {
  double lr = initial_lr;
  for (int e : lr_decay_epochs)
    if (epoch >= e) lr *= lr_decay_factor;
  return lr;
}

TranRdConfig ExperimentConfig::model_config(int dim, int class_count) const {
  TranRdConfig m;
  m.dim = dim;
  m.class_count = class_count;
  m.heads = heads;
  m.ffn_width = ffn_width;
  m.dropout = beta;
  m.head_mode = head_mode;
  m.relation_attention = !ablation.disable_rd_mhsa;
  m.scale_attention = !ablation.disable_scale_mhsa;
  m.relation_dropout = !ablation.disable_rd;
  const bool all_tran_parts_off =
      ablation.disable_rd_mhsa && ablation.disable_scale_mhsa && ablation.disable_rd;
  m.aggregator = (ablation.disable_tran_rd || all_tran_parts_off) ? AggregatorKind::kMeanPool
                                                                  : AggregatorKind::kTranRd;
  return m;
}

void ExperimentConfig::validate() const {
  if (shot_count < 1) throw InvalidArgument("config: shot_count must be >= 1");
  if (epochs < 1) throw InvalidArgument("config: epochs must be >= 1");
  if (batch_size < 1) throw InvalidArgument("config: batch_size must be >= 1");
  if (!(initial_lr > 0)) throw InvalidArgument("config: initial_lr must be > 0");
  if (top_k < 1) throw InvalidArgument("config: top_k must be >= 1");
  if (!(alpha > 0)) throw InvalidArgument("config: alpha must be > 0");
  if (!(beta >= 0 && beta < 1)) throw InvalidArgument("config: beta must lie in [0, 1)");
  if (tuples_per_scale < 1) throw InvalidArgument("config: tuples_per_scale must be >= 1");
  if (per_class_synth < 1) throw InvalidArgument("config: per_class_synth must be >= 1");
  if (negatives_per_anchor < 1) throw InvalidArgument("config: negatives_per_anchor must be >= 1");
  const auto& w = weights;
  for (double v : {w.cdia, w.ce_source, w.ce_target, w.ce_synth, w.aux})
    if (!(v >= 0)) throw InvalidArgument("config: loss weights must be non-negative");
}

// ---------------------------------------------------------------------------
// One step

namespace {

MatrixXd sample_matrix(const SampleRef& ref) {
  const MatrixXd x = ref.sequence->features.cast<double>();
  if (ref.permutation.empty()) return x;
  MatrixXd out(x.rows(), x.cols());
  for (std::size_t i = 0; i < ref.permutation.size(); ++i)
    out.row(static_cast<Eigen::Index>(i)) = x.row(ref.permutation[i]);
  return out;
}

struct Group {
  const std::vector<SampleRef>* refs = nullptr;
  MatrixXd embeddings;
  std::vector<AggregateTrace> traces;
  MatrixXd d_embeddings;

  void forward(const TranRdParameters& params, const std::vector<SampleRef>& samples,
               const RelationPlan& plan, Mode mode, bool keep_traces) {
    refs = &samples;
    const auto n = static_cast<Eigen::Index>(samples.size());
    embeddings.resize(n, params.config().dim);
    traces.resize(keep_traces ? samples.size() : 0);
    for (std::size_t i = 0; i < samples.size(); ++i) {
      const auto emb = aggregate(params, sample_matrix(samples[i]), plan, mode,
                                 samples[i].dropout_seed, keep_traces ? &traces[i] : nullptr);
      embeddings.row(static_cast<Eigen::Index>(i)) = emb.vector.transpose();
    }
    d_embeddings = MatrixXd::Zero(n, params.config().dim);
  }

  std::vector<int> labels() const {
    std::vector<int> out;
    for (const auto& r : *refs) out.push_back(r.sequence->label);
    return out;
  }

  Eigen::Index size() const { return embeddings.rows(); }
};

// Cross-entropy over a group; accumulates weighted gradients.
double group_cross_entropy(const TranRdParameters& params, Group& g, double weight,
                           VectorXd* grad) {
  if (g.size() == 0) return 0.0;
  MatrixXd logits(g.size(), params.config().class_count);
  for (Eigen::Index i = 0; i < g.size(); ++i)
    logits.row(i) = classify(params, g.embeddings.row(i).transpose()).transpose();
  auto ce = cross_entropy_with_grad(logits, g.labels());
  if (grad && weight != 0.0) {
    for (Eigen::Index i = 0; i < g.size(); ++i) {
      const VectorXd d_logits = weight * ce.d_logits.row(i).transpose();
      g.d_embeddings.row(i) +=
          classify_backward(params, g.embeddings.row(i).transpose(), d_logits, *grad).transpose();
    }
  }
  return ce.loss;
}

struct PoolPart {
  Group* group;
  Eigen::Index offset;
};

double group_contrastive(const std::vector<AnchorNegatives>& anchors_spec, Group& anchors,
                         const MatrixXd& positives_all, Group* positive_group,
                         const std::vector<PoolPart>& parts, double weight, VectorXd* grad) {
  if (anchors_spec.empty()) return 0.0;
  Eigen::Index pool_rows = 0;
  for (const auto& p : parts) pool_rows = std::max(pool_rows, p.offset + p.group->size());
  MatrixXd pool(pool_rows, anchors.embeddings.cols());
  for (const auto& p : parts) pool.middleRows(p.offset, p.group->size()) = p.group->embeddings;

  const auto n = static_cast<Eigen::Index>(anchors_spec.size());
  MatrixXd a(n, anchors.embeddings.cols()), pos(n, anchors.embeddings.cols());
  ContrastiveBatch batch;
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto row = static_cast<Eigen::Index>(anchors_spec[static_cast<std::size_t>(i)].anchor);
    a.row(i) = anchors.embeddings.row(row);
    pos.row(i) = positives_all.row(row);
    batch.negatives.push_back(anchors_spec[static_cast<std::size_t>(i)].pool_rows);
  }
  batch.anchors = &a;
  batch.positives = &pos;
  batch.pool = &pool;
  auto res = contrastive_loss(batch);
  if (grad && weight != 0.0) {
    for (Eigen::Index i = 0; i < n; ++i) {
      const auto row = static_cast<Eigen::Index>(anchors_spec[static_cast<std::size_t>(i)].anchor);
      anchors.d_embeddings.row(row) += weight * res.d_anchors.row(i);
      if (positive_group) positive_group->d_embeddings.row(row) += weight * res.d_positives.row(i);
    }
    for (const auto& p : parts)
      p.group->d_embeddings += weight * res.d_pool.middleRows(p.offset, p.group->size());
  }
  return res.loss;
}

}  // namespace

StepResult evaluate_step(const TranRdParameters& params, const StepBatch& batch,
                         const RelationPlan& plan, const PrototypeBank* prototypes,
                         const LossWeights& weights, Mode mode, VectorXd* grad) {
  const bool keep = grad != nullptr;
  Group source, target, synth, synth_perm, source_perm;
  source.forward(params, batch.source, plan, mode, keep);
  target.forward(params, batch.target, plan, mode, keep);
  synth.forward(params, batch.synth, plan, mode, keep);
  synth_perm.forward(params, batch.synth_permuted, plan, mode, keep);
  source_perm.forward(params, batch.source_permuted, plan, mode, keep);

  StepResult res;
  auto& c = res.components;
  c.ce_source = group_cross_entropy(params, source, weights.ce_source, grad);
  c.ce_target = group_cross_entropy(params, target, weights.ce_target, grad);
  c.ce_synth = group_cross_entropy(params, synth, weights.ce_synth, grad);

  if (!batch.cdia.empty()) {
    MatrixXd positives;
    Group* positive_group = nullptr;
    if (!batch.source_permuted.empty()) {
      if (source_perm.size() != source.size())
        throw InvalidArgument("evaluate_step: source_permuted must parallel source");
      positives = source_perm.embeddings;
      positive_group = &source_perm;
    } else {
      if (!prototypes) throw InvalidArgument("evaluate_step: CDIA needs a prototype bank");
      positives.resize(source.size(), source.embeddings.cols());
      for (Eigen::Index i = 0; i < source.size(); ++i) {
        const int label = batch.source[static_cast<std::size_t>(i)].sequence->label;
        if (label >= prototypes->class_count())
          throw InvalidArgument("evaluate_step: class " + std::to_string(label) +
                                " missing from the prototype bank");
        positives.row(i) = prototypes->prototypes.row(label);
      }
    }
    std::vector<PoolPart> parts = {{&source, 0}};
    if (batch.mixed_pool) parts.push_back({&synth, source.size()});
    c.cdia = group_contrastive(batch.cdia, source, positives, positive_group, parts,
                               weights.cdia, grad);
  }
  if (!batch.aux.empty()) {
    if (synth_perm.size() != synth.size())
      throw InvalidArgument("evaluate_step: synth_permuted must parallel synth");
    c.aux = group_contrastive(batch.aux, synth, synth_perm.embeddings, &synth_perm,
                              {{&synth, 0}, {&target, synth.size()}}, weights.aux, grad);
  }
  res.total = total_loss(c, weights);

  if (grad) {
    for (Group* g : {&source, &target, &synth, &synth_perm, &source_perm})
      for (Eigen::Index i = 0; i < g->size(); ++i)
        if (!g->d_embeddings.row(i).isZero(0.0))
          aggregate_backward(params, g->traces[static_cast<std::size_t>(i)],
                             g->d_embeddings.row(i).transpose(), *grad);
  }
  return res;
}

// ---------------------------------------------------------------------------
// Optimizer

AdamOptimizer::AdamOptimizer(Eigen::Index size, double beta1, double beta2, double epsilon)
    : m_(VectorXd::Zero(size)), v_(VectorXd::Zero(size)),
      beta1_(beta1), beta2_(beta2), epsilon_(epsilon) {}

void AdamOptimizer::step(VectorXd& params, const VectorXd& grad, double lr) {
  ++t_;
  m_ = beta1_ * m_ + (1.0 - beta1_) * grad;
  v_ = beta2_ * v_ + (1.0 - beta2_) * grad.cwiseProduct(grad);
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  params.array() -= lr * (m_.array() / c1) / ((v_.array() / c2).sqrt() + epsilon_);
}

// ---------------------------------------------------------------------------
// Training loop

namespace {

std::vector<int> random_permutation(int n, Rng& rng) {
  std::vector<int> p(static_cast<std::size_t>(n));
  std::iota(p.begin(), p.end(), 0);
  std::shuffle(p.begin(), p.end(), rng);
  return p;
}

std::vector<std::size_t> draw_indices(std::size_t available, std::size_t count,
                                      bool with_replacement, Rng& rng) {
  std::vector<std::size_t> out;
  if (available == 0) return out;
  if (with_replacement) {
    std::uniform_int_distribution<std::size_t> pick(0, available - 1);
    for (std::size_t i = 0; i < count; ++i) out.push_back(pick(rng));
    return out;
  }
  std::vector<std::size_t> all(available);
  std::iota(all.begin(), all.end(), std::size_t{0});
  std::sample(all.begin(), all.end(), std::back_inserter(out), count, rng);
  std::shuffle(out.begin(), out.end(), rng);
  return out;
}

// Up to `per_anchor` pool rows whose label differs from the anchor's.
std::vector<AnchorNegatives> draw_negatives(const std::vector<int>& anchor_labels,
                                            const std::vector<int>& pool_labels,
                                            int per_anchor, Rng& rng) {
  std::vector<AnchorNegatives> out;
  for (std::size_t i = 0; i < anchor_labels.size(); ++i) {
    std::vector<int> eligible;
    for (std::size_t j = 0; j < pool_labels.size(); ++j)
      if (pool_labels[j] != anchor_labels[i]) eligible.push_back(static_cast<int>(j));
    if (eligible.empty()) continue;
    AnchorNegatives an{i, {}};
    std::sample(eligible.begin(), eligible.end(), std::back_inserter(an.pool_rows),
                static_cast<std::size_t>(per_anchor), rng);
    out.push_back(std::move(an));
  }
  return out;
}

std::vector<int> labels_of(const std::vector<SampleRef>& refs) {
  std::vector<int> out;
  for (const auto& r : refs) out.push_back(r.sequence->label);
  return out;
}

void accumulate(LossComponents& acc, const LossComponents& c, double scale) {
  acc.cdia += scale * c.cdia;
  acc.ce_source += scale * c.ce_source;
  acc.ce_target += scale * c.ce_target;
  acc.ce_synth += scale * c.ce_synth;
  acc.aux += scale * c.aux;
}

}  // namespace

MatrixXd embed_dataset(const TranRdParameters& params, const FeatureDataset& ds,
                       const RelationPlan& plan) {
  MatrixXd out(static_cast<Eigen::Index>(ds.size()), params.config().dim);
  for (std::size_t i = 0; i < ds.size(); ++i)
    out.row(static_cast<Eigen::Index>(i)) =
        aggregate(params, ds[i].features.cast<double>(), plan, Mode::kEval, 0).vector.transpose();
  return out;
}

TrainResult train(const FeatureDataset& source, const FeatureDataset& target_fewshot,
                  const ExperimentConfig& config, const FeatureDataset* target_test,
                  const EpochCallback& on_epoch) {
  config.validate();
  if (source.empty()) throw InvalidArgument("train: empty source set");
  const int T = source.snippet_count(), d = source.dim(), C = source.class_count();
  const auto& ab = config.ablation;
  const bool use_target = !ab.source_only;
  if (use_target) {
    if (target_fewshot.empty()) throw InvalidArgument("train: empty few-shot target set");
    if (target_fewshot.snippet_count() != T || target_fewshot.dim() != d ||
        target_fewshot.class_count() != C)
      throw InvalidArgument("train: source and target shapes differ");
  }
  if (target_test && (target_test->snippet_count() != T || target_test->dim() != d ||
                      target_test->class_count() != C))
    throw InvalidArgument("train: source and test shapes differ");
  const bool use_synth = use_target && !ab.disable_sdfm;
  const bool use_cdia = use_target && !ab.disable_cdia;
  const bool permuted_cdia = config.cdia_positive == CdiaPositive::kPermuted;
  const bool mixed = use_synth && config.negatives == NegativePool::kMixed;

  TrainResult result;
  result.params = TranRdParameters(config.model_config(d, C));
  auto& params = result.params;
  params.initialize(config.seed);
  AdamOptimizer adam(params.size(), config.adam_beta1, config.adam_beta2, config.adam_epsilon);

  ClassSnippetStatistics stats;
  auto rebuild_synth = [&](int epoch) {
    result.synthesized = build_synthesized_set(
        target_fewshot, stats, config.top_k, config.alpha, config.per_class_synth,
        derive_seed(config.seed, {tag(Stream::kSdfm), static_cast<std::uint64_t>(epoch)}));
  };
  if (use_synth) {
    stats = compute_source_statistics(source);
    rebuild_synth(0);
  }

  const std::size_t B = static_cast<std::size_t>(config.batch_size);
  const std::size_t steps_per_epoch = (source.size() + B - 1) / B;
  long global_step = 0;
  VectorXd grad(params.size());

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    const auto e = static_cast<std::uint64_t>(epoch);
    const double lr = config.learning_rate(epoch);
    if (use_synth && config.refresh_synthesized && epoch > 0) rebuild_synth(epoch);
    const auto plan = make_relation_plan(T, config.tuples_per_scale,
                                         derive_seed(config.seed, {tag(Stream::kPlan), e}));
    PrototypeBank bank;
    if (use_cdia && !permuted_cdia) {
      bank = compute_prototypes(embed_dataset(params, target_fewshot, plan),
                                relamix::labels_of(target_fewshot), C, epoch);
    }

    Rng order_rng(derive_seed(config.seed, {tag(Stream::kBatch), e}));
    std::vector<std::size_t> order(source.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::shuffle(order.begin(), order.end(), order_rng);

    EpochMetrics metrics;
    metrics.epoch = epoch;
    metrics.learning_rate = lr;
    for (std::size_t s = 0; s < steps_per_epoch; ++s, ++global_step) {
      const auto st = static_cast<std::uint64_t>(s);
      Rng batch_rng(derive_seed(config.seed, {tag(Stream::kBatch), e, st + 1}));
      Rng perm_rng(derive_seed(config.seed, {tag(Stream::kPermutation), e, st}));
      Rng neg_rng(derive_seed(config.seed, {tag(Stream::kNegatives), e, st}));
      auto dropout_seed = [&](std::uint64_t group, std::size_t slot) {
        return derive_seed(config.seed, {tag(Stream::kDropout), e, st, group, slot});
      };

      StepBatch batch;
      batch.mixed_pool = mixed;
      for (std::size_t i = s * B; i < std::min(source.size(), (s + 1) * B); ++i)
        batch.source.push_back({&source[order[i]], {}, dropout_seed(0, batch.source.size())});
      if (use_target) {
        const std::size_t avail = target_fewshot.size();
        const std::size_t count = std::min(B, avail);
        for (auto i : draw_indices(avail, count, avail < B, batch_rng))
          batch.target.push_back({&target_fewshot[i], {}, dropout_seed(1, batch.target.size())});
      }
      if (use_synth) {
        const auto& syn = result.synthesized;
        for (auto i : draw_indices(syn.size(), B, syn.size() < B, batch_rng)) {
          const std::size_t slot = batch.synth.size();
          batch.synth.push_back({&syn[i], {}, dropout_seed(2, slot)});
          batch.synth_permuted.push_back(
              {&syn[i], random_permutation(T, perm_rng), dropout_seed(3, slot)});
        }
      }
      if (use_cdia) {
        if (permuted_cdia)
          for (std::size_t i = 0; i < batch.source.size(); ++i)
            batch.source_permuted.push_back(
                {batch.source[i].sequence, random_permutation(T, perm_rng), dropout_seed(4, i)});
        auto pool_labels = labels_of(batch.source);
        if (mixed) {
          const auto syn_labels = labels_of(batch.synth);
          pool_labels.insert(pool_labels.end(), syn_labels.begin(), syn_labels.end());
        }
        batch.cdia = draw_negatives(labels_of(batch.source), pool_labels,
                                    config.negatives_per_anchor, neg_rng);
      }
      if (use_synth) {
        auto pool_labels = labels_of(batch.synth);
        const auto tgt_labels = labels_of(batch.target);
        pool_labels.insert(pool_labels.end(), tgt_labels.begin(), tgt_labels.end());
        batch.aux = draw_negatives(labels_of(batch.synth), pool_labels,
                                   config.negatives_per_anchor, neg_rng);
      }

      grad.setZero();
      const auto step = evaluate_step(params, batch, plan, use_cdia ? &bank : nullptr,
                                      config.weights, Mode::kTrain, &grad);
      adam.step(params.values(), grad, lr);
      result.steps.push_back({global_step, epoch, step.components, step.total});
      accumulate(metrics.mean_components, step.components,
                 1.0 / static_cast<double>(steps_per_epoch));
      metrics.mean_total += step.total / static_cast<double>(steps_per_epoch);
    }

    const bool last = epoch + 1 == config.epochs;
    if (target_test && (last || (config.eval_every > 0 && (epoch + 1) % config.eval_every == 0))) {
      auto report = evaluate(params, *target_test, config.plan_seed, config.tuples_per_scale);
      metrics.test_accuracy = report.accuracy;
      if (last) result.final_eval = std::move(report);
    }
    if (on_epoch) on_epoch(metrics);
    result.epochs.push_back(metrics);
  }
  return result;
}

// ---------------------------------------------------------------------------
// Evaluation

EvalReport report_from_logits(const MatrixXd& logits, const std::vector<int>& labels,
                              int class_count) {
  if (labels.empty()) throw InvalidArgument("evaluate: empty test set");
  if (static_cast<std::size_t>(logits.rows()) != labels.size())
    throw InvalidArgument("evaluate: logits/labels size mismatch");
  EvalReport rep;
  rep.logits = logits;
  rep.labels = labels;
  std::vector<int> correct(static_cast<std::size_t>(class_count), 0);
  std::vector<int> total(static_cast<std::size_t>(class_count), 0);
  std::size_t hits = 0;
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    Eigen::Index arg = 0;
    logits.row(i).maxCoeff(&arg);
    rep.predictions.push_back(static_cast<int>(arg));
    const auto y = static_cast<std::size_t>(labels[static_cast<std::size_t>(i)]);
    ++total[y];
    if (static_cast<int>(arg) == labels[static_cast<std::size_t>(i)]) {
      ++correct[y];
      ++hits;
    }
  }
  rep.accuracy = 100.0 * static_cast<double>(hits) / static_cast<double>(labels.size());
  for (int c = 0; c < class_count; ++c) {
    const auto k = static_cast<std::size_t>(c);
    rep.per_class_accuracy.push_back(
        total[k] == 0 ? std::numeric_limits<double>::quiet_NaN()
                      : 100.0 * correct[k] / static_cast<double>(total[k]));
  }
  return rep;
}

EvalReport evaluate(const TranRdParameters& params, const FeatureDataset& test,
                    std::uint64_t plan_seed, int tuples_per_scale) {
  if (test.empty()) throw InvalidArgument("evaluate: empty test set");
  const auto& cfg = params.config();
  RelationPlan plan;
  if (cfg.aggregator == AggregatorKind::kTranRd)
    plan = make_relation_plan(test.snippet_count(), tuples_per_scale, plan_seed);
  const MatrixXd emb = embed_dataset(params, test, plan);
  MatrixXd logits(emb.rows(), cfg.class_count);
  for (Eigen::Index i = 0; i < emb.rows(); ++i)
    logits.row(i) = classify(params, emb.row(i).transpose()).transpose();
  std::vector<int> labels;
  for (const auto& s : test.sequences()) labels.push_back(s.label);
  return report_from_logits(logits, labels, cfg.class_count);
}

}  // namespace relamix
