#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "relamix/data_model.hpp"
#include "relamix/losses.hpp"
#include "relamix/relation_sets.hpp"
#include "relamix/sdfm.hpp"
#include "relamix/tran_rd.hpp"

namespace relamix {

enum class NegativePool { kMixed, kSourceOnly };
enum class CdiaPositive { kPrototype, kPermuted };

struct AblationFlags {
  bool disable_rd_mhsa = false;     ///< relation attention replaced by an MLP block
  bool disable_scale_mhsa = false;  ///< scale-wise attention replaced by averaging
  bool disable_rd = false;          ///< no relation dropout
  bool disable_tran_rd = false;     ///< mean-pool aggregator
  bool disable_sdfm = false;        ///< no synthesized set (drops L_CEA and L_aux)
  bool disable_cdia = false;        ///< drops L_CDIA
  bool source_only = false;         ///< source cross-entropy only; no target data

  /// Applies a comma-free ablation name ("sdfm", "cdia", "tran_rd", "rd_mhsa",
  /// "scale_mhsa", "rd", "source_only"). Unknown names throw.
  void apply(const std::string& name);
  std::vector<std::string> names() const;
};

/// Every hyperparameter of a run.
struct ExperimentConfig {
  int shot_count = 5;
  std::uint64_t seed = 0;
  int epochs = 100;
  int batch_size = 32;
  double initial_lr = 1e-4;
  std::vector<int> lr_decay_epochs = {60, 80};
  double lr_decay_factor = 0.1;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_epsilon = 1e-8;
  LossWeights weights;
  int top_k = kDefaultTopK;
  double alpha = kDefaultAlpha;
  double beta = 0.5;
  int heads = 8;
  int ffn_width = 0;
  HeadMode head_mode = HeadMode::kSum;
  int tuples_per_scale = kDefaultTuplesPerScale;
  int per_class_synth = kDefaultPerClassSynth;
  int negatives_per_anchor = 15;
  NegativePool negatives = NegativePool::kMixed;
  CdiaPositive cdia_positive = CdiaPositive::kPrototype;
  bool refresh_synthesized = false;
  std::uint64_t plan_seed = 0;  ///< relation plan used for evaluation
  int eval_every = 0;           ///< 0: evaluate the test set after the last epoch only
  AblationFlags ablation;

  double learning_rate(int epoch) const;
  TranRdConfig model_config(int dim, int class_count) const;
  void validate() const;
};

/// One sample as fed to the aggregator in a step.
struct SampleRef {
  const SnippetSequence* sequence = nullptr;
  std::vector<int> permutation;  ///< snippet order; empty means identity
  std::uint64_t dropout_seed = 0;
};

/// Negatives of one anchor; indices address a pool built by evaluate_step().
struct AnchorNegatives {
  std::size_t anchor = 0;
  std::vector<int> pool_rows;
};

/// Fully drawn description of one optimization step. Evaluating it is a pure
/// function of the parameters, which is what finite-difference checks need.
struct StepBatch {
  std::vector<SampleRef> source;
  std::vector<SampleRef> target;
  std::vector<SampleRef> synth;
  std::vector<SampleRef> synth_permuted;   ///< positives for L_aux, parallel to synth
  std::vector<SampleRef> source_permuted;  ///< CDIA positives when kPermuted
  /// CDIA pool rows: source, then synth when the pool is mixed.
  std::vector<AnchorNegatives> cdia;
  /// L_aux pool rows: synth, then target.
  std::vector<AnchorNegatives> aux;
  bool mixed_pool = true;
};

struct StepResult {
  LossComponents components;
  double total = 0.0;
};

/// Forward (and, when `grad` is non-null, backward) pass of one step.
/// `prototypes` may be null when batch.cdia is empty or positives are permuted.
StepResult evaluate_step(const TranRdParameters& params, const StepBatch& batch,
                         const RelationPlan& plan, const PrototypeBank* prototypes,
                         const LossWeights& weights, Mode mode, Eigen::VectorXd* grad);

/// Adaptive-moment optimizer over the flat parameter vector.
class AdamOptimizer {
 public:
  AdamOptimizer(Eigen::Index size, double beta1, double beta2, double epsilon);
  void step(Eigen::VectorXd& params, const Eigen::VectorXd& grad, double lr);
  long steps() const { return t_; }

 private:
  Eigen::VectorXd m_, v_;
  double beta1_, beta2_, epsilon_;
  long t_ = 0;
};

struct StepLog {
  long step = 0;
  int epoch = 0;
  LossComponents components;
  double total = 0.0;
};

struct EpochMetrics {
  int epoch = 0;
  double learning_rate = 0.0;
  LossComponents mean_components;
  double mean_total = 0.0;
  double test_accuracy = std::numeric_limits<double>::quiet_NaN();
};

struct EvalReport {
  double accuracy = 0.0;                    ///< percent
  std::vector<double> per_class_accuracy;   ///< percent; NaN for absent classes
  std::vector<int> predictions;
  std::vector<int> labels;
  Eigen::MatrixXd logits;                   ///< (N x C)
};

struct TrainResult {
  TranRdParameters params;
  std::vector<EpochMetrics> epochs;
  std::vector<StepLog> steps;
  FeatureDataset synthesized;
  EvalReport final_eval;  ///< filled when a test set is given
};

using EpochCallback = std::function<void(const EpochMetrics&)>;

/// Co-training over source, few-shot target and synthesized sets.
TrainResult train(const FeatureDataset& source, const FeatureDataset& target_fewshot,
                  const ExperimentConfig& config, const FeatureDataset* target_test = nullptr,
                  const EpochCallback& on_epoch = {});

/// Evaluation-mode embeddings (rows) of every sequence of `ds`.
Eigen::MatrixXd embed_dataset(const TranRdParameters& params, const FeatureDataset& ds,
                              const RelationPlan& plan);

EvalReport evaluate(const TranRdParameters& params, const FeatureDataset& test,
                    std::uint64_t plan_seed, int tuples_per_scale = kDefaultTuplesPerScale);

/// Accuracy summary computed from a logits matrix (argmax, lowest index on ties).
EvalReport report_from_logits(const Eigen::MatrixXd& logits, const std::vector<int>& labels,
                              int class_count);

}  // namespace relamix
