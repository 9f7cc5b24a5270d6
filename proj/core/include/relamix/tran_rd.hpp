#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "relamix/relation_sets.hpp"

namespace relamix {

/// How the per-head attention outputs are combined inside one block.
///  kSum:    every head projects to the full width and the layer-normalized
///           head outputs are summed.
///  kConcat: heads project to width/heads, are concatenated, mixed by an output
///           projection and layer-normalized once (conventional MHSA).
enum class HeadMode { kSum, kConcat };

enum class AggregatorKind {
  kTranRd,    ///< relation attention + relation dropout + scale-wise attention
  kMeanPool,  ///< parameter-free mean over snippets
};

enum class Mode { kTrain, kEval };

struct TranRdConfig {
  int dim = 16;
  int class_count = 5;
  int heads = 8;
  int ffn_width = 0;       ///< 0 selects 2 * dim
  double dropout = 0.5;    ///< relation dropout ratio beta
  double ln_epsilon = 1e-5;
  HeadMode head_mode = HeadMode::kSum;
  AggregatorKind aggregator = AggregatorKind::kTranRd;
  bool relation_attention = true;  ///< false: RD-MHSA attention replaced by an MLP block
  bool scale_attention = true;     ///< false: scale-wise MHSA skipped (plain averaging)
  bool relation_dropout = true;

  int resolved_ffn_width() const { return ffn_width > 0 ? ffn_width : 2 * dim; }
  /// Width of the query/key space of one head.
  int key_width() const;
  /// Attention temperature d_k (equal for both blocks).
  double scale_factor() const { return static_cast<double>(dim) / heads; }
  void validate() const;
};

struct TensorSlot {
  std::string name;
  Eigen::Index offset = 0;
  Eigen::Index rows = 0;
  Eigen::Index cols = 0;
  Eigen::Index size() const { return rows * cols; }
};

/// Slot indices of one attention block inside the flat parameter vector.
struct BlockLayout {
  std::vector<std::size_t> query, key, value;    // per head
  std::vector<std::size_t> head_gain, head_bias; // per head, kSum only
  std::size_t output = 0, attn_gain = 0, attn_bias = 0;  // kConcat only
  std::size_t ffn_in = 0, ffn_in_bias = 0, ffn_out = 0, ffn_out_bias = 0;
  std::size_t gain = 0, bias = 0;
  bool has_attention = true;
};

/// Every learnable tensor of the aggregator and classifier head, stored in one
/// flat vector so optimizers and checkpoints can treat it uniformly.
class TranRdParameters {
 public:
  TranRdParameters() = default;
  explicit TranRdParameters(const TranRdConfig& config);

  const TranRdConfig& config() const { return config_; }
  const std::vector<TensorSlot>& slots() const { return slots_; }
  const BlockLayout& relation_block() const { return relation_; }
  const BlockLayout& scale_block() const { return scale_; }
  std::size_t classifier_weight() const { return classifier_w_; }
  std::size_t classifier_bias() const { return classifier_b_; }

  Eigen::VectorXd& values() { return values_; }
  const Eigen::VectorXd& values() const { return values_; }
  Eigen::Index size() const { return values_.size(); }

  Eigen::Map<Eigen::MatrixXd> tensor(std::size_t slot);
  Eigen::Map<const Eigen::MatrixXd> tensor(std::size_t slot) const;
  /// Views into a gradient vector laid out like values().
  Eigen::Map<Eigen::MatrixXd> tensor(std::size_t slot, Eigen::VectorXd& flat) const;

  /// Projections and FFN weights ~ N(0, 1/fan_in); biases and offsets 0;
  /// layer-norm gains 1; classifier zero.
  void initialize(std::uint64_t seed);

 private:
  std::size_t add(std::string name, Eigen::Index rows, Eigen::Index cols);
  BlockLayout add_block(const std::string& prefix, bool attention);

  TranRdConfig config_;
  std::vector<TensorSlot> slots_;
  BlockLayout relation_, scale_;
  std::size_t classifier_w_ = 0, classifier_b_ = 0;
  Eigen::VectorXd values_;
};

struct LayerNormTrace {
  Eigen::MatrixXd normalized;  ///< pre-affine (x - mean) / sqrt(var + eps)
  Eigen::VectorXd inv_std;
};

struct HeadTrace {
  Eigen::MatrixXd weights;  ///< row-stochastic attention matrix
  Eigen::MatrixXd output;
  LayerNormTrace norm;      ///< kSum only
};

/// Everything a block's backward pass needs.
struct BlockTrace {
  Eigen::MatrixXd input;
  Eigen::MatrixXd query, key, value;  ///< all heads side by side
  std::vector<HeadTrace> heads;
  Eigen::MatrixXd concat;     ///< kConcat only
  LayerNormTrace attn_norm;   ///< kConcat only
  Eigen::MatrixXd ffn_hidden; ///< pre-activation
  Eigen::MatrixXd ffn_active;
  LayerNormTrace out_norm;
  Eigen::MatrixXd output;
};

/// One attention block: LN[x + attention(x) + FFN(x)] with no positional
/// information, so it is permutation-equivariant over tokens.
Eigen::MatrixXd attention_block(const TranRdParameters& params,
                                const BlockLayout& block,
                                const Eigen::MatrixXd& tokens,
                                BlockTrace* trace = nullptr);

/// Accumulates parameter gradients into `grad`; returns d(tokens) when asked.
void attention_block_backward(const TranRdParameters& params,
                              const BlockLayout& block, const BlockTrace& trace,
                              const Eigen::MatrixXd& d_output,
                              Eigen::VectorXd& grad,
                              Eigen::MatrixXd* d_input = nullptr);

/// Number of tokens relation dropout keeps out of `r`.
int retained_count(int r, double beta);

struct RdMhsaResult {
  Eigen::MatrixXd attended;   ///< (r x d)
  std::vector<int> retained;  ///< kept token positions, increasing
  Eigen::MatrixXd kept;       ///< rows of `attended` listed in `retained`
};

/// Relation-dropout MHSA over one relation tuple.
RdMhsaResult rd_mhsa(const TranRdParameters& params,
                     const Eigen::MatrixXd& tuple_features, Mode mode,
                     std::uint64_t dropout_seed, BlockTrace* trace = nullptr);

/// Scale-wise MHSA over the tokens relation dropout retained.
Eigen::MatrixXd scale_wise_mhsa(const TranRdParameters& params,
                                const Eigen::MatrixXd& retained,
                                BlockTrace* trace = nullptr);

struct TupleTrace {
  RelationTuple tuple;
  std::vector<int> retained;
  BlockTrace relation;
  BlockTrace scale;
};

struct AggregateTrace {
  std::vector<std::vector<TupleTrace>> per_scale;
};

struct AggregatedEmbedding {
  Eigen::VectorXd vector;
  std::vector<Eigen::VectorXd> per_scale;  ///< one pooled vector per scale
};

/// f* = mean over scales of (mean over that scale's tuples of the token-mean
/// of scale_wise_mhsa(rd_mhsa(tuple))). `dropout_seed` only matters in
/// training mode.
AggregatedEmbedding aggregate(const TranRdParameters& params,
                              const Eigen::MatrixXd& sequence,
                              const RelationPlan& plan, Mode mode,
                              std::uint64_t dropout_seed,
                              AggregateTrace* trace = nullptr);

void aggregate_backward(const TranRdParameters& params,
                        const AggregateTrace& trace,
                        const Eigen::VectorXd& d_embedding,
                        Eigen::VectorXd& grad);

/// Affine classifier head; returns unnormalized logits.
Eigen::VectorXd classify(const TranRdParameters& params,
                         const Eigen::VectorXd& embedding);

/// Accumulates classifier gradients; returns d(embedding).
Eigen::VectorXd classify_backward(const TranRdParameters& params,
                                  const Eigen::VectorXd& embedding,
                                  const Eigen::VectorXd& d_logits,
                                  Eigen::VectorXd& grad);

// Exposed for tests.
Eigen::MatrixXd row_softmax(const Eigen::MatrixXd& scores);
Eigen::MatrixXd layer_norm(const Eigen::MatrixXd& x,
                           const Eigen::Ref<const Eigen::VectorXd>& gain,
                           const Eigen::Ref<const Eigen::VectorXd>& bias,
                           double epsilon,
                           LayerNormTrace* trace = nullptr);

}  // namespace relamix
