#include "relamix/tran_rd.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "relamix/errors.hpp"
#include "relamix/random.hpp"

namespace relamix {

using Eigen::MatrixXd;
using Eigen::VectorXd;

int TranRdConfig::key_width() const {
  return head_mode == HeadMode::kSum ? dim : dim / heads;
}

void TranRdConfig::validate() const {
  if (dim < 1) throw InvalidArgument("TranRdConfig: dim must be >= 1");
  if (class_count < 1) throw InvalidArgument("TranRdConfig: class_count must be >= 1");
  if (heads < 1) throw InvalidArgument("TranRdConfig: heads must be >= 1");
  if (head_mode == HeadMode::kConcat && dim % heads != 0)
    throw InvalidArgument("TranRdConfig: concat heads need dim divisible by heads");
  if (!(dropout >= 0.0 && dropout < 1.0))
    throw InvalidArgument("TranRdConfig: dropout must lie in [0, 1)");
  if (!(ln_epsilon > 0.0)) throw InvalidArgument("TranRdConfig: ln_epsilon must be > 0");
}

// ---------------------------------------------------------------------------
// Parameter layout

TranRdParameters::TranRdParameters(const TranRdConfig& config) : config_(config) {
  config_.validate();
  relation_ = add_block("relation", config_.relation_attention);
  scale_ = add_block("scale", config_.scale_attention);
  classifier_w_ = add("classifier.weight", config_.class_count, config_.dim);
  classifier_b_ = add("classifier.bias", config_.class_count, 1);
  Eigen::Index total = 0;
  for (const auto& s : slots_) total = std::max(total, s.offset + s.size());
  values_ = VectorXd::Zero(total);
}

std::size_t TranRdParameters::add(std::string name, Eigen::Index rows,
                                  Eigen::Index cols) {
  const Eigen::Index offset = slots_.empty() ? 0 : slots_.back().offset + slots_.back().size();
  slots_.push_back({std::move(name), offset, rows, cols});
  return slots_.size() - 1;
}

BlockLayout TranRdParameters::add_block(const std::string& prefix, bool attention) {
  const int d = config_.dim, dk = config_.key_width(), ff = config_.resolved_ffn_width();
  BlockLayout b;
  b.has_attention = attention;
  if (attention) {
    // Per-head projections are laid out back to back so that all heads of a
    // block can be applied with a single product.
    const int dv = config_.head_mode == HeadMode::kSum ? d : dk;
    auto head = [&](int h) { return prefix + ".head" + std::to_string(h); };
    for (int h = 0; h < config_.heads; ++h) b.query.push_back(add(head(h) + ".query", d, dk));
    for (int h = 0; h < config_.heads; ++h) b.key.push_back(add(head(h) + ".key", d, dk));
    for (int h = 0; h < config_.heads; ++h) b.value.push_back(add(head(h) + ".value", d, dv));
    if (config_.head_mode == HeadMode::kSum) {
      for (int h = 0; h < config_.heads; ++h) {
        b.head_gain.push_back(add(head(h) + ".norm.gain", d, 1));
        b.head_bias.push_back(add(head(h) + ".norm.bias", d, 1));
      }
    }
    if (config_.head_mode == HeadMode::kConcat) {
      b.output = add(prefix + ".output", d, d);
      b.attn_gain = add(prefix + ".attn_norm.gain", d, 1);
      b.attn_bias = add(prefix + ".attn_norm.bias", d, 1);
    }
  }
  b.ffn_in = add(prefix + ".ffn.in.weight", d, ff);
  b.ffn_in_bias = add(prefix + ".ffn.in.bias", ff, 1);
  b.ffn_out = add(prefix + ".ffn.out.weight", ff, d);
  b.ffn_out_bias = add(prefix + ".ffn.out.bias", d, 1);
  b.gain = add(prefix + ".norm.gain", d, 1);
  b.bias = add(prefix + ".norm.bias", d, 1);
  return b;
}

Eigen::Map<MatrixXd> TranRdParameters::tensor(std::size_t slot) {
  const auto& s = slots_.at(slot);
  return {values_.data() + s.offset, s.rows, s.cols};
}

Eigen::Map<const MatrixXd> TranRdParameters::tensor(std::size_t slot) const {
  const auto& s = slots_.at(slot);
  return {values_.data() + s.offset, s.rows, s.cols};
}

Eigen::Map<MatrixXd> TranRdParameters::tensor(std::size_t slot, VectorXd& flat) const {
  const auto& s = slots_.at(slot);
  return {flat.data() + s.offset, s.rows, s.cols};
}

void TranRdParameters::initialize(std::uint64_t seed) {
  Rng rng(derive_seed(seed, {tag(Stream::kInit)}));
  std::normal_distribution<double> normal(0.0, 1.0);
  values_.setZero();
  for (std::size_t i = 0; i < slots_.size(); ++i) {
    const auto& s = slots_[i];
    const bool is_gain = s.name.ends_with(".gain");
    const bool is_bias = s.name.ends_with(".bias");
    auto t = tensor(i);
    if (is_gain) {
      t.setOnes();
    } else if (is_bias || i == classifier_w_) {
      t.setZero();
    } else {
      const double std_dev = 1.0 / std::sqrt(static_cast<double>(s.rows));
      for (Eigen::Index k = 0; k < t.size(); ++k) t.data()[k] = std_dev * normal(rng);
    }
  }
}

// ---------------------------------------------------------------------------
// Primitives

MatrixXd row_softmax(const MatrixXd& scores) {
  MatrixXd out(scores.rows(), scores.cols());
  for (Eigen::Index i = 0; i < scores.rows(); ++i) {
    const double m = scores.row(i).maxCoeff();
    out.row(i) = (scores.row(i).array() - m).exp();
    out.row(i) /= out.row(i).sum();
  }
  return out;
}

MatrixXd layer_norm(const MatrixXd& x, const Eigen::Ref<const VectorXd>& gain,
                    const Eigen::Ref<const VectorXd>& bias, double epsilon,
                    LayerNormTrace* trace) {
  const auto n = static_cast<double>(x.cols());
  MatrixXd normalized(x.rows(), x.cols());
  VectorXd inv_std(x.rows());
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    const double mean = x.row(i).mean();
    const auto centered = (x.row(i).array() - mean).eval();
    const double var = centered.square().sum() / n;
    inv_std[i] = 1.0 / std::sqrt(var + epsilon);
    normalized.row(i) = centered * inv_std[i];
  }
  MatrixXd out = (normalized.array().rowwise() * gain.transpose().array()).matrix();
  out.rowwise() += bias.transpose();
  if (trace) *trace = {std::move(normalized), std::move(inv_std)};
  return out;
}

namespace {

// Returns d(x); accumulates d(gain), d(bias).
MatrixXd layer_norm_backward(const LayerNormTrace& t, const Eigen::Ref<const VectorXd>& gain,
                             const MatrixXd& d_out, Eigen::Map<MatrixXd> d_gain,
                             Eigen::Map<MatrixXd> d_bias) {
  d_gain += (d_out.array() * t.normalized.array()).colwise().sum().transpose().matrix();
  d_bias += d_out.colwise().sum().transpose();
  const MatrixXd d_norm = (d_out.array().rowwise() * gain.transpose().array()).matrix();
  MatrixXd d_x(d_out.rows(), d_out.cols());
  for (Eigen::Index i = 0; i < d_out.rows(); ++i) {
    const double mean_d = d_norm.row(i).mean();
    const double mean_dx = d_norm.row(i).dot(t.normalized.row(i)) / static_cast<double>(d_out.cols());
    d_x.row(i) = t.inv_std[i] *
                 (d_norm.row(i).array() - mean_d - t.normalized.row(i).array() * mean_dx).matrix();
  }
  return d_x;
}

constexpr double kGeluC = 0.7978845608028654;  // sqrt(2 / pi)
constexpr double kGeluA = 0.044715;

double gelu(double x) {
  return 0.5 * x * (1.0 + std::tanh(kGeluC * (x + kGeluA * x * x * x)));
}

double gelu_grad(double x) {
  const double u = kGeluC * (x + kGeluA * x * x * x);
  const double th = std::tanh(u);
  return 0.5 * (1.0 + th) + 0.5 * x * (1.0 - th * th) * kGeluC * (1.0 + 3.0 * kGeluA * x * x);
}

VectorXd column(const TranRdParameters& p, std::size_t slot) {
  return p.tensor(slot).col(0);
}

// All heads' projections of one kind as a single (d x H*cols) matrix.
Eigen::Map<const MatrixXd> stacked(const TranRdParameters& p, const std::vector<std::size_t>& slots) {
  const auto first = p.tensor(slots.front());
  return {first.data(), first.rows(), first.cols() * static_cast<Eigen::Index>(slots.size())};
}

Eigen::Map<MatrixXd> stacked(const TranRdParameters& p, const std::vector<std::size_t>& slots,
                             VectorXd& flat) {
  auto first = p.tensor(slots.front(), flat);
  return {first.data(), first.rows(), first.cols() * static_cast<Eigen::Index>(slots.size())};
}

}  // namespace

// ---------------------------------------------------------------------------
// Attention block

MatrixXd attention_block(const TranRdParameters& params, const BlockLayout& block,
                         const MatrixXd& tokens, BlockTrace* trace) {
  const auto& cfg = params.config();
  const double scale = 1.0 / std::sqrt(cfg.scale_factor());
  MatrixXd sum = tokens;
  if (trace) {
    trace->input = tokens;
    trace->heads.clear();
  }
  if (block.has_attention) {
    const Eigen::Index dk = cfg.key_width();
    const Eigen::Index dv = cfg.head_mode == HeadMode::kSum ? cfg.dim : dk;
    MatrixXd q = tokens * stacked(params, block.query);
    MatrixXd k = tokens * stacked(params, block.key);
    MatrixXd v = tokens * stacked(params, block.value);
    MatrixXd concat;
    if (cfg.head_mode == HeadMode::kConcat) concat.resize(tokens.rows(), dv * static_cast<Eigen::Index>(block.query.size()));
    for (std::size_t h = 0; h < block.query.size(); ++h) {
      const auto hi = static_cast<Eigen::Index>(h);
      HeadTrace ht;
      MatrixXd scores =
          scale * q.middleCols(hi * dk, dk).lazyProduct(k.middleCols(hi * dk, dk).transpose());
      ht.weights = row_softmax(scores);
      ht.output = ht.weights.lazyProduct(v.middleCols(hi * dv, dv));
      if (cfg.head_mode == HeadMode::kSum) {
        sum += layer_norm(ht.output, params.tensor(block.head_gain[h]).col(0),
                          params.tensor(block.head_bias[h]).col(0), cfg.ln_epsilon,
                          trace ? &ht.norm : nullptr);
      } else {
        concat.middleCols(hi * dv, dv) = ht.output;
      }
      if (trace) trace->heads.push_back(std::move(ht));
    }
    if (cfg.head_mode == HeadMode::kConcat) {
      sum += layer_norm(concat * params.tensor(block.output),
                        params.tensor(block.attn_gain).col(0),
                        params.tensor(block.attn_bias).col(0), cfg.ln_epsilon,
                        trace ? &trace->attn_norm : nullptr);
      if (trace) trace->concat = std::move(concat);
    }
    if (trace) {
      trace->query = std::move(q);
      trace->key = std::move(k);
      trace->value = std::move(v);
    }
  }
  MatrixXd hidden = tokens * params.tensor(block.ffn_in);
  hidden.rowwise() += params.tensor(block.ffn_in_bias).col(0).transpose();
  const MatrixXd active = hidden.unaryExpr([](double v) { return gelu(v); });
  sum += active * params.tensor(block.ffn_out);
  sum.rowwise() += params.tensor(block.ffn_out_bias).col(0).transpose();
  MatrixXd out = layer_norm(sum, params.tensor(block.gain).col(0),
                            params.tensor(block.bias).col(0), cfg.ln_epsilon,
                            trace ? &trace->out_norm : nullptr);
  if (trace) {
    trace->ffn_hidden = std::move(hidden);
    trace->ffn_active = active;
    trace->output = out;
  }
  return out;
}

void attention_block_backward(const TranRdParameters& params, const BlockLayout& block,
                              const BlockTrace& trace, const MatrixXd& d_output,
                              VectorXd& grad, MatrixXd* d_input) {
  const auto& cfg = params.config();
  const double scale = 1.0 / std::sqrt(cfg.scale_factor());
  const MatrixXd& x = trace.input;

  const MatrixXd d_sum =
      layer_norm_backward(trace.out_norm, column(params, block.gain), d_output,
                          params.tensor(block.gain, grad), params.tensor(block.bias, grad));

  MatrixXd d_x = d_sum;  // residual path

  // Feed-forward on the block input.
  params.tensor(block.ffn_out, grad) += trace.ffn_active.transpose() * d_sum;
  params.tensor(block.ffn_out_bias, grad) += d_sum.colwise().sum().transpose();
  MatrixXd d_hidden = d_sum * params.tensor(block.ffn_out).transpose();
  d_hidden.array() *= trace.ffn_hidden.unaryExpr([](double v) { return gelu_grad(v); }).array();
  params.tensor(block.ffn_in, grad) += x.transpose() * d_hidden;
  params.tensor(block.ffn_in_bias, grad) += d_hidden.colwise().sum().transpose();
  if (d_input) d_x += d_hidden * params.tensor(block.ffn_in).transpose();

  if (block.has_attention) {
    std::vector<MatrixXd> d_head_out(trace.heads.size());
    if (cfg.head_mode == HeadMode::kSum) {
      for (std::size_t h = 0; h < trace.heads.size(); ++h)
        d_head_out[h] = layer_norm_backward(
            trace.heads[h].norm, column(params, block.head_gain[h]), d_sum,
            params.tensor(block.head_gain[h], grad), params.tensor(block.head_bias[h], grad));
    } else {
      const MatrixXd d_proj = layer_norm_backward(
          trace.attn_norm, column(params, block.attn_gain), d_sum,
          params.tensor(block.attn_gain, grad), params.tensor(block.attn_bias, grad));
      params.tensor(block.output, grad) += trace.concat.transpose() * d_proj;
      const MatrixXd d_concat = d_proj * params.tensor(block.output).transpose();
      const Eigen::Index dk = cfg.key_width();
      for (std::size_t h = 0; h < trace.heads.size(); ++h)
        d_head_out[h] = d_concat.middleCols(static_cast<Eigen::Index>(h) * dk, dk);
    }
    const Eigen::Index dk = cfg.key_width();
    const Eigen::Index dv = cfg.head_mode == HeadMode::kSum ? cfg.dim : dk;
    MatrixXd d_q(x.rows(), trace.query.cols());
    MatrixXd d_k(x.rows(), trace.key.cols());
    MatrixXd d_v(x.rows(), trace.value.cols());
    for (std::size_t h = 0; h < trace.heads.size(); ++h) {
      const auto hi = static_cast<Eigen::Index>(h);
      const auto& ht = trace.heads[h];
      const MatrixXd d_weights =
          d_head_out[h].lazyProduct(trace.value.middleCols(hi * dv, dv).transpose());
      d_v.middleCols(hi * dv, dv) = ht.weights.transpose().lazyProduct(d_head_out[h]);
      // Row-wise softmax Jacobian.
      const Eigen::VectorXd row_dot = (d_weights.array() * ht.weights.array()).rowwise().sum();
      const MatrixXd d_scores =
          (ht.weights.array() * (d_weights.colwise() - row_dot).array()).matrix() * scale;
      d_q.middleCols(hi * dk, dk) = d_scores.lazyProduct(trace.key.middleCols(hi * dk, dk));
      d_k.middleCols(hi * dk, dk) =
          d_scores.transpose().lazyProduct(trace.query.middleCols(hi * dk, dk));
    }
    stacked(params, block.query, grad) += x.transpose() * d_q;
    stacked(params, block.key, grad) += x.transpose() * d_k;
    stacked(params, block.value, grad) += x.transpose() * d_v;
    if (d_input) {
      d_x += d_q * stacked(params, block.query).transpose();
      d_x += d_k * stacked(params, block.key).transpose();
      d_x += d_v * stacked(params, block.value).transpose();
    }
  }
  if (d_input) *d_input = std::move(d_x);
}

// ---------------------------------------------------------------------------
// Relation dropout and the two attention stages

int retained_count(int r, double beta) {
  return std::max(1, r - static_cast<int>(std::floor(beta * r)));
}

namespace {

void require_finite(const MatrixXd& m, const char* what) {
  if (!m.allFinite()) throw InvalidArgument(std::string(what) + ": non-finite input");
}

std::vector<int> draw_retained(int r, double beta, std::uint64_t seed) {
  const int keep = retained_count(r, beta);
  std::vector<int> positions(static_cast<std::size_t>(r));
  for (int i = 0; i < r; ++i) positions[static_cast<std::size_t>(i)] = i;
  if (keep == r) return positions;
  Rng rng(seed);
  std::vector<int> kept;
  std::sample(positions.begin(), positions.end(), std::back_inserter(kept),
              static_cast<std::size_t>(keep), rng);
  return kept;
}

bool dropout_active(const TranRdConfig& cfg, Mode mode) {
  return mode == Mode::kTrain && cfg.relation_dropout && cfg.dropout > 0.0;
}

MatrixXd gather_rows(const MatrixXd& m, const std::vector<int>& rows) {
  MatrixXd out(static_cast<Eigen::Index>(rows.size()), m.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = m.row(rows[i]);
  return out;
}

}  // namespace

RdMhsaResult rd_mhsa(const TranRdParameters& params, const MatrixXd& tuple_features,
                     Mode mode, std::uint64_t dropout_seed, BlockTrace* trace) {
  require_finite(tuple_features, "rd_mhsa");
  const auto& cfg = params.config();
  const int r = static_cast<int>(tuple_features.rows());
  if (r < 1) throw InvalidArgument("rd_mhsa: empty relation tuple");
  const bool drop = dropout_active(cfg, mode);
  if (drop && r < 2) throw InvalidArgument("rd_mhsa: relation dropout needs r >= 2");
  RdMhsaResult res;
  res.attended = attention_block(params, params.relation_block(), tuple_features, trace);
  if (drop) {
    res.retained = draw_retained(r, cfg.dropout, dropout_seed);
  } else {
    res.retained.resize(static_cast<std::size_t>(r));
    for (int i = 0; i < r; ++i) res.retained[static_cast<std::size_t>(i)] = i;
  }
  res.kept = gather_rows(res.attended, res.retained);
  return res;
}

MatrixXd scale_wise_mhsa(const TranRdParameters& params, const MatrixXd& retained,
                         BlockTrace* trace) {
  require_finite(retained, "scale_wise_mhsa");
  if (retained.rows() < 1) throw InvalidArgument("scale_wise_mhsa: no tokens");
  return attention_block(params, params.scale_block(), retained, trace);
}

// ---------------------------------------------------------------------------
// Aggregation

AggregatedEmbedding aggregate(const TranRdParameters& params, const MatrixXd& sequence,
                              const RelationPlan& plan, Mode mode,
                              std::uint64_t dropout_seed, AggregateTrace* trace) {
  const auto& cfg = params.config();
  require_finite(sequence, "aggregate");
  if (sequence.cols() != cfg.dim)
    throw InvalidArgument("aggregate: feature dim " + std::to_string(sequence.cols()) +
                          " does not match model dim " + std::to_string(cfg.dim));
  AggregatedEmbedding emb;
  if (cfg.aggregator == AggregatorKind::kMeanPool) {
    emb.vector = sequence.colwise().mean().transpose();
    if (trace) trace->per_scale.clear();
    return emb;
  }
  if (plan.sequence_length != sequence.rows())
    throw InvalidArgument("aggregate: plan covers " + std::to_string(plan.sequence_length) +
                          " snippets but the sequence has " + std::to_string(sequence.rows()));
  if (trace) trace->per_scale.assign(plan.scales.size(), {});

  emb.vector = VectorXd::Zero(cfg.dim);
  for (std::size_t si = 0; si < plan.scales.size(); ++si) {
    const int r = plan.scales[si];
    const auto& tuples = plan.tuples.at(r);
    VectorXd scale_vec = VectorXd::Zero(cfg.dim);
    for (std::size_t ti = 0; ti < tuples.size(); ++ti) {
      TupleTrace* tt = nullptr;
      if (trace) {
        trace->per_scale[si].emplace_back();
        tt = &trace->per_scale[si].back();
        tt->tuple = tuples[ti];
      }
      const MatrixXd x = gather_rows(sequence, tuples[ti]);
      const auto seed = derive_seed(dropout_seed, {static_cast<std::uint64_t>(r), ti});
      auto rd = rd_mhsa(params, x, mode, seed, tt ? &tt->relation : nullptr);
      const MatrixXd out = cfg.scale_attention
                               ? scale_wise_mhsa(params, rd.kept, tt ? &tt->scale : nullptr)
                               : rd.kept;
      scale_vec += out.colwise().mean().transpose();
      if (tt) tt->retained = std::move(rd.retained);
    }
    scale_vec /= static_cast<double>(tuples.size());
    emb.vector += scale_vec;
    emb.per_scale.push_back(std::move(scale_vec));
  }
  emb.vector /= static_cast<double>(plan.scales.size());
  return emb;
}

void aggregate_backward(const TranRdParameters& params, const AggregateTrace& trace,
                        const VectorXd& d_embedding, VectorXd& grad) {
  const auto& cfg = params.config();
  if (cfg.aggregator == AggregatorKind::kMeanPool) return;
  const double per_scale = 1.0 / static_cast<double>(trace.per_scale.size());
  for (const auto& tuples : trace.per_scale) {
    const double per_tuple = per_scale / static_cast<double>(tuples.size());
    for (const auto& tt : tuples) {
      const auto kept = static_cast<Eigen::Index>(tt.retained.size());
      MatrixXd d_out = (d_embedding * (per_tuple / static_cast<double>(kept)))
                           .transpose()
                           .replicate(kept, 1);
      MatrixXd d_kept;
      if (cfg.scale_attention) {
        attention_block_backward(params, params.scale_block(), tt.scale, d_out, grad, &d_kept);
      } else {
        d_kept = std::move(d_out);
      }
      MatrixXd d_attended = MatrixXd::Zero(static_cast<Eigen::Index>(tt.tuple.size()), cfg.dim);
      for (std::size_t i = 0; i < tt.retained.size(); ++i)
        d_attended.row(tt.retained[i]) += d_kept.row(static_cast<Eigen::Index>(i));
      attention_block_backward(params, params.relation_block(), tt.relation, d_attended, grad);
    }
  }
}

VectorXd classify(const TranRdParameters& params, const VectorXd& embedding) {
  if (!embedding.allFinite()) throw InvalidArgument("classify: non-finite embedding");
  return params.tensor(params.classifier_weight()) * embedding +
         params.tensor(params.classifier_bias()).col(0);
}

VectorXd classify_backward(const TranRdParameters& params, const VectorXd& embedding,
                           const VectorXd& d_logits, VectorXd& grad) {
  params.tensor(params.classifier_weight(), grad) += d_logits * embedding.transpose();
  params.tensor(params.classifier_bias(), grad) += d_logits;
  return params.tensor(params.classifier_weight()).transpose() * d_logits;
}

}  // namespace relamix
