#include "tcl/encoder.hpp"

#include <cmath>
#include <stdexcept>

namespace tcl {

using ad::Matrix;
using ad::Parameter;
using ad::Real;
using ad::Tape;
using ad::Var;

// ---------------------------------------------------------------------------
// Configuration

DepthConfig EncoderConfig::depth_config() const {
  DepthConfig cfg = DepthConfig::for_depth(depth);
  if (max_seq_len > 0) cfg.max_seq_len = max_seq_len;
  return cfg;
}

void EncoderConfig::validate() const {
  if (dim < 1) throw std::invalid_argument("embedding dimension must be positive");
  if (heads < 1) throw std::invalid_argument("head count must be positive");
  if (!full_width_heads && dim % heads != 0) {
    throw std::invalid_argument("embedding dimension " + std::to_string(dim) + " is not divisible by " +
                                std::to_string(heads) + " heads");
  }
  if (blocks < 1) throw std::invalid_argument("at least one graph transformer block is required");
  if (dropout < 0.0 || dropout >= 1.0) throw std::invalid_argument("dropout must lie in [0, 1)");
  if (max_seq_len < 0) throw std::invalid_argument("max_seq_len must be non-negative");
  depth_config().validate();
}

// ---------------------------------------------------------------------------
// Parameters

namespace {

class Initializer {
 public:
  Initializer(std::uint64_t seed, int dim) : rng_(seed), bound_(1.0 / std::sqrt(static_cast<double>(dim))) {}

  Parameter uniform(std::string name, Eigen::Index rows, Eigen::Index cols) {
    std::uniform_real_distribution<double> dist(-bound_, bound_);
    Matrix m(rows, cols);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = static_cast<Real>(dist(rng_));
    return {std::move(name), std::move(m)};
  }
  static Parameter constant(std::string name, Eigen::Index rows, Eigen::Index cols, Real value) {
    return {std::move(name), Matrix::Constant(rows, cols, value)};
  }

 private:
  std::mt19937_64 rng_;
  double bound_;
};

AttentionBlockParams make_block(Initializer& init, const std::string& prefix, const EncoderConfig& cfg) {
  const Eigen::Index d = cfg.dim;
  AttentionBlockParams b;
  b.w_q = init.uniform(prefix + ".w_q", d, d);
  b.w_k = init.uniform(prefix + ".w_k", d, d);
  b.w_v = init.uniform(prefix + ".w_v", d, d);
  if (cfg.full_width_heads) {
    const Eigen::Index wide = d * cfg.heads;
    b.head_q = init.uniform(prefix + ".head_q", d, wide);
    b.head_k = init.uniform(prefix + ".head_k", d, wide);
    b.head_v = init.uniform(prefix + ".head_v", d, wide);
    b.w_o = init.uniform(prefix + ".w_o", wide, d);
  } else {
    b.w_o = init.uniform(prefix + ".w_o", d, d);
  }
  b.ln1_gain = Initializer::constant(prefix + ".ln1.gain", 1, d, 1);
  b.ln1_bias = Initializer::constant(prefix + ".ln1.bias", 1, d, 0);
  b.ffn_w1 = init.uniform(prefix + ".ffn.w1", d, d);
  b.ffn_b1 = Initializer::constant(prefix + ".ffn.b1", 1, d, 0);
  b.ffn_w2 = init.uniform(prefix + ".ffn.w2", d, d);
  b.ffn_b2 = Initializer::constant(prefix + ".ffn.b2", 1, d, 0);
  b.ln2_gain = Initializer::constant(prefix + ".ln2.gain", 1, d, 1);
  b.ln2_bias = Initializer::constant(prefix + ".ln2.bias", 1, d, 0);
  return b;
}

void append_block(std::vector<Parameter*>& out, AttentionBlockParams& b, bool full_width) {
  out.insert(out.end(), {&b.w_q, &b.w_k, &b.w_v});
  if (full_width) out.insert(out.end(), {&b.head_q, &b.head_k, &b.head_v});
  out.insert(out.end(), {&b.w_o, &b.ln1_gain, &b.ln1_bias, &b.ffn_w1, &b.ffn_b1, &b.ffn_w2, &b.ffn_b2, &b.ln2_gain,
                         &b.ln2_bias});
}

}  // namespace

ModelParams::ModelParams(const EncoderConfig& config, std::size_t table_size)
    : config_(config), table_size_(table_size) {
  config_.validate();
  if (table_size < 1) throw std::invalid_argument("embedding table needs at least the NULL row");
  const Eigen::Index d = config_.dim;
  Initializer init(config_.seed, config_.dim);
  node_embedding = init.uniform("node_embedding", static_cast<Eigen::Index>(table_size), d);
  depth_embedding = init.uniform("depth_embedding", config_.depth + 2, d);
  time_projection = init.uniform("time_projection", 1, d);
  for (int b = 0; b < config_.blocks; ++b) {
    blocks.push_back(make_block(init, "block" + std::to_string(b), config_));
  }
  cross = make_block(init, "cross", config_);
  head.w1 = init.uniform("head.w1", 2 * d, d);
  head.b1 = Initializer::constant("head.b1", 1, d, 0);
  head.slope1 = Initializer::constant("head.slope1", 1, 1, static_cast<Real>(0.25));
  head.w2 = init.uniform("head.w2", d, d);
  head.b2 = Initializer::constant("head.b2", 1, d, 0);
  head.slope2 = Initializer::constant("head.slope2", 1, 1, static_cast<Real>(0.25));
  head.w3 = init.uniform("head.w3", d, d);
  head.b3 = Initializer::constant("head.b3", 1, d, 0);
  w_add = init.uniform("disc.w_add", 1, d);
  w_mul = init.uniform("disc.w_mul", 1, d);
}

std::vector<Parameter*> ModelParams::parameters() {
  std::vector<Parameter*> out{&node_embedding, &depth_embedding, &time_projection};
  for (auto& b : blocks) append_block(out, b, config_.full_width_heads);
  append_block(out, cross, config_.full_width_heads);
  out.insert(out.end(), {&head.w1, &head.b1, &head.slope1, &head.w2, &head.b2, &head.slope2, &head.w3, &head.b3,
                         &w_add, &w_mul});
  return out;
}

std::vector<const Parameter*> ModelParams::parameters() const {
  auto mutable_view = const_cast<ModelParams*>(this)->parameters();
  return {mutable_view.begin(), mutable_view.end()};
}

void ModelParams::zero_grad() {
  for (auto* p : parameters()) p->zero_grad();
}

// ---------------------------------------------------------------------------
// Forward pass

Matrix additive_mask(const AttentionMask& mask) {
  const auto m = static_cast<Eigen::Index>(mask.size());
  Matrix out(m, m);
  for (Eigen::Index i = 0; i < m; ++i) {
    for (Eigen::Index j = 0; j < m; ++j) {
      out(i, j) = mask.visible(static_cast<std::size_t>(i), static_cast<std::size_t>(j)) ? Real(0) : ad::kMaskedScore;
    }
  }
  return out;
}

Var input_embedding(Tape& tape, const NodeSequence& seq, ModelParams& params, std::mt19937_64* dropout_rng) {
  const EncoderConfig& cfg = params.config();
  const std::size_t m = seq.size();
  if (m == 0) throw std::invalid_argument("input_embedding: empty sequence");
  if (seq.depths.size() != m || seq.deltas.size() != m) {
    throw std::invalid_argument("input_embedding: misaligned sequence fields");
  }
  std::vector<int> node_rows(m);
  std::vector<int> depth_rows(m);
  for (std::size_t i = 0; i < m; ++i) {
    if (seq.ids[i] < 0 || static_cast<std::size_t>(seq.ids[i]) >= params.table_size()) {
      throw std::out_of_range("input_embedding: unknown node id " + std::to_string(seq.ids[i]));
    }
    if (seq.depths[i] < 0 || seq.depths[i] > cfg.depth + 1) {
      throw std::out_of_range("input_embedding: depth " + std::to_string(seq.depths[i]) + " exceeds k + 1");
    }
    node_rows[i] = seq.ids[i];
    depth_rows[i] = seq.depths[i];
  }
  Var e = ad::embedding_lookup(tape, params.node_embedding, node_rows);
  if (!cfg.ablation.no_de) e = ad::add(e, ad::embedding_lookup(tape, params.depth_embedding, depth_rows));
  if (!cfg.ablation.no_te) {
    Matrix scaled(static_cast<Eigen::Index>(m), 1);
    for (std::size_t i = 0; i < m; ++i) {
      scaled(static_cast<Eigen::Index>(i), 0) = static_cast<Real>(std::log1p(seq.deltas[i]));
    }
    e = ad::add(e, ad::matmul(tape.constant(std::move(scaled)), tape.param(params.time_projection)));
  }
  if (dropout_rng != nullptr) e = ad::dropout(e, static_cast<Real>(cfg.dropout), *dropout_rng, true);
  return e;
}

namespace {

// Attention sub-layer followed by the residual / LN / FFN pattern shared by
// the graph transformer block and both halves of the cross-attention block.
Var attention_layer(Tape& tape, const Var& query_in, const Var& kv_in, const Matrix* mask, AttentionBlockParams& b,
                    const EncoderConfig& cfg) {
  Var q = ad::matmul(query_in, tape.param(b.w_q));
  Var k = ad::matmul(kv_in, tape.param(b.w_k));
  Var v = ad::matmul(kv_in, tape.param(b.w_v));
  Var qh = q, kh = k, vh = v;
  if (cfg.full_width_heads) {
    qh = ad::matmul(q, tape.param(b.head_q));
    kh = ad::matmul(k, tape.param(b.head_k));
    vh = ad::matmul(v, tape.param(b.head_v));
  }
  const Real scale = Real(1) / std::sqrt(static_cast<Real>(cfg.dim));
  Var attended = ad::masked_multi_head_attention(qh, kh, vh, mask, cfg.heads, scale);
  Var o = ad::matmul(attended, tape.param(b.w_o));
  Var normed = ad::layer_norm(ad::add(o, q), tape.param(b.ln1_gain), tape.param(b.ln1_bias));
  Var hidden = ad::relu(ad::add(ad::matmul(normed, tape.param(b.ffn_w1)), tape.param(b.ffn_b1)));
  Var ffn = ad::add(ad::matmul(hidden, tape.param(b.ffn_w2)), tape.param(b.ffn_b2));
  return ad::layer_norm(ad::add(ffn, normed), tape.param(b.ln2_gain), tape.param(b.ln2_bias));
}

Matrix key_padding_mask(Eigen::Index queries, std::span<const bool> valid_keys) {
  Matrix mask = Matrix::Zero(queries, static_cast<Eigen::Index>(valid_keys.size()));
  for (std::size_t j = 0; j < valid_keys.size(); ++j) {
    if (!valid_keys[j]) mask.col(static_cast<Eigen::Index>(j)).setConstant(ad::kMaskedScore);
  }
  return mask;
}

}  // namespace

Var graph_transformer_block(Tape& tape, const Var& h, const Matrix& mask, AttentionBlockParams& block,
                            const EncoderConfig& config) {
  if (mask.rows() != h.rows() || mask.cols() != h.rows()) {
    throw ad::ShapeError("graph_transformer_block: mask " + ad::shape_string(mask) + " vs input " +
                         ad::shape_string(h.value()));
  }
  return attention_layer(tape, h, h, &mask, block, config);
}

StreamPair cross_attention_block(Tape& tape, const Var& hu, const Var& hw, AttentionBlockParams& block,
                                 const EncoderConfig& config, const CrossAttentionOptions& options) {
  if (!options.valid_u.empty() && options.valid_u.size() != static_cast<std::size_t>(hu.rows())) {
    throw std::invalid_argument("cross_attention_block: padding mask length differs from stream u");
  }
  if (!options.valid_w.empty() && options.valid_w.size() != static_cast<std::size_t>(hw.rows())) {
    throw std::invalid_argument("cross_attention_block: padding mask length differs from stream w");
  }
  Var qu = options.root_rows_only ? ad::slice_rows(hu, 0, 1) : hu;
  Var qw = options.root_rows_only ? ad::slice_rows(hw, 0, 1) : hw;

  Matrix mask_u, mask_w;
  const Matrix* mu = nullptr;
  const Matrix* mw = nullptr;
  if (!options.valid_w.empty()) {
    mask_u = key_padding_mask(qu.rows(), options.valid_w);
    mu = &mask_u;
  }
  if (!options.valid_u.empty()) {
    mask_w = key_padding_mask(qw.rows(), options.valid_u);
    mw = &mask_w;
  }
  Var out_u = attention_layer(tape, qu, hw, mu, block, config);
  Var out_w = attention_layer(tape, qw, hu, mw, block, config);
  return {out_u, out_w};
}

StreamPair two_stream_encode(Tape& tape, const NodeSequence& a, const NodeSequence& b, ModelParams& params,
                             std::mt19937_64* dropout_rng) {
  const EncoderConfig& cfg = params.config();
  auto encode_stream = [&](const NodeSequence& seq) {
    if (seq.mask.size() != seq.size()) {
      throw std::invalid_argument("two_stream_encode: sequence mask size differs from sequence length");
    }
    const Matrix mask = additive_mask(seq.mask);
    Var h = input_embedding(tape, seq, params, dropout_rng);
    for (auto& block : params.blocks) h = graph_transformer_block(tape, h, mask, block, cfg);
    return h;
  };
  Var ha = encode_stream(a);
  Var hb = encode_stream(b);
  if (cfg.ablation.no_ca) return {ad::slice_rows(ha, 0, 1), ad::slice_rows(hb, 0, 1)};
  CrossAttentionOptions options;
  options.root_rows_only = true;
  return cross_attention_block(tape, ha, hb, params.cross, cfg, options);
}

}  // namespace tcl
