#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "tcl/autodiff.hpp"
#include "tcl/tdig.hpp"

namespace tcl {

struct Ablation {
  bool no_te = false;  ///< drop the time-interval embedding
  bool no_de = false;  ///< drop the depth embedding
  bool no_ca = false;  ///< skip the cross-attention block

  friend bool operator==(const Ablation&, const Ablation&) = default;
};

struct EncoderConfig {
  int dim = 64;
  int heads = 16;
  int blocks = 1;
  int depth = 5;
  /// 0 means the full tree size 2^(depth+1) - 1.
  int max_seq_len = 0;
  double dropout = 0.6;
  /// Give every head its own d x d projections instead of d/heads slices.
  bool full_width_heads = false;
  Ablation ablation;
  std::uint64_t seed = 0;

  DepthConfig depth_config() const;
  int head_width() const { return full_width_heads ? dim : dim / heads; }
  void validate() const;

  friend bool operator==(const EncoderConfig&, const EncoderConfig&) = default;
};

/// Weights of one transformer block (graph or cross-attention).
struct AttentionBlockParams {
  ad::Parameter w_q, w_k, w_v, w_o;
  /// Per-head projections, populated only with full_width_heads.
  ad::Parameter head_q, head_k, head_v;
  ad::Parameter ln1_gain, ln1_bias;
  ad::Parameter ffn_w1, ffn_b1, ffn_w2, ffn_b2;
  ad::Parameter ln2_gain, ln2_bias;
};

/// Projection head phi: 2d -> d -> d -> d with PReLU between layers.
struct ProjectionHeadParams {
  ad::Parameter w1, b1, slope1;
  ad::Parameter w2, b2, slope2;
  ad::Parameter w3, b3;
};

/// Every learned tensor of the model, initialized deterministically from
/// EncoderConfig::seed.
class ModelParams {
 public:
  ModelParams(const EncoderConfig& config, std::size_t table_size);

  const EncoderConfig& config() const { return config_; }
  /// Rows of the node embedding table (vocabulary size + NULL sentinel).
  std::size_t table_size() const { return table_size_; }

  /// Stable-ordered views over every parameter.
  std::vector<ad::Parameter*> parameters();
  std::vector<const ad::Parameter*> parameters() const;
  void zero_grad();

  ad::Parameter node_embedding;   // |V| x d
  ad::Parameter depth_embedding;  // (k + 2) x d
  ad::Parameter time_projection;  // 1 x d
  std::vector<AttentionBlockParams> blocks;
  AttentionBlockParams cross;
  ProjectionHeadParams head;
  ad::Parameter w_add;  // 1 x d
  ad::Parameter w_mul;  // 1 x d

 private:
  EncoderConfig config_;
  std::size_t table_size_;
};

/// 0 where visible, ad::kMaskedScore elsewhere.
ad::Matrix additive_mask(const AttentionMask& mask);

/// Node + depth + time-interval embeddings (m x d). Pass a generator to apply
/// input dropout (training); nullptr means evaluation mode.
ad::Var input_embedding(ad::Tape& tape, const NodeSequence& seq, ModelParams& params, std::mt19937_64* dropout_rng);

/// Structure-masked transformer block:
/// H_out = LN(FFN(LN(O + Q)) + LN(O + Q)), O = masked multi-head attention.
ad::Var graph_transformer_block(ad::Tape& tape, const ad::Var& h, const ad::Matrix& mask,
                                AttentionBlockParams& block, const EncoderConfig& config);

struct StreamPair {
  ad::Var u;
  ad::Var w;
};

struct CrossAttentionOptions {
  /// Valid (non-padding) positions per stream; empty means all valid.
  std::span<const bool> valid_u;
  std::span<const bool> valid_w;
  /// Only compute the first (root) query row of each stream.
  bool root_rows_only = false;
};

/// Each stream's queries attend over the other stream's keys and values.
StreamPair cross_attention_block(ad::Tape& tape, const ad::Var& hu, const ad::Var& hw, AttentionBlockParams& block,
                                 const EncoderConfig& config, const CrossAttentionOptions& options = {});

/// Embeds both sequences, runs the graph-transformer stack on each, fuses them
/// with cross-attention and returns the two root rows (1 x d each).
StreamPair two_stream_encode(ad::Tape& tape, const NodeSequence& a, const NodeSequence& b, ModelParams& params,
                             std::mt19937_64* dropout_rng);

}  // namespace tcl
