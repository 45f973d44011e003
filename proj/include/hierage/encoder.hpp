#pragma once

#include <cstddef>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "hierage/tape.hpp"
#include "hierage/tensor.hpp"

namespace hierage {

enum class Mode { kTrain, kEval };

using NamedTensor = std::pair<std::string, Tensor>;

struct EncoderConfig {
  std::size_t input_dim = 16;  // raw feature width F
  std::size_t model_dim = 32;
  std::size_t num_layers = 4;
  std::size_t num_heads = 4;
  std::size_t ffn_dim = 0;  // 0 selects 4 * model_dim
  std::size_t num_views = 10;
  double dropout = 0.1;
  double layer_norm_eps = 1e-5;

  std::size_t ffn_width() const { return ffn_dim == 0 ? 4 * model_dim : ffn_dim; }
  std::size_t head_dim() const { return model_dim / num_heads; }

  // Throws ContractError on an inconsistent configuration.
  void validate() const;
};

struct EncoderLayerParams {
  Tensor query, key, value, output;  // each [d, d]
  Tensor ffn_in, ffn_in_bias;        // [d, ffn], [ffn]
  Tensor ffn_out, ffn_out_bias;      // [ffn, d], [d]
  Tensor norm1_gain, norm1_bias;     // after attention
  Tensor norm2_gain, norm2_bias;     // after the feed-forward sublayer
};

struct EncoderParams {
  Tensor stem_weight;  // [F, d]
  Tensor stem_bias;    // [d]
  Tensor cls_token;    // [1, d]
  std::vector<EncoderLayerParams> layers;

  // Xavier-uniform projections, zero biases, unit norm gains and a
  // N(0, 0.02^2) class token.
  static EncoderParams init(const EncoderConfig& config, std::mt19937_64& rng);

  std::vector<NamedTensor> named() const;
};

// Per-forward-pass state: the tape, dropout mode and the dropout stream.
struct ForwardContext {
  Tape& tape;
  Mode mode = Mode::kEval;
  std::mt19937_64* rng = nullptr;  // required in train mode when dropout > 0

  Tensor dropout(const Tensor& x, double p) const;
};

// Optional capture of post-softmax attention weights, one [S, S] matrix per
// (sequence, head), in that order.
struct AttentionTrace {
  std::vector<Tensor> weights;
};

// raw[F] -> [d] or raw[N, F] -> [N, d]: raw * W + b.
Tensor stem_embed(Tape& tape, const Tensor& raw, const EncoderParams& params);

// Self-attention over X[S, d] (no positional encoding, no mask).
Tensor multi_head_attention(const ForwardContext& ctx, const Tensor& x,
                            const EncoderLayerParams& layer, const EncoderConfig& config,
                            AttentionTrace* trace = nullptr);

// One post-norm block: LN(x + MHA(x)), then LN(h + FFN(h)).
Tensor encoder_block(const ForwardContext& ctx, const Tensor& x, const EncoderLayerParams& layer,
                     const EncoderConfig& config, std::size_t sequence_length,
                     AttentionTrace* trace = nullptr);

// views[K, F] -> fused embedding [d], the encoder output at the class-token
// position. K must equal config.num_views.
Tensor encode(const ForwardContext& ctx, const Tensor& views, const EncoderParams& params,
              const EncoderConfig& config);

// Batched form: views[B * K, F] holding B consecutive groups of K views.
// Returns [B, d].
Tensor encode_batch(const ForwardContext& ctx, const Tensor& views, std::size_t batch,
                    const EncoderParams& params, const EncoderConfig& config);

// Mean of the stem embeddings of views[K, F] -> [d].
Tensor average_pool_aggregate(Tape& tape, const Tensor& views, const EncoderParams& params);

// Batched form: views[B * K, F] -> [B, d].
Tensor average_pool_batch(Tape& tape, const Tensor& views, std::size_t batch,
                          const EncoderParams& params);

}  // namespace hierage
