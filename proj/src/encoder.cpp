#include "hierage/encoder.hpp"

#include <cmath>

#include "hierage/errors.hpp"

namespace hierage {

namespace {

Tensor xavier_uniform(std::size_t fan_in, std::size_t fan_out, std::mt19937_64& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  std::uniform_real_distribution<double> dist(-limit, limit);
  std::vector<double> values(fan_in * fan_out);
  for (double& v : values) v = dist(rng);
  return Tensor::matrix(fan_in, fan_out, std::move(values), true);
}

Tensor attention_stack(const ForwardContext& ctx, const Tensor& x, std::size_t sequence_length,
                       const EncoderLayerParams& layer, const EncoderConfig& config,
                       AttentionTrace* trace) {
  Tape& tape = ctx.tape;
  const std::size_t d = config.model_dim;
  if (x.rank() != 2 || x.cols() != d) {
    throw ShapeError("multi_head_attention: expected [S, " + std::to_string(d) + "], got " +
                     shape_to_string(x.shape()));
  }
  if (sequence_length == 0 || x.rows() % sequence_length != 0) {
    throw ShapeError("multi_head_attention: " + std::to_string(x.rows()) +
                     " rows are not a whole number of sequences of length " +
                     std::to_string(sequence_length));
  }
  const std::size_t blocks = x.rows() / sequence_length;
  const std::size_t dh = config.head_dim();
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));

  const Tensor q = tape.matmul(x, layer.query);
  const Tensor k = tape.matmul(x, layer.key);
  const Tensor v = tape.matmul(x, layer.value);

  std::vector<Tensor> sequences;
  sequences.reserve(blocks);
  std::vector<Tensor> heads(config.num_heads);
  for (std::size_t b = 0; b < blocks; ++b) {
    const std::size_t lo = b * sequence_length, hi = lo + sequence_length;
    const Tensor qb = blocks == 1 ? q : tape.slice_rows(q, lo, hi);
    const Tensor kb = blocks == 1 ? k : tape.slice_rows(k, lo, hi);
    const Tensor vb = blocks == 1 ? v : tape.slice_rows(v, lo, hi);
    for (std::size_t h = 0; h < config.num_heads; ++h) {
      const std::size_t c0 = h * dh, c1 = c0 + dh;
      const Tensor qh = config.num_heads == 1 ? qb : tape.slice_cols(qb, c0, c1);
      const Tensor kh = config.num_heads == 1 ? kb : tape.slice_cols(kb, c0, c1);
      const Tensor vh = config.num_heads == 1 ? vb : tape.slice_cols(vb, c0, c1);
      const Tensor scores = tape.scale(tape.matmul(qh, tape.transpose(kh)), scale);
      const Tensor weights = tape.softmax(scores);
      if (trace != nullptr) trace->weights.push_back(weights);
      heads[h] = tape.matmul(ctx.dropout(weights, config.dropout), vh);
    }
    sequences.push_back(config.num_heads == 1 ? heads[0] : tape.concat_cols(heads));
  }
  const Tensor merged = blocks == 1 ? sequences[0] : tape.concat_rows(sequences);
  return tape.matmul(merged, layer.output);
}

}  // namespace

void EncoderConfig::validate() const {
  if (input_dim == 0) throw ContractError("encoder: input_dim must be positive");
  if (model_dim == 0) throw ContractError("encoder: model_dim must be positive");
  if (num_heads == 0 || model_dim % num_heads != 0) {
    throw ContractError("encoder: model_dim " + std::to_string(model_dim) +
                        " is not divisible by num_heads " + std::to_string(num_heads));
  }
  if (num_views == 0) throw ContractError("encoder: num_views (K) must be at least 1");
  if (!(dropout >= 0.0 && dropout < 1.0)) throw ContractError("encoder: dropout must lie in [0, 1)");
  if (!(layer_norm_eps > 0.0)) throw ContractError("encoder: layer_norm_eps must be positive");
}

EncoderParams EncoderParams::init(const EncoderConfig& config, std::mt19937_64& rng) {
  config.validate();
  const std::size_t d = config.model_dim, f = config.ffn_width();
  EncoderParams p;
  p.stem_weight = xavier_uniform(config.input_dim, d, rng);
  p.stem_bias = Tensor::zeros({d}, true);
  std::normal_distribution<double> cls_dist(0.0, 0.02);
  std::vector<double> cls(d);
  for (double& v : cls) v = cls_dist(rng);
  p.cls_token = Tensor::matrix(1, d, std::move(cls), true);
  for (std::size_t l = 0; l < config.num_layers; ++l) {
    EncoderLayerParams layer;
    layer.query = xavier_uniform(d, d, rng);
    layer.key = xavier_uniform(d, d, rng);
    layer.value = xavier_uniform(d, d, rng);
    layer.output = xavier_uniform(d, d, rng);
    layer.ffn_in = xavier_uniform(d, f, rng);
    layer.ffn_in_bias = Tensor::zeros({f}, true);
    layer.ffn_out = xavier_uniform(f, d, rng);
    layer.ffn_out_bias = Tensor::zeros({d}, true);
    layer.norm1_gain = Tensor::full({d}, 1.0, true);
    layer.norm1_bias = Tensor::zeros({d}, true);
    layer.norm2_gain = Tensor::full({d}, 1.0, true);
    layer.norm2_bias = Tensor::zeros({d}, true);
    p.layers.push_back(std::move(layer));
  }
  return p;
}

std::vector<NamedTensor> EncoderParams::named() const {
  std::vector<NamedTensor> out{
      {"stem.weight", stem_weight}, {"stem.bias", stem_bias}, {"cls_token", cls_token}};
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const std::string prefix = "layer" + std::to_string(l) + ".";
    const EncoderLayerParams& L = layers[l];
    out.emplace_back(prefix + "attn.query", L.query);
    out.emplace_back(prefix + "attn.key", L.key);
    out.emplace_back(prefix + "attn.value", L.value);
    out.emplace_back(prefix + "attn.output", L.output);
    out.emplace_back(prefix + "ffn.in.weight", L.ffn_in);
    out.emplace_back(prefix + "ffn.in.bias", L.ffn_in_bias);
    out.emplace_back(prefix + "ffn.out.weight", L.ffn_out);
    out.emplace_back(prefix + "ffn.out.bias", L.ffn_out_bias);
    out.emplace_back(prefix + "norm1.gain", L.norm1_gain);
    out.emplace_back(prefix + "norm1.bias", L.norm1_bias);
    out.emplace_back(prefix + "norm2.gain", L.norm2_gain);
    out.emplace_back(prefix + "norm2.bias", L.norm2_bias);
  }
  return out;
}

Tensor ForwardContext::dropout(const Tensor& x, double p) const {
  if (mode == Mode::kEval || p == 0.0) return x;
  if (rng == nullptr) throw ContractError("train-mode dropout needs a random stream");
  return tape.dropout(x, p, *rng);
}

Tensor stem_embed(Tape& tape, const Tensor& raw, const EncoderParams& params) {
  const std::size_t f = params.stem_weight.rows();
  if (raw.rank() == 1) {
    if (raw.size() != f) {
      throw ShapeError("stem_embed: expected " + std::to_string(f) + " features, got " +
                       shape_to_string(raw.shape()));
    }
    const Tensor row = tape.reshape(raw, {1, f});
    const Tensor out = tape.add_row(tape.matmul(row, params.stem_weight), params.stem_bias);
    return tape.reshape(out, {params.stem_weight.cols()});
  }
  if (raw.rank() != 2 || raw.cols() != f) {
    throw ShapeError("stem_embed: expected [N, " + std::to_string(f) + "], got " +
                     shape_to_string(raw.shape()));
  }
  return tape.add_row(tape.matmul(raw, params.stem_weight), params.stem_bias);
}

Tensor multi_head_attention(const ForwardContext& ctx, const Tensor& x,
                            const EncoderLayerParams& layer, const EncoderConfig& config,
                            AttentionTrace* trace) {
  return attention_stack(ctx, x, x.rank() == 2 ? x.rows() : 0, layer, config, trace);
}

Tensor encoder_block(const ForwardContext& ctx, const Tensor& x, const EncoderLayerParams& layer,
                     const EncoderConfig& config, std::size_t sequence_length,
                     AttentionTrace* trace) {
  Tape& tape = ctx.tape;
  const Tensor attended = attention_stack(ctx, x, sequence_length, layer, config, trace);
  const Tensor h = tape.layer_norm(tape.add(x, attended), layer.norm1_gain, layer.norm1_bias,
                                   config.layer_norm_eps);
  Tensor hidden = tape.gelu(tape.add_row(tape.matmul(h, layer.ffn_in), layer.ffn_in_bias));
  hidden = ctx.dropout(hidden, config.dropout);
  const Tensor ffn = tape.add_row(tape.matmul(hidden, layer.ffn_out), layer.ffn_out_bias);
  return tape.layer_norm(tape.add(h, ffn), layer.norm2_gain, layer.norm2_bias,
                         config.layer_norm_eps);
}

Tensor encode_batch(const ForwardContext& ctx, const Tensor& views, std::size_t batch,
                    const EncoderParams& params, const EncoderConfig& config) {
  Tape& tape = ctx.tape;
  const std::size_t k = config.num_views;
  if (views.rank() != 2 || views.rows() != batch * k || views.cols() != config.input_dim) {
    throw ContractError("encode: expected " + std::to_string(batch) + " x " + std::to_string(k) +
                        " views of width " + std::to_string(config.input_dim) + ", got " +
                        shape_to_string(views.shape()));
  }
  const Tensor embedded = stem_embed(tape, views, params);
  std::vector<Tensor> parts;
  parts.reserve(2 * batch);
  for (std::size_t b = 0; b < batch; ++b) {
    parts.push_back(params.cls_token);
    parts.push_back(batch == 1 ? embedded : tape.slice_rows(embedded, b * k, (b + 1) * k));
  }
  Tensor sequence = tape.concat_rows(parts);
  for (const EncoderLayerParams& layer : params.layers) {
    sequence = encoder_block(ctx, sequence, layer, config, k + 1);
  }
  std::vector<std::size_t> cls_rows(batch);
  for (std::size_t b = 0; b < batch; ++b) cls_rows[b] = b * (k + 1);
  return tape.gather_rows(sequence, cls_rows);
}

Tensor encode(const ForwardContext& ctx, const Tensor& views, const EncoderParams& params,
              const EncoderConfig& config) {
  const Tensor fused = encode_batch(ctx, views, 1, params, config);
  return ctx.tape.reshape(fused, {config.model_dim});
}

Tensor average_pool_batch(Tape& tape, const Tensor& views, std::size_t batch,
                          const EncoderParams& params) {
  if (batch == 0 || views.rank() != 2 || views.rows() % batch != 0) {
    throw ShapeError("average_pool: " + shape_to_string(views.shape()) +
                     " does not split into " + std::to_string(batch) + " groups");
  }
  const std::size_t k = views.rows() / batch;
  const Tensor embedded = stem_embed(tape, views, params);
  std::vector<double> pool(batch * batch * k, 0.0);
  for (std::size_t b = 0; b < batch; ++b)
    for (std::size_t j = 0; j < k; ++j) pool[b * batch * k + b * k + j] = 1.0 / static_cast<double>(k);
  return tape.matmul(Tensor::matrix(batch, batch * k, std::move(pool)), embedded);
}

Tensor average_pool_aggregate(Tape& tape, const Tensor& views, const EncoderParams& params) {
  const Tensor pooled = average_pool_batch(tape, views, 1, params);
  return tape.reshape(pooled, {pooled.cols()});
}

}  // namespace hierage
