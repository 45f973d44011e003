#include "hierage/model.hpp"

#include <random>

#include "hierage/errors.hpp"

namespace hierage {

Aggregation parse_aggregation(const std::string& name) {
  if (name == "encoder") return Aggregation::kEncoder;
  if (name == "average-pool" || name == "avgpool") return Aggregation::kAveragePool;
  if (name == "none" || name == "no-encoder") return Aggregation::kNone;
  throw ContractError("unknown aggregation '" + name + "' (expected encoder, average-pool or none)");
}

std::string to_string(Aggregation aggregation) {
  switch (aggregation) {
    case Aggregation::kEncoder:
      return "encoder";
    case Aggregation::kAveragePool:
      return "average-pool";
    case Aggregation::kNone:
      return "none";
  }
  return "?";
}

void ModelConfig::validate() const {
  encoder.validate();
  if (aggregation == Aggregation::kNone && encoder.num_views != 1) {
    throw ContractError("aggregation 'none' uses a single view; set K = 1");
  }
  (void)bins();
}

Model Model::init(const ModelConfig& config, std::uint64_t seed) {
  config.validate();
  std::mt19937_64 rng(seed);
  Model m;
  m.config = config;
  m.encoder = EncoderParams::init(config.encoder, rng);
  m.head = HeadParams::init(config.encoder.model_dim, config.bin_count, config.head, rng);
  return m;
}

std::vector<NamedTensor> Model::named_parameters() const {
  std::vector<NamedTensor> out = encoder.named();
  for (auto& entry : head.named()) out.push_back(std::move(entry));
  return out;
}

std::vector<Tensor> Model::parameters() const {
  std::vector<Tensor> out;
  for (auto& [name, t] : named_parameters()) out.push_back(t);
  return out;
}

void Model::zero_grad() {
  for (Tensor& t : parameters()) t.zero_grad();
}

Model Model::clone() const {
  Model m;
  m.config = config;
  auto copy_branch = [](const HeadBranch& b) {
    HeadBranch c;
    for (const Tensor& t : b.hidden_weights) c.hidden_weights.push_back(t.clone());
    for (const Tensor& t : b.hidden_biases) c.hidden_biases.push_back(t.clone());
    c.weight = b.weight.clone();
    c.bias = b.bias.clone();
    return c;
  };
  m.encoder.stem_weight = encoder.stem_weight.clone();
  m.encoder.stem_bias = encoder.stem_bias.clone();
  m.encoder.cls_token = encoder.cls_token.clone();
  for (const EncoderLayerParams& l : encoder.layers) {
    EncoderLayerParams c;
    c.query = l.query.clone();
    c.key = l.key.clone();
    c.value = l.value.clone();
    c.output = l.output.clone();
    c.ffn_in = l.ffn_in.clone();
    c.ffn_in_bias = l.ffn_in_bias.clone();
    c.ffn_out = l.ffn_out.clone();
    c.ffn_out_bias = l.ffn_out_bias.clone();
    c.norm1_gain = l.norm1_gain.clone();
    c.norm1_bias = l.norm1_bias.clone();
    c.norm2_gain = l.norm2_gain.clone();
    c.norm2_bias = l.norm2_bias.clone();
    m.encoder.layers.push_back(std::move(c));
  }
  m.head.classifier = copy_branch(head.classifier);
  m.head.regressor = copy_branch(head.regressor);
  return m;
}

ForwardOutput forward(const ForwardContext& ctx, const Model& model, const Tensor& views,
                      std::size_t batch, std::size_t num_views) {
  Tape& tape = ctx.tape;
  ForwardOutput out;
  switch (model.config.aggregation) {
    case Aggregation::kEncoder: {
      EncoderConfig config = model.config.encoder;
      config.num_views = num_views;
      out.fused = encode_batch(ctx, views, batch, model.encoder, config);
      break;
    }
    case Aggregation::kAveragePool:
      if (views.rows() != batch * num_views) {
        throw ContractError("forward: expected " + std::to_string(batch * num_views) + " views");
      }
      out.fused = average_pool_batch(tape, views, batch, model.encoder);
      break;
    case Aggregation::kNone:
      if (num_views != 1 || views.rows() != batch) {
        throw ContractError("forward: aggregation 'none' takes exactly one view per sample");
      }
      out.fused = stem_embed(tape, views, model.encoder);
      break;
  }
  const AgeBins bins = model.config.bins();
  out.logits = classify(tape, out.fused, model.head);
  out.posterior = tape.softmax(out.logits);
  out.residuals = residuals(tape, out.fused, model.head);
  out.prediction = infer_age(tape, out.posterior, out.residuals, bins);
  return out;
}

Tensor model_loss(Tape& tape, const ForwardOutput& out, const BatchLabels& labels,
                  const AgeBins& bins, const LossConfig& config, LossValues* values) {
  LossTerms terms;
  terms.cross_entropy = cross_entropy(tape, out.logits, labels.bins);
  terms.mean = mean_loss(tape, out.posterior, bins, labels.ages);
  terms.variance = variance_loss(tape, out.posterior, bins);
  terms.ensemble = ensemble_l2(tape, out.posterior, out.residuals, bins, labels, config.ensemble);
  Tensor total = total_loss(tape, terms, config.weights);
  if (values != nullptr) {
    values->cross_entropy = terms.cross_entropy.item();
    values->mean = terms.mean.item();
    values->variance = terms.variance.item();
    values->ensemble = terms.ensemble.item();
    values->total = total.item();
  }
  return total;
}

}  // namespace hierage
