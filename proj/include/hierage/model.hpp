#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "hierage/encoder.hpp"
#include "hierage/head.hpp"
#include "hierage/losses.hpp"

namespace hierage {

// How the K view embeddings become one fused embedding.
enum class Aggregation {
  kEncoder,      // class token + Transformer encoder
  kAveragePool,  // mean of the stem embeddings
  kNone,         // single view, stem output used directly (requires K == 1)
};

Aggregation parse_aggregation(const std::string& name);
std::string to_string(Aggregation aggregation);

struct ModelConfig {
  EncoderConfig encoder;
  HeadConfig head;
  Aggregation aggregation = Aggregation::kEncoder;
  double bin_first = 17.0;
  double bin_size = 1.0;
  std::size_t bin_count = 60;

  AgeBins bins() const { return AgeBins::uniform(bin_first, bin_size, bin_count); }
  void validate() const;
};

struct Model {
  ModelConfig config;
  EncoderParams encoder;
  HeadParams head;

  static Model init(const ModelConfig& config, std::uint64_t seed);

  std::vector<NamedTensor> named_parameters() const;
  std::vector<Tensor> parameters() const;
  void zero_grad();
  // Independent copy of every parameter.
  Model clone() const;
};

struct ForwardOutput {
  Tensor fused;       // [B, d]
  Tensor logits;      // [B, C]
  Tensor posterior;   // [B, C]
  Tensor residuals;   // [B, C]
  Tensor prediction;  // [B]
};

// views[B * K, F] holding B groups of K views. K may differ from the
// configured view count only through `num_views`.
ForwardOutput forward(const ForwardContext& ctx, const Model& model, const Tensor& views,
                      std::size_t batch, std::size_t num_views);

struct LossConfig {
  LossWeights weights;
  EnsembleMode ensemble = EnsembleMode::kSoft;
};

struct LossValues {
  double cross_entropy = 0.0, mean = 0.0, variance = 0.0, ensemble = 0.0, total = 0.0;
};

// The weighted training objective for one batch.
Tensor model_loss(Tape& tape, const ForwardOutput& out, const BatchLabels& labels,
                  const AgeBins& bins, const LossConfig& config, LossValues* values = nullptr);

}  // namespace hierage
