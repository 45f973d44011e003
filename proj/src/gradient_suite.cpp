#include "hierage/gradient_suite.hpp"

#include <random>

#include "hierage/model.hpp"
#include "hierage/synth.hpp"

namespace hierage {

std::vector<GradientTermResult> run_gradient_suite(const GradientSuiteConfig& config) {
  ModelConfig mc;
  mc.encoder.input_dim = config.input_dim;
  mc.encoder.model_dim = config.model_dim;
  mc.encoder.num_layers = config.layers;
  mc.encoder.num_heads = config.heads;
  mc.encoder.num_views = config.num_views;
  mc.encoder.dropout = 0.1;  // present but inactive in eval mode
  mc.head.hidden_layers = config.head_hidden_layers;
  mc.bin_first = 1.0;
  mc.bin_size = 1.0;
  mc.bin_count = config.bins;
  mc.validate();

  Model model = Model::init(mc, mix_seed(config.seed, 1));
  std::mt19937_64 rng(mix_seed(config.seed, 2));
  std::normal_distribution<double> normal(0.0, 1.0);
  for (Tensor& p : model.parameters()) {
    for (double& v : p.mutable_values()) v += 0.1 * normal(rng);
  }

  const std::size_t rows = config.batch * config.num_views;
  std::vector<double> raw(rows * config.input_dim);
  for (double& v : raw) v = normal(rng);
  const Tensor views = Tensor::matrix(rows, config.input_dim, std::move(raw));

  const AgeBins bins = mc.bins();
  std::uniform_real_distribution<double> age(bins[0], bins[bins.size() - 1]);
  std::vector<double> ages(config.batch);
  for (double& a : ages) a = age(rng);
  const BatchLabels labels = BatchLabels::from_ages(ages, bins);

  const LossConfig loss_config;
  const auto builder = [&](const std::string& term) -> LossBuilder {
    return [&, term](Tape& tape) {
      const ForwardContext ctx{tape, Mode::kEval, nullptr};
      const ForwardOutput out = forward(ctx, model, views, config.batch, config.num_views);
      if (term == "ce") return cross_entropy(tape, out.logits, labels.bins);
      if (term == "mean") return mean_loss(tape, out.posterior, bins, labels.ages);
      if (term == "variance") return variance_loss(tape, out.posterior, bins);
      if (term == "ensemble") return ensemble_l2(tape, out.posterior, out.residuals, bins, labels);
      return model_loss(tape, out, labels, bins, loss_config);
    };
  };

  std::vector<Tensor> params = model.parameters();
  std::vector<GradientTermResult> results;
  for (const char* term : {"ce", "mean", "variance", "ensemble", "total"}) {
    results.push_back({term, grad_check_report(builder(term), params, config.eps)});
  }
  return results;
}

}  // namespace hierage
