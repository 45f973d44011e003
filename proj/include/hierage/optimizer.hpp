#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "hierage/tensor.hpp"

namespace hierage {

struct OptimizerConfig {
  double base_lr = 1e-3;
  double min_lr = 1e-5;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  bool rectified_warmup = true;
  // While the rectification term is undefined (first few steps): take
  // bias-corrected momentum steps when true, hold the parameters when false.
  bool warmup_sgd_fallback = false;
  bool lookahead = true;
  std::size_t lookahead_k = 6;
  double lookahead_alpha = 0.5;
  std::size_t batch_size = 32;
  std::size_t epochs = 30;
  std::size_t total_steps = 0;  // 0: derived from epochs and batch count
  std::uint64_t seed = 0;

  void validate() const;
};

// Cosine decay from base_lr at step 0 to min_lr at total_steps. Steps past
// the end stay at min_lr.
double cosine_lr(std::size_t step, std::size_t total_steps, double base_lr, double min_lr);

// Adaptive-moment optimizer with optional variance rectification (until the
// second-moment estimate is trustworthy the update is skipped or, with
// warmup_sgd_fallback, replaced by bias-corrected momentum) and an optional
// Lookahead wrapper
// (every k steps: slow += alpha * (fast - slow); fast = slow).
class Optimizer {
 public:
  Optimizer(std::vector<Tensor> params, const OptimizerConfig& config);

  // One update from the parameters' accumulated gradients (missing
  // gradients count as zero). Throws NumericError naming the step on a
  // non-finite gradient; parameters are left untouched in that case.
  void step(double lr);

  std::size_t steps() const { return step_; }
  const std::vector<Tensor>& params() const { return params_; }
  const std::vector<std::vector<double>>& first_moments() const { return m_; }
  const std::vector<std::vector<double>>& second_moments() const { return v_; }
  const std::vector<std::vector<double>>& slow_weights() const { return slow_; }

 private:
  std::vector<Tensor> params_;
  OptimizerConfig config_;
  std::size_t step_ = 0;
  std::vector<std::vector<double>> m_, v_, slow_;
};

}  // namespace hierage
