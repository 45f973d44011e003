#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "hierage/grad_check.hpp"

namespace hierage {

struct GradientSuiteConfig {
  std::size_t input_dim = 6;
  std::size_t model_dim = 8;
  std::size_t num_views = 3;
  std::size_t bins = 5;
  std::size_t batch = 4;
  std::size_t heads = 2;
  std::size_t layers = 2;
  std::size_t head_hidden_layers = 0;
  double eps = 1e-6;
  std::uint64_t seed = 0;
};

struct GradientTermResult {
  std::string term;  // ce, mean, variance, ensemble, total
  GradCheckReport report;
};

// Builds a random model (all parameters perturbed away from their init),
// random views and ages, then checks every loss term through the full
// stem -> encoder -> head chain in eval mode.
std::vector<GradientTermResult> run_gradient_suite(const GradientSuiteConfig& config);

}  // namespace hierage
