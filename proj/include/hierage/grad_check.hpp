#pragma once

#include <cstddef>
#include <functional>
#include <span>

#include "hierage/tape.hpp"
#include "hierage/tensor.hpp"

namespace hierage {

// Builds a scalar loss on the given tape. Must be deterministic: run the
// model in eval mode (no dropout) when checking.
using LossBuilder = std::function<Tensor(Tape&)>;

struct GradCheckReport {
  double max_rel_error = 0.0;
  std::size_t worst_param = 0;
  std::size_t worst_index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
  std::size_t coordinates = 0;
};

// Compares the tape gradient of `loss` with respect to every element of
// `params` against the central difference (f(p + eps) - f(p - eps)) / (2 eps).
// Relative error is |analytic - numeric| / max(|analytic|, |numeric|, 1e-8).
//
// Throws ContractError when eps is outside [1e-7, 1e-4] or when two
// evaluations at the same point disagree.
GradCheckReport grad_check_report(const LossBuilder& loss, std::span<Tensor> params, double eps);

double grad_check(const LossBuilder& loss, std::span<Tensor> params, double eps);

}  // namespace hierage
