#include "hierage/grad_check.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "hierage/errors.hpp"

namespace hierage {

namespace {

double evaluate(const LossBuilder& loss) {
  Tape tape(false);
  return loss(tape).item();
}

}  // namespace

GradCheckReport grad_check_report(const LossBuilder& loss, std::span<Tensor> params, double eps) {
  if (!(eps >= 1e-7 && eps <= 1e-4)) {
    throw ContractError("grad_check: eps must lie in [1e-7, 1e-4]");
  }
  for (Tensor& p : params) {
    p.set_requires_grad(true);
    p.zero_grad();
  }

  Tape tape;
  const Tensor value = loss(tape);
  tape.backward(value);
  if (evaluate(loss) != value.item() || evaluate(loss) != value.item()) {
    throw ContractError("grad_check: loss is not deterministic (is dropout enabled?)");
  }

  GradCheckReport report;
  for (std::size_t pi = 0; pi < params.size(); ++pi) {
    Tensor& p = params[pi];
    const std::vector<double> analytic =
        p.has_grad() ? std::vector<double>(p.grad().begin(), p.grad().end())
                     : std::vector<double>(p.size(), 0.0);
    auto values = p.mutable_values();
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double saved = values[i];
      values[i] = saved + eps;
      const double plus = evaluate(loss);
      values[i] = saved - eps;
      const double minus = evaluate(loss);
      values[i] = saved;
      const double numeric = (plus - minus) / (2.0 * eps);
      const double denom = std::max({std::abs(analytic[i]), std::abs(numeric), 1e-8});
      const double rel = std::abs(analytic[i] - numeric) / denom;
      ++report.coordinates;
      if (rel > report.max_rel_error) {
        report.max_rel_error = rel;
        report.worst_param = pi;
        report.worst_index = i;
        report.analytic = analytic[i];
        report.numeric = numeric;
      }
    }
  }
  return report;
}

double grad_check(const LossBuilder& loss, std::span<Tensor> params, double eps) {
  return grad_check_report(loss, params, eps).max_rel_error;
}

}  // namespace hierage
