#include "hierage/optimizer.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "hierage/errors.hpp"

namespace hierage {

void OptimizerConfig::validate() const {
  if (!(base_lr > min_lr) || !(min_lr >= 0.0)) throw ContractError("optimizer: need base_lr > min_lr >= 0");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) {
    throw ContractError("optimizer: betas must lie in [0, 1)");
  }
  if (!(eps > 0.0)) throw ContractError("optimizer: eps must be positive");
  if (lookahead_k == 0) throw ContractError("optimizer: lookahead_k must be >= 1");
  if (!(lookahead_alpha > 0.0 && lookahead_alpha <= 1.0)) {
    throw ContractError("optimizer: lookahead_alpha must lie in (0, 1]");
  }
  if (batch_size == 0) throw ContractError("optimizer: batch_size must be positive");
}

double cosine_lr(std::size_t step, std::size_t total_steps, double base_lr, double min_lr) {
  if (step >= total_steps) return min_lr;
  const double progress = static_cast<double>(step) / static_cast<double>(total_steps);
  return min_lr + (base_lr - min_lr) * 0.5 * (1.0 + std::cos(std::numbers::pi * progress));
}

Optimizer::Optimizer(std::vector<Tensor> params, const OptimizerConfig& config)
    : params_(std::move(params)), config_(config) {
  for (const Tensor& p : params_) {
    m_.emplace_back(p.size(), 0.0);
    v_.emplace_back(p.size(), 0.0);
    if (config_.lookahead) slow_.emplace_back(p.values().begin(), p.values().end());
  }
}

void Optimizer::step(double lr) {
  for (const Tensor& p : params_) {
    if (p.has_grad() && !all_finite(p.grad())) {
      throw NumericError("optimizer: non-finite gradient at step " + std::to_string(step_ + 1));
    }
  }
  ++step_;
  const double t = static_cast<double>(step_);
  const double b1 = config_.beta1, b2 = config_.beta2;
  const double bias1 = 1.0 - std::pow(b1, t);
  const double bias2 = 1.0 - std::pow(b2, t);

  // Rectification term; adaptive steps only once the variance is tractable.
  bool adaptive = true;
  double rect = 1.0;
  if (config_.rectified_warmup) {
    const double rho_inf = 2.0 / (1.0 - b2) - 1.0;
    const double rho_t = rho_inf - 2.0 * t * std::pow(b2, t) / bias2;
    if (rho_t > 5.0) {
      rect = std::sqrt((rho_t - 4.0) * (rho_t - 2.0) * rho_inf /
                       ((rho_inf - 4.0) * (rho_inf - 2.0) * rho_t));
    } else {
      adaptive = false;
    }
  }

  for (std::size_t i = 0; i < params_.size(); ++i) {
    auto values = params_[i].mutable_values();
    const auto grad = params_[i].grad();
    auto& m = m_[i];
    auto& v = v_[i];
    for (std::size_t j = 0; j < values.size(); ++j) {
      const double g = grad.empty() ? 0.0 : grad[j];
      m[j] = b1 * m[j] + (1.0 - b1) * g;
      v[j] = b2 * v[j] + (1.0 - b2) * g * g;
      const double m_hat = m[j] / bias1;
      if (adaptive) {
        const double v_hat = std::sqrt(v[j] / bias2);
        values[j] -= lr * rect * m_hat / (v_hat + config_.eps);
      } else if (config_.warmup_sgd_fallback) {
        values[j] -= lr * m_hat;
      }
    }
  }

  if (config_.lookahead && step_ % config_.lookahead_k == 0) {
    const double alpha = config_.lookahead_alpha;
    for (std::size_t i = 0; i < params_.size(); ++i) {
      auto values = params_[i].mutable_values();
      auto& slow = slow_[i];
      for (std::size_t j = 0; j < values.size(); ++j) {
        slow[j] += alpha * (values[j] - slow[j]);
        values[j] = slow[j];
      }
    }
  }
}

}  // namespace hierage
