#include "hierage/head.hpp"

#include <algorithm>
#include <cmath>

#include "hierage/errors.hpp"

namespace hierage {

AgeBins::AgeBins(std::vector<double> centers) : centers_(std::move(centers)) {
  if (centers_.size() < 2) throw ContractError("age bins: need at least two bins");
  if (!all_finite(centers_)) throw ContractError("age bins: centers must be finite");
  for (std::size_t c = 1; c < centers_.size(); ++c) {
    if (!(centers_[c] > centers_[c - 1])) {
      throw ContractError("age bins: centers must be strictly increasing");
    }
  }
}

AgeBins AgeBins::uniform(double first, double step, std::size_t count) {
  if (!(step > 0.0)) throw ContractError("age bins: step must be positive");
  std::vector<double> centers(count);
  for (std::size_t c = 0; c < count; ++c) centers[c] = first + step * static_cast<double>(c);
  return AgeBins(std::move(centers));
}

AgeBins AgeBins::covering(double lo, double hi, double step) {
  if (!(step > 0.0) || !(hi > lo)) throw ContractError("age bins: invalid covering range");
  const auto count = static_cast<std::size_t>(std::ceil((hi - lo) / step)) + 1;
  return uniform(lo, step, std::max<std::size_t>(count, 2));
}

std::size_t AgeBins::nearest(double age) const {
  const auto it = std::lower_bound(centers_.begin(), centers_.end(), age);
  if (it == centers_.begin()) return 0;
  if (it == centers_.end()) return centers_.size() - 1;
  const auto hi = static_cast<std::size_t>(it - centers_.begin());
  // Ties go to the lower bin.
  return (age - centers_[hi - 1] <= centers_[hi] - age) ? hi - 1 : hi;
}

std::vector<std::size_t> AgeBins::nearest(std::span<const double> ages) const {
  std::vector<std::size_t> out(ages.size());
  std::transform(ages.begin(), ages.end(), out.begin(), [this](double a) { return nearest(a); });
  return out;
}

Tensor AgeBins::as_row() const { return Tensor::vector(centers_); }

Tensor AgeBins::as_column() const { return Tensor::matrix(centers_.size(), 1, centers_); }

AgePosterior::AgePosterior(std::vector<double> p) : p_(std::move(p)) {
  if (p_.empty()) throw ContractError("posterior: empty");
  double total = 0.0;
  for (double v : p_) {
    if (!std::isfinite(v) || v < 0.0) throw ContractError("posterior: entries must be finite and >= 0");
    total += v;
  }
  if (std::abs(total - 1.0) > 1e-9) throw ContractError("posterior: probabilities do not sum to 1");
}

AgePosterior AgePosterior::from_logits(std::span<const double> logits) {
  Tape tape(false);
  const Tensor p = tape.softmax(Tensor::vector({logits.begin(), logits.end()}));
  return AgePosterior({p.values().begin(), p.values().end()});
}

namespace {

HeadBranch init_branch(std::size_t d, std::size_t c, std::size_t hidden, std::mt19937_64& rng) {
  auto xavier = [&rng](std::size_t in, std::size_t out) {
    const double limit = std::sqrt(6.0 / static_cast<double>(in + out));
    std::uniform_real_distribution<double> dist(-limit, limit);
    std::vector<double> w(in * out);
    for (double& v : w) v = dist(rng);
    return Tensor::matrix(in, out, std::move(w), true);
  };
  HeadBranch b;
  for (std::size_t l = 0; l < hidden; ++l) {
    b.hidden_weights.push_back(xavier(d, d));
    b.hidden_biases.push_back(Tensor::zeros({d}, true));
  }
  b.weight = xavier(d, c);
  b.bias = Tensor::zeros({c}, true);
  return b;
}

void append_branch(std::vector<NamedTensor>& out, const std::string& prefix, const HeadBranch& b) {
  for (std::size_t l = 0; l < b.hidden_weights.size(); ++l) {
    out.emplace_back(prefix + ".hidden" + std::to_string(l) + ".weight", b.hidden_weights[l]);
    out.emplace_back(prefix + ".hidden" + std::to_string(l) + ".bias", b.hidden_biases[l]);
  }
  out.emplace_back(prefix + ".weight", b.weight);
  out.emplace_back(prefix + ".bias", b.bias);
}

Tensor apply_branch(Tape& tape, const Tensor& fused, const HeadBranch& b, const char* name) {
  const std::size_t d = b.weight.rows();
  if (fused.cols() != d || fused.rank() == 0 || fused.rank() > 2) {
    throw ShapeError(std::string(name) + ": expected embedding width " + std::to_string(d) +
                     ", got " + shape_to_string(fused.shape()));
  }
  const bool single = fused.rank() == 1;
  Tensor x = single ? tape.reshape(fused, {1, d}) : fused;
  for (std::size_t l = 0; l < b.hidden_weights.size(); ++l) {
    x = tape.gelu(tape.add_row(tape.matmul(x, b.hidden_weights[l]), b.hidden_biases[l]));
  }
  const Tensor out = tape.add_row(tape.matmul(x, b.weight), b.bias);
  return single ? tape.reshape(out, {b.weight.cols()}) : out;
}

}  // namespace

HeadParams HeadParams::init(std::size_t model_dim, std::size_t bins, const HeadConfig& config,
                            std::mt19937_64& rng) {
  HeadParams p;
  p.classifier = init_branch(model_dim, bins, config.hidden_layers, rng);
  p.regressor = init_branch(model_dim, bins, config.hidden_layers, rng);
  return p;
}

std::vector<NamedTensor> HeadParams::named() const {
  std::vector<NamedTensor> out;
  append_branch(out, "classifier", classifier);
  append_branch(out, "regressor", regressor);
  return out;
}

Tensor classify(Tape& tape, const Tensor& fused, const HeadParams& params) {
  return apply_branch(tape, fused, params.classifier, "classify");
}

Tensor residuals(Tape& tape, const Tensor& fused, const HeadParams& params) {
  return apply_branch(tape, fused, params.regressor, "residuals");
}

double local_estimate(std::size_t c, double residual, const AgeBins& bins) {
  if (c >= bins.size()) {
    throw ContractError("local_estimate: bin " + std::to_string(c) + " out of range [0, " +
                        std::to_string(bins.size()) + ")");
  }
  return bins[c] + residual;
}

double infer_age(const AgePosterior& posterior, std::span<const double> residuals,
                 const AgeBins& bins) {
  if (posterior.size() != bins.size() || residuals.size() != bins.size()) {
    throw ShapeError("infer_age: posterior (" + std::to_string(posterior.size()) +
                     "), residuals (" + std::to_string(residuals.size()) + ") and bins (" +
                     std::to_string(bins.size()) + ") differ in length");
  }
  double age = 0.0;
  for (std::size_t c = 0; c < bins.size(); ++c) age += posterior[c] * (bins[c] + residuals[c]);
  return age;
}

Tensor infer_age(Tape& tape, const Tensor& posterior, const Tensor& residuals,
                 const AgeBins& bins) {
  if (posterior.shape() != residuals.shape() || posterior.cols() != bins.size() ||
      posterior.rank() != 2) {
    throw ShapeError("infer_age: posterior " + shape_to_string(posterior.shape()) +
                     " and residuals " + shape_to_string(residuals.shape()) +
                     " must both be [B, " + std::to_string(bins.size()) + "]");
  }
  const Tensor local = tape.add_row(residuals, bins.as_row());
  const Tensor weighted = tape.mul(posterior, local);
  const Tensor ones = Tensor::full({bins.size(), 1}, 1.0);
  return tape.reshape(tape.matmul(weighted, ones), {posterior.rows()});
}

}  // namespace hierage
