#include "hierage/losses.hpp"

#include <cmath>
#include <string>

#include "hierage/errors.hpp"

namespace hierage {

namespace {

void require_posterior(const char* op, const Tensor& posterior, const AgeBins& bins) {
  if (posterior.rank() != 2 || posterior.cols() != bins.size()) {
    throw ShapeError(std::string(op) + ": posterior " + shape_to_string(posterior.shape()) +
                     " must be [N, " + std::to_string(bins.size()) + "]");
  }
}

void require_batch(const char* op, const Tensor& posterior, std::size_t n) {
  if (posterior.rows() != n) {
    throw ShapeError(std::string(op) + ": " + std::to_string(n) + " labels for " +
                     std::to_string(posterior.rows()) + " rows");
  }
}

// Expected bin value per row: posterior[N, C] * a[C, 1] -> [N, 1].
Tensor expectation(Tape& tape, const Tensor& posterior, const AgeBins& bins) {
  return tape.matmul(posterior, bins.as_column());
}

}  // namespace

void LossWeights::validate() const {
  for (double w : {cross_entropy, mean, variance, ensemble}) {
    if (!std::isfinite(w) || w < 0.0) throw ContractError("loss weights must be finite and >= 0");
  }
}

BatchLabels BatchLabels::from_ages(std::vector<double> ages, const AgeBins& bins) {
  BatchLabels labels;
  labels.bins = bins.nearest(ages);
  labels.ages = std::move(ages);
  return labels;
}

Tensor BatchLabels::ages_column() const { return Tensor::matrix(ages.size(), 1, ages); }

Tensor cross_entropy(Tape& tape, const Tensor& logits, std::span<const std::size_t> bin_indices) {
  if (logits.rank() != 2) {
    throw ShapeError("cross_entropy: logits must be [N, C], got " + shape_to_string(logits.shape()));
  }
  require_batch("cross_entropy", logits, bin_indices.size());
  for (std::size_t y : bin_indices) {
    if (y >= logits.cols()) {
      throw ContractError("cross_entropy: bin index " + std::to_string(y) + " out of range [0, " +
                          std::to_string(logits.cols()) + ")");
    }
  }
  const Tensor log_p = tape.log_softmax(logits);
  return tape.scale(tape.mean(tape.pick(log_p, bin_indices)), -1.0);
}

Tensor mean_loss(Tape& tape, const Tensor& posterior, const AgeBins& bins,
                 std::span<const double> ages) {
  require_posterior("mean_loss", posterior, bins);
  require_batch("mean_loss", posterior, ages.size());
  const std::size_t n = ages.size();
  const Tensor truth = Tensor::matrix(n, 1, {ages.begin(), ages.end()});
  const Tensor sq = tape.squared_error(expectation(tape, posterior, bins), truth);
  return tape.scale(sq, 1.0 / (2.0 * static_cast<double>(n)));
}

Tensor variance_loss(Tape& tape, const Tensor& posterior, const AgeBins& bins) {
  require_posterior("variance_loss", posterior, bins);
  const std::size_t n = posterior.rows(), c = bins.size();
  const Tensor mu = expectation(tape, posterior, bins);  // [N, 1]
  const Tensor grid = Tensor::matrix(n, c, [&] {
    std::vector<double> v(n * c);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < c; ++j) v[i * c + j] = bins[j];
    return v;
  }());
  const Tensor spread = tape.matmul(mu, Tensor::full({1, c}, 1.0));  // mu_i in every column
  const Tensor dev = tape.sub(grid, spread);
  const Tensor weighted = tape.mul(posterior, tape.mul(dev, dev));
  return tape.scale(tape.sum(weighted), 1.0 / static_cast<double>(n));
}

Tensor ensemble_l2(Tape& tape, const Tensor& posterior, const Tensor& residuals,
                   const AgeBins& bins, const BatchLabels& labels, EnsembleMode mode) {
  require_posterior("ensemble_l2", posterior, bins);
  if (residuals.shape() != posterior.shape()) {
    throw ShapeError("ensemble_l2: residuals " + shape_to_string(residuals.shape()) +
                     " vs posterior " + shape_to_string(posterior.shape()));
  }
  require_batch("ensemble_l2", posterior, labels.size());
  if (labels.bins.size() != labels.size()) throw ContractError("ensemble_l2: malformed labels");
  const std::size_t n = labels.size(), c = bins.size();
  const Tensor local = tape.add_row(residuals, bins.as_row());  // a_c + r_ic
  const Tensor truth = tape.matmul(labels.ages_column(), Tensor::full({1, c}, 1.0));
  const Tensor err = tape.sub(local, truth);
  const Tensor sq = tape.mul(err, err);
  Tensor weighted;
  if (mode == EnsembleMode::kSoft) {
    weighted = tape.mul(posterior, sq);
  } else {
    std::vector<double> mask(n * c, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      if (labels.bins[i] >= c) throw ContractError("ensemble_l2: bin index out of range");
      mask[i * c + labels.bins[i]] = 1.0;
    }
    weighted = tape.mul(Tensor::matrix(n, c, std::move(mask)), sq);
  }
  return tape.scale(tape.sum(weighted), 1.0 / static_cast<double>(n));
}

Tensor total_loss(Tape& tape, const LossTerms& terms, const LossWeights& weights) {
  weights.validate();
  const std::pair<const char*, const Tensor*> named[] = {{"cross_entropy", &terms.cross_entropy},
                                                         {"mean", &terms.mean},
                                                         {"variance", &terms.variance},
                                                         {"ensemble_l2", &terms.ensemble}};
  for (const auto& [name, t] : named) {
    if (!t->defined() || t->size() != 1) {
      throw ContractError(std::string("total_loss: term ") + name + " must be a scalar");
    }
    if (!std::isfinite(t->item())) {
      throw NumericError(std::string("total_loss: term ") + name + " is not finite");
    }
  }
  Tensor total = tape.scale(terms.cross_entropy, weights.cross_entropy);
  total = tape.add(total, tape.scale(terms.mean, weights.mean));
  total = tape.add(total, tape.scale(terms.variance, weights.variance));
  return tape.add(total, tape.scale(terms.ensemble, weights.ensemble));
}

}  // namespace hierage
