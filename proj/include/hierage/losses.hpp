#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "hierage/head.hpp"
#include "hierage/tape.hpp"
#include "hierage/tensor.hpp"

namespace hierage {

// Weights of the four loss terms: cross-entropy, mean, variance and the
// residual-ensemble L2 sum.
struct LossWeights {
  double cross_entropy = 0.2;
  double mean = 0.05;
  double variance = 1.0;
  double ensemble = 1.0;

  void validate() const;
};

// Ground truth for a batch: real ages and the index of the nearest bin.
struct BatchLabels {
  std::vector<double> ages;
  std::vector<std::size_t> bins;

  static BatchLabels from_ages(std::vector<double> ages, const AgeBins& bins);
  std::size_t size() const { return ages.size(); }
  Tensor ages_column() const;  // [N, 1]
};

enum class EnsembleMode {
  kSoft,  // posterior-weighted over all bins
  kHard,  // only the ground-truth bin, unweighted
};

struct LossTerms {
  Tensor cross_entropy, mean, variance, ensemble;
};

// Mean over the batch of -log softmax(logits_i)[y_i].
Tensor cross_entropy(Tape& tape, const Tensor& logits, std::span<const std::size_t> bin_indices);

// (1 / 2N) * sum_i (sum_c p_ic a_c - a_i)^2.
Tensor mean_loss(Tape& tape, const Tensor& posterior, const AgeBins& bins,
                 std::span<const double> ages);

// (1 / N) * sum_i sum_c p_ic (a_c - sum_j p_ij a_j)^2.
Tensor variance_loss(Tape& tape, const Tensor& posterior, const AgeBins& bins);

// Soft: (1 / N) * sum_i sum_c p_ic (a_c + r_ic - a_i)^2.
// Hard: (1 / N) * sum_i (a_y + r_iy - a_i)^2 with y the label bin.
Tensor ensemble_l2(Tape& tape, const Tensor& posterior, const Tensor& residuals,
                   const AgeBins& bins, const BatchLabels& labels,
                   EnsembleMode mode = EnsembleMode::kSoft);

// Weighted sum. Throws NumericError naming any non-finite term.
Tensor total_loss(Tape& tape, const LossTerms& terms, const LossWeights& weights);

}  // namespace hierage
