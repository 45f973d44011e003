#pragma once

#include <cstddef>
#include <random>
#include <span>
#include <vector>

#include "hierage/encoder.hpp"
#include "hierage/tape.hpp"
#include "hierage/tensor.hpp"

namespace hierage {

// Discrete age values {a_c} the classifier ranges over.
class AgeBins {
 public:
  // Centers must be strictly increasing with at least two entries.
  explicit AgeBins(std::vector<double> centers);
  static AgeBins uniform(double first, double step, std::size_t count);
  // Bins of width `step` whose centers cover [lo, hi].
  static AgeBins covering(double lo, double hi, double step);

  std::size_t size() const { return centers_.size(); }
  double operator[](std::size_t c) const { return centers_[c]; }
  const std::vector<double>& centers() const { return centers_; }
  // Spacing of the first two centers.
  double bin_size() const { return centers_[1] - centers_[0]; }

  std::size_t nearest(double age) const;
  std::vector<std::size_t> nearest(std::span<const double> ages) const;

  Tensor as_row() const;     // [C]
  Tensor as_column() const;  // [C, 1]

 private:
  std::vector<double> centers_;
};

// Validated probability vector over bins: p_c >= 0, sum within 1e-9 of one.
class AgePosterior {
 public:
  explicit AgePosterior(std::vector<double> p);
  static AgePosterior from_logits(std::span<const double> logits);

  std::size_t size() const { return p_.size(); }
  double operator[](std::size_t c) const { return p_[c]; }
  std::span<const double> values() const { return p_; }

 private:
  std::vector<double> p_;
};

struct HeadConfig {
  std::size_t hidden_layers = 0;  // GELU layers of width d ahead of each affine output
};

struct HeadBranch {
  std::vector<Tensor> hidden_weights, hidden_biases;
  Tensor weight;  // [d, C]
  Tensor bias;    // [C]
};

// Both branches read the same fused embedding.
struct HeadParams {
  HeadBranch classifier;
  HeadBranch regressor;  // output coordinate c is R_c(x)

  static HeadParams init(std::size_t model_dim, std::size_t bins, const HeadConfig& config,
                         std::mt19937_64& rng);
  std::vector<NamedTensor> named() const;
};

// x[d] -> [C] or x[B, d] -> [B, C].
Tensor classify(Tape& tape, const Tensor& fused, const HeadParams& params);
Tensor residuals(Tape& tape, const Tensor& fused, const HeadParams& params);

// a_c + r_c for one bin.
double local_estimate(std::size_t c, double residual, const AgeBins& bins);

// sum_c p_c * (a_c + r_c).
double infer_age(const AgePosterior& posterior, std::span<const double> residuals,
                 const AgeBins& bins);

// Differentiable batched form: posterior[B, C], residuals[B, C] -> [B].
Tensor infer_age(Tape& tape, const Tensor& posterior, const Tensor& residuals,
                 const AgeBins& bins);

}  // namespace hierage
