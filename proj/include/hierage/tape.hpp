#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "hierage/tensor.hpp"

namespace hierage {

// Reverse-mode gradient tape.
//
// Every operation computes its output eagerly. When at least one input
// requires a gradient (and recording is enabled) the operation is appended
// to the tape together with its local backward rule, so the node list is
// always in topological order. Outputs of recorded operations require
// gradients themselves; operations on constants produce constants.
//
// Operations on finite inputs either produce finite outputs or throw
// NumericError naming the operation.
//
// A tape is single-threaded. Independent samples may use independent tapes
// concurrently as long as they do not share requires_grad leaves.
class Tape {
 public:
  explicit Tape(bool record = true) : record_(record) {}

  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;
  Tape(Tape&&) = default;
  Tape& operator=(Tape&&) = default;

  bool recording() const { return record_; }
  std::size_t size() const { return nodes_.size(); }
  void clear() { nodes_.clear(); }

  // Populates grad() of every requires_grad tensor reachable from `loss`.
  // Leaf gradients accumulate across calls until Tensor::zero_grad().
  // Intermediate gradients are recomputed from scratch on every call.
  void backward(const Tensor& loss);

  // [m,k] x [k,n] -> [m,n]. Both operands must be rank 2.
  Tensor matmul(const Tensor& a, const Tensor& b);
  Tensor transpose(const Tensor& a);

  Tensor add(const Tensor& a, const Tensor& b);
  // a[m,n] + row[n] added to every row.
  Tensor add_row(const Tensor& a, const Tensor& row);
  Tensor sub(const Tensor& a, const Tensor& b);
  Tensor mul(const Tensor& a, const Tensor& b);
  Tensor scale(const Tensor& a, double factor);

  // Exact (erf) Gaussian error linear unit.
  Tensor gelu(const Tensor& a);

  // Row-wise along the last dimension, max-subtracted.
  Tensor softmax(const Tensor& logits);
  Tensor log_softmax(const Tensor& logits);

  // Row-wise normalization; gain and bias have the row length.
  Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias, double eps);

  // Inverted dropout: kept units are divided by (1 - p). Identity for p == 0.
  Tensor dropout(const Tensor& x, double p, std::mt19937_64& rng);

  Tensor concat_rows(std::span<const Tensor> parts);
  Tensor concat_cols(std::span<const Tensor> parts);
  Tensor slice_rows(const Tensor& x, std::size_t begin, std::size_t end);
  Tensor slice_cols(const Tensor& x, std::size_t begin, std::size_t end);
  Tensor gather_rows(const Tensor& x, std::span<const std::size_t> rows);
  // out[i] = x[i, cols[i]] for a rank-2 x; result has shape [rows].
  Tensor pick(const Tensor& x, std::span<const std::size_t> cols);

  Tensor reshape(const Tensor& x, Shape shape);

  // Reductions to a rank-0 scalar.
  Tensor sum(const Tensor& x);
  Tensor mean(const Tensor& x);

  // sum((a - b)^2), composed.
  Tensor squared_error(const Tensor& a, const Tensor& b);

 private:
  using BackwardFn = std::function<void(const std::vector<double>& out_grad)>;

  struct Node {
    std::vector<std::shared_ptr<detail::TensorNode>> inputs;
    std::shared_ptr<detail::TensorNode> output;
    BackwardFn backward;
  };

  bool should_record(std::initializer_list<const Tensor*> inputs) const;
  Tensor emit(const char* op, Shape shape, std::vector<double> values,
              std::initializer_list<const Tensor*> inputs, BackwardFn backward);
  Tensor emit_many(const char* op, Shape shape, std::vector<double> values,
                   std::span<const Tensor> inputs, BackwardFn backward);

  bool record_;
  std::vector<Node> nodes_;
};

// Gradient buffer for `node`, allocated (zero-filled) on first use.
std::vector<double>& grad_buffer(detail::TensorNode& node);

}  // namespace hierage
