#pragma once

#include <cstddef>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace hierage {

using Shape = std::vector<std::size_t>;

std::size_t shape_size(const Shape& shape);
std::string shape_to_string(const Shape& shape);

namespace detail {

struct TensorNode {
  Shape shape;
  std::vector<double> values;
  // Empty until a backward pass reaches the tensor.
  std::vector<double> grad;
  bool requires_grad = false;
};

}  // namespace detail

// Dense row-major float64 array. A Tensor is a shared handle: copies alias
// the same storage, which is what lets a parameter collect gradients from
// every place it is used. Use clone() for an independent copy.
//
// Rank-0 tensors are scalars. Row-wise operations treat a rank-1 tensor as a
// single row.
class Tensor {
 public:
  Tensor() = default;
  Tensor(Shape shape, std::vector<double> values, bool requires_grad = false);

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double value, bool requires_grad = false);
  static Tensor scalar(double value);
  static Tensor vector(std::vector<double> values, bool requires_grad = false);
  static Tensor matrix(std::size_t rows, std::size_t cols, std::vector<double> values,
                       bool requires_grad = false);

  bool defined() const { return node_ != nullptr; }

  const Shape& shape() const { return node_->shape; }
  std::size_t rank() const { return node_->shape.size(); }
  std::size_t size() const { return node_->values.size(); }
  // Leading dimension for rank 2, 1 otherwise.
  std::size_t rows() const;
  // Trailing dimension for rank >= 1, 1 for scalars.
  std::size_t cols() const;

  std::span<const double> values() const { return node_->values; }
  // Direct write access for initialization and optimizer updates. Do not
  // mutate a tensor that participates in a live tape.
  std::span<double> mutable_values() { return node_->values; }

  double operator[](std::size_t i) const { return node_->values[i]; }
  double at(std::size_t row, std::size_t col) const;
  double item() const;

  bool requires_grad() const { return node_->requires_grad; }
  void set_requires_grad(bool value) { node_->requires_grad = value; }

  bool has_grad() const { return !node_->grad.empty(); }
  // Empty span when no gradient has been accumulated.
  std::span<const double> grad() const { return node_->grad; }
  void zero_grad() { node_->grad.clear(); }

  Tensor clone() const;
  bool same_storage(const Tensor& other) const { return node_ == other.node_; }

  const std::shared_ptr<detail::TensorNode>& node() const { return node_; }

 private:
  explicit Tensor(std::shared_ptr<detail::TensorNode> node) : node_(std::move(node)) {}
  friend class Tape;

  std::shared_ptr<detail::TensorNode> node_;
};

bool all_finite(std::span<const double> values);

}  // namespace hierage
