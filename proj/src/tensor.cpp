#include "hierage/tensor.hpp"

#include <cmath>
#include <numeric>
#include <sstream>

#include "hierage/errors.hpp"

namespace hierage {

std::size_t shape_size(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                         [](std::size_t a, std::size_t b) { return a * b; });
}

std::string shape_to_string(const Shape& shape) {
  std::ostringstream out;
  out << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i != 0) out << ',';
    out << shape[i];
  }
  out << ']';
  return out.str();
}

bool all_finite(std::span<const double> values) {
  for (double v : values) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

Tensor::Tensor(Shape shape, std::vector<double> values, bool requires_grad) {
  for (std::size_t dim : shape) {
    if (dim == 0) throw ShapeError("tensor dimensions must be positive, got " + shape_to_string(shape));
  }
  if (shape_size(shape) != values.size()) {
    throw ShapeError("shape " + shape_to_string(shape) + " needs " +
                     std::to_string(shape_size(shape)) + " values, got " +
                     std::to_string(values.size()));
  }
  node_ = std::make_shared<detail::TensorNode>();
  node_->shape = std::move(shape);
  node_->values = std::move(values);
  node_->requires_grad = requires_grad;
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  return full(std::move(shape), 0.0, requires_grad);
}

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
  const std::size_t n = shape_size(shape);
  return Tensor(std::move(shape), std::vector<double>(n, value), requires_grad);
}

Tensor Tensor::scalar(double value) { return Tensor(Shape{}, {value}); }

Tensor Tensor::vector(std::vector<double> values, bool requires_grad) {
  const std::size_t n = values.size();
  return Tensor(Shape{n}, std::move(values), requires_grad);
}

Tensor Tensor::matrix(std::size_t rows, std::size_t cols, std::vector<double> values,
                      bool requires_grad) {
  return Tensor(Shape{rows, cols}, std::move(values), requires_grad);
}

std::size_t Tensor::rows() const { return rank() == 2 ? node_->shape[0] : 1; }

std::size_t Tensor::cols() const { return rank() == 0 ? 1 : node_->shape.back(); }

double Tensor::at(std::size_t row, std::size_t col) const {
  return node_->values[row * cols() + col];
}

double Tensor::item() const {
  if (size() != 1) {
    throw ShapeError("item() needs a single-element tensor, got " + shape_to_string(shape()));
  }
  return node_->values[0];
}

Tensor Tensor::clone() const {
  return Tensor(node_->shape, node_->values, node_->requires_grad);
}

}  // namespace hierage
