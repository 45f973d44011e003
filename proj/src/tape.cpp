#include "hierage/tape.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "hierage/errors.hpp"

namespace hierage {

namespace {

using NodePtr = std::shared_ptr<detail::TensorNode>;

void require_rank2(const char* op, const Tensor& t) {
  if (t.rank() != 2) {
    throw ShapeError(std::string(op) + ": expected a rank-2 tensor, got " +
                     shape_to_string(t.shape()));
  }
}

void require_same_shape(const char* op, const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(op) + ": shape mismatch " + shape_to_string(a.shape()) +
                     " vs " + shape_to_string(b.shape()));
  }
}

// Raw C[m,n] (+)= A[m,k] * B[k,n] with optional transposes of the operands.
void gemm(std::span<const double> a, std::span<const double> b, std::span<double> c,
          std::size_t m, std::size_t k, std::size_t n, bool trans_a, bool trans_b) {
  for (std::size_t i = 0; i < m; ++i) {
    double* crow = c.data() + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double aip = trans_a ? a[p * m + i] : a[i * k + p];
      if (aip == 0.0) continue;
      if (trans_b) {
        for (std::size_t j = 0; j < n; ++j) crow[j] += aip * b[j * k + p];
      } else {
        const double* brow = b.data() + p * n;
        for (std::size_t j = 0; j < n; ++j) crow[j] += aip * brow[j];
      }
    }
  }
}

}  // namespace

std::vector<double>& grad_buffer(detail::TensorNode& node) {
  if (node.grad.empty()) node.grad.assign(node.values.size(), 0.0);
  return node.grad;
}

bool Tape::should_record(std::initializer_list<const Tensor*> inputs) const {
  if (!record_) return false;
  return std::any_of(inputs.begin(), inputs.end(),
                     [](const Tensor* t) { return t->requires_grad(); });
}

Tensor Tape::emit(const char* op, Shape shape, std::vector<double> values,
                  std::initializer_list<const Tensor*> inputs, BackwardFn backward) {
  if (!all_finite(values)) {
    throw NumericError(std::string(op) + ": produced non-finite values");
  }
  const bool rec = should_record(inputs);
  Tensor out(std::move(shape), std::move(values), rec);
  if (rec) {
    Node node;
    for (const Tensor* t : inputs) node.inputs.push_back(t->node());
    node.output = out.node();
    node.backward = std::move(backward);
    nodes_.push_back(std::move(node));
  }
  return out;
}

Tensor Tape::emit_many(const char* op, Shape shape, std::vector<double> values,
                       std::span<const Tensor> inputs, BackwardFn backward) {
  if (!all_finite(values)) {
    throw NumericError(std::string(op) + ": produced non-finite values");
  }
  const bool rec = record_ && std::any_of(inputs.begin(), inputs.end(),
                                          [](const Tensor& t) { return t.requires_grad(); });
  Tensor out(std::move(shape), std::move(values), rec);
  if (rec) {
    Node node;
    for (const Tensor& t : inputs) node.inputs.push_back(t.node());
    node.output = out.node();
    node.backward = std::move(backward);
    nodes_.push_back(std::move(node));
  }
  return out;
}

void Tape::backward(const Tensor& loss) {
  if (!loss.defined() || loss.size() != 1) {
    throw ContractError("backward: loss must be a scalar, got " +
                        (loss.defined() ? shape_to_string(loss.shape()) : std::string("undefined")));
  }
  const auto it = std::find_if(nodes_.begin(), nodes_.end(),
                               [&](const Node& n) { return n.output == loss.node(); });
  if (it == nodes_.end()) {
    throw ContractError("backward: loss was not produced by this tape");
  }
  for (Node& n : nodes_) n.output->grad.clear();
  grad_buffer(*loss.node())[0] = 1.0;
  const auto last = static_cast<std::ptrdiff_t>(it - nodes_.begin());
  for (std::ptrdiff_t i = last; i >= 0; --i) {
    Node& n = nodes_[static_cast<std::size_t>(i)];
    if (n.output->grad.empty()) continue;
    n.backward(n.output->grad);
  }
}

Tensor Tape::matmul(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.shape()[1] != b.shape()[0]) {
    throw ShapeError("matmul: incompatible shapes " + shape_to_string(a.shape()) + " x " +
                     shape_to_string(b.shape()));
  }
  const std::size_t m = a.shape()[0], k = a.shape()[1], n = b.shape()[1];
  std::vector<double> out(m * n, 0.0);
  gemm(a.values(), b.values(), out, m, k, n, false, false);
  NodePtr an = a.node(), bn = b.node();
  return emit("matmul", {m, n}, std::move(out), {&a, &b},
              [an, bn, m, k, n](const std::vector<double>& g) {
                if (an->requires_grad) gemm(g, bn->values, grad_buffer(*an), m, n, k, false, true);
                if (bn->requires_grad) gemm(an->values, g, grad_buffer(*bn), k, m, n, true, false);
              });
}

Tensor Tape::transpose(const Tensor& a) {
  require_rank2("transpose", a);
  const std::size_t m = a.shape()[0], n = a.shape()[1];
  std::vector<double> out(m * n);
  const auto v = a.values();
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out[j * m + i] = v[i * n + j];
  NodePtr an = a.node();
  return emit("transpose", {n, m}, std::move(out), {&a},
              [an, m, n](const std::vector<double>& g) {
                auto& ga = grad_buffer(*an);
                for (std::size_t i = 0; i < m; ++i)
                  for (std::size_t j = 0; j < n; ++j) ga[i * n + j] += g[j * m + i];
              });
}

Tensor Tape::add(const Tensor& a, const Tensor& b) {
  require_same_shape("add", a, b);
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] + b[i];
  NodePtr an = a.node(), bn = b.node();
  return emit("add", a.shape(), std::move(out), {&a, &b}, [an, bn](const std::vector<double>& g) {
    for (const NodePtr& x : {an, bn}) {
      if (!x->requires_grad) continue;
      auto& gx = grad_buffer(*x);
      for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i];
    }
  });
}

Tensor Tape::add_row(const Tensor& a, const Tensor& row) {
  const std::size_t n = a.cols();
  if (a.rank() == 0 || row.size() != n) {
    throw ShapeError("add_row: cannot broadcast " + shape_to_string(row.shape()) + " over " +
                     shape_to_string(a.shape()));
  }
  const std::size_t m = a.size() / n;
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out[i * n + j] = a[i * n + j] + row[j];
  NodePtr an = a.node(), rn = row.node();
  return emit("add_row", a.shape(), std::move(out), {&a, &row},
              [an, rn, m, n](const std::vector<double>& g) {
                if (an->requires_grad) {
                  auto& ga = grad_buffer(*an);
                  for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
                }
                if (rn->requires_grad) {
                  auto& gr = grad_buffer(*rn);
                  for (std::size_t i = 0; i < m; ++i)
                    for (std::size_t j = 0; j < n; ++j) gr[j] += g[i * n + j];
                }
              });
}

Tensor Tape::sub(const Tensor& a, const Tensor& b) {
  require_same_shape("sub", a, b);
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] - b[i];
  NodePtr an = a.node(), bn = b.node();
  return emit("sub", a.shape(), std::move(out), {&a, &b}, [an, bn](const std::vector<double>& g) {
    if (an->requires_grad) {
      auto& ga = grad_buffer(*an);
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
    }
    if (bn->requires_grad) {
      auto& gb = grad_buffer(*bn);
      for (std::size_t i = 0; i < g.size(); ++i) gb[i] -= g[i];
    }
  });
}

Tensor Tape::mul(const Tensor& a, const Tensor& b) {
  require_same_shape("mul", a, b);
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] * b[i];
  NodePtr an = a.node(), bn = b.node();
  return emit("mul", a.shape(), std::move(out), {&a, &b}, [an, bn](const std::vector<double>& g) {
    if (an->requires_grad) {
      auto& ga = grad_buffer(*an);
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * bn->values[i];
    }
    if (bn->requires_grad) {
      auto& gb = grad_buffer(*bn);
      for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * an->values[i];
    }
  });
}

Tensor Tape::scale(const Tensor& a, double factor) {
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] * factor;
  NodePtr an = a.node();
  return emit("scale", a.shape(), std::move(out), {&a}, [an, factor](const std::vector<double>& g) {
    auto& ga = grad_buffer(*an);
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * factor;
  });
}

Tensor Tape::gelu(const Tensor& a) {
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double x = a[i];
    out[i] = 0.5 * x * (1.0 + std::erf(x * std::numbers::sqrt2 / 2.0));
  }
  NodePtr an = a.node();
  return emit("gelu", a.shape(), std::move(out), {&a}, [an](const std::vector<double>& g) {
    auto& ga = grad_buffer(*an);
    const double inv_sqrt_2pi = 0.5 * std::numbers::inv_sqrtpi * std::numbers::sqrt2;
    for (std::size_t i = 0; i < g.size(); ++i) {
      const double x = an->values[i];
      const double cdf = 0.5 * (1.0 + std::erf(x * std::numbers::sqrt2 / 2.0));
      const double pdf = inv_sqrt_2pi * std::exp(-0.5 * x * x);
      ga[i] += g[i] * (cdf + x * pdf);
    }
  });
}

Tensor Tape::softmax(const Tensor& logits) {
  if (!all_finite(logits.values())) throw NumericError("softmax: non-finite logits");
  const std::size_t n = logits.cols();
  const std::size_t m = logits.size() / n;
  std::vector<double> out(logits.size());
  for (std::size_t i = 0; i < m; ++i) {
    const double* z = logits.values().data() + i * n;
    double* p = out.data() + i * n;
    const double zmax = *std::max_element(z, z + n);
    double total = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      p[j] = std::exp(z[j] - zmax);
      total += p[j];
    }
    for (std::size_t j = 0; j < n; ++j) p[j] /= total;
  }
  NodePtr xn = logits.node();
  Tensor result = emit("softmax", logits.shape(), std::move(out), {&logits}, nullptr);
  if (result.requires_grad()) {
    std::weak_ptr<detail::TensorNode> yw = result.node();
    nodes_.back().backward = [xn, yw, m, n](const std::vector<double>& g) {
      const NodePtr y = yw.lock();
      auto& gx = grad_buffer(*xn);
      for (std::size_t i = 0; i < m; ++i) {
        const double* yi = y->values.data() + i * n;
        const double* gi = g.data() + i * n;
        double dot = 0.0;
        for (std::size_t j = 0; j < n; ++j) dot += gi[j] * yi[j];
        for (std::size_t j = 0; j < n; ++j) gx[i * n + j] += yi[j] * (gi[j] - dot);
      }
    };
  }
  return result;
}

Tensor Tape::log_softmax(const Tensor& logits) {
  if (!all_finite(logits.values())) throw NumericError("log_softmax: non-finite logits");
  const std::size_t n = logits.cols();
  const std::size_t m = logits.size() / n;
  std::vector<double> out(logits.size());
  for (std::size_t i = 0; i < m; ++i) {
    const double* z = logits.values().data() + i * n;
    const double zmax = *std::max_element(z, z + n);
    double total = 0.0;
    for (std::size_t j = 0; j < n; ++j) total += std::exp(z[j] - zmax);
    const double lse = zmax + std::log(total);
    for (std::size_t j = 0; j < n; ++j) out[i * n + j] = z[j] - lse;
  }
  NodePtr xn = logits.node();
  Tensor result = emit("log_softmax", logits.shape(), std::move(out), {&logits}, nullptr);
  if (result.requires_grad()) {
    std::weak_ptr<detail::TensorNode> yw = result.node();
    nodes_.back().backward = [xn, yw, m, n](const std::vector<double>& g) {
      const NodePtr y = yw.lock();
      auto& gx = grad_buffer(*xn);
      for (std::size_t i = 0; i < m; ++i) {
        const double* gi = g.data() + i * n;
        double total = 0.0;
        for (std::size_t j = 0; j < n; ++j) total += gi[j];
        for (std::size_t j = 0; j < n; ++j)
          gx[i * n + j] += gi[j] - std::exp(y->values[i * n + j]) * total;
      }
    };
  }
  return result;
}

Tensor Tape::layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias, double eps) {
  if (!(eps > 0.0)) throw ContractError("layer_norm: eps must be positive");
  const std::size_t n = x.cols();
  if (x.rank() == 0 || gain.size() != n || bias.size() != n) {
    throw ShapeError("layer_norm: gain " + shape_to_string(gain.shape()) + " / bias " +
                     shape_to_string(bias.shape()) + " do not match rows of " +
                     shape_to_string(x.shape()));
  }
  const std::size_t m = x.size() / n;
  std::vector<double> out(x.size());
  auto normalized = std::make_shared<std::vector<double>>(x.size());
  auto inv_std = std::make_shared<std::vector<double>>(m);
  for (std::size_t i = 0; i < m; ++i) {
    const double* xi = x.values().data() + i * n;
    double mu = 0.0;
    for (std::size_t j = 0; j < n; ++j) mu += xi[j];
    mu /= static_cast<double>(n);
    double var = 0.0;
    for (std::size_t j = 0; j < n; ++j) var += (xi[j] - mu) * (xi[j] - mu);
    var /= static_cast<double>(n);
    const double inv = 1.0 / std::sqrt(var + eps);
    (*inv_std)[i] = inv;
    for (std::size_t j = 0; j < n; ++j) {
      const double xh = (xi[j] - mu) * inv;
      (*normalized)[i * n + j] = xh;
      out[i * n + j] = xh * gain[j] + bias[j];
    }
  }
  NodePtr xn = x.node(), gn = gain.node(), bn = bias.node();
  return emit("layer_norm", x.shape(), std::move(out), {&x, &gain, &bias},
              [xn, gn, bn, normalized, inv_std, m, n](const std::vector<double>& g) {
                const auto& xh = *normalized;
                if (gn->requires_grad) {
                  auto& gg = grad_buffer(*gn);
                  for (std::size_t i = 0; i < m; ++i)
                    for (std::size_t j = 0; j < n; ++j) gg[j] += g[i * n + j] * xh[i * n + j];
                }
                if (bn->requires_grad) {
                  auto& gb = grad_buffer(*bn);
                  for (std::size_t i = 0; i < m; ++i)
                    for (std::size_t j = 0; j < n; ++j) gb[j] += g[i * n + j];
                }
                if (xn->requires_grad) {
                  auto& gx = grad_buffer(*xn);
                  const double inv_n = 1.0 / static_cast<double>(n);
                  for (std::size_t i = 0; i < m; ++i) {
                    double mean_d = 0.0, mean_dx = 0.0;
                    for (std::size_t j = 0; j < n; ++j) {
                      const double d = g[i * n + j] * gn->values[j];
                      mean_d += d;
                      mean_dx += d * xh[i * n + j];
                    }
                    mean_d *= inv_n;
                    mean_dx *= inv_n;
                    for (std::size_t j = 0; j < n; ++j) {
                      const double d = g[i * n + j] * gn->values[j];
                      gx[i * n + j] += (*inv_std)[i] * (d - mean_d - xh[i * n + j] * mean_dx);
                    }
                  }
                }
              });
}

Tensor Tape::dropout(const Tensor& x, double p, std::mt19937_64& rng) {
  if (!(p >= 0.0 && p < 1.0)) throw ContractError("dropout: p must lie in [0, 1)");
  if (p == 0.0) return x;
  auto mask = std::make_shared<std::vector<double>>(x.size());
  std::bernoulli_distribution keep(1.0 - p);
  const double kept = 1.0 / (1.0 - p);
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    (*mask)[i] = keep(rng) ? kept : 0.0;
    out[i] = x[i] * (*mask)[i];
  }
  NodePtr xn = x.node();
  return emit("dropout", x.shape(), std::move(out), {&x}, [xn, mask](const std::vector<double>& g) {
    auto& gx = grad_buffer(*xn);
    for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * (*mask)[i];
  });
}

Tensor Tape::concat_rows(std::span<const Tensor> parts) {
  if (parts.empty()) throw ShapeError("concat_rows: no inputs");
  const std::size_t n = parts.front().cols();
  std::size_t m = 0;
  std::vector<std::size_t> offsets;
  for (const Tensor& t : parts) {
    if (t.rank() > 2 || t.cols() != n) {
      throw ShapeError("concat_rows: column mismatch " + shape_to_string(t.shape()) + " vs width " +
                       std::to_string(n));
    }
    offsets.push_back(m * n);
    m += t.rows();
  }
  std::vector<double> out;
  out.reserve(m * n);
  for (const Tensor& t : parts) out.insert(out.end(), t.values().begin(), t.values().end());
  std::vector<NodePtr> nodes;
  for (const Tensor& t : parts) nodes.push_back(t.node());
  return emit_many("concat_rows", {m, n}, std::move(out), parts,
                   [nodes, offsets](const std::vector<double>& g) {
                     for (std::size_t p = 0; p < nodes.size(); ++p) {
                       if (!nodes[p]->requires_grad) continue;
                       auto& gp = grad_buffer(*nodes[p]);
                       for (std::size_t i = 0; i < gp.size(); ++i) gp[i] += g[offsets[p] + i];
                     }
                   });
}

Tensor Tape::concat_cols(std::span<const Tensor> parts) {
  if (parts.empty()) throw ShapeError("concat_cols: no inputs");
  const std::size_t m = parts.front().rows();
  std::size_t n = 0;
  std::vector<std::size_t> col_offsets, widths;
  for (const Tensor& t : parts) {
    if (t.rank() > 2 || t.rows() != m) {
      throw ShapeError("concat_cols: row mismatch " + shape_to_string(t.shape()) + " vs height " +
                       std::to_string(m));
    }
    col_offsets.push_back(n);
    widths.push_back(t.cols());
    n += t.cols();
  }
  std::vector<double> out(m * n);
  for (std::size_t p = 0; p < parts.size(); ++p) {
    const auto v = parts[p].values();
    for (std::size_t i = 0; i < m; ++i)
      std::copy_n(v.data() + i * widths[p], widths[p], out.data() + i * n + col_offsets[p]);
  }
  std::vector<NodePtr> nodes;
  for (const Tensor& t : parts) nodes.push_back(t.node());
  return emit_many("concat_cols", {m, n}, std::move(out), parts,
                   [nodes, col_offsets, widths, m, n](const std::vector<double>& g) {
                     for (std::size_t p = 0; p < nodes.size(); ++p) {
                       if (!nodes[p]->requires_grad) continue;
                       auto& gp = grad_buffer(*nodes[p]);
                       for (std::size_t i = 0; i < m; ++i)
                         for (std::size_t j = 0; j < widths[p]; ++j)
                           gp[i * widths[p] + j] += g[i * n + col_offsets[p] + j];
                     }
                   });
}

Tensor Tape::slice_rows(const Tensor& x, std::size_t begin, std::size_t end) {
  require_rank2("slice_rows", x);
  if (begin >= end || end > x.rows()) {
    throw ShapeError("slice_rows: range [" + std::to_string(begin) + "," + std::to_string(end) +
                     ") invalid for " + shape_to_string(x.shape()));
  }
  const std::size_t n = x.cols();
  std::vector<double> out(x.values().begin() + static_cast<std::ptrdiff_t>(begin * n),
                          x.values().begin() + static_cast<std::ptrdiff_t>(end * n));
  NodePtr xn = x.node();
  return emit("slice_rows", {end - begin, n}, std::move(out), {&x},
              [xn, begin, n](const std::vector<double>& g) {
                auto& gx = grad_buffer(*xn);
                for (std::size_t i = 0; i < g.size(); ++i) gx[begin * n + i] += g[i];
              });
}

Tensor Tape::slice_cols(const Tensor& x, std::size_t begin, std::size_t end) {
  require_rank2("slice_cols", x);
  if (begin >= end || end > x.cols()) {
    throw ShapeError("slice_cols: range [" + std::to_string(begin) + "," + std::to_string(end) +
                     ") invalid for " + shape_to_string(x.shape()));
  }
  const std::size_t m = x.rows(), n = x.cols(), w = end - begin;
  std::vector<double> out(m * w);
  for (std::size_t i = 0; i < m; ++i)
    std::copy_n(x.values().data() + i * n + begin, w, out.data() + i * w);
  NodePtr xn = x.node();
  return emit("slice_cols", {m, w}, std::move(out), {&x},
              [xn, begin, m, n, w](const std::vector<double>& g) {
                auto& gx = grad_buffer(*xn);
                for (std::size_t i = 0; i < m; ++i)
                  for (std::size_t j = 0; j < w; ++j) gx[i * n + begin + j] += g[i * w + j];
              });
}

Tensor Tape::gather_rows(const Tensor& x, std::span<const std::size_t> rows) {
  require_rank2("gather_rows", x);
  if (rows.empty()) throw ShapeError("gather_rows: empty index list");
  const std::size_t n = x.cols();
  std::vector<double> out(rows.size() * n);
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r] >= x.rows()) {
      throw ShapeError("gather_rows: row " + std::to_string(rows[r]) + " out of range for " +
                       shape_to_string(x.shape()));
    }
    std::copy_n(x.values().data() + rows[r] * n, n, out.data() + r * n);
  }
  NodePtr xn = x.node();
  std::vector<std::size_t> idx(rows.begin(), rows.end());
  return emit("gather_rows", {rows.size(), n}, std::move(out), {&x},
              [xn, idx, n](const std::vector<double>& g) {
                auto& gx = grad_buffer(*xn);
                for (std::size_t r = 0; r < idx.size(); ++r)
                  for (std::size_t j = 0; j < n; ++j) gx[idx[r] * n + j] += g[r * n + j];
              });
}

Tensor Tape::pick(const Tensor& x, std::span<const std::size_t> cols) {
  require_rank2("pick", x);
  const std::size_t m = x.rows(), n = x.cols();
  if (cols.size() != m) {
    throw ShapeError("pick: " + std::to_string(cols.size()) + " indices for " +
                     shape_to_string(x.shape()));
  }
  std::vector<double> out(m);
  for (std::size_t i = 0; i < m; ++i) {
    if (cols[i] >= n) {
      throw ShapeError("pick: column " + std::to_string(cols[i]) + " out of range for " +
                       shape_to_string(x.shape()));
    }
    out[i] = x.at(i, cols[i]);
  }
  NodePtr xn = x.node();
  std::vector<std::size_t> idx(cols.begin(), cols.end());
  return emit("pick", {m}, std::move(out), {&x}, [xn, idx, n](const std::vector<double>& g) {
    auto& gx = grad_buffer(*xn);
    for (std::size_t i = 0; i < idx.size(); ++i) gx[i * n + idx[i]] += g[i];
  });
}

Tensor Tape::reshape(const Tensor& x, Shape shape) {
  if (shape_size(shape) != x.size()) {
    throw ShapeError("reshape: cannot view " + shape_to_string(x.shape()) + " as " +
                     shape_to_string(shape));
  }
  std::vector<double> out(x.values().begin(), x.values().end());
  NodePtr xn = x.node();
  return emit("reshape", std::move(shape), std::move(out), {&x},
              [xn](const std::vector<double>& g) {
                auto& gx = grad_buffer(*xn);
                for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i];
              });
}

Tensor Tape::sum(const Tensor& x) {
  double total = 0.0;
  for (double v : x.values()) total += v;
  NodePtr xn = x.node();
  return emit("sum", {}, {total}, {&x}, [xn](const std::vector<double>& g) {
    auto& gx = grad_buffer(*xn);
    for (double& v : gx) v += g[0];
  });
}

Tensor Tape::mean(const Tensor& x) {
  return scale(sum(x), 1.0 / static_cast<double>(x.size()));
}

Tensor Tape::squared_error(const Tensor& a, const Tensor& b) {
  const Tensor diff = sub(a, b);
  return sum(mul(diff, diff));
}

}  // namespace hierage
