#pragma once

// Shape-checked dense tensors of doubles with reverse-mode autodiff.
//
// A Tensor is a cheap handle onto a shared node. Operations on tensors that
// require grad record a backward closure and references to their inputs; the
// resulting graph is the tape for one forward pass and is released by
// backward().

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <memory>
#include <numeric>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

namespace seover {

using Shape = std::vector<std::size_t>;

class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class AutodiffError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

inline std::string shape_str(const Shape& s) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < s.size(); ++i) os << (i ? "x" : "") << s[i];
  os << ']';
  return os.str();
}

inline std::size_t numel(const Shape& s) {
  return std::accumulate(s.begin(), s.end(), std::size_t{1}, std::multiplies<>());
}

namespace detail {

struct Node {
  Shape shape;
  std::vector<double> values;
  std::vector<double> grad;  // empty until needed
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backward;  // reads this->grad, accumulates into parents

  void ensure_grad() {
    if (grad.size() != values.size()) grad.assign(values.size(), 0.0);
  }
};

inline thread_local bool grad_enabled = true;

}  // namespace detail

/// Disables graph recording for the lifetime of the guard (inference mode).
class NoGradGuard {
 public:
  NoGradGuard() : prev_(detail::grad_enabled) { detail::grad_enabled = false; }
  ~NoGradGuard() { detail::grad_enabled = prev_; }
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool prev_;
};

inline bool grad_mode_enabled() { return detail::grad_enabled; }

class Tensor {
 public:
  Tensor() : node_(std::make_shared<detail::Node>()) { node_->values.assign(1, 0.0); }

  Tensor(Shape shape, std::vector<double> values, bool requires_grad = false)
      : node_(std::make_shared<detail::Node>()) {
    if (numel(shape) != values.size()) {
      throw ShapeError("tensor: shape " + shape_str(shape) + " holds " +
                       std::to_string(numel(shape)) + " values, got " +
                       std::to_string(values.size()));
    }
    node_->shape = std::move(shape);
    node_->values = std::move(values);
    node_->requires_grad = requires_grad;
  }

  static Tensor zeros(Shape shape, bool requires_grad = false) {
    const auto n = numel(shape);
    return Tensor(std::move(shape), std::vector<double>(n, 0.0), requires_grad);
  }
  static Tensor full(Shape shape, double v, bool requires_grad = false) {
    const auto n = numel(shape);
    return Tensor(std::move(shape), std::vector<double>(n, v), requires_grad);
  }
  static Tensor scalar(double v, bool requires_grad = false) {
    return Tensor(Shape{}, {v}, requires_grad);
  }
  static Tensor vector(std::vector<double> v, bool requires_grad = false) {
    const auto n = v.size();
    return Tensor(Shape{n}, std::move(v), requires_grad);
  }
  static Tensor matrix(std::size_t rows, std::size_t cols, std::vector<double> v,
                       bool requires_grad = false) {
    return Tensor(Shape{rows, cols}, std::move(v), requires_grad);
  }
  static Tensor identity(std::size_t n) {
    auto t = zeros({n, n});
    for (std::size_t i = 0; i < n; ++i) t.data()[i * n + i] = 1.0;
    return t;
  }

  const Shape& shape() const { return node_->shape; }
  std::size_t rank() const { return node_->shape.size(); }
  std::size_t dim(std::size_t axis) const { return node_->shape.at(axis); }
  std::size_t size() const { return node_->values.size(); }

  std::span<const double> values() const { return node_->values; }
  std::span<double> data() { return node_->values; }
  double item() const {
    if (size() != 1) throw ShapeError("item(): tensor " + shape_str(shape()) + " is not a scalar");
    return node_->values[0];
  }
  double operator[](std::size_t i) const { return node_->values[i]; }
  double at(std::size_t r, std::size_t c) const { return node_->values[r * node_->shape.back() + c]; }

  bool requires_grad() const { return node_->requires_grad; }
  void set_requires_grad(bool v) { node_->requires_grad = v; }

  bool has_grad() const { return node_->grad.size() == node_->values.size() && !node_->values.empty(); }
  std::span<const double> grad() const { return node_->grad; }
  std::span<double> mutable_grad() {
    node_->ensure_grad();
    return node_->grad;
  }
  void zero_grad() { node_->grad.clear(); }

  /// Copy of the values with no graph history.
  Tensor detach() const { return Tensor(shape(), node_->values, false); }

  bool same_node(const Tensor& o) const { return node_ == o.node_; }
  const std::shared_ptr<detail::Node>& node() const { return node_; }

  /// Builds an op result. `backward` is recorded only when some input needs grad.
  static Tensor make_result(Shape shape, std::vector<double> values,
                            std::vector<Tensor> inputs,
                            std::function<void(detail::Node&)> backward) {
    Tensor out(std::move(shape), std::move(values), false);
    if (!detail::grad_enabled) return out;
    bool any = false;
    for (const auto& in : inputs) any = any || in.requires_grad();
    if (!any) return out;
    out.node_->requires_grad = true;
    for (auto& in : inputs) out.node_->parents.push_back(in.node_);
    out.node_->backward = std::move(backward);
    return out;
  }

 private:
  std::shared_ptr<detail::Node> node_;
};

/// Runs reverse accumulation from a scalar loss into every requires-grad
/// leaf reachable from it. The recorded graph is released afterwards.
inline void backward(const Tensor& loss) {
  if (loss.size() != 1) {
    throw AutodiffError("backward: loss must be scalar, got shape " + shape_str(loss.shape()));
  }
  if (!loss.requires_grad()) throw AutodiffError("backward: loss is detached from the tape");

  // Iterative post-order DFS gives a topological order (inputs before users).
  std::vector<detail::Node*> order;
  std::unordered_set<detail::Node*> seen;
  std::vector<std::pair<detail::Node*, std::size_t>> stack;
  stack.emplace_back(loss.node().get(), 0);
  seen.insert(loss.node().get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      detail::Node* p = node->parents[next++].get();
      if (p->requires_grad && seen.insert(p).second) stack.emplace_back(p, 0);
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  for (auto* n : order) {
    if (n->backward) n->grad.assign(n->values.size(), 0.0);
  }
  auto* root = loss.node().get();
  root->ensure_grad();
  root->grad[0] += 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    detail::Node* n = *it;
    if (!n->backward) continue;
    for (auto& p : n->parents) {
      if (p->requires_grad) p->ensure_grad();
    }
    n->backward(*n);
  }
  // consume the tape
  for (auto* n : order) {
    if (n->backward) {
      n->backward = nullptr;
      n->parents.clear();
    }
  }
}

// ---------------------------------------------------------------------------
// Operations
// ---------------------------------------------------------------------------

namespace detail {

inline void require_same_shape(const char* op, const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " +
                     shape_str(b.shape()));
  }
}

inline void require_rank(const char* op, const Tensor& a, std::size_t r) {
  if (a.rank() != r) {
    throw ShapeError(std::string(op) + ": expected rank " + std::to_string(r) + ", got " +
                     shape_str(a.shape()));
  }
}

inline void accumulate(Node& dst, std::span<const double> src) {
  if (!dst.requires_grad) return;
  for (std::size_t i = 0; i < src.size(); ++i) dst.grad[i] += src[i];
}

template <typename Fwd, typename Deriv>
Tensor unary(const Tensor& x, Fwd fwd, Deriv deriv) {
  std::vector<double> out(x.size());
  auto in = x.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = fwd(in[i]);
  return Tensor::make_result(x.shape(), out, {x}, [deriv](Node& self) {
    Node& p = *self.parents[0];
    if (!p.requires_grad) return;
    for (std::size_t i = 0; i < self.grad.size(); ++i) {
      p.grad[i] += self.grad[i] * deriv(p.values[i], self.values[i]);
    }
  });
}

}  // namespace detail

inline Tensor add(const Tensor& a, const Tensor& b) {
  detail::require_same_shape("add", a, b);
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] + b[i];
  return Tensor::make_result(a.shape(), std::move(out), {a, b}, [](detail::Node& self) {
    detail::accumulate(*self.parents[0], self.grad);
    detail::accumulate(*self.parents[1], self.grad);
  });
}

inline Tensor sub(const Tensor& a, const Tensor& b) {
  detail::require_same_shape("sub", a, b);
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] - b[i];
  return Tensor::make_result(a.shape(), std::move(out), {a, b}, [](detail::Node& self) {
    detail::accumulate(*self.parents[0], self.grad);
    auto& p = *self.parents[1];
    if (!p.requires_grad) return;
    for (std::size_t i = 0; i < self.grad.size(); ++i) p.grad[i] -= self.grad[i];
  });
}

/// Element-wise (Hadamard) product.
inline Tensor mul(const Tensor& a, const Tensor& b) {
  detail::require_same_shape("mul", a, b);
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] * b[i];
  return Tensor::make_result(a.shape(), std::move(out), {a, b}, [](detail::Node& self) {
    auto& pa = *self.parents[0];
    auto& pb = *self.parents[1];
    for (std::size_t i = 0; i < self.grad.size(); ++i) {
      if (pa.requires_grad) pa.grad[i] += self.grad[i] * pb.values[i];
      if (pb.requires_grad) pb.grad[i] += self.grad[i] * pa.values[i];
    }
  });
}

inline Tensor scale(const Tensor& x, double s) {
  return detail::unary(x, [s](double v) { return v * s; }, [s](double, double) { return s; });
}

inline Tensor add_scalar(const Tensor& x, double s) {
  return detail::unary(x, [s](double v) { return v + s; }, [](double, double) { return 1.0; });
}

/// Adds `bias[n]` to every row of `x[...×n]`.
inline Tensor add_bias(const Tensor& x, const Tensor& bias) {
  detail::require_rank("add_bias", bias, 1);
  if (x.rank() == 0 || x.shape().back() != bias.dim(0)) {
    throw ShapeError("add_bias: bias " + shape_str(bias.shape()) + " does not match rows of " +
                     shape_str(x.shape()));
  }
  const std::size_t n = bias.dim(0);
  std::vector<double> out(x.values().begin(), x.values().end());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += bias[i % n];
  return Tensor::make_result(x.shape(), std::move(out), {x, bias}, [n](detail::Node& self) {
    detail::accumulate(*self.parents[0], self.grad);
    auto& b = *self.parents[1];
    if (!b.requires_grad) return;
    for (std::size_t i = 0; i < self.grad.size(); ++i) b.grad[i % n] += self.grad[i];
  });
}

inline Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(0)) {
    throw ShapeError("matmul: incompatible shapes " + shape_str(a.shape()) + " and " +
                     shape_str(b.shape()));
  }
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  std::vector<double> out(m * n, 0.0);
  auto av = a.values();
  auto bv = b.values();
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t p = 0; p < k; ++p) {
      const double aip = av[i * k + p];
      if (aip == 0.0) continue;
      const double* brow = &bv[p * n];
      double* orow = &out[i * n];
      for (std::size_t j = 0; j < n; ++j) orow[j] += aip * brow[j];
    }
  }
  return Tensor::make_result({m, n}, std::move(out), {a, b}, [m, k, n](detail::Node& self) {
    auto& pa = *self.parents[0];
    auto& pb = *self.parents[1];
    const auto& g = self.grad;
    if (pa.requires_grad) {  // dA = G B^T
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t p = 0; p < k; ++p) {
          double s = 0.0;
          for (std::size_t j = 0; j < n; ++j) s += g[i * n + j] * pb.values[p * n + j];
          pa.grad[i * k + p] += s;
        }
    }
    if (pb.requires_grad) {  // dB = A^T G
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t p = 0; p < k; ++p) {
          const double aip = pa.values[i * k + p];
          if (aip == 0.0) continue;
          for (std::size_t j = 0; j < n; ++j) pb.grad[p * n + j] += aip * g[i * n + j];
        }
    }
  });
}

inline Tensor transpose(const Tensor& x) {
  detail::require_rank("transpose", x, 2);
  const std::size_t r = x.dim(0), c = x.dim(1);
  std::vector<double> out(r * c);
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) out[j * r + i] = x[i * c + j];
  return Tensor::make_result({c, r}, std::move(out), {x}, [r, c](detail::Node& self) {
    auto& p = *self.parents[0];
    if (!p.requires_grad) return;
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = 0; j < c; ++j) p.grad[i * c + j] += self.grad[j * r + i];
  });
}

/// Same values under a new shape of equal element count.
inline Tensor reshape(const Tensor& x, Shape shape) {
  if (numel(shape) != x.size()) {
    throw ShapeError("reshape: cannot view " + shape_str(x.shape()) + " as " + shape_str(shape));
  }
  std::vector<double> out(x.values().begin(), x.values().end());
  return Tensor::make_result(std::move(shape), std::move(out), {x}, [](detail::Node& self) {
    detail::accumulate(*self.parents[0], self.grad);
  });
}

inline Tensor tanh(const Tensor& x) {
  return detail::unary(
      x, [](double v) { return std::tanh(v); }, [](double, double y) { return 1.0 - y * y; });
}

inline Tensor sigmoid(const Tensor& x) {
  return detail::unary(
      x,
      [](double v) {
        if (v >= 0) return 1.0 / (1.0 + std::exp(-v));
        const double e = std::exp(v);
        return e / (1.0 + e);
      },
      [](double, double y) { return y * (1.0 - y); });
}

inline Tensor relu(const Tensor& x) {
  return detail::unary(
      x, [](double v) { return v > 0 ? v : 0.0; }, [](double v, double) { return v > 0 ? 1.0 : 0.0; });
}

inline Tensor exp(const Tensor& x) {
  return detail::unary(
      x, [](double v) { return std::exp(v); }, [](double, double y) { return y; });
}

inline Tensor log(const Tensor& x) {
  return detail::unary(
      x, [](double v) { return std::log(v); }, [](double v, double) { return 1.0 / v; });
}

inline Tensor sum(const Tensor& x) {
  double s = 0.0;
  for (double v : x.values()) s += v;
  return Tensor::make_result({}, {s}, {x}, [](detail::Node& self) {
    auto& p = *self.parents[0];
    if (!p.requires_grad) return;
    for (double& g : p.grad) g += self.grad[0];
  });
}

inline Tensor mean(const Tensor& x) {
  if (x.size() == 0) throw ShapeError("mean: empty tensor");
  return scale(sum(x), 1.0 / static_cast<double>(x.size()));
}

inline Tensor dot(const Tensor& a, const Tensor& b) { return sum(mul(a, b)); }

namespace detail {

// Decomposes a shape around `axis` into (outer, extent, inner) for strided loops.
struct AxisView {
  std::size_t outer = 1, extent = 1, inner = 1;
};

inline AxisView axis_view(const Shape& s, std::size_t axis) {
  AxisView v;
  for (std::size_t i = 0; i < axis; ++i) v.outer *= s[i];
  v.extent = s[axis];
  for (std::size_t i = axis + 1; i < s.size(); ++i) v.inner *= s[i];
  return v;
}

}  // namespace detail

/// Normalized exponentials along `axis` (max-subtracted).
inline Tensor softmax(const Tensor& x, std::size_t axis) {
  if (axis >= x.rank()) {
    throw ShapeError("softmax: axis " + std::to_string(axis) + " out of range for " +
                     shape_str(x.shape()));
  }
  const auto v = detail::axis_view(x.shape(), axis);
  std::vector<double> out(x.size());
  auto in = x.values();
  for (std::size_t o = 0; o < v.outer; ++o) {
    for (std::size_t i = 0; i < v.inner; ++i) {
      const std::size_t base = o * v.extent * v.inner + i;
      double mx = -INFINITY;
      for (std::size_t k = 0; k < v.extent; ++k) mx = std::max(mx, in[base + k * v.inner]);
      double z = 0.0;
      for (std::size_t k = 0; k < v.extent; ++k) {
        const double e = std::exp(in[base + k * v.inner] - mx);
        out[base + k * v.inner] = e;
        z += e;
      }
      for (std::size_t k = 0; k < v.extent; ++k) out[base + k * v.inner] /= z;
    }
  }
  return Tensor::make_result(x.shape(), std::move(out), {x}, [v](detail::Node& self) {
    auto& p = *self.parents[0];
    if (!p.requires_grad) return;
    for (std::size_t o = 0; o < v.outer; ++o) {
      for (std::size_t i = 0; i < v.inner; ++i) {
        const std::size_t base = o * v.extent * v.inner + i;
        double s = 0.0;
        for (std::size_t k = 0; k < v.extent; ++k) {
          const std::size_t idx = base + k * v.inner;
          s += self.grad[idx] * self.values[idx];
        }
        for (std::size_t k = 0; k < v.extent; ++k) {
          const std::size_t idx = base + k * v.inner;
          p.grad[idx] += self.values[idx] * (self.grad[idx] - s);
        }
      }
    }
  });
}

inline Tensor softmax(const Tensor& x) {
  if (x.rank() == 0) throw ShapeError("softmax: scalar input");
  return softmax(x, x.rank() - 1);
}

/// log(softmax(x)) along the last axis, computed without forming the softmax.
inline Tensor log_softmax(const Tensor& x) {
  if (x.rank() == 0) throw ShapeError("log_softmax: scalar input");
  const std::size_t n = x.shape().back();
  const std::size_t rows = n ? x.size() / n : 0;
  std::vector<double> out(x.size());
  auto in = x.values();
  for (std::size_t r = 0; r < rows; ++r) {
    const double* row = &in[r * n];
    const double mx = *std::max_element(row, row + n);
    double z = 0.0;
    for (std::size_t k = 0; k < n; ++k) z += std::exp(row[k] - mx);
    const double lz = mx + std::log(z);
    for (std::size_t k = 0; k < n; ++k) out[r * n + k] = row[k] - lz;
  }
  return Tensor::make_result(x.shape(), std::move(out), {x}, [rows, n](detail::Node& self) {
    auto& p = *self.parents[0];
    if (!p.requires_grad) return;
    for (std::size_t r = 0; r < rows; ++r) {
      double gs = 0.0;
      for (std::size_t k = 0; k < n; ++k) gs += self.grad[r * n + k];
      for (std::size_t k = 0; k < n; ++k) {
        const std::size_t idx = r * n + k;
        p.grad[idx] += self.grad[idx] - std::exp(self.values[idx]) * gs;
      }
    }
  });
}

/// Per-row standardization over the last axis followed by `gain * x + bias`.
inline Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias, double eps = 1e-5) {
  detail::require_rank("layer_norm gain", gain, 1);
  detail::require_same_shape("layer_norm gain/bias", gain, bias);
  if (x.rank() == 0 || x.shape().back() != gain.dim(0)) {
    throw ShapeError("layer_norm: last axis of " + shape_str(x.shape()) + " does not match gain " +
                     shape_str(gain.shape()));
  }
  const std::size_t n = gain.dim(0);
  const std::size_t rows = n ? x.size() / n : 0;
  std::vector<double> xhat(x.size()), inv_std(rows), out(x.size());
  auto in = x.values();
  for (std::size_t r = 0; r < rows; ++r) {
    double mu = 0.0;
    for (std::size_t k = 0; k < n; ++k) mu += in[r * n + k];
    mu /= static_cast<double>(n);
    double var = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
      const double d = in[r * n + k] - mu;
      var += d * d;
    }
    var /= static_cast<double>(n);
    inv_std[r] = 1.0 / std::sqrt(var + eps);
    for (std::size_t k = 0; k < n; ++k) {
      const std::size_t idx = r * n + k;
      xhat[idx] = (in[idx] - mu) * inv_std[r];
      out[idx] = gain[k] * xhat[idx] + bias[k];
    }
  }
  return Tensor::make_result(
      x.shape(), std::move(out), {x, gain, bias},
      [rows, n, xhat = std::move(xhat), inv_std = std::move(inv_std)](detail::Node& self) {
        auto& px = *self.parents[0];
        auto& pg = *self.parents[1];
        auto& pb = *self.parents[2];
        const double nn = static_cast<double>(n);
        for (std::size_t r = 0; r < rows; ++r) {
          double sum_g = 0.0, sum_gx = 0.0;
          for (std::size_t k = 0; k < n; ++k) {
            const std::size_t idx = r * n + k;
            const double gy = self.grad[idx];
            if (pg.requires_grad) pg.grad[k] += gy * xhat[idx];
            if (pb.requires_grad) pb.grad[k] += gy;
            const double gxh = gy * pg.values[k];
            sum_g += gxh;
            sum_gx += gxh * xhat[idx];
          }
          if (!px.requires_grad) continue;
          for (std::size_t k = 0; k < n; ++k) {
            const std::size_t idx = r * n + k;
            const double gxh = self.grad[idx] * pg.values[k];
            px.grad[idx] += inv_std[r] / nn * (nn * gxh - sum_g - xhat[idx] * sum_gx);
          }
        }
      });
}

/// Joins tensors along the last axis; all other extents must agree.
inline Tensor concat(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw ShapeError("concat: no operands");
  const Shape& s0 = parts[0].shape();
  if (s0.empty()) throw ShapeError("concat: scalar operand");
  std::size_t total = 0;
  for (const auto& p : parts) {
    const Shape& s = p.shape();
    if (s.size() != s0.size() || !std::equal(s.begin(), s.end() - 1, s0.begin())) {
      throw ShapeError("concat: shape mismatch " + shape_str(s0) + " vs " + shape_str(s));
    }
    total += s.back();
  }
  const std::size_t rows = numel(Shape(s0.begin(), s0.end() - 1));
  std::vector<std::size_t> widths;
  for (const auto& p : parts) widths.push_back(p.shape().back());
  std::vector<double> out(rows * total);
  std::size_t off = 0;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    const std::size_t w = widths[i];
    auto v = parts[i].values();
    for (std::size_t r = 0; r < rows; ++r)
      std::copy_n(v.begin() + static_cast<std::ptrdiff_t>(r * w), w, out.begin() + static_cast<std::ptrdiff_t>(r * total + off));
    off += w;
  }
  Shape shape = s0;
  shape.back() = total;
  return Tensor::make_result(std::move(shape), std::move(out), parts,
                             [rows, total, widths](detail::Node& self) {
                               std::size_t off = 0;
                               for (std::size_t i = 0; i < widths.size(); ++i) {
                                 auto& p = *self.parents[i];
                                 const std::size_t w = widths[i];
                                 if (p.requires_grad) {
                                   for (std::size_t r = 0; r < rows; ++r)
                                     for (std::size_t k = 0; k < w; ++k)
                                       p.grad[r * w + k] += self.grad[r * total + off + k];
                                 }
                                 off += w;
                               }
                             });
}

inline Tensor concat(const Tensor& a, const Tensor& b) { return concat(std::vector<Tensor>{a, b}); }

/// Columns [start, start+len) of the last axis.
inline Tensor slice_last(const Tensor& x, std::size_t start, std::size_t len) {
  if (x.rank() == 0 || start + len > x.shape().back()) {
    throw ShapeError("slice_last: range [" + std::to_string(start) + "," + std::to_string(start + len) +
                     ") outside " + shape_str(x.shape()));
  }
  const std::size_t w = x.shape().back();
  const std::size_t rows = w ? x.size() / w : 0;
  std::vector<double> out(rows * len);
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t k = 0; k < len; ++k) out[r * len + k] = x[r * w + start + k];
  Shape shape = x.shape();
  shape.back() = len;
  return Tensor::make_result(std::move(shape), std::move(out), {x},
                             [rows, w, start, len](detail::Node& self) {
                               auto& p = *self.parents[0];
                               if (!p.requires_grad) return;
                               for (std::size_t r = 0; r < rows; ++r)
                                 for (std::size_t k = 0; k < len; ++k)
                                   p.grad[r * w + start + k] += self.grad[r * len + k];
                             });
}

/// Row `i` of a matrix as a vector.
inline Tensor row(const Tensor& x, std::size_t i) {
  detail::require_rank("row", x, 2);
  if (i >= x.dim(0)) throw ShapeError("row: index " + std::to_string(i) + " outside " + shape_str(x.shape()));
  const std::size_t c = x.dim(1);
  std::vector<double> out(x.values().begin() + static_cast<std::ptrdiff_t>(i * c),
                          x.values().begin() + static_cast<std::ptrdiff_t>((i + 1) * c));
  return Tensor::make_result({c}, std::move(out), {x}, [i, c](detail::Node& self) {
    auto& p = *self.parents[0];
    if (!p.requires_grad) return;
    for (std::size_t k = 0; k < c; ++k) p.grad[i * c + k] += self.grad[k];
  });
}

/// Stacks equal-length vectors into a matrix, one per row.
inline Tensor stack_rows(const std::vector<Tensor>& rows) {
  if (rows.empty()) throw ShapeError("stack_rows: no rows");
  for (const auto& r : rows) {
    if (r.rank() != 1 || r.dim(0) != rows[0].dim(0)) {
      throw ShapeError("stack_rows: row shape " + shape_str(r.shape()) + " vs " + shape_str(rows[0].shape()));
    }
  }
  const std::size_t c = rows[0].dim(0);
  return reshape(concat(rows), {rows.size(), c});
}

/// Rows of `table[V×d]` selected by `ids`, producing [ids.size()×d].
inline Tensor gather_rows(const Tensor& table, std::span<const std::size_t> ids) {
  detail::require_rank("gather_rows", table, 2);
  const std::size_t vsz = table.dim(0), d = table.dim(1);
  std::vector<double> out(ids.size() * d);
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] >= vsz) {
      throw ShapeError("gather_rows: id " + std::to_string(ids[i]) + " outside table " + shape_str(table.shape()));
    }
    std::copy_n(table.values().begin() + static_cast<std::ptrdiff_t>(ids[i] * d), d,
                out.begin() + static_cast<std::ptrdiff_t>(i * d));
  }
  std::vector<std::size_t> idv(ids.begin(), ids.end());
  return Tensor::make_result({ids.size(), d}, std::move(out), {table},
                             [idv = std::move(idv), d](detail::Node& self) {
                               auto& p = *self.parents[0];
                               if (!p.requires_grad) return;
                               for (std::size_t i = 0; i < idv.size(); ++i)
                                 for (std::size_t k = 0; k < d; ++k) p.grad[idv[i] * d + k] += self.grad[i * d + k];
                             });
}

/// Multiplies by a fixed 0/(1/keep) mask. `mask` must match x's size.
inline Tensor apply_mask(const Tensor& x, std::vector<double> mask) {
  if (mask.size() != x.size()) throw ShapeError("apply_mask: mask size mismatch for " + shape_str(x.shape()));
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] * mask[i];
  return Tensor::make_result(x.shape(), std::move(out), {x}, [mask = std::move(mask)](detail::Node& self) {
    auto& p = *self.parents[0];
    if (!p.requires_grad) return;
    for (std::size_t i = 0; i < mask.size(); ++i) p.grad[i] += self.grad[i] * mask[i];
  });
}

inline bool all_finite(const Tensor& x) {
  return std::all_of(x.values().begin(), x.values().end(), [](double v) { return std::isfinite(v); });
}

}  // namespace seover
