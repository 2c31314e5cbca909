#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "seover/errors.hpp"
#include "seover/params.hpp"
#include "seover/tensor.hpp"

namespace seover {

/// Mean over rows of -log softmax(logits)[label].
inline Tensor cross_entropy(const Tensor& logits, std::span<const std::size_t> labels) {
  if (logits.rank() != 2) throw ShapeError("cross_entropy: expected [n x c] logits, got " + shape_str(logits.shape()));
  const std::size_t n = logits.dim(0), c = logits.dim(1);
  if (labels.size() != n) {
    throw ShapeError("cross_entropy: " + std::to_string(n) + " rows vs " + std::to_string(labels.size()) + " labels");
  }
  if (n == 0) throw ShapeError("cross_entropy: no rows");
  std::vector<double> pick(n * c, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    if (labels[i] >= c) {
      throw DataError("cross_entropy: label " + std::to_string(labels[i]) + " outside [0," + std::to_string(c) + ")");
    }
    pick[i * c + labels[i]] = -1.0 / static_cast<double>(n);
  }
  return sum(mul(log_softmax(logits), Tensor({n, c}, std::move(pick))));
}

inline Tensor cross_entropy(const Tensor& logits, const std::vector<std::size_t>& labels) {
  return cross_entropy(logits, std::span<const std::size_t>(labels));
}

enum class OptimizerKind { sgd, adam };

struct OptimizerConfig {
  OptimizerKind kind = OptimizerKind::adam;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Applies SGD or Adam updates to a fixed parameter list. Parameters without
/// a populated gradient are an error; call zero_grad() between steps.
class Optimizer {
 public:
  Optimizer(NamedParams params, OptimizerConfig config) : params_(std::move(params)), config_(config) {
    if (!(config_.learning_rate > 0.0)) throw ConfigError("optimizer: learning_rate must be positive");
    if (config_.kind == OptimizerKind::adam) {
      for (const auto& [name, t] : params_) {
        m_.emplace_back(t.size(), 0.0);
        v_.emplace_back(t.size(), 0.0);
      }
    }
  }

  const NamedParams& parameters() const { return params_; }
  std::size_t steps() const { return step_; }

  void zero_grad() {
    for (auto& [name, t] : params_) t.zero_grad();
  }

  void step() {
    ++step_;
    const double lr = config_.learning_rate;
    const double bc1 = 1.0 - std::pow(config_.beta1, static_cast<double>(step_));
    const double bc2 = 1.0 - std::pow(config_.beta2, static_cast<double>(step_));
    for (std::size_t p = 0; p < params_.size(); ++p) {
      auto& [name, t] = params_[p];
      if (!t.has_grad()) {
        if (t.size() == 0) continue;
        throw AutodiffError("optimizer: parameter '" + name + "' has no gradient");
      }
      auto w = t.data();
      auto g = t.grad();
      if (config_.kind == OptimizerKind::sgd) {
        for (std::size_t i = 0; i < w.size(); ++i) w[i] -= lr * g[i];
      } else {
        auto& m = m_[p];
        auto& v = v_[p];
        for (std::size_t i = 0; i < w.size(); ++i) {
          m[i] = config_.beta1 * m[i] + (1.0 - config_.beta1) * g[i];
          v[i] = config_.beta2 * v[i] + (1.0 - config_.beta2) * g[i] * g[i];
          const double mhat = m[i] / bc1;
          const double vhat = v[i] / bc2;
          w[i] -= lr * mhat / (std::sqrt(vhat) + config_.eps);
        }
      }
    }
  }

 private:
  NamedParams params_;
  OptimizerConfig config_;
  std::vector<std::vector<double>> m_, v_;
  std::size_t step_ = 0;
};

}  // namespace seover
