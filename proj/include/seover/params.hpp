#pragma once

#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "seover/random.hpp"
#include "seover/tensor.hpp"

namespace seover {

/// Ordered (name, tensor) list; tensors are shared handles, so updating one
/// through the list updates the owning model.
using NamedParams = std::vector<std::pair<std::string, Tensor>>;

inline void append_prefixed(NamedParams& dst, const std::string& prefix, const NamedParams& src) {
  for (const auto& [name, t] : src) dst.emplace_back(prefix + name, t);
}

inline Tensor xavier_uniform(Rng& rng, std::size_t fan_in, std::size_t fan_out) {
  const double a = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  std::vector<double> v(fan_in * fan_out);
  for (double& x : v) x = rng.uniform(-a, a);
  return Tensor({fan_in, fan_out}, std::move(v), true);
}

inline Tensor normal_init(Rng& rng, Shape shape, double stddev) {
  std::vector<double> v(numel(shape));
  for (double& x : v) x = rng.normal(0.0, stddev);
  return Tensor(std::move(shape), std::move(v), true);
}

inline Tensor zeros_param(Shape shape) { return Tensor::zeros(std::move(shape), true); }
inline Tensor ones_param(Shape shape) { return Tensor::full(std::move(shape), 1.0, true); }

/// Inverted dropout: zeroes entries with probability `rate` and rescales the rest.
inline Tensor dropout(const Tensor& x, double rate, Rng& rng) {
  if (rate <= 0.0) return x;
  const double keep = 1.0 - rate;
  std::vector<double> mask(x.size());
  for (double& m : mask) m = rng.bernoulli(keep) ? 1.0 / keep : 0.0;
  return apply_mask(x, std::move(mask));
}

enum class Mode { train, eval };

}  // namespace seover
