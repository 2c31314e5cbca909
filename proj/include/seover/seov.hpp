#pragma once

// Sentence-level emotion orientation vectors.
//
// A sentence vector q[d] is projected to emotion probabilities
// q* = softmax(q W) with W[d x k*] (no bias), and fused as e = q ⊕ q*.
// The ablated fusion passes q through alone.

#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "seover/errors.hpp"
#include "seover/params.hpp"
#include "seover/tensor.hpp"

namespace seover {

enum class FusionMode { seov, sentence_only };

inline const char* fusion_name(FusionMode m) { return m == FusionMode::seov ? "seov" : "sentence_only"; }

inline FusionMode parse_fusion(const std::string& s) {
  if (s == "seov") return FusionMode::seov;
  if (s == "sentence_only") return FusionMode::sentence_only;
  throw ConfigError("unknown fusion mode '" + s + "' (expected seov or sentence_only)");
}

class EmotionProjection {
 public:
  EmotionProjection() = default;
  explicit EmotionProjection(Tensor weights) : weights_(std::move(weights)) {
    if (weights_.rank() != 2) throw ShapeError("emotion projection: weights must be [d x k*], got " + shape_str(weights_.shape()));
  }
  EmotionProjection(std::size_t d_model, std::size_t k_star, Rng& rng)
      : weights_(xavier_uniform(rng, d_model, k_star)) {}

  std::size_t in_dim() const { return weights_.dim(0); }
  std::size_t k_star() const { return weights_.dim(1); }
  const Tensor& weights() const { return weights_; }
  NamedParams parameters() const { return {{"weights", weights_}}; }

  /// Pre-softmax scores q W, shape [k*].
  Tensor logits(const Tensor& q) const {
    if (q.rank() != 1 || q.dim(0) != in_dim()) {
      throw ShapeError("project_emotion: sentence vector " + shape_str(q.shape()) + " vs projection " +
                       shape_str(weights_.shape()));
    }
    return reshape(matmul(reshape(q, {1, in_dim()}), weights_), {k_star()});
  }

 private:
  Tensor weights_;
};

/// Emotion probability vector q* on the simplex.
inline Tensor project_emotion(const Tensor& q, const EmotionProjection& proj) { return softmax(proj.logits(q)); }

/// First index of the maximum entry.
inline std::size_t argmax(std::span<const double> v) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < v.size(); ++i)
    if (v[i] > v[best]) best = i;
  return best;
}

/// Stage-1 prediction: the most probable emotion in q*.
inline std::size_t emotion_prediction(const Tensor& q_star) { return argmax(q_star.values()); }

class Seov {
 public:
  Seov(Tensor e, std::size_t d_model, std::size_t k_star) : e_(std::move(e)), d_model_(d_model), k_star_(k_star) {
    if (e_.rank() != 1 || e_.dim(0) != d_model_ + k_star_) {
      throw ShapeError("SEOV: vector " + shape_str(e_.shape()) + " does not split as " + std::to_string(d_model_) +
                       "+" + std::to_string(k_star_));
    }
  }

  const Tensor& vector() const { return e_; }
  std::size_t dim() const { return d_model_ + k_star_; }
  std::size_t d_model() const { return d_model_; }
  std::size_t k_star() const { return k_star_; }

  Tensor sentence_part() const { return slice_last(e_, 0, d_model_); }
  Tensor emotion_part() const { return slice_last(e_, d_model_, k_star_); }

 private:
  Tensor e_;
  std::size_t d_model_;
  std::size_t k_star_;
};

inline Seov fuse(const Tensor& q, const Tensor& q_star) {
  if (q.rank() != 1 || q_star.rank() != 1) {
    throw ShapeError("fuse: expected vectors, got " + shape_str(q.shape()) + " and " + shape_str(q_star.shape()));
  }
  return Seov(concat(q, q_star), q.dim(0), q_star.dim(0));
}

/// Ablated fusion: the context model sees q alone.
inline Seov fuse_ablated(const Tensor& q) {
  if (q.rank() != 1) throw ShapeError("fuse_ablated: expected a vector, got " + shape_str(q.shape()));
  return Seov(q, q.dim(0), 0);
}

inline std::size_t fused_dim(FusionMode mode, std::size_t d_model, std::size_t k_star) {
  return mode == FusionMode::seov ? d_model + k_star : d_model;
}

/// Cosine between the emotion slices of two SEOVs.
inline double orientation_similarity(const Seov& a, const Seov& b) {
  if (a.k_star() != b.k_star()) {
    throw ShapeError("orientation_similarity: k* differs (" + std::to_string(a.k_star()) + " vs " +
                     std::to_string(b.k_star()) + ")");
  }
  const auto va = a.vector().values().subspan(a.d_model());
  const auto vb = b.vector().values().subspan(b.d_model());
  double dotp = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < va.size(); ++i) {
    dotp += va[i] * vb[i];
    na += va[i] * va[i];
    nb += vb[i] * vb[i];
  }
  if (na == 0.0 || nb == 0.0) throw NumericError("orientation_similarity: zero-magnitude emotion slice");
  return dotp / (std::sqrt(na) * std::sqrt(nb));
}

}  // namespace seover
