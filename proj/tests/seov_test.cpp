#include <cmath>

#include <gtest/gtest.h>

#include "seover/corpus.hpp"
#include "seover/seov.hpp"
#include "support/gradcheck.hpp"

using namespace seover;

TEST(Projection, ZeroWeightsGiveUniform) {
  const EmotionProjection p(Tensor::zeros({5, 7}));
  Rng rng(1);
  const auto q_star = project_emotion(seover::testing::random_tensor(rng, {5}), p);
  ASSERT_EQ(q_star.size(), 7u);
  for (double v : q_star.values()) EXPECT_NEAR(v, 1.0 / 7.0, 1e-15);
}

TEST(Projection, WidthFollowsLabelSet) {
  Rng rng(2);
  for (const auto& ls : {meld_labels(), iemocap_labels()}) {
    const EmotionProjection p(16, ls.size(), rng);
    EXPECT_EQ(project_emotion(Tensor::zeros({16}), p).size(), ls.size());
  }
}

TEST(Projection, MatchesMatmulThenSoftmaxOracle) {
  Rng rng(3);
  const EmotionProjection p(6, 4, rng);
  const auto q = seover::testing::random_tensor(rng, {6});
  const auto got = project_emotion(q, p);
  double s[4], z = 0.0;
  for (std::size_t j = 0; j < 4; ++j) {
    s[j] = 0.0;
    for (std::size_t i = 0; i < 6; ++i) s[j] += q[i] * p.weights().at(i, j);
    z += std::exp(s[j]);
  }
  for (std::size_t j = 0; j < 4; ++j) EXPECT_NEAR(got[j], std::exp(s[j]) / z, 1e-14);
}

TEST(Projection, ShapeMismatch) {
  Rng rng(4);
  const EmotionProjection p(6, 4, rng);
  EXPECT_THROW(project_emotion(Tensor::zeros({5}), p), ShapeError);
}

TEST(Projection, OutputOnSimplexAndArgmaxShiftInvariant) {
  Rng rng(5);
  for (int trial = 0; trial < 50; ++trial) {
    const EmotionProjection p(8, 7, rng);
    const auto q = seover::testing::random_tensor(rng, {8}, -5, 5);
    const auto q_star = project_emotion(q, p);
    double sum = 0.0;
    for (double v : q_star.values()) {
      EXPECT_GE(v, 0.0);
      sum += v;
    }
    EXPECT_NEAR(sum, 1.0, 1e-12);
    const auto logits = p.logits(q);
    std::vector<double> shifted(logits.values().begin(), logits.values().end());
    for (double& v : shifted) v += 3.5;
    EXPECT_EQ(argmax(shifted), emotion_prediction(q_star));
  }
}

TEST(Fuse, ConcatenatesSentenceThenEmotion) {
  const auto e = fuse(Tensor::vector({0.2, -0.5, 1.0}), Tensor::vector({0.7, 0.1, 0.2}));
  EXPECT_EQ(e.dim(), 6u);
  const std::vector<double> want{0.2, -0.5, 1.0, 0.7, 0.1, 0.2};
  for (std::size_t i = 0; i < 6; ++i) EXPECT_EQ(e.vector()[i], want[i]);
}

TEST(Fuse, FullWidthAndSliceRoundTrip) {
  Rng rng(6);
  const auto q = seover::testing::random_tensor(rng, {768});
  const auto q_star = softmax(seover::testing::random_tensor(rng, {7}));
  const auto e = fuse(q, q_star);
  EXPECT_EQ(e.vector().shape(), (Shape{775}));
  EXPECT_EQ(fused_dim(FusionMode::seov, 768, 7), 775u);
  const auto qs = e.sentence_part(), es = e.emotion_part();
  for (std::size_t i = 0; i < 768; ++i) EXPECT_EQ(qs[i], q[i]);
  for (std::size_t i = 0; i < 7; ++i) EXPECT_EQ(es[i], q_star[i]);
}

TEST(Fuse, AblatedIsSentenceVector) {
  const auto q = Tensor::vector({1, 2, 3});
  const auto e = fuse_ablated(q);
  EXPECT_EQ(e.dim(), 3u);
  EXPECT_EQ(e.k_star(), 0u);
  EXPECT_EQ(fused_dim(FusionMode::sentence_only, 3, 7), 3u);
  for (std::size_t i = 0; i < 3; ++i) EXPECT_EQ(e.vector()[i], q[i]);
}

TEST(Fuse, ParseModes) {
  EXPECT_EQ(parse_fusion("seov"), FusionMode::seov);
  EXPECT_EQ(parse_fusion("sentence_only"), FusionMode::sentence_only);
  EXPECT_THROW(parse_fusion("both"), ConfigError);
}

TEST(Orientation, CosineOfEmotionSlices) {
  const auto q = Tensor::vector({5, -1});
  const auto a = fuse(q, Tensor::vector({1, 0, 0}));
  const auto b = fuse(Tensor::vector({0, 0}), Tensor::vector({1, 0, 0}));
  const auto c = fuse(q, Tensor::vector({0, 1, 0}));
  const auto u = fuse(q, Tensor::vector({1.0 / 3, 1.0 / 3, 1.0 / 3}));
  EXPECT_NEAR(orientation_similarity(a, b), 1.0, 1e-15);
  EXPECT_NEAR(orientation_similarity(a, c), 0.0, 1e-15);
  EXPECT_NEAR(orientation_similarity(a, u), 1.0 / std::sqrt(3.0), 1e-15);
  EXPECT_THROW(orientation_similarity(a, fuse(q, Tensor::vector({1, 0}))), ShapeError);
}

TEST(Projection, GradientMatchesFiniteDifferences) {
  Rng rng(7);
  const auto w = seover::testing::random_tensor(rng, {6, 4});
  const auto q = seover::testing::random_tensor(rng, {6});
  const auto target = Tensor::vector({0.3, -1.0, 0.5, 2.0});
  const EmotionProjection p(w);
  const auto res = seover::testing::gradcheck(
      [&] { return dot(fuse(q, project_emotion(q, p)).vector(), concat(Tensor::vector(std::vector<double>(6, 0.5)), target)); },
      {w, q});
  EXPECT_TRUE(res.ok) << res.detail;
}
