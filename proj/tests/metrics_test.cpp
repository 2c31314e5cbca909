#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>

#include <gtest/gtest.h>

#include "seover/metrics.hpp"
#include "seover/random.hpp"

using namespace seover;

namespace {

// brute force: count every pair from scratch for each class
struct Oracle {
  std::vector<std::vector<std::uint64_t>> cm;
  std::vector<double> f1;
  double weighted = 0.0;
  double accuracy = 0.0;
};

Oracle brute_force(const std::vector<std::size_t>& g, const std::vector<std::size_t>& p, std::size_t m) {
  Oracle o;
  o.cm.assign(m, std::vector<std::uint64_t>(m, 0));
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < m; ++j)
      for (std::size_t k = 0; k < g.size(); ++k) o.cm[i][j] += (g[k] == i && p[k] == j) ? 1 : 0;
  double correct = 0.0;
  for (std::size_t c = 0; c < m; ++c) {
    double tp = 0, fp = 0, fn = 0;
    for (std::size_t k = 0; k < g.size(); ++k) {
      tp += g[k] == c && p[k] == c;
      fp += g[k] != c && p[k] == c;
      fn += g[k] == c && p[k] != c;
    }
    correct += tp;
    const double f = tp == 0 ? 0.0 : 2 * tp / (2 * tp + fp + fn);
    o.f1.push_back(f);
    o.weighted += f * (tp + fn) / static_cast<double>(g.size());
  }
  o.accuracy = correct / static_cast<double>(g.size());
  return o;
}

std::vector<std::size_t> random_labels(Rng& rng, std::size_t n, std::size_t m) {
  std::vector<std::size_t> v(n);
  for (auto& x : v) x = rng.below(m);
  return v;
}

}  // namespace

TEST(Confusion, HandCount) {
  const auto cm = confusion({0, 0, 1}, {0, 1, 1}, 2);
  EXPECT_EQ(cm.at(0, 0), 1u);
  EXPECT_EQ(cm.at(0, 1), 1u);
  EXPECT_EQ(cm.at(1, 0), 0u);
  EXPECT_EQ(cm.at(1, 1), 1u);
}

TEST(Confusion, PerfectPredictionsAreDiagonal) {
  const std::vector<std::size_t> g{0, 1, 2, 2, 1};
  const auto cm = confusion(g, g, 3);
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 3; ++j)
      EXPECT_EQ(cm.at(i, j), i == j ? cm.at(i, i) : 0u);
  const auto r = f1_scores(cm);
  EXPECT_EQ(r.weighted_f1, 1.0);
  for (const auto& c : r.per_class) EXPECT_EQ(c.f1, 1.0);
}

TEST(Confusion, Errors) {
  EXPECT_THROW(confusion({0, 1}, {0}, 2), DataError);
  EXPECT_THROW(confusion({0, 2}, {0, 1}, 2), DataError);
  EXPECT_THROW(f1_scores(ConfusionMatrix(3)), DataError);
}

TEST(F1, TwoByTwoHandCase) {
  const auto r = evaluate({0, 0, 1}, {0, 1, 1}, 2);
  EXPECT_EQ(r.per_class[0].precision, 1.0);
  EXPECT_EQ(r.per_class[0].recall, 0.5);
  EXPECT_EQ(r.per_class[1].precision, 0.5);
  EXPECT_EQ(r.per_class[1].recall, 1.0);
  EXPECT_EQ(r.per_class[0].f1, 2.0 / 3.0);
  EXPECT_EQ(r.per_class[1].f1, 2.0 / 3.0);
  EXPECT_EQ(r.weighted_f1, 2.0 / 3.0);
}

TEST(F1, AllWrongSingleClass) {
  const auto r = evaluate({0, 0, 0}, {1, 1, 1}, 2);
  EXPECT_EQ(r.weighted_f1, 0.0);
  EXPECT_EQ(r.accuracy, 0.0);
}

TEST(F1, MatchesBruteForceOracle) {
  Rng rng(1);
  for (std::size_t m : {2u, 6u, 7u}) {
    for (int trial = 0; trial < 1000; ++trial) {
      const std::size_t n = 1 + rng.below(60);
      const auto g = random_labels(rng, n, m), p = random_labels(rng, n, m);
      const auto r = evaluate(g, p, m);
      const auto o = brute_force(g, p, m);
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < m; ++j) ASSERT_EQ(r.confusion.at(i, j), o.cm[i][j]);
      for (std::size_t c = 0; c < m; ++c) ASSERT_NEAR(r.per_class[c].f1, o.f1[c], 1e-12);
      ASSERT_NEAR(r.weighted_f1, o.weighted, 1e-12);
      ASSERT_EQ(r.accuracy, static_cast<double>(r.confusion.trace()) / static_cast<double>(n));
      ASSERT_NEAR(r.accuracy, o.accuracy, 1e-15);
      std::uint64_t support = 0;
      for (const auto& c : r.per_class) support += c.support;
      ASSERT_EQ(support, r.confusion.total());
    }
  }
}

TEST(F1, LabelPermutationInvariance) {
  Rng rng(2);
  for (std::size_t m : {2u, 6u, 7u}) {
    for (int trial = 0; trial < 200; ++trial) {
      const std::size_t n = 1 + rng.below(40);
      const auto g = random_labels(rng, n, m), p = random_labels(rng, n, m);
      std::vector<std::size_t> perm(m);
      std::iota(perm.begin(), perm.end(), std::size_t{0});
      rng.shuffle(perm);
      std::vector<std::size_t> g2(n), p2(n);
      for (std::size_t k = 0; k < n; ++k) {
        g2[k] = perm[g[k]];
        p2[k] = perm[p[k]];
      }
      const auto a = evaluate(g, p, m), b = evaluate(g2, p2, m);
      for (std::size_t c = 0; c < m; ++c) ASSERT_EQ(a.per_class[c].f1, b.per_class[perm[c]].f1);
      ASSERT_EQ(a.weighted_f1, b.weighted_f1);
    }
  }
}

TEST(F1, ZeroSupportClassScoresZero) {
  const auto r = evaluate({0, 0}, {0, 2}, 3);
  EXPECT_EQ(r.per_class[1].f1, 0.0);
  EXPECT_EQ(r.per_class[2].f1, 0.0);
  EXPECT_EQ(r.per_class[2].support, 0u);
}

TEST(Render, TablesNameEveryLabel) {
  const auto meld = meld_labels();
  const auto r = evaluate({0, 1, 2, 3, 4, 5, 6}, {0, 1, 2, 3, 4, 5, 0}, meld.size());
  const auto table = render_f1_table(r, meld, "seover");
  const auto cm = render_confusion(r.confusion, meld);
  for (const auto& l : meld.labels()) {
    EXPECT_NE(table.find(l), std::string::npos);
    EXPECT_NE(cm.find(l), std::string::npos);
  }
  EXPECT_NE(table.find("Average"), std::string::npos);
  EXPECT_EQ(cm.rfind("rows = gold, columns = predicted", 0), 0u);
  std::ostringstream tsv;
  write_confusion_tsv(tsv, r.confusion, meld);
  const auto s = tsv.str();
  EXPECT_EQ(std::count(s.begin(), s.end(), '\n'), 8);
}

TEST(Heatmap, TwoValueColumnAndConstantColumn) {
  const auto rows = heatmap_normalize({Tensor::vector({0, 3}), Tensor::vector({10, 3}), Tensor::vector({5, 3})});
  EXPECT_EQ(rows[0][0], 0.0);
  EXPECT_EQ(rows[1][0], 1.0);
  EXPECT_EQ(rows[2][0], 0.5);
  for (const auto& r : rows) EXPECT_EQ(r[1], 0.5);
}

TEST(Heatmap, SingleRowIsAllHalf) {
  const auto rows = heatmap_normalize({Tensor::vector({1, -2, 7})});
  EXPECT_EQ(rows[0], (std::vector<double>{0.5, 0.5, 0.5}));
}

TEST(Heatmap, MatchesDirectFormula) {
  Rng rng(3);
  std::vector<Tensor> vs;
  for (int i = 0; i < 3; ++i) {
    std::vector<double> v(4);
    for (auto& x : v) x = rng.uniform(-5, 5);
    vs.push_back(Tensor::vector(v));
  }
  const auto rows = heatmap_normalize(vs);
  for (std::size_t k = 0; k < 4; ++k) {
    const double lo = std::min({vs[0][k], vs[1][k], vs[2][k]});
    const double hi = std::max({vs[0][k], vs[1][k], vs[2][k]});
    for (std::size_t i = 0; i < 3; ++i) EXPECT_NEAR(rows[i][k], (vs[i][k] - lo) / (hi - lo), 1e-12);
  }
}

TEST(Heatmap, ExportedFileStaysInUnitRange) {
  Rng rng(4);
  std::vector<Tensor> vs;
  for (int i = 0; i < 50; ++i) {
    std::vector<double> v(16);
    for (auto& x : v) x = rng.normal(0.0, 100.0);
    vs.push_back(Tensor::vector(v));
  }
  const auto path = (std::filesystem::temp_directory_path() / "seover_heat.tsv").string();
  heatmap_export(vs, path);
  std::ifstream in(path);
  std::string line;
  std::size_t rows = 0;
  while (std::getline(in, line)) {
    ++rows;
    std::istringstream ls(line);
    double x;
    std::size_t cols = 0;
    while (ls >> x) {
      ++cols;
      EXPECT_GE(x, 0.0);
      EXPECT_LE(x, 1.0);
    }
    EXPECT_EQ(cols, 16u);
  }
  EXPECT_EQ(rows, 50u);
  std::filesystem::remove(path);
  EXPECT_THROW(heatmap_normalize({}), DataError);
}
