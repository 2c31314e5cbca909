#pragma once

// Confusion matrices, per-class/weighted F1, accuracy and heatmap export.
// Confusion convention: rows = gold label, columns = predicted label.

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "seover/corpus.hpp"
#include "seover/errors.hpp"
#include "seover/tensor.hpp"

namespace seover {

class ConfusionMatrix {
 public:
  explicit ConfusionMatrix(std::size_t m) : m_(m), counts_(m * m, 0) {}

  std::size_t size() const { return m_; }
  std::uint64_t at(std::size_t gold, std::size_t pred) const { return counts_[gold * m_ + pred]; }
  std::uint64_t& at(std::size_t gold, std::size_t pred) { return counts_[gold * m_ + pred]; }

  std::uint64_t total() const {
    std::uint64_t t = 0;
    for (auto c : counts_) t += c;
    return t;
  }
  std::uint64_t trace() const {
    std::uint64_t t = 0;
    for (std::size_t i = 0; i < m_; ++i) t += at(i, i);
    return t;
  }
  std::uint64_t gold_count(std::size_t c) const {
    std::uint64_t t = 0;
    for (std::size_t j = 0; j < m_; ++j) t += at(c, j);
    return t;
  }
  std::uint64_t pred_count(std::size_t c) const {
    std::uint64_t t = 0;
    for (std::size_t i = 0; i < m_; ++i) t += at(i, c);
    return t;
  }

  bool operator==(const ConfusionMatrix& o) const { return m_ == o.m_ && counts_ == o.counts_; }

 private:
  std::size_t m_;
  std::vector<std::uint64_t> counts_;
};

inline ConfusionMatrix confusion(const std::vector<std::size_t>& golds, const std::vector<std::size_t>& preds,
                                 std::size_t num_labels) {
  if (golds.size() != preds.size()) {
    throw DataError("confusion: " + std::to_string(golds.size()) + " golds vs " + std::to_string(preds.size()) +
                    " predictions");
  }
  ConfusionMatrix cm(num_labels);
  for (std::size_t i = 0; i < golds.size(); ++i) {
    if (golds[i] >= num_labels || preds[i] >= num_labels) {
      throw DataError("confusion: label id out of range at position " + std::to_string(i));
    }
    ++cm.at(golds[i], preds[i]);
  }
  return cm;
}

inline ConfusionMatrix confusion(const std::vector<std::size_t>& golds, const std::vector<std::size_t>& preds,
                                 const LabelSet& labels) {
  return confusion(golds, preds, labels.size());
}

struct ClassScores {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::uint64_t support = 0;
};

struct EvalReport {
  std::vector<ClassScores> per_class;
  double weighted_f1 = 0.0;
  double accuracy = 0.0;
  ConfusionMatrix confusion{0};
};

/// Precision = column-wise, recall = row-wise; undefined ratios count as 0.
inline EvalReport f1_scores(const ConfusionMatrix& cm) {
  const auto total = cm.total();
  if (total == 0) throw DataError("f1_scores: empty confusion matrix");
  EvalReport r;
  r.confusion = cm;
  std::vector<double> terms;
  for (std::size_t c = 0; c < cm.size(); ++c) {
    ClassScores s;
    const auto tp = static_cast<double>(cm.at(c, c));
    const auto pred = cm.pred_count(c);
    s.support = cm.gold_count(c);
    s.precision = pred ? tp / static_cast<double>(pred) : 0.0;
    s.recall = s.support ? tp / static_cast<double>(s.support) : 0.0;
    s.f1 = (s.precision + s.recall) > 0.0 ? 2.0 * s.precision * s.recall / (s.precision + s.recall) : 0.0;
    terms.push_back(static_cast<double>(s.support) * s.f1);
    r.per_class.push_back(s);
  }
  // summed in sorted order so relabeling classes cannot change the result
  std::sort(terms.begin(), terms.end());
  double weighted = 0.0;
  for (double t : terms) weighted += t;
  r.weighted_f1 = weighted / static_cast<double>(total);
  r.accuracy = static_cast<double>(cm.trace()) / static_cast<double>(total);
  return r;
}

inline EvalReport evaluate(const std::vector<std::size_t>& golds, const std::vector<std::size_t>& preds,
                           std::size_t num_labels) {
  return f1_scores(confusion(golds, preds, num_labels));
}

/// Per-class F1 columns plus the weighted average, values in percent.
inline std::string render_f1_table(const EvalReport& r, const LabelSet& labels, const std::string& row_name) {
  std::ostringstream os;
  const int w = 12;
  os << std::left << std::setw(w) << "Model";
  for (const auto& l : labels.labels()) os << std::right << std::setw(w) << l;
  os << std::right << std::setw(w) << "Average" << '\n';
  os << std::left << std::setw(w) << row_name << std::right << std::fixed << std::setprecision(2);
  for (const auto& c : r.per_class) os << std::setw(w) << 100.0 * c.f1;
  os << std::setw(w) << 100.0 * r.weighted_f1 << '\n';
  os << "accuracy " << 100.0 * r.accuracy << "  weighted F1 " << 100.0 * r.weighted_f1 << "  (weighted by gold support)\n";
  return os.str();
}

inline std::string render_confusion(const ConfusionMatrix& cm, const LabelSet& labels) {
  std::ostringstream os;
  std::size_t w = 8;
  for (const auto& l : labels.labels()) w = std::max(w, l.size() + 2);
  const int iw = static_cast<int>(w);
  os << "rows = gold, columns = predicted\n";
  os << std::setw(iw) << "";
  for (const auto& l : labels.labels()) os << std::setw(iw) << l;
  os << '\n';
  for (std::size_t i = 0; i < cm.size(); ++i) {
    os << std::setw(iw) << labels.label(i);
    for (std::size_t j = 0; j < cm.size(); ++j) os << std::setw(iw) << cm.at(i, j);
    os << '\n';
  }
  return os.str();
}

/// Machine-readable report: one tab-separated row per class plus summary rows.
inline void write_report_tsv(std::ostream& os, const EvalReport& r, const LabelSet& labels) {
  os << "label\tprecision\trecall\tf1\tsupport\n";
  os << std::setprecision(17);
  for (std::size_t c = 0; c < r.per_class.size(); ++c) {
    const auto& s = r.per_class[c];
    os << labels.label(c) << '\t' << s.precision << '\t' << s.recall << '\t' << s.f1 << '\t' << s.support << '\n';
  }
  os << "weighted_f1\t\t\t" << r.weighted_f1 << '\t' << r.confusion.total() << '\n';
  os << "accuracy\t\t\t" << r.accuracy << '\t' << r.confusion.total() << '\n';
}

inline void write_confusion_tsv(std::ostream& os, const ConfusionMatrix& cm, const LabelSet& labels) {
  os << "gold\\pred";
  for (const auto& l : labels.labels()) os << '\t' << l;
  os << '\n';
  for (std::size_t i = 0; i < cm.size(); ++i) {
    os << labels.label(i);
    for (std::size_t j = 0; j < cm.size(); ++j) os << '\t' << cm.at(i, j);
    os << '\n';
  }
}

/// Per-dimension min-max scaling across rows; constant dimensions map to 0.5.
inline std::vector<std::vector<double>> heatmap_normalize(const std::vector<Tensor>& vectors) {
  if (vectors.empty()) throw DataError("heatmap_export: no vectors");
  const std::size_t d = vectors[0].size();
  for (const auto& v : vectors) {
    if (v.size() != d) throw ShapeError("heatmap_export: vectors differ in dimension");
  }
  std::vector<std::vector<double>> out(vectors.size(), std::vector<double>(d));
  for (std::size_t k = 0; k < d; ++k) {
    double lo = vectors[0][k], hi = vectors[0][k];
    for (const auto& v : vectors) {
      lo = std::min(lo, v[k]);
      hi = std::max(hi, v[k]);
    }
    for (std::size_t i = 0; i < vectors.size(); ++i) {
      out[i][k] = hi > lo ? (vectors[i][k] - lo) / (hi - lo) : 0.5;
    }
  }
  return out;
}

inline void write_heatmap(std::ostream& os, const std::vector<std::vector<double>>& rows) {
  os << std::setprecision(17);
  for (const auto& r : rows) {
    for (std::size_t k = 0; k < r.size(); ++k) os << (k ? "\t" : "") << r[k];
    os << '\n';
  }
}

/// Normalizes and writes a tab-separated matrix (rows = vectors, columns = dimensions).
inline void heatmap_export(const std::vector<Tensor>& vectors, const std::string& path) {
  const auto rows = heatmap_normalize(vectors);
  std::ofstream out(path);
  if (!out) throw DataError("cannot write heatmap '" + path + "'");
  write_heatmap(out, rows);
}

}  // namespace seover
