#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "polsar/raster.hpp"
#include "polsar/regions.hpp"

namespace polsar {

/// K x K count table: entry (t, c) is the number of test pixels of true
/// class t predicted as class c. Classes are indexed ascending by id.
class ConfusionMatrix {
 public:
  explicit ConfusionMatrix(std::vector<ClassInfo> classes)
      : classes_(std::move(classes)),
        counts_(classes_.size() * classes_.size(), 0) {
    if (classes_.empty())
      throw std::invalid_argument("confusion matrix needs >= 1 class");
  }

  std::size_t num_classes() const { return classes_.size(); }
  const std::vector<ClassInfo>& classes() const { return classes_; }

  std::int64_t at(std::size_t t, std::size_t c) const {
    return counts_[t * classes_.size() + c];
  }
  void add(std::size_t t, std::size_t c, std::int64_t n = 1) {
    counts_[t * classes_.size() + c] += n;
  }

  std::int64_t total() const {
    std::int64_t s = 0;
    for (std::int64_t v : counts_) s += v;
    return s;
  }
  std::int64_t trace() const {
    std::int64_t s = 0;
    for (std::size_t k = 0; k < classes_.size(); ++k) s += at(k, k);
    return s;
  }
  std::int64_t row_sum(std::size_t t) const {
    std::int64_t s = 0;
    for (std::size_t c = 0; c < classes_.size(); ++c) s += at(t, c);
    return s;
  }
  std::int64_t col_sum(std::size_t c) const {
    std::int64_t s = 0;
    for (std::size_t t = 0; t < classes_.size(); ++t) s += at(t, c);
    return s;
  }

  std::optional<std::size_t> index_of(int class_id) const {
    for (std::size_t k = 0; k < classes_.size(); ++k)
      if (classes_[k].id == class_id) return k;
    return std::nullopt;
  }

 private:
  std::vector<ClassInfo> classes_;
  std::vector<std::int64_t> counts_;
};

/// Count test pixels only; training pixels never enter the tally. Every test
/// pixel must carry a prediction (label >= 1) from the declared class set.
inline ConfusionMatrix confusion(const LabelMap& pred,
                                 const RegionSet& regions) {
  if (pred.width() != regions.width() || pred.height() != regions.height())
    throw std::invalid_argument("confusion: label map and regions disagree "
                                "on raster dimensions");
  ConfusionMatrix cm(regions.classes());
  for (std::size_t t = 0; t < cm.num_classes(); ++t) {
    const int true_id = cm.classes()[t].id;
    for (const auto& [x, y] : regions.pixels(true_id, RegionRole::test)) {
      const int p = pred.at(x, y);
      if (p == 0)
        throw std::runtime_error(
            "confusion: unpredicted (label 0) test pixel at (" +
            std::to_string(x) + "," + std::to_string(y) + ")");
      const auto c = cm.index_of(p);
      if (!c)
        throw std::runtime_error(
            "confusion: predicted class " + std::to_string(p) +
            " at (" + std::to_string(x) + "," + std::to_string(y) +
            ") is not in the declared class set");
      cm.add(t, *c);
    }
  }
  return cm;
}

/// Overall accuracy F = trace / total.
inline double overall_accuracy(const ConfusionMatrix& m) {
  const std::int64_t total = m.total();
  if (total <= 0)
    throw std::invalid_argument("overall_accuracy: empty confusion matrix");
  return static_cast<double>(m.trace()) / static_cast<double>(total);
}

struct KappaResult {
  double value = 0.0;
  /// True when expected chance agreement p_e = 1 and the 0 convention fired.
  bool degenerate = false;
};

/// Cohen's kappa, computed from integer counts with a single final division:
///   kappa = (N tr - S) / (N^2 - S),  S = sum_k rowsum_k colsum_k,
/// which equals (p_o - p_e) / (1 - p_e). Returns 0 (flagged) when p_e = 1.
inline KappaResult kappa_stat(const ConfusionMatrix& m) {
  const std::int64_t total = m.total();
  if (total <= 0)
    throw std::invalid_argument("kappa: empty confusion matrix");
  std::int64_t s = 0;
  for (std::size_t k = 0; k < m.num_classes(); ++k)
    s += m.row_sum(k) * m.col_sum(k);
  const std::int64_t num = total * m.trace() - s;
  const std::int64_t den = total * total - s;
  if (den == 0) return {0.0, true};
  return {static_cast<double>(num) / static_cast<double>(den), false};
}

inline double kappa(const ConfusionMatrix& m) { return kappa_stat(m).value; }

/// Producer's accuracy per class: CA_k = M[k][k] / rowsum_k; classes with no
/// test pixels are undefined (nullopt), not zero.
inline std::vector<std::optional<double>> per_class_accuracy(
    const ConfusionMatrix& m) {
  std::vector<std::optional<double>> out(m.num_classes());
  for (std::size_t k = 0; k < m.num_classes(); ++k) {
    const std::int64_t rs = m.row_sum(k);
    if (rs > 0)
      out[k] = static_cast<double>(m.at(k, k)) / static_cast<double>(rs);
  }
  return out;
}

/// User's accuracy per class (column-normalized); emitted alongside CA in
/// the metrics CSV.
inline std::vector<std::optional<double>> user_accuracy(
    const ConfusionMatrix& m) {
  std::vector<std::optional<double>> out(m.num_classes());
  for (std::size_t k = 0; k < m.num_classes(); ++k) {
    const std::int64_t cs = m.col_sum(k);
    if (cs > 0)
      out[k] = static_cast<double>(m.at(k, k)) / static_cast<double>(cs);
  }
  return out;
}

}  // namespace polsar
