#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <memory>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include "polsar/parallel.hpp"
#include "polsar/raster.hpp"
#include "polsar/regions.hpp"

namespace polsar {

inline double rbf_kernel(const double* x, const double* y, int dim,
                         double gamma) {
  double d2 = 0.0;
  for (int i = 0; i < dim; ++i) {
    const double d = x[i] - y[i];
    d2 += d * d;
  }
  return std::exp(-gamma * d2);
}

inline double rbf_kernel(const std::vector<double>& x,
                         const std::vector<double>& y, double gamma) {
  if (x.size() != y.size() || x.empty())
    throw std::invalid_argument("rbf_kernel: dimension mismatch");
  if (!(gamma > 0.0)) throw std::invalid_argument("rbf_kernel: gamma <= 0");
  return rbf_kernel(x.data(), y.data(), static_cast<int>(x.size()), gamma);
}

inline double rbf_kernel(const FeatureVector& x, const FeatureVector& y,
                         double gamma) {
  if (!(gamma > 0.0)) throw std::invalid_argument("rbf_kernel: gamma <= 0");
  return rbf_kernel(x.data(), y.data(), kFeatureDim, gamma);
}

/// Soft-margin RBF binary classifier: g(y) = sum_i alpha_i r_i K(x_i, y) + b.
/// Support vectors are stored row-major; for models trained through
/// SvmMulticlassModel they live in the standardized feature space.
struct SvmBinaryModel {
  int label_pos = 1;   // class voted when g > 0
  int label_neg = -1;  // class voted otherwise
  double gamma = 0.0;
  double c_penalty = 0.0;
  double bias = 0.0;
  int dim = 0;
  std::vector<double> sv;       // nsv x dim
  std::vector<double> alpha_r;  // alpha_i * r_i

  int nsv() const { return static_cast<int>(alpha_r.size()); }

  double decision(const double* y) const {
    double g = bias;
    for (int i = 0; i < nsv(); ++i)
      g += alpha_r[static_cast<std::size_t>(i)] *
           rbf_kernel(sv.data() + static_cast<std::size_t>(i) * static_cast<std::size_t>(dim), y, dim, gamma);
    return g;
  }

  double decision(const std::vector<double>& y) const {
    if (static_cast<int>(y.size()) != dim)
      throw std::invalid_argument("decision: dimension mismatch");
    return decision(y.data());
  }
};

namespace detail {

/// SMO working state on the flattened, canonically ordered samples.
/// Selection is the maximal violating pair (Keerthi's b_up/b_low), with ties
/// broken towards the lowest index, so training is fully deterministic.
class SmoSolver {
 public:
  SmoSolver(const std::vector<double>& x, const std::vector<double>& y,
            int dim, double c, double gamma, double tol)
      : x_(x), y_(y), m_(static_cast<int>(y.size())), dim_(dim), c_(c),
        gamma_(gamma), tol_(tol), alpha_(y.size(), 0.0), fcache_(y.size()),
        rows_(y.size()) {
    // With alpha = 0 the decision sum is 0, so F_i = y_i.
    for (int i = 0; i < m_; ++i) fcache_[static_cast<std::size_t>(i)] = y_[static_cast<std::size_t>(i)];
  }

  void solve() {
    const std::int64_t max_iter =
        std::max<std::int64_t>(2'000'000, 512LL * m_);
    for (std::int64_t iter = 0; iter < max_iter; ++iter) {
      int i_low = -1, i_up = -1;
      double b_low = -std::numeric_limits<double>::infinity();
      double b_up = std::numeric_limits<double>::infinity();
      for (int k = 0; k < m_; ++k) {
        const double a = alpha_[static_cast<std::size_t>(k)];
        const double yk = y_[static_cast<std::size_t>(k)];
        const double fk = fcache_[static_cast<std::size_t>(k)];
        const bool lower_set =
            (a > 0.0 && a < c_) || (yk > 0.0 && a <= 0.0) || (yk < 0.0 && a >= c_);
        const bool upper_set =
            (a > 0.0 && a < c_) || (yk > 0.0 && a >= c_) || (yk < 0.0 && a <= 0.0);
        if (lower_set && fk > b_low) {
          b_low = fk;
          i_low = k;
        }
        if (upper_set && fk < b_up) {
          b_up = fk;
          i_up = k;
        }
      }
      if (i_low < 0 || i_up < 0 || b_low - b_up <= tol_) {
        if (i_low < 0) bias_ = b_up;
        else if (i_up < 0) bias_ = b_low;
        else bias_ = 0.5 * (b_low + b_up);
        return;
      }
      step(i_low, i_up);
    }
    throw std::runtime_error("SMO did not converge");
  }

  double bias() const { return bias_; }
  const std::vector<double>& alpha() const { return alpha_; }

 private:
  double snap(double a) const {
    const double tau = 1e-12 * std::max(1.0, c_);
    if (a < tau) return 0.0;
    if (a > c_ - tau) return c_;
    return a;
  }

  const double* row(int i) {
    auto& r = rows_[static_cast<std::size_t>(i)];
    if (!r) {
      r = std::make_unique<double[]>(static_cast<std::size_t>(m_));
      const double* xi = x_.data() + static_cast<std::size_t>(i) * static_cast<std::size_t>(dim_);
      for (int k = 0; k < m_; ++k)
        r[static_cast<std::size_t>(k)] = rbf_kernel(
            xi, x_.data() + static_cast<std::size_t>(k) * static_cast<std::size_t>(dim_), dim_, gamma_);
    }
    return r.get();
  }

  void step(int i, int j) {
    const double yi = y_[static_cast<std::size_t>(i)], yj = y_[static_cast<std::size_t>(j)];
    const double ai_old = alpha_[static_cast<std::size_t>(i)], aj_old = alpha_[static_cast<std::size_t>(j)];
    double L, H;
    if (yi != yj) {
      L = std::max(0.0, aj_old - ai_old);
      H = std::min(c_, c_ + aj_old - ai_old);
    } else {
      L = std::max(0.0, ai_old + aj_old - c_);
      H = std::min(c_, ai_old + aj_old);
    }
    const double* ki = row(i);
    const double* kj = row(j);
    double eta = ki[i] + kj[j] - 2.0 * ki[j];
    if (eta < 1e-12) eta = 1e-12;  // duplicate points: forces a bound step
    // E_k = f_k - y_k = -F_k, so E_i - E_j = F_j - F_i.
    const double fi = fcache_[static_cast<std::size_t>(i)], fj = fcache_[static_cast<std::size_t>(j)];
    double aj = aj_old + yj * (fj - fi) / eta;
    aj = snap(std::clamp(aj, L, H));
    const double dj = aj - aj_old;
    if (dj == 0.0) return;
    const double di = -yi * yj * dj;
    // Rounding can leave alphas a few ulps outside [0, C] or just inside a
    // bound; snapping keeps the bound-set classification exact and prevents
    // micro-step stalls near convergence.
    alpha_[static_cast<std::size_t>(i)] = snap(std::clamp(ai_old + di, 0.0, c_));
    alpha_[static_cast<std::size_t>(j)] = aj;
    for (int k = 0; k < m_; ++k)
      fcache_[static_cast<std::size_t>(k)] -=
          di * yi * ki[k] + dj * yj * kj[k];
  }

  const std::vector<double>& x_;
  const std::vector<double>& y_;
  int m_;
  int dim_;
  double c_, gamma_, tol_;
  double bias_ = 0.0;
  std::vector<double> alpha_;
  std::vector<double> fcache_;  // F_i = y_i - sum_k alpha_k y_k K_ki
  std::vector<std::unique_ptr<double[]>> rows_;
};

/// Canonical sample order: lexicographic by features, then label. Training
/// on any permutation of the same multiset of samples therefore runs the
/// identical arithmetic and yields the identical model.
inline std::vector<int> canonical_order(const std::vector<double>& flat,
                                        const std::vector<double>& y, int dim) {
  std::vector<int> idx(y.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&](int a, int b) {
    const double* xa = flat.data() + static_cast<std::size_t>(a) * static_cast<std::size_t>(dim);
    const double* xb = flat.data() + static_cast<std::size_t>(b) * static_cast<std::size_t>(dim);
    for (int c = 0; c < dim; ++c) {
      if (xa[c] != xb[c]) return xa[c] < xb[c];
    }
    return y[static_cast<std::size_t>(a)] < y[static_cast<std::size_t>(b)];
  });
  return idx;
}

inline SvmBinaryModel train_svm_binary_flat(std::vector<double> flat,
                                            std::vector<double> y, int dim,
                                            double c_penalty, double gamma,
                                            double tol,
                                            std::vector<double>* alpha_out) {
  const int m = static_cast<int>(y.size());
  if (m < 2) throw std::invalid_argument("SVM training needs >= 2 samples");
  if (!(c_penalty > 0.0) || !(gamma > 0.0) || !(tol > 0.0))
    throw std::invalid_argument("SVM training needs positive C, gamma, tol");
  bool has_pos = false, has_neg = false;
  for (double v : y) {
    if (v > 0) has_pos = true;
    else has_neg = true;
  }
  if (!has_pos || !has_neg)
    throw std::invalid_argument("SVM training needs both classes present");

  const std::vector<int> order = canonical_order(flat, y, dim);
  std::vector<double> xs(flat.size());
  std::vector<double> ys(y.size());
  for (std::size_t k = 0; k < order.size(); ++k) {
    const std::size_t src = static_cast<std::size_t>(order[k]);
    ys[k] = y[src];
    std::copy_n(flat.begin() + static_cast<std::ptrdiff_t>(src * static_cast<std::size_t>(dim)), dim,
                xs.begin() + static_cast<std::ptrdiff_t>(k * static_cast<std::size_t>(dim)));
  }

  SmoSolver solver(xs, ys, dim, c_penalty, gamma, tol);
  solver.solve();

  SvmBinaryModel model;
  model.gamma = gamma;
  model.c_penalty = c_penalty;
  model.bias = solver.bias();
  model.dim = dim;
  const std::vector<double>& alpha = solver.alpha();
  if (alpha_out) {
    alpha_out->assign(alpha.size(), 0.0);
    for (std::size_t k = 0; k < order.size(); ++k)
      (*alpha_out)[static_cast<std::size_t>(order[k])] = alpha[k];
  }
  for (int i = 0; i < m; ++i) {
    if (alpha[static_cast<std::size_t>(i)] > 0.0) {
      model.alpha_r.push_back(alpha[static_cast<std::size_t>(i)] * ys[static_cast<std::size_t>(i)]);
      model.sv.insert(model.sv.end(),
                      xs.begin() + static_cast<std::ptrdiff_t>(static_cast<std::size_t>(i) * static_cast<std::size_t>(dim)),
                      xs.begin() + static_cast<std::ptrdiff_t>((static_cast<std::size_t>(i) + 1) * static_cast<std::size_t>(dim)));
    }
  }
  return model;
}

}  // namespace detail

/// Train a soft-margin binary SVM by SMO on the dual, to KKT tolerance
/// `tol`. Labels must be -1/+1 and both present. If `alpha_out` is given it
/// receives the dual solution aligned with the input sample order.
inline SvmBinaryModel train_svm_binary(
    const std::vector<std::vector<double>>& samples,
    const std::vector<int>& labels, double c_penalty, double gamma,
    double tol = 1e-3, std::vector<double>* alpha_out = nullptr) {
  if (samples.size() != labels.size() || samples.empty())
    throw std::invalid_argument("SVM training: samples/labels mismatch");
  const int dim = static_cast<int>(samples.front().size());
  std::vector<double> flat;
  flat.reserve(samples.size() * static_cast<std::size_t>(dim));
  std::vector<double> y;
  y.reserve(labels.size());
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (static_cast<int>(samples[i].size()) != dim)
      throw std::invalid_argument("SVM training: ragged sample dimensions");
    if (labels[i] != 1 && labels[i] != -1)
      throw std::invalid_argument("SVM training: labels must be -1 or +1");
    flat.insert(flat.end(), samples[i].begin(), samples[i].end());
    y.push_back(static_cast<double>(labels[i]));
  }
  return detail::train_svm_binary_flat(std::move(flat), std::move(y), dim,
                                       c_penalty, gamma, tol, alpha_out);
}

/// Largest KKT violation of a trained binary model on its training set:
/// alpha=0 wants r g >= 1, alpha=C wants r g <= 1, free vectors want r g = 1.
inline double max_kkt_violation(const std::vector<std::vector<double>>& samples,
                                const std::vector<int>& labels,
                                const std::vector<double>& alphas,
                                const SvmBinaryModel& model) {
  double worst = 0.0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const double rg = labels[i] * model.decision(samples[i]);
    const double a = alphas[i];
    double v = 0.0;
    if (a <= 0.0) v = std::max(0.0, 1.0 - rg);
    else if (a >= model.c_penalty) v = std::max(0.0, rg - 1.0);
    else v = std::abs(rg - 1.0);
    worst = std::max(worst, v);
  }
  return worst;
}

/// Per-channel affine map fitted on training pixels: zero mean, unit
/// (population) standard deviation; constant channels keep sd 1.
struct Standardization {
  std::array<double, 9> mean{};
  std::array<double, 9> sd{};

  std::array<double, 9> apply(const FeatureVector& f) const {
    std::array<double, 9> out;
    for (std::size_t c = 0; c < 9; ++c) out[c] = (f[c] - mean[c]) / sd[c];
    return out;
  }
};

/// One-against-one multiclass SVM: K(K-1)/2 binary models on standardized
/// features, majority vote, ties to the lowest class id.
class SvmMulticlassModel {
 public:
  SvmMulticlassModel(Standardization st, std::vector<ClassInfo> classes,
                     std::vector<SvmBinaryModel> pairs)
      : std_(st), classes_(std::move(classes)), pairs_(std::move(pairs)) {}

  /// Train all pairwise models from the training regions with the given
  /// penalty and kernel parameter (defaults: C = 1, gamma = 1/9).
  static SvmMulticlassModel fit(const FeatureImage& features,
                                const RegionSet& regions,
                                double c_penalty = 1.0,
                                double gamma = 1.0 / kFeatureDim,
                                double tol = 1e-3) {
    const std::vector<ClassInfo> classes = regions.classes();
    if (classes.empty())
      throw std::invalid_argument("fit: region set declares no classes");
    std::vector<std::vector<std::array<double, 9>>> raw(classes.size());
    for (std::size_t k = 0; k < classes.size(); ++k) {
      const auto px = regions.pixels(classes[k].id, RegionRole::train);
      if (px.empty())
        throw std::invalid_argument("fit: class '" + classes[k].name +
                                    "' has no training pixels");
      raw[k].reserve(px.size());
      for (const auto& [x, y] : px) {
        const FeatureVector& f = features.at(x, y);
        std::array<double, 9> a;
        std::copy(f.begin(), f.end(), a.begin());
        raw[k].push_back(a);
      }
    }

    Standardization st;
    std::size_t total = 0;
    for (const auto& v : raw) total += v.size();
    for (std::size_t c = 0; c < 9; ++c) {
      double s = 0.0;
      for (const auto& v : raw)
        for (const auto& f : v) s += f[c];
      st.mean[c] = s / static_cast<double>(total);
      double s2 = 0.0;
      for (const auto& v : raw)
        for (const auto& f : v) {
          const double d = f[c] - st.mean[c];
          s2 += d * d;
        }
      const double sd = std::sqrt(s2 / static_cast<double>(total));
      st.sd[c] = sd > 0.0 ? sd : 1.0;
    }

    std::vector<std::vector<std::vector<double>>> standardized(classes.size());
    for (std::size_t k = 0; k < classes.size(); ++k) {
      standardized[k].reserve(raw[k].size());
      for (const auto& f : raw[k]) {
        std::vector<double> v(9);
        for (std::size_t c = 0; c < 9; ++c)
          v[c] = (f[c] - st.mean[c]) / st.sd[c];
        standardized[k].push_back(std::move(v));
      }
    }

    std::vector<SvmBinaryModel> pairs;
    for (std::size_t a = 0; a < classes.size(); ++a)
      for (std::size_t b = a + 1; b < classes.size(); ++b) {
        std::vector<std::vector<double>> x;
        std::vector<int> y;
        for (const auto& v : standardized[a]) {
          x.push_back(v);
          y.push_back(+1);
        }
        for (const auto& v : standardized[b]) {
          x.push_back(v);
          y.push_back(-1);
        }
        SvmBinaryModel m = train_svm_binary(x, y, c_penalty, gamma, tol);
        m.label_pos = classes[a].id;
        m.label_neg = classes[b].id;
        pairs.push_back(std::move(m));
      }
    return SvmMulticlassModel(st, classes, std::move(pairs));
  }

  const Standardization& standardization() const { return std_; }
  const std::vector<ClassInfo>& classes() const { return classes_; }
  const std::vector<SvmBinaryModel>& pairs() const { return pairs_; }

  int predict(const FeatureVector& f) const {
    if (classes_.size() == 1) return classes_.front().id;
    const std::array<double, 9> z = std_.apply(f);
    std::array<int, 256> votes{};
    for (const SvmBinaryModel& m : pairs_) {
      const double g = m.decision(z.data());
      const int vote = g > 0.0 ? m.label_pos : m.label_neg;
      ++votes[static_cast<std::size_t>(vote)];
    }
    int best = classes_.front().id;
    for (const ClassInfo& ci : classes_)
      if (votes[static_cast<std::size_t>(ci.id)] > votes[static_cast<std::size_t>(best)]) best = ci.id;
    return best;
  }

  LabelMap predict_image(const FeatureImage& features, int threads = 1) const {
    LabelMap out(features.width(), features.height());
    parallel_for(features.size(), threads,
                 [&](std::size_t begin, std::size_t end) {
                   for (std::size_t i = begin; i < end; ++i)
                     out[i] = static_cast<std::uint8_t>(predict(features[i]));
                 });
    return out;
  }

 private:
  Standardization std_;
  std::vector<ClassInfo> classes_;  // ascending id
  std::vector<SvmBinaryModel> pairs_;
};

}  // namespace polsar
