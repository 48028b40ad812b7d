#pragma once

#include <cmath>
#include <string>
#include <vector>

#include <Eigen/Cholesky>

#include "polsar/parallel.hpp"
#include "polsar/raster.hpp"
#include "polsar/regions.hpp"

namespace polsar {

using Vector9 = Eigen::Matrix<double, 9, 1>;
using Matrix9 = Eigen::Matrix<double, 9, 9>;

struct GaussianClass {
  int id = 0;
  std::string name;
  double prior = 0.0;
  double ridge = 0.0;
  Vector9 mean = Vector9::Zero();
  Matrix9 cov = Matrix9::Zero();  // unbiased sample covariance
};

/// Gaussian maximum-likelihood classifier on the nine covariance channels.
/// Discriminant per class:
///   g_k(y) = ln P(k) - 1/2 ln det(S_k) - 1/2 (y-mu_k)^T S_k^{-1} (y-mu_k),
/// with S_k = cov_k + ridge_k * I. Ties break to the lowest class id.
class GaussianModel {
 public:
  /// Fit per-class mean and covariance from the training regions. Priors are
  /// equal; ridge_k = 1e-6 trace(cov_k)/9, floored at 1e-12 so a zero-variance
  /// class still yields an invertible S_k. Every class needs >= 10 training
  /// pixels.
  static GaussianModel fit(const FeatureImage& features,
                           const RegionSet& regions) {
    const std::vector<ClassInfo> classes = regions.classes();
    if (classes.empty())
      throw std::invalid_argument("fit: region set declares no classes");
    std::vector<GaussianClass> fitted;
    fitted.reserve(classes.size());
    for (const ClassInfo& ci : classes) {
      const auto px = regions.pixels(ci.id, RegionRole::train);
      if (px.size() < 10)
        throw std::invalid_argument(
            "fit: class '" + ci.name + "' (id " + std::to_string(ci.id) +
            ") has " + std::to_string(px.size()) +
            " training pixels; at least 10 required");
      GaussianClass g;
      g.id = ci.id;
      g.name = ci.name;
      for (const auto& [x, y] : px) {
        const FeatureVector& f = features.at(x, y);
        for (int c = 0; c < kFeatureDim; ++c) g.mean(c) += f[static_cast<std::size_t>(c)];
      }
      g.mean /= static_cast<double>(px.size());
      for (const auto& [x, y] : px) {
        const FeatureVector& f = features.at(x, y);
        Vector9 d;
        for (int c = 0; c < kFeatureDim; ++c)
          d(c) = f[static_cast<std::size_t>(c)] - g.mean(c);
        g.cov += d * d.transpose();
      }
      g.cov /= static_cast<double>(px.size() - 1);
      g.ridge = std::max(1e-6 * g.cov.trace() / 9.0, 1e-12);
      g.prior = 1.0 / static_cast<double>(classes.size());
      fitted.push_back(std::move(g));
    }
    return GaussianModel(std::move(fitted));
  }

  explicit GaussianModel(std::vector<GaussianClass> classes)
      : classes_(std::move(classes)) {
    prepare();
  }

  const std::vector<GaussianClass>& classes() const { return classes_; }

  double discriminant(std::size_t k, const FeatureVector& y) const {
    Vector9 d;
    for (int c = 0; c < kFeatureDim; ++c)
      d(c) = y[static_cast<std::size_t>(c)] - classes_[k].mean(c);
    const Vector9 half = llt_[k].matrixL().solve(d);
    return std::log(classes_[k].prior) - 0.5 * log_det_[k] -
           0.5 * half.squaredNorm();
  }

  int predict(const FeatureVector& y) const {
    std::size_t best = 0;
    double best_g = discriminant(0, y);
    for (std::size_t k = 1; k < classes_.size(); ++k) {
      const double g = discriminant(k, y);
      if (g > best_g) {
        best_g = g;
        best = k;
      }
    }
    return classes_[best].id;
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
  void prepare() {
    if (classes_.empty())
      throw std::invalid_argument("Gaussian model needs at least one class");
    llt_.clear();
    log_det_.clear();
    for (const GaussianClass& g : classes_) {
      Matrix9 s = g.cov + g.ridge * Matrix9::Identity();
      Eigen::LLT<Matrix9> llt(s);
      if (llt.info() != Eigen::Success)
        throw std::runtime_error("class covariance not positive definite "
                                 "after ridge; data is degenerate");
      double ld = 0.0;
      for (int i = 0; i < 9; ++i) ld += std::log(llt.matrixL()(i, i));
      log_det_.push_back(2.0 * ld);
      llt_.push_back(std::move(llt));
    }
  }

  std::vector<GaussianClass> classes_;  // ascending id
  std::vector<Eigen::LLT<Matrix9>> llt_;
  std::vector<double> log_det_;
};

}  // namespace polsar
