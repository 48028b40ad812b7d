#pragma once

#include <array>
#include <cmath>
#include <complex>
#include <cstdint>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace polsar {

using cdouble = std::complex<double>;

/// Per-pixel complex backscatter amplitudes, channel order (hh, hv, vv).
struct ScatteringVector {
  cdouble hh{};
  cdouble hv{};
  cdouble vv{};

  cdouble operator[](int i) const {
    return i == 0 ? hh : (i == 1 ? hv : vv);
  }

  bool finite() const {
    for (int i = 0; i < 3; ++i) {
      const cdouble v = (*this)[i];
      if (!std::isfinite(v.real()) || !std::isfinite(v.imag())) return false;
    }
    return true;
  }
};

/// 3x3 Hermitian matrix with structural symmetry: only the real diagonal and
/// the upper triangle are stored, so Z(q,p) == conj(Z(p,q)) can never be
/// violated by arithmetic. Indices are 0-based, {0,1,2} = {hh,hv,vv}.
class CovarianceMatrix {
 public:
  CovarianceMatrix() = default;

  static CovarianceMatrix diagonal(double d0, double d1, double d2) {
    CovarianceMatrix z;
    z.diag_ = {d0, d1, d2};
    return z;
  }

  static CovarianceMatrix zero() { return CovarianceMatrix{}; }

  /// Rank-1 outer product s s*.
  static CovarianceMatrix outer(const ScatteringVector& s) {
    CovarianceMatrix z;
    z.diag_ = {std::norm(s.hh), std::norm(s.hv), std::norm(s.vv)};
    z.off_ = {s.hh * std::conj(s.hv), s.hh * std::conj(s.vv),
              s.hv * std::conj(s.vv)};
    return z;
  }

  double diag(int p) const { return diag_[static_cast<std::size_t>(p)]; }
  void set_diag(int p, double v) { diag_[static_cast<std::size_t>(p)] = v; }

  /// Upper-triangle entry, p < q.
  cdouble off(int p, int q) const { return off_[off_index(p, q)]; }
  void set_off(int p, int q, cdouble v) { off_[off_index(p, q)] = v; }

  /// Full-matrix accessor with the Hermitian convention applied.
  cdouble at(int p, int q) const {
    if (p == q) return cdouble{diag(p), 0.0};
    if (p < q) return off(p, q);
    return std::conj(off(q, p));
  }

  double trace() const { return diag_[0] + diag_[1] + diag_[2]; }
  /// Total power Z00 + Z11 + Z22.
  double span() const { return trace(); }

  bool finite() const {
    for (double d : diag_)
      if (!std::isfinite(d)) return false;
    for (const cdouble& z : off_)
      if (!std::isfinite(z.real()) || !std::isfinite(z.imag())) return false;
    return true;
  }

  CovarianceMatrix& operator+=(const CovarianceMatrix& o) {
    for (int i = 0; i < 3; ++i) diag_[static_cast<std::size_t>(i)] += o.diag_[static_cast<std::size_t>(i)];
    for (int i = 0; i < 3; ++i) off_[static_cast<std::size_t>(i)] += o.off_[static_cast<std::size_t>(i)];
    return *this;
  }

  CovarianceMatrix& operator*=(double a) {
    for (auto& d : diag_) d *= a;
    for (auto& z : off_) z *= a;
    return *this;
  }

  friend CovarianceMatrix operator+(CovarianceMatrix a, const CovarianceMatrix& b) {
    a += b;
    return a;
  }

  friend CovarianceMatrix operator*(CovarianceMatrix a, double s) {
    a *= s;
    return a;
  }

  friend CovarianceMatrix operator*(double s, CovarianceMatrix a) {
    a *= s;
    return a;
  }

  friend bool operator==(const CovarianceMatrix& a, const CovarianceMatrix& b) {
    return a.diag_ == b.diag_ && a.off_ == b.off_;
  }

  Eigen::Matrix3cd to_eigen() const {
    Eigen::Matrix3cd m;
    for (int p = 0; p < 3; ++p)
      for (int q = 0; q < 3; ++q) m(p, q) = at(p, q);
    return m;
  }

  /// Rebuild structural storage from a (numerically) Hermitian matrix; the
  /// lower triangle and diagonal imaginary parts are discarded.
  static CovarianceMatrix from_eigen(const Eigen::Matrix3cd& m) {
    CovarianceMatrix z;
    z.diag_ = {m(0, 0).real(), m(1, 1).real(), m(2, 2).real()};
    z.off_ = {m(0, 1), m(0, 2), m(1, 2)};
    return z;
  }

  double min_eigenvalue() const {
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix3cd> es(
        to_eigen(), Eigen::EigenvaluesOnly);
    return es.eigenvalues().minCoeff();
  }

  /// Validator: real non-negative diagonal and min eigenvalue >= -tol*trace.
  /// Hermitian symmetry holds structurally. A machine-precision slack
  /// proportional to the trace is always included because the eigensolver
  /// itself only resolves eigenvalues to its backward error; rel_tol = 0
  /// therefore means "PSD up to rounding of the eigensolve".
  bool is_hermitian_psd(double rel_tol = 1e-9) const {
    if (!finite()) return false;
    for (double d : diag_)
      if (d < 0.0) return false;
    const double scale = trace();
    const double slack =
        (rel_tol + 16.0 * std::numeric_limits<double>::epsilon()) * scale;
    return min_eigenvalue() >= -slack;
  }

 private:
  static std::size_t off_index(int p, int q) {
    // (0,1)->0, (0,2)->1, (1,2)->2
    return static_cast<std::size_t>(p + q - 1);
  }

  std::array<double, 3> diag_{0.0, 0.0, 0.0};
  std::array<cdouble, 3> off_{};
};

/// Multilook ML estimate Z = (1/n) sum s_i s_i*. Hermitian PSD by
/// construction (mean of rank-1 outer products).
inline CovarianceMatrix estimate_covariance(std::span<const ScatteringVector> samples) {
  if (samples.empty())
    throw std::invalid_argument("estimate_covariance: empty sample list");
  CovarianceMatrix acc;
  for (const ScatteringVector& s : samples) {
    if (!s.finite())
      throw std::invalid_argument("estimate_covariance: non-finite sample");
    acc += CovarianceMatrix::outer(s);
  }
  acc *= 1.0 / static_cast<double>(samples.size());
  return acc;
}

/// The nine real classification channels, in the fixed order
/// (Z11, Z22, Z33, Re Z12, Im Z12, Re Z13, Im Z13, Re Z23, Im Z23).
using FeatureVector = std::array<double, 9>;

inline constexpr int kFeatureDim = 9;

inline FeatureVector to_feature_vector(const CovarianceMatrix& z) {
  return {z.diag(0),          z.diag(1),          z.diag(2),
          z.off(0, 1).real(), z.off(0, 1).imag(), z.off(0, 2).real(),
          z.off(0, 2).imag(), z.off(1, 2).real(), z.off(1, 2).imag()};
}

inline CovarianceMatrix from_feature_vector(const FeatureVector& f) {
  CovarianceMatrix z = CovarianceMatrix::diagonal(f[0], f[1], f[2]);
  z.set_off(0, 1, {f[3], f[4]});
  z.set_off(0, 2, {f[5], f[6]});
  z.set_off(1, 2, {f[7], f[8]});
  return z;
}

namespace detail {
inline void check_dims(int width, int height) {
  if (width <= 0 || height <= 0)
    throw std::invalid_argument("raster dimensions must be positive");
}
inline std::size_t checked_size(int width, int height) {
  check_dims(width, height);
  return static_cast<std::size_t>(width) * static_cast<std::size_t>(height);
}
inline double checked_looks(double looks) {
  if (!(looks > 0.0))
    throw std::invalid_argument("look count must be positive");
  return looks;
}
}  // namespace detail

/// Row-major grid of covariance matrices plus the nominal look count of the
/// acquisition. Treated as immutable once filled; filters return new images.
class CovarianceImage {
 public:
  CovarianceImage(int width, int height, double looks)
      : width_(width), height_(height), looks_(detail::checked_looks(looks)),
        px_(detail::checked_size(width, height)) {}

  int width() const { return width_; }
  int height() const { return height_; }
  double looks() const { return looks_; }
  std::size_t size() const { return px_.size(); }

  const CovarianceMatrix& at(int x, int y) const { return px_[index(x, y)]; }
  CovarianceMatrix& at(int x, int y) { return px_[index(x, y)]; }
  const CovarianceMatrix& operator[](std::size_t i) const { return px_[i]; }
  CovarianceMatrix& operator[](std::size_t i) { return px_[i]; }

  std::size_t index(int x, int y) const {
    return static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) +
           static_cast<std::size_t>(x);
  }

  friend bool operator==(const CovarianceImage& a, const CovarianceImage& b) {
    return a.width_ == b.width_ && a.height_ == b.height_ &&
           a.looks_ == b.looks_ && a.px_ == b.px_;
  }

 private:
  int width_;
  int height_;
  double looks_;
  std::vector<CovarianceMatrix> px_;
};

/// Row-major grid of 9-channel feature vectors.
class FeatureImage {
 public:
  FeatureImage(int width, int height)
      : width_(width), height_(height),
        px_(detail::checked_size(width, height)) {}

  int width() const { return width_; }
  int height() const { return height_; }
  std::size_t size() const { return px_.size(); }

  const FeatureVector& at(int x, int y) const { return px_[index(x, y)]; }
  FeatureVector& at(int x, int y) { return px_[index(x, y)]; }
  const FeatureVector& operator[](std::size_t i) const { return px_[i]; }
  FeatureVector& operator[](std::size_t i) { return px_[i]; }

  std::size_t index(int x, int y) const {
    return static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) +
           static_cast<std::size_t>(x);
  }

  friend bool operator==(const FeatureImage& a, const FeatureImage& b) {
    return a.width_ == b.width_ && a.height_ == b.height_ && a.px_ == b.px_;
  }

 private:
  int width_;
  int height_;
  std::vector<FeatureVector> px_;
};

/// Per-pixel class ids; 0 means unlabeled/background.
class LabelMap {
 public:
  LabelMap(int width, int height)
      : width_(width), height_(height),
        px_(detail::checked_size(width, height), 0) {}

  int width() const { return width_; }
  int height() const { return height_; }
  std::size_t size() const { return px_.size(); }

  int at(int x, int y) const { return px_[index(x, y)]; }
  void set(int x, int y, int cls) {
    if (cls < 0 || cls > 255)
      throw std::invalid_argument("class id out of range 0..255");
    px_[index(x, y)] = static_cast<std::uint8_t>(cls);
  }
  std::uint8_t operator[](std::size_t i) const { return px_[i]; }
  std::uint8_t& operator[](std::size_t i) { return px_[i]; }
  const std::vector<std::uint8_t>& data() const { return px_; }

  std::size_t index(int x, int y) const {
    return static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) +
           static_cast<std::size_t>(x);
  }

  friend bool operator==(const LabelMap& a, const LabelMap& b) {
    return a.width_ == b.width_ && a.height_ == b.height_ && a.px_ == b.px_;
  }

 private:
  int width_;
  int height_;
  std::vector<std::uint8_t> px_;
};

/// Unpack every pixel into the nine real channels. Lossless.
inline FeatureImage to_features(const CovarianceImage& img) {
  FeatureImage out(img.width(), img.height());
  for (std::size_t i = 0; i < img.size(); ++i)
    out[i] = to_feature_vector(img[i]);
  return out;
}

/// Inverse of to_features.
inline CovarianceImage from_features(const FeatureImage& img, double looks) {
  CovarianceImage out(img.width(), img.height(), looks);
  for (std::size_t i = 0; i < img.size(); ++i)
    out[i] = from_feature_vector(img[i]);
  return out;
}

}  // namespace polsar
