#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <vector>

#include <Eigen/Eigenvalues>

#include "polsar/parallel.hpp"
#include "polsar/raster.hpp"

namespace polsar {

inline void check_window(int w) {
  if (w < 3 || w % 2 == 0)
    throw std::invalid_argument("filter window must be odd and >= 3, got " +
                                std::to_string(w));
}

namespace detail {

inline int clip_lo(int c, int half) { return std::max(0, c - half); }
inline int clip_hi(int c, int half, int size) {
  return std::min(size - 1, c + half);
}

/// Valid (clipped) window pixel count at (x, y).
inline int window_count(int x, int y, int half, int width, int height) {
  return (clip_hi(x, half, width) - clip_lo(x, half) + 1) *
         (clip_hi(y, half, height) - clip_lo(y, half) + 1);
}

}  // namespace detail

/// Entrywise arithmetic mean over the w x w neighborhood; border pixels
/// average over the valid clipped neighborhood. Separable two-pass sums in
/// double precision; summation order is fixed, so results do not depend on
/// the worker count.
inline CovarianceImage boxcar_filter(const CovarianceImage& img, int w,
                                     int threads = 1) {
  check_window(w);
  const int half = w / 2;
  const int width = img.width(), height = img.height();

  // Pass 1: clipped vertical sums.
  CovarianceImage vert(width, height, img.looks());
  parallel_for(static_cast<std::size_t>(height), threads,
               [&](std::size_t yb, std::size_t ye) {
                 for (std::size_t y = yb; y < ye; ++y) {
                   const int yi = static_cast<int>(y);
                   const int y0 = detail::clip_lo(yi, half);
                   const int y1 = detail::clip_hi(yi, half, height);
                   for (int x = 0; x < width; ++x) {
                     CovarianceMatrix acc;
                     for (int yy = y0; yy <= y1; ++yy) acc += img.at(x, yy);
                     vert.at(x, yi) = acc;
                   }
                 }
               });

  // Pass 2: clipped horizontal sums of the vertical sums, then normalize.
  CovarianceImage out(width, height, img.looks());
  parallel_for(static_cast<std::size_t>(height), threads,
               [&](std::size_t yb, std::size_t ye) {
                 for (std::size_t y = yb; y < ye; ++y) {
                   const int yi = static_cast<int>(y);
                   for (int x = 0; x < width; ++x) {
                     const int x0 = detail::clip_lo(x, half);
                     const int x1 = detail::clip_hi(x, half, width);
                     CovarianceMatrix acc;
                     for (int xx = x0; xx <= x1; ++xx) acc += vert.at(xx, yi);
                     const int count =
                         detail::window_count(x, yi, half, width, height);
                     acc *= 1.0 / static_cast<double>(count);
                     out.at(x, yi) = acc;
                   }
                 }
               });
  return out;
}

namespace detail {

struct WindowStats {
  int count = 0;
  double span_mean = 0.0;
  double span_var = 0.0;  // unbiased (count - 1) sample variance
  CovarianceMatrix mean;
};

/// Eight edge-aligned half-plane masks (four axis, four diagonal), each
/// including the centre line. `dir` pairs: 0/1 = left/right, 2/3 = up/down,
/// 4/5 = up-right/down-left, 6/7 = down-right/up-left.
inline bool in_half_plane(int dx, int dy, int dir) {
  switch (dir) {
    case 0: return dx <= 0;
    case 1: return dx >= 0;
    case 2: return dy <= 0;
    case 3: return dy >= 0;
    case 4: return dx - dy >= 0;
    case 5: return dx - dy <= 0;
    case 6: return dx + dy >= 0;
    default: return dx + dy <= 0;
  }
}

template <typename Predicate>
WindowStats gather_window(const CovarianceImage& img,
                          const std::vector<double>& span, int x, int y,
                          int half, Predicate&& keep) {
  const int width = img.width(), height = img.height();
  WindowStats st;
  double sum = 0.0, sum2 = 0.0;
  CovarianceMatrix acc;
  for (int dy = -half; dy <= half; ++dy) {
    const int yy = y + dy;
    if (yy < 0 || yy >= height) continue;
    for (int dx = -half; dx <= half; ++dx) {
      const int xx = x + dx;
      if (xx < 0 || xx >= width) continue;
      if (!keep(dx, dy)) continue;
      const std::size_t i = img.index(xx, yy);
      const double s = span[i];
      sum += s;
      sum2 += s * s;
      acc += img[i];
      ++st.count;
    }
  }
  if (st.count > 0) {
    const double n = static_cast<double>(st.count);
    st.span_mean = sum / n;
    st.mean = acc * (1.0 / n);
    if (st.count > 1)
      st.span_var = std::max(0.0, (sum2 - n * st.span_mean * st.span_mean) /
                                      (n - 1.0));
  }
  return st;
}

/// Pick one of the eight half-plane masks from the 3x3 sub-block span means:
/// strongest gradient orientation first, then the side whose mean is closer
/// to the centre pixel span. Returns -1 (use the full window) when a border
/// leaves any sub-block empty.
inline int select_direction(const CovarianceImage& img,
                            const std::vector<double>& span, int x, int y,
                            int half, int w) {
  const int width = img.width(), height = img.height();
  double block_sum[3][3] = {};
  int block_cnt[3][3] = {};
  for (int dy = -half; dy <= half; ++dy) {
    const int yy = y + dy;
    if (yy < 0 || yy >= height) continue;
    const int by = ((dy + half) * 3) / w;
    for (int dx = -half; dx <= half; ++dx) {
      const int xx = x + dx;
      if (xx < 0 || xx >= width) continue;
      const int bx = ((dx + half) * 3) / w;
      block_sum[by][bx] += span[img.index(xx, yy)];
      ++block_cnt[by][bx];
    }
  }
  double m[3][3];
  for (int by = 0; by < 3; ++by)
    for (int bx = 0; bx < 3; ++bx) {
      if (block_cnt[by][bx] == 0) return -1;
      m[by][bx] = block_sum[by][bx] / block_cnt[by][bx];
    }
  const double gh = (m[0][2] + m[1][2] + m[2][2]) - (m[0][0] + m[1][0] + m[2][0]);
  const double gv = (m[2][0] + m[2][1] + m[2][2]) - (m[0][0] + m[0][1] + m[0][2]);
  const double gd1 = (m[0][1] + m[0][2] + m[1][2]) - (m[1][0] + m[2][0] + m[2][1]);
  const double gd2 = (m[1][2] + m[2][1] + m[2][2]) - (m[0][0] + m[0][1] + m[1][0]);
  const double mags[4] = {std::abs(gh), std::abs(gv), std::abs(gd1),
                          std::abs(gd2)};
  int orient = 0;
  for (int o = 1; o < 4; ++o)
    if (mags[o] > mags[orient]) orient = o;
  // Candidate halves for each orientation, in in_half_plane() numbering.
  static const int halves[4][2] = {{0, 1}, {2, 3}, {4, 5}, {6, 7}};
  const double centre = span[img.index(x, y)];
  double best_dist = 0.0;
  int best = -1;
  for (int side = 0; side < 2; ++side) {
    const int dir = halves[orient][side];
    double sum = 0.0;
    int cnt = 0;
    for (int dy = -half; dy <= half; ++dy) {
      const int yy = y + dy;
      if (yy < 0 || yy >= height) continue;
      for (int dx = -half; dx <= half; ++dx) {
        const int xx = x + dx;
        if (xx < 0 || xx >= width) continue;
        if (!in_half_plane(dx, dy, dir)) continue;
        sum += span[img.index(xx, yy)];
        ++cnt;
      }
    }
    if (cnt == 0) continue;
    const double dist = std::abs(sum / cnt - centre);
    if (best < 0 || dist < best_dist) {
      best = dir;
      best_dist = dist;
    }
  }
  return best;
}

}  // namespace detail

/// Adaptive Lee MMSE filter driven by the span statistics: the output is
/// Z_mean + b (Z - Z_mean) with one scalar weight per pixel,
/// b = max(0, (var_y - sv2 * mean_y^2) / ((1 + sv2) * var_y)), sv2 = 1/looks.
/// At w = 3 the directional masks have no support and the full (clipped)
/// window is used; for w >= 5 one of eight edge-aligned half-plane masks is
/// selected per pixel from the span gradient. Window statistics use the
/// unbiased sample variance.
inline CovarianceImage refined_lee(const CovarianceImage& img, int w = 3,
                                   std::optional<double> looks = std::nullopt,
                                   int threads = 1) {
  check_window(w);
  const double n = looks.value_or(img.looks());
  if (!(n > 0.0)) throw std::invalid_argument("look count must be positive");
  const double sv2 = 1.0 / n;
  const int half = w / 2;
  const int width = img.width(), height = img.height();

  std::vector<double> span(img.size());
  for (std::size_t i = 0; i < img.size(); ++i) span[i] = img[i].span();

  CovarianceImage out(width, height, img.looks());
  parallel_for(static_cast<std::size_t>(height), threads,
               [&](std::size_t yb, std::size_t ye) {
                 for (std::size_t y = yb; y < ye; ++y) {
                   const int yi = static_cast<int>(y);
                   for (int x = 0; x < width; ++x) {
                     int dir = -1;
                     if (w > 3)
                       dir = detail::select_direction(img, span, x, yi, half, w);
                     const detail::WindowStats st =
                         dir < 0
                             ? detail::gather_window(img, span, x, yi, half,
                                                     [](int, int) { return true; })
                             : detail::gather_window(
                                   img, span, x, yi, half,
                                   [dir](int dx, int dy) {
                                     return detail::in_half_plane(dx, dy, dir);
                                   });
                     double b = 0.0;
                     if (st.span_var > 0.0) {
                       b = (st.span_var - sv2 * st.span_mean * st.span_mean) /
                           ((1.0 + sv2) * st.span_var);
                       b = std::max(0.0, b);
                     }
                     out.at(x, yi) = st.mean * (1.0 - b) +
                                     img.at(x, yi) * b;
                   }
                 }
               });
  return out;
}

/// Complex correlation coefficient of one channel pair.
struct Coherence {
  double magnitude = 0.0;  // clamped to [0, 1]
  double phase = 0.0;      // radians, principal range
};

class CoherenceRaster {
 public:
  CoherenceRaster(int width, int height)
      : width_(width), height_(height),
        px_(static_cast<std::size_t>(width) * static_cast<std::size_t>(height)) {}

  int width() const { return width_; }
  int height() const { return height_; }
  const Coherence& at(int x, int y) const {
    return px_[static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) +
               static_cast<std::size_t>(x)];
  }
  Coherence& at(int x, int y) {
    return px_[static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) +
               static_cast<std::size_t>(x)];
  }
  const Coherence& operator[](std::size_t i) const { return px_[i]; }

  /// Pixels where the denominator vanished and (0, 0) was substituted.
  std::size_t flagged() const { return flagged_; }
  void set_flagged(std::size_t n) { flagged_ = n; }

 private:
  int width_, height_;
  std::vector<Coherence> px_;
  std::size_t flagged_ = 0;
};

/// Windowed coherence estimate of channels p != q (0-based):
/// rho = mean(Z_pq) / sqrt(mean(Z_pp) mean(Z_qq)) over the clipped window;
/// the magnitude is clamped to [0, 1] and the phase is the argument of the
/// numerator.
inline CoherenceRaster estimate_coherence(const CovarianceImage& img, int w,
                                          int p, int q, int threads = 1) {
  check_window(w);
  if (p == q || p < 0 || q < 0 || p > 2 || q > 2)
    throw std::invalid_argument("coherence needs two distinct channels 0..2");
  const CovarianceImage box = boxcar_filter(img, w, threads);
  CoherenceRaster out(img.width(), img.height());
  std::size_t flagged = 0;
  for (int y = 0; y < img.height(); ++y)
    for (int x = 0; x < img.width(); ++x) {
      const CovarianceMatrix& z = box.at(x, y);
      const cdouble num = z.at(p, q);
      const double den = std::sqrt(z.diag(p) * z.diag(q));
      Coherence c;
      if (den > 0.0) {
        c.magnitude = std::min(1.0, std::abs(num) / den);
        c.phase = std::arg(num);
      } else {
        ++flagged;
      }
      out.at(x, y) = c;
    }
  out.set_flagged(flagged);
  return out;
}

/// Reduce the small-sample coherence bias: |rho|^2 is replaced by
/// (n_eff |rho|^2 - 1) / (n_eff - 1), which zeroes the null-hypothesis
/// expectation E|rho|^2 = 1/n_eff, then clamped and rooted. Monotone
/// non-decreasing and maps 1 to 1. Requires n_eff >= 2.
inline double correct_coherence_bias(double magnitude, double n_eff) {
  if (!(n_eff >= 2.0))
    throw std::invalid_argument("coherence bias correction needs n_eff >= 2");
  const double m2 = magnitude * magnitude;
  return std::sqrt(std::max(0.0, (n_eff * m2 - 1.0) / (n_eff - 1.0)));
}

namespace detail {

/// Floor negative eigenvalues at zero, preserving eigenvectors.
inline CovarianceMatrix psd_floor(const CovarianceMatrix& z) {
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3cd> es(z.to_eigen());
  Eigen::Vector3d ev = es.eigenvalues().cwiseMax(0.0);
  const Eigen::Matrix3cd m = es.eigenvectors() * ev.asDiagonal() *
                             es.eigenvectors().adjoint();
  return CovarianceMatrix::from_eigen(m);
}

}  // namespace detail

/// Model-based PolSAR filter: multilook (boxcar) filtering of the diagonal
/// entries; each off-diagonal entry is rebuilt as
/// |rho_c| exp(j phase) sqrt(Zpp Zqq) from the bias-corrected windowed
/// coherence, with n_eff = (valid window pixels) * looks. The off-diagonal
/// magnitude clamp keeps every 2x2 principal minor PSD; if the full matrix
/// still has a negative eigenvalue beyond rounding it is projected by
/// eigenvalue flooring.
inline CovarianceImage mbpolsar_filter(const CovarianceImage& img, int w,
                                       std::optional<double> looks = std::nullopt,
                                       int threads = 1) {
  check_window(w);
  const double n = looks.value_or(img.looks());
  if (!(n > 0.0)) throw std::invalid_argument("look count must be positive");
  const int half = w / 2;
  const int width = img.width(), height = img.height();
  const int min_count = std::min(half + 1, width) * std::min(half + 1, height);
  if (min_count * n < 2.0)
    throw std::invalid_argument(
        "mbpolsar: smallest clipped window gives n_eff < 2; need more looks "
        "or a larger raster");

  const CovarianceImage box = boxcar_filter(img, w, threads);
  CovarianceImage out(width, height, img.looks());
  parallel_for(static_cast<std::size_t>(height), threads,
               [&](std::size_t yb, std::size_t ye) {
                 for (std::size_t y = yb; y < ye; ++y) {
                   const int yi = static_cast<int>(y);
                   for (int x = 0; x < width; ++x) {
                     const CovarianceMatrix& zb = box.at(x, yi);
                     const double n_eff =
                         detail::window_count(x, yi, half, width, height) * n;
                     CovarianceMatrix z = CovarianceMatrix::diagonal(
                         zb.diag(0), zb.diag(1), zb.diag(2));
                     for (int pp = 0; pp < 3; ++pp)
                       for (int qq = pp + 1; qq < 3; ++qq) {
                         const cdouble num = zb.off(pp, qq);
                         const double den =
                             std::sqrt(zb.diag(pp) * zb.diag(qq));
                         if (!(den > 0.0)) continue;  // keep zero
                         const double mag =
                             std::min(1.0, std::abs(num) / den);
                         const double magc =
                             correct_coherence_bias(mag, n_eff);
                         z.set_off(pp, qq,
                                   std::polar(magc * den, std::arg(num)));
                       }
                     const double tr = z.trace();
                     const double slack =
                         32.0 * std::numeric_limits<double>::epsilon() *
                         std::max(tr, 0.0);
                     if (z.min_eigenvalue() < -slack)
                       z = detail::psd_floor(z);
                     out.at(x, yi) = z;
                   }
                 }
               });
  return out;
}

}  // namespace polsar
