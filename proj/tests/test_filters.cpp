#include <catch2/catch_amalgamated.hpp>

#include "polsar/filters.hpp"
#include "polsar/scene.hpp"

using namespace polsar;

namespace {

CovarianceImage constant_image(int w, int h, const CovarianceMatrix& z,
                               double looks) {
  CovarianceImage img(w, h, looks);
  for (std::size_t i = 0; i < img.size(); ++i) img[i] = z;
  return img;
}

CovarianceImage homogeneous_scene(int side, int looks,
                                  const CovarianceMatrix& truth,
                                  std::uint64_t seed, int threads = 2) {
  SceneSpec spec;
  spec.width = side;
  spec.height = side;
  spec.looks = looks;
  spec.seed = seed;
  SceneClass c;
  c.id = 1;
  c.name = "hom";
  c.truth = truth;
  c.rects.push_back({0, 0, side - 1, side - 1});
  spec.classes.push_back(c);
  return generate_scene(spec, threads).first;
}

bool images_close(const CovarianceImage& a, const CovarianceImage& b,
                  double tol) {
  if (a.width() != b.width() || a.height() != b.height()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const FeatureVector fa = to_feature_vector(a[i]);
    const FeatureVector fb = to_feature_vector(b[i]);
    for (std::size_t c = 0; c < 9; ++c) {
      const double scale = std::max({std::abs(fa[c]), std::abs(fb[c]), 1.0});
      if (std::abs(fa[c] - fb[c]) > tol * scale) return false;
    }
  }
  return true;
}

}  // namespace

TEST_CASE("window validation") {
  const CovarianceImage img =
      constant_image(4, 4, CovarianceMatrix::diagonal(1, 1, 1), 1.0);
  CHECK_THROWS_AS(boxcar_filter(img, 2), std::invalid_argument);
  CHECK_THROWS_AS(boxcar_filter(img, 1), std::invalid_argument);
  CHECK_THROWS_AS(refined_lee(img, 4), std::invalid_argument);
  CHECK_THROWS_AS(mbpolsar_filter(img, -3), std::invalid_argument);
}

TEST_CASE("boxcar of a constant image is the same image") {
  CovarianceMatrix z = CovarianceMatrix::diagonal(0.1, 2.0, 3.0);
  z.set_off(0, 1, cdouble{0.3, -0.2});
  z.set_off(0, 2, cdouble{-0.1, 0.05});
  const CovarianceImage img = constant_image(7, 5, z, 4.0);
  for (int w : {3, 5, 7}) {
    const CovarianceImage out = boxcar_filter(img, w);
    CHECK(images_close(out, img, 1e-12));
  }
}

TEST_CASE("boxcar center and clipped-corner means match direct sums") {
  CovarianceImage img(3, 3, 1.0);
  img.at(1, 1) = CovarianceMatrix::diagonal(9.0, 0.0, 0.0);
  const CovarianceImage out = boxcar_filter(img, 3);
  CHECK(out.at(1, 1).diag(0) == Catch::Approx(1.0).epsilon(1e-14));
  // corner window holds 4 valid pixels including the centre value 9
  CHECK(out.at(0, 0).diag(0) == Catch::Approx(9.0 / 4.0).epsilon(1e-14));
  // edge window holds 6 valid pixels
  CHECK(out.at(1, 0).diag(0) == Catch::Approx(9.0 / 6.0).epsilon(1e-14));
}

TEST_CASE("boxcar is linear and partition-invariant") {
  const CovarianceImage x =
      homogeneous_scene(24, 1, CovarianceMatrix::diagonal(1.0, 0.5, 2.0), 81);
  CovarianceMatrix t2 = CovarianceMatrix::diagonal(0.7, 1.1, 0.9);
  t2.set_off(1, 2, cdouble{0.2, 0.4});
  const CovarianceImage y = homogeneous_scene(24, 1, t2, 82);

  const double a = 0.7, b = 1.3;
  CovarianceImage combo(24, 24, 1.0);
  for (std::size_t i = 0; i < combo.size(); ++i) combo[i] = x[i] * a + y[i] * b;

  const CovarianceImage lhs = boxcar_filter(combo, 5);
  const CovarianceImage bx = boxcar_filter(x, 5);
  const CovarianceImage by = boxcar_filter(y, 5);
  CovarianceImage rhs(24, 24, 1.0);
  for (std::size_t i = 0; i < rhs.size(); ++i) rhs[i] = bx[i] * a + by[i] * b;
  CHECK(images_close(lhs, rhs, 1e-12));

  const CovarianceImage t1 = boxcar_filter(x, 7, 1);
  const CovarianceImage t3 = boxcar_filter(x, 7, 3);
  CHECK(t1 == t3);
}

TEST_CASE("refined lee weight follows the span statistics") {
  // 3x3 window, fully valid at the centre of a 3x3 image.
  CovarianceImage img(3, 3, 4.0);
  const double spans[9] = {3.0, 3.3, 2.7, 3.1, 100.0, 2.9, 3.2, 2.8, 3.0};
  for (int y = 0; y < 3; ++y)
    for (int x = 0; x < 3; ++x) {
      const double s = spans[y * 3 + x] / 3.0;
      img.at(x, y) = CovarianceMatrix::diagonal(s, s, s);
    }

  // independent oracle: direct evaluation of the MMSE weight
  double sum = 0.0, sum2 = 0.0;
  for (double s : spans) {
    sum += s;
    sum2 += s * s;
  }
  const double mean = sum / 9.0;
  const double var = (sum2 - 9.0 * mean * mean) / 8.0;
  const double sv2 = 0.25;  // 1/looks
  const double b = std::max(0.0, (var - sv2 * mean * mean) / ((1.0 + sv2) * var));
  const double mean_d0 = mean / 3.0;
  const double expect_center = mean_d0 + b * (100.0 / 3.0 - mean_d0);

  const CovarianceImage out = refined_lee(img, 3);
  CHECK(out.at(1, 1).diag(0) == Catch::Approx(expect_center).epsilon(1e-12));
  // strong point target: weight stays near its 1/(1+sv2) = 0.8 cap and the
  // output stays near the centre value
  CHECK(b > 0.75);
  CHECK(out.at(1, 1).diag(0) > 20.0);
}

TEST_CASE("refined lee on constant data returns the window mean (b = 0)") {
  CovarianceMatrix z = CovarianceMatrix::diagonal(2.0, 1.0, 0.5);
  z.set_off(0, 2, cdouble{0.4, 0.1});
  const CovarianceImage img = constant_image(9, 9, z, 4.0);
  for (int w : {3, 5}) {
    const CovarianceImage out = refined_lee(img, w);
    CHECK(images_close(out, img, 1e-12));
  }
}

TEST_CASE("refined lee suppresses speckle towards the homogeneous mean") {
  // fully developed speckle: var_y ~ sv2 * mean^2, so b ~ 0 and the output
  // variance collapses towards the window-mean variance
  const CovarianceImage img = homogeneous_scene(
      64, 4, CovarianceMatrix::diagonal(1.0, 0.4, 0.8), 4747);
  const CovarianceImage out = refined_lee(img, 3);
  double var_in = 0.0, var_out = 0.0, m_in = 0.0, m_out = 0.0;
  for (std::size_t i = 0; i < img.size(); ++i) {
    m_in += img[i].diag(0);
    m_out += out[i].diag(0);
  }
  m_in /= static_cast<double>(img.size());
  m_out /= static_cast<double>(img.size());
  for (std::size_t i = 0; i < img.size(); ++i) {
    var_in += (img[i].diag(0) - m_in) * (img[i].diag(0) - m_in);
    var_out += (out[i].diag(0) - m_out) * (out[i].diag(0) - m_out);
  }
  CHECK(var_out < 0.35 * var_in);
  CHECK(std::abs(m_out - m_in) < 0.02);
}

TEST_CASE("refined lee directional masks preserve a sharp edge at w=5") {
  // left half dark, right half bright; the non-directional boxcar smears the
  // edge, the directional half-plane mean does not
  CovarianceImage img(16, 16, 100.0);
  for (int y = 0; y < 16; ++y)
    for (int x = 0; x < 16; ++x) {
      const double a = x < 8 ? 1.0 / 3.0 : 3.0;
      img.at(x, y) = CovarianceMatrix::diagonal(a, a, a);
    }
  const CovarianceImage lee = refined_lee(img, 5);
  const CovarianceImage box = boxcar_filter(img, 5);
  // pixel two columns left of the edge: its 5x5 window crosses the edge,
  // so the plain mean is pulled far above the dark level 1/3
  CHECK(box.at(6, 8).diag(0) > 0.8);
  CHECK(lee.at(6, 8).diag(0) == Catch::Approx(1.0 / 3.0).epsilon(1e-9));
  CHECK(lee.at(9, 8).diag(0) == Catch::Approx(3.0).epsilon(1e-9));
}

TEST_CASE("coherence of perfectly correlated channels is (1, 0)") {
  CovarianceImage img(8, 8, 1.0);
  CounterRng rng(5);
  for (std::size_t i = 0; i < img.size(); ++i) {
    const double v = 0.5 + rng.next_unit();
    CovarianceMatrix z = CovarianceMatrix::diagonal(v, v, 1.0);
    z.set_off(0, 1, cdouble{v, 0.0});
    img[i] = z;
  }
  const CoherenceRaster coh = estimate_coherence(img, 3, 0, 1);
  for (int y = 0; y < 8; ++y)
    for (int x = 0; x < 8; ++x) {
      CHECK(coh.at(x, y).magnitude == Catch::Approx(1.0).epsilon(1e-12));
      CHECK(std::abs(coh.at(x, y).phase) < 1e-12);
    }
  CHECK(coh.flagged() == 0);
}

TEST_CASE("coherence hand case: means (1, 4, 1) give |rho| = 0.5, phase 0") {
  CovarianceMatrix z = CovarianceMatrix::diagonal(4.0, 1.0, 1.0);
  z.set_off(0, 1, cdouble{1.0, 0.0});
  const CovarianceImage img = constant_image(5, 5, z, 1.0);
  const CoherenceRaster coh = estimate_coherence(img, 3, 0, 1);
  CHECK(coh.at(2, 2).magnitude == Catch::Approx(0.5).epsilon(1e-12));
  CHECK(std::abs(coh.at(2, 2).phase) < 1e-12);
}

TEST_CASE("coherence null distribution: mean |rho|^2 = 1/n_eff") {
  const CovarianceImage img = homogeneous_scene(
      128, 1, CovarianceMatrix::diagonal(1.0, 2.0, 0.5), 616);
  const CoherenceRaster coh = estimate_coherence(img, 7, 0, 1, 2);
  double mean = 0.0;
  int count = 0;
  for (int y = 3; y < 125; ++y)
    for (int x = 3; x < 125; ++x) {
      mean += coh.at(x, y).magnitude * coh.at(x, y).magnitude;
      ++count;
    }
  mean /= count;
  CHECK(std::abs(mean - 1.0 / 49.0) < 0.002);
}

TEST_CASE("coherence flags zero-denominator pixels") {
  const CovarianceImage img =
      constant_image(4, 4, CovarianceMatrix::zero(), 1.0);
  const CoherenceRaster coh = estimate_coherence(img, 3, 0, 2);
  CHECK(coh.flagged() == img.size());
  CHECK(coh.at(1, 1).magnitude == 0.0);
  CHECK(coh.at(1, 1).phase == 0.0);
  CHECK_THROWS_AS(estimate_coherence(img, 3, 1, 1), std::invalid_argument);
}

TEST_CASE("coherence bias correction fixed points and monotonicity") {
  CHECK(correct_coherence_bias(1.0, 9.0) == 1.0);
  CHECK(correct_coherence_bias(1.0, 49.0) == 1.0);
  CHECK(correct_coherence_bias(std::sqrt(1.0 / 49.0), 49.0) < 1e-7);
  CHECK(correct_coherence_bias(0.0, 49.0) == 0.0);
  CHECK_THROWS_AS(correct_coherence_bias(0.5, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(correct_coherence_bias(0.5, 1.99), std::invalid_argument);
  double prev = -1.0;
  for (int i = 0; i <= 100; ++i) {
    const double c = correct_coherence_bias(i / 100.0, 36.0);
    CHECK(c >= prev);
    prev = c;
  }
}

TEST_CASE("Monte Carlo: bias correction recovers |rho| = 0.6 at n_eff 49") {
  CovarianceMatrix c = CovarianceMatrix::diagonal(1.0, 1.0, 1.0);
  c.set_off(0, 1, cdouble{0.6, 0.0});
  const Eigen::Matrix3cd chol = cholesky_factor(c);
  CounterRng rng(2718);
  const int windows = 10000, per_window = 49;
  double raw_mean = 0.0, corr_mean = 0.0;
  for (int wnd = 0; wnd < windows; ++wnd) {
    double p0 = 0.0, p1 = 0.0;
    cdouble x01{};
    for (int i = 0; i < per_window; ++i) {
      const ScatteringVector s = sample_scattering(chol, rng);
      p0 += std::norm(s.hh);
      p1 += std::norm(s.hv);
      x01 += s.hh * std::conj(s.hv);
    }
    const double raw = std::min(1.0, std::abs(x01) / std::sqrt(p0 * p1));
    raw_mean += raw;
    corr_mean += correct_coherence_bias(raw, 49.0);
  }
  raw_mean /= windows;
  corr_mean /= windows;
  CHECK(raw_mean > 0.6);  // biased high before correction
  CHECK(std::abs(corr_mean - 0.6) < 0.03);
}

TEST_CASE("mbpolsar on a constant image matches the hand computation") {
  CovarianceMatrix z = CovarianceMatrix::diagonal(2.0, 1.0, 0.5);
  z.set_off(0, 1, std::polar(0.8, 0.7));    // |rho| = 0.8/sqrt(2)
  z.set_off(0, 2, std::polar(0.5, -0.4));   // |rho| = 0.5/1
  z.set_off(1, 2, cdouble{0.0, 0.0});
  const double looks = 4.0;
  const CovarianceImage img = constant_image(9, 9, z, looks);
  const CovarianceImage out = mbpolsar_filter(img, 3);

  // interior pixel: 9 valid window pixels
  const double n_eff = 9.0 * looks;
  for (int p = 0; p < 3; ++p)
    CHECK(out.at(4, 4).diag(p) == Catch::Approx(z.diag(p)).epsilon(1e-12));
  for (int p = 0; p < 3; ++p)
    for (int q = p + 1; q < 3; ++q) {
      const double den = std::sqrt(z.diag(p) * z.diag(q));
      const cdouble expect =
          den > 0.0 && std::abs(z.off(p, q)) > 0.0
              ? std::polar(correct_coherence_bias(
                               std::min(1.0, std::abs(z.off(p, q)) / den),
                               n_eff) * den,
                           std::arg(z.off(p, q)))
              : cdouble{0.0, 0.0};
      CHECK(std::abs(out.at(4, 4).off(p, q) - expect) < 1e-9);
    }

  // corner pixel: only 4 valid pixels -> stronger correction
  const double n_eff_corner = 4.0 * looks;
  const double den01 = std::sqrt(z.diag(0) * z.diag(1));
  const double expect_corner =
      correct_coherence_bias(std::min(1.0, std::abs(z.off(0, 1)) / den01),
                             n_eff_corner) * den01;
  CHECK(std::abs(out.at(0, 0).off(0, 1)) ==
        Catch::Approx(expect_corner).epsilon(1e-9));
}

TEST_CASE("mbpolsar diagonals equal boxcar diagonals exactly") {
  CovarianceMatrix t = CovarianceMatrix::diagonal(1.5, 0.6, 1.0);
  t.set_off(0, 2, std::polar(0.4, 0.5));
  const CovarianceImage img = homogeneous_scene(32, 4, t, 99);
  const CovarianceImage mb = mbpolsar_filter(img, 5);
  const CovarianceImage box = boxcar_filter(img, 5);
  for (std::size_t i = 0; i < img.size(); ++i)
    for (int p = 0; p < 3; ++p)
      CHECK(mb[i].diag(p) == box[i].diag(p));
}

TEST_CASE("mbpolsar suppresses spurious off-diagonals as the window grows") {
  // independent channels: true off-diagonals are zero; the reconstructed
  // magnitudes must shrink with n_eff. With the adopted corrector the mean
  // corrected coherence scales ~ 1/sqrt(n_eff), so w: 3 -> 9 gives a ratio
  // near 1/3 (Beta(1, n-1) null analysis); 0.38 bounds it with Monte Carlo
  // slack.
  const CovarianceImage img = homogeneous_scene(
      96, 1, CovarianceMatrix::diagonal(1.0, 2.0, 0.5), 5150);
  const CovarianceImage w3 = mbpolsar_filter(img, 3, std::nullopt, 2);
  const CovarianceImage w9 = mbpolsar_filter(img, 9, std::nullopt, 2);
  double m3 = 0.0, m9 = 0.0;
  int count = 0;
  for (int y = 5; y < 91; ++y)
    for (int x = 5; x < 91; ++x) {
      m3 += std::abs(w3.at(x, y).off(0, 1));
      m9 += std::abs(w9.at(x, y).off(0, 1));
      ++count;
    }
  m3 /= count;
  m9 /= count;
  CHECK(m9 < 0.38 * m3);
}

TEST_CASE("mbpolsar output satisfies the off-diagonal magnitude bound and PSD") {
  // engineered incompatible coherences: pairwise magnitudes are fine but the
  // 3x3 matrix is indefinite, so the eigenvalue floor must engage
  CovarianceMatrix z = CovarianceMatrix::diagonal(1.0, 1.0, 1.0);
  z.set_off(0, 1, cdouble{0.95, 0.0});
  z.set_off(0, 2, cdouble{0.95, 0.0});
  z.set_off(1, 2, cdouble{-0.95, 0.0});
  REQUIRE(z.min_eigenvalue() < 0.0);
  const CovarianceImage img = constant_image(9, 9, z, 16.0);
  const CovarianceImage out = mbpolsar_filter(img, 3);
  for (std::size_t i = 0; i < out.size(); ++i) {
    CHECK(out[i].is_hermitian_psd(0.0));
    for (int p = 0; p < 3; ++p)
      for (int q = p + 1; q < 3; ++q)
        CHECK(std::abs(out[i].off(p, q)) <=
              std::sqrt(out[i].diag(p) * out[i].diag(q)) + 1e-12);
  }
}

TEST_CASE("mbpolsar rejects configurations with n_eff < 2") {
  const CovarianceImage img =
      constant_image(1, 1, CovarianceMatrix::diagonal(1, 1, 1), 1.0);
  CHECK_THROWS_AS(mbpolsar_filter(img, 3), std::invalid_argument);
}

TEST_CASE("filters preserve dimensions, Hermitian structure and PSD") {
  CovarianceMatrix t = CovarianceMatrix::diagonal(1.0, 0.3, 0.7);
  t.set_off(0, 2, std::polar(0.45, 1.0));
  t.set_off(0, 1, std::polar(0.1, -0.4));
  const CovarianceImage img = homogeneous_scene(32, 2, t, 404);
  for (int w : {3, 5}) {
    for (const CovarianceImage& out :
         {boxcar_filter(img, w), refined_lee(img, w), mbpolsar_filter(img, w)}) {
      REQUIRE(out.width() == img.width());
      REQUIRE(out.height() == img.height());
      for (std::size_t i = 0; i < out.size(); ++i)
        CHECK(out[i].is_hermitian_psd(1e-12));
    }
  }
}

TEST_CASE("homogeneous-region MSE is non-increasing in the window size") {
  CovarianceMatrix t = CovarianceMatrix::diagonal(1.2, 0.5, 0.9);
  t.set_off(0, 2, std::polar(0.5, 0.8));
  const CovarianceImage img = homogeneous_scene(96, 4, t, 1234);
  const FeatureVector truth = to_feature_vector(t);

  const auto mse_of = [&](const CovarianceImage& f) {
    double acc = 0.0;
    for (std::size_t i = 0; i < f.size(); ++i) {
      const FeatureVector v = to_feature_vector(f[i]);
      for (std::size_t c = 0; c < 9; ++c)
        acc += (v[c] - truth[c]) * (v[c] - truth[c]);
    }
    return acc / static_cast<double>(f.size());
  };

  const CovarianceImage lee = refined_lee(img, 3, std::nullopt, 2);
  double prev_lm = 1e300, prev_mb = 1e300;
  for (int w : {3, 5, 7, 9}) {
    const double lm = mse_of(boxcar_filter(lee, w, 2));
    const double mb = mse_of(mbpolsar_filter(img, w, std::nullopt, 2));
    CHECK(lm < prev_lm);
    CHECK(mb < prev_mb);
    prev_lm = lm;
    prev_mb = mb;
  }
}

TEST_CASE("refined lee and mbpolsar are partition-invariant") {
  CovarianceMatrix t = CovarianceMatrix::diagonal(1.0, 0.4, 0.8);
  t.set_off(0, 2, std::polar(0.3, 0.2));
  const CovarianceImage img = homogeneous_scene(24, 2, t, 31);
  CHECK(refined_lee(img, 5, std::nullopt, 1) ==
        refined_lee(img, 5, std::nullopt, 3));
  CHECK(mbpolsar_filter(img, 5, std::nullopt, 1) ==
        mbpolsar_filter(img, 5, std::nullopt, 3));
}
