#include <catch2/catch_amalgamated.hpp>

#include <sstream>

#include "polsar/scene.hpp"

using namespace polsar;

namespace {

SceneSpec tiny_spec(int w, int h, int looks, std::uint64_t seed) {
  SceneSpec spec;
  spec.width = w;
  spec.height = h;
  spec.looks = looks;
  spec.seed = seed;
  SceneClass c;
  c.id = 1;
  c.name = "only";
  c.truth = CovarianceMatrix::diagonal(1.0, 1.0, 1.0);
  c.rects.push_back({0, 0, w - 1, h - 1});
  spec.classes.push_back(c);
  return spec;
}

}  // namespace

TEST_CASE("sample_scattering rejects non-PD covariance") {
  const CovarianceMatrix zero;
  CounterRng rng(1);
  CHECK_THROWS_AS(sample_scattering(zero, rng), std::invalid_argument);
}

TEST_CASE("sample_scattering moments match the requested covariance") {
  CounterRng rng(11);
  const int n = 100000;

  SECTION("identity covariance") {
    const Eigen::Matrix3cd chol =
        cholesky_factor(CovarianceMatrix::diagonal(1.0, 1.0, 1.0));
    double var[3] = {0, 0, 0};
    cdouble cross01{}, cross02{}, cross12{};
    for (int i = 0; i < n; ++i) {
      const ScatteringVector s = sample_scattering(chol, rng);
      for (int c = 0; c < 3; ++c) var[c] += std::norm(s[c]);
      cross01 += s.hh * std::conj(s.hv);
      cross02 += s.hh * std::conj(s.vv);
      cross12 += s.hv * std::conj(s.vv);
    }
    for (double& v : var) v /= n;
    CHECK(std::abs(var[0] - 1.0) < 0.03);
    CHECK(std::abs(var[1] - 1.0) < 0.03);
    CHECK(std::abs(var[2] - 1.0) < 0.03);
    CHECK(std::abs(cross01) / n < 0.02);
    CHECK(std::abs(cross02) / n < 0.02);
    CHECK(std::abs(cross12) / n < 0.02);
  }

  SECTION("scaled hh power") {
    const Eigen::Matrix3cd chol =
        cholesky_factor(CovarianceMatrix::diagonal(4.0, 1.0, 1.0));
    double p = 0.0;
    for (int i = 0; i < n; ++i) p += std::norm(sample_scattering(chol, rng).hh);
    p /= n;
    CHECK(std::abs(p - 4.0) < 0.12);  // 3% of 4
  }
}

TEST_CASE("1x1 scene with a million looks converges to the truth") {
  SceneSpec spec = tiny_spec(1, 1, 1000000, 77);
  const auto [img, labels] = generate_scene(spec);
  for (int p = 0; p < 3; ++p)
    for (int q = 0; q < 3; ++q) {
      const cdouble expect = p == q ? cdouble{1.0, 0.0} : cdouble{0.0, 0.0};
      CHECK(std::abs(img.at(0, 0).at(p, q) - expect) < 0.01);
    }
  CHECK(labels.at(0, 0) == 1);
}

TEST_CASE("same seed gives bit-identical scenes at any thread count") {
  const SceneSpec spec = default_scene_spec(4242);
  const auto [img1, lab1] = generate_scene(spec, 1);
  const auto [img2, lab2] = generate_scene(spec, 1);
  const auto [img4, lab4] = generate_scene(spec, 4);
  CHECK(img1 == img2);
  CHECK(lab1 == lab2);
  CHECK(img1 == img4);
  CHECK(lab1 == lab4);

  SceneSpec other = spec;
  other.seed = 4243;
  const auto [img3, lab3] = generate_scene(other, 1);
  CHECK_FALSE(img1 == img3);
}

TEST_CASE("labels follow the class layout; uncovered pixels stay 0") {
  SceneSpec spec;
  spec.width = 8;
  spec.height = 8;
  spec.looks = 2;
  spec.seed = 5;
  SceneClass c2;
  c2.id = 2;
  c2.name = "blob";
  c2.truth = CovarianceMatrix::diagonal(1.0, 2.0, 3.0);
  c2.rects.push_back({2, 2, 5, 5});
  spec.classes.push_back(c2);
  const auto [img, labels] = generate_scene(spec);
  CHECK(labels.at(3, 3) == 2);
  CHECK(labels.at(0, 0) == 0);
  CHECK(img.at(0, 0) == CovarianceMatrix::zero());
  CHECK(img.at(3, 3).trace() > 0.0);
}

TEST_CASE("scene spec validation rejects overlap and non-PD truth") {
  SceneSpec spec = tiny_spec(8, 8, 1, 1);
  SceneClass c2 = spec.classes.front();
  c2.id = 2;
  c2.name = "other";
  spec.classes.push_back(c2);  // same rects -> overlap
  CHECK_THROWS_AS(spec.validate(), ValidationError);

  SceneSpec bad = tiny_spec(8, 8, 1, 1);
  bad.classes.front().truth = CovarianceMatrix::zero();
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
}

TEST_CASE("scene spec survives serialize/parse") {
  const SceneSpec spec = default_scene_spec(123);
  const std::string text = spec.serialize();
  std::istringstream in(text);
  const SceneSpec back = SceneSpec::parse(in, "spec");
  CHECK(back.width == spec.width);
  CHECK(back.height == spec.height);
  CHECK(back.looks == spec.looks);
  CHECK(back.seed == spec.seed);
  REQUIRE(back.classes.size() == spec.classes.size());
  for (std::size_t k = 0; k < spec.classes.size(); ++k) {
    CHECK(back.classes[k].id == spec.classes[k].id);
    CHECK(back.classes[k].name == spec.classes[k].name);
    CHECK(back.classes[k].truth == spec.classes[k].truth);
    CHECK(back.classes[k].rects.size() == spec.classes[k].rects.size());
  }
  CHECK(back.serialize() == text);
}

TEST_CASE("noise model: Z is unbiased and diagonal variance scales as C11^2/n") {
  CovarianceMatrix c = CovarianceMatrix::diagonal(2.0, 0.8, 1.2);
  c.set_off(0, 2, cdouble{0.5, 0.7});

  for (int looks : {1, 4, 16}) {
    SceneSpec spec;
    spec.width = 128;
    spec.height = 128;
    spec.looks = looks;
    spec.seed = 900 + static_cast<std::uint64_t>(looks);
    SceneClass cls;
    cls.id = 1;
    cls.name = "hom";
    cls.truth = c;
    cls.rects.push_back({0, 0, 127, 127});
    spec.classes.push_back(cls);
    const auto [img, labels] = generate_scene(spec, 2);

    const double n = static_cast<double>(img.size());
    // entrywise mean of Z - C ~ 0 (both noise terms are zero mean)
    FeatureVector mean{};
    for (std::size_t i = 0; i < img.size(); ++i) {
      const FeatureVector f = to_feature_vector(img[i]);
      for (std::size_t ch = 0; ch < 9; ++ch) mean[ch] += f[ch];
    }
    const FeatureVector truth = to_feature_vector(c);
    for (std::size_t ch = 0; ch < 9; ++ch) {
      mean[ch] /= n;
      // generous 5-sigma-ish bound; per-channel sd is O(C11/sqrt(looks))
      CHECK(std::abs(mean[ch] - truth[ch]) <
            5.0 * 2.0 / std::sqrt(static_cast<double>(looks) * n));
    }

    // var(Z11) = C11^2 / looks for the multiplicative model
    double var = 0.0;
    for (std::size_t i = 0; i < img.size(); ++i) {
      const double d = img[i].diag(0) - mean[0];
      var += d * d;
    }
    var /= (n - 1.0);
    const double expected = c.diag(0) * c.diag(0) / looks;
    CHECK(var > 0.9 * expected);
    CHECK(var < 1.1 * expected);
  }
}

TEST_CASE("per-pixel independence: lag-1 autocorrelation of Z11 is null") {
  SceneSpec spec = tiny_spec(128, 128, 1, 31337);
  const auto [img, labels] = generate_scene(spec, 2);
  double mean = 0.0;
  for (std::size_t i = 0; i < img.size(); ++i) mean += img[i].diag(0);
  mean /= static_cast<double>(img.size());
  double num = 0.0, den = 0.0;
  std::size_t pairs = 0;
  for (int y = 0; y < img.height(); ++y)
    for (int x = 0; x < img.width(); ++x) {
      const double d = img.at(x, y).diag(0) - mean;
      den += d * d;
      if (x + 1 < img.width()) {
        num += d * (img.at(x + 1, y).diag(0) - mean);
        ++pairs;
      }
    }
  const double r = num / den;
  const double se = 1.0 / std::sqrt(static_cast<double>(pairs));
  CHECK(std::abs(r) < 3.0 * se);
}
