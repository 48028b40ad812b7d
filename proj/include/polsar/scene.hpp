#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Cholesky>

#include "polsar/io.hpp"
#include "polsar/parallel.hpp"
#include "polsar/raster.hpp"
#include "polsar/regions.hpp"
#include "polsar/rng.hpp"

namespace polsar {

/// One draw from the zero-mean circular complex Gaussian with covariance C:
/// s = L g with C = L L* and g i.i.d. standard circular complex Gaussian.
/// Requires C strictly positive definite.
inline ScatteringVector sample_scattering(const Eigen::Matrix3cd& chol_lower,
                                          CounterRng& rng) {
  const cdouble g0 = rng.next_circular_gaussian();
  const cdouble g1 = rng.next_circular_gaussian();
  const cdouble g2 = rng.next_circular_gaussian();
  ScatteringVector s;
  s.hh = chol_lower(0, 0) * g0;
  s.hv = chol_lower(1, 0) * g0 + chol_lower(1, 1) * g1;
  s.vv = chol_lower(2, 0) * g0 + chol_lower(2, 1) * g1 + chol_lower(2, 2) * g2;
  return s;
}

/// Lower Cholesky factor of a strictly PD covariance; throws otherwise.
inline Eigen::Matrix3cd cholesky_factor(const CovarianceMatrix& c) {
  Eigen::LLT<Eigen::Matrix3cd> llt(c.to_eigen());
  if (llt.info() != Eigen::Success)
    throw std::invalid_argument(
        "covariance matrix is not strictly positive definite");
  return llt.matrixL();
}

inline ScatteringVector sample_scattering(const CovarianceMatrix& c,
                                          CounterRng& rng) {
  const Eigen::Matrix3cd chol = cholesky_factor(c);
  return sample_scattering(chol, rng);
}

struct SceneClass {
  int id = 0;
  std::string name;
  CovarianceMatrix truth;
  std::vector<Rect> rects;
};

/// Synthetic scene description: raster size, integer look count, seed and a
/// set of classes with ground-truth covariances and rectangular layouts.
struct SceneSpec {
  int width = 0;
  int height = 0;
  int looks = 1;
  std::uint64_t seed = 0;
  std::vector<SceneClass> classes;

  void validate() const {
    detail::check_dims(width, height);
    if (looks < 1) throw ValidationError("scene looks must be >= 1");
    std::set<int> ids;
    for (const SceneClass& c : classes) {
      if (c.id < 1 || c.id > 255)
        throw ValidationError("scene class id " + std::to_string(c.id) +
                              " outside 1..255");
      if (!ids.insert(c.id).second)
        throw ValidationError("duplicate scene class id " +
                              std::to_string(c.id));
      if (c.name.empty())
        throw ValidationError("scene class " + std::to_string(c.id) +
                              " has no name");
      cholesky_factor(c.truth);  // PD check
      for (const Rect& r : c.rects)
        if (r.x0 < 0 || r.y0 < 0 || r.x0 > r.x1 || r.y0 > r.y1 ||
            r.x1 >= width || r.y1 >= height)
          throw ValidationError("scene class " + std::to_string(c.id) +
                                ": rectangle out of bounds");
    }
    for (std::size_t i = 0; i < classes.size(); ++i)
      for (std::size_t j = i + 1; j < classes.size(); ++j)
        for (const Rect& a : classes[i].rects)
          for (const Rect& b : classes[j].rects)
            if (a.intersects(b))
              throw ValidationError(
                  "scene classes " + std::to_string(classes[i].id) + " and " +
                  std::to_string(classes[j].id) + " overlap");
  }

  std::string serialize() const {
    std::ostringstream os;
    os << "width " << width << "\n"
       << "height " << height << "\n"
       << "looks " << looks << "\n"
       << "seed " << seed << "\n";
    for (const SceneClass& c : classes) {
      os << "class " << c.id << ' ' << c.name << "\n";
      const FeatureVector f = to_feature_vector(c.truth);
      os << "C";
      for (double v : f) os << ' ' << detail::format_double(v);
      os << "\n";
      for (const Rect& r : c.rects)
        os << "rect " << r.x0 << ' ' << r.y0 << ' ' << r.x1 << ' ' << r.y1
           << "\n";
    }
    return os.str();
  }

  static SceneSpec parse(std::istream& in, const std::filesystem::path& path) {
    SceneSpec spec;
    std::string line;
    int lineno = 0;
    bool have_class = false;
    auto fail = [&](const std::string& msg) -> void {
      throw ParseError(path, "line " + std::to_string(lineno) + ": " + msg);
    };
    while (std::getline(in, line)) {
      ++lineno;
      const std::size_t hash = line.find('#');
      if (hash != std::string::npos) line.erase(hash);
      std::istringstream ls(line);
      std::string key;
      if (!(ls >> key)) continue;
      if (key == "width") { if (!(ls >> spec.width)) fail("bad width"); }
      else if (key == "height") { if (!(ls >> spec.height)) fail("bad height"); }
      else if (key == "looks") { if (!(ls >> spec.looks)) fail("bad looks"); }
      else if (key == "seed") { if (!(ls >> spec.seed)) fail("bad seed"); }
      else if (key == "class") {
        SceneClass c;
        if (!(ls >> c.id >> c.name)) fail("expected: class <id> <name>");
        spec.classes.push_back(std::move(c));
        have_class = true;
      } else if (key == "C") {
        if (!have_class) fail("C line before any class");
        FeatureVector f{};
        for (double& v : f)
          if (!(ls >> v)) fail("expected 9 real numbers after C");
        spec.classes.back().truth = from_feature_vector(f);
      } else if (key == "rect") {
        if (!have_class) fail("rect line before any class");
        Rect r;
        if (!(ls >> r.x0 >> r.y0 >> r.x1 >> r.y1))
          fail("expected: rect <x0> <y0> <x1> <y1>");
        spec.classes.back().rects.push_back(r);
      } else {
        fail("unrecognized key '" + key + "'");
      }
    }
    spec.validate();
    return spec;
  }
};

inline SceneSpec read_scene_spec(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError(path, "cannot open file");
  return SceneSpec::parse(in, path);
}

/// Generate the scene: each pixel of class k is the n-look covariance
/// estimate of independent draws from C_k; uncovered pixels keep label 0 and
/// a zero matrix. Per-pixel counter RNG streams make the output a pure
/// function of (spec, seed), independent of the worker count.
inline std::pair<CovarianceImage, LabelMap> generate_scene(
    const SceneSpec& spec, int threads = 1) {
  spec.validate();
  LabelMap labels(spec.width, spec.height);
  std::vector<int> class_of_pixel(labels.size(), -1);
  std::vector<Eigen::Matrix3cd> chol;
  chol.reserve(spec.classes.size());
  for (std::size_t k = 0; k < spec.classes.size(); ++k) {
    chol.push_back(cholesky_factor(spec.classes[k].truth));
    for (const Rect& r : spec.classes[k].rects)
      for (int y = r.y0; y <= r.y1; ++y)
        for (int x = r.x0; x <= r.x1; ++x) {
          labels.set(x, y, spec.classes[k].id);
          class_of_pixel[labels.index(x, y)] = static_cast<int>(k);
        }
  }

  CovarianceImage img(spec.width, spec.height,
                      static_cast<double>(spec.looks));
  const double inv_n = 1.0 / static_cast<double>(spec.looks);
  parallel_for(img.size(), threads, [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      const int k = class_of_pixel[i];
      if (k < 0) continue;  // unlabeled: zero matrix
      const int x = static_cast<int>(i % static_cast<std::size_t>(spec.width));
      const int y = static_cast<int>(i / static_cast<std::size_t>(spec.width));
      CounterRng rng = CounterRng::for_pixel(spec.seed, x, y);
      CovarianceMatrix acc;
      for (int look = 0; look < spec.looks; ++look) {
        const ScatteringVector s =
            sample_scattering(chol[static_cast<std::size_t>(k)], rng);
        acc += CovarianceMatrix::outer(s);
      }
      acc *= inv_n;
      img[i] = acc;
    }
  });
  return {std::move(img), std::move(labels)};
}

/// Write a generated scene as a covariance directory plus labels.bin and the
/// spec that produced it.
inline void write_scene_dir(const CovarianceImage& img, const LabelMap& labels,
                            const SceneSpec& spec,
                            const std::filesystem::path& dir) {
  write_covariance_dir(img, dir);
  write_labels(labels, dir / "labels.bin");
  const std::string s = spec.serialize();
  detail::write_file(dir / "scene.spec", s.data(), s.size());
}

namespace detail {

inline CovarianceMatrix make_truth(double p_hh, double p_hv, double p_vv,
                                   cdouble rho_hhvv, cdouble rho_hhhv,
                                   cdouble rho_hvvv) {
  CovarianceMatrix c = CovarianceMatrix::diagonal(p_hh, p_hv, p_vv);
  c.set_off(0, 2, rho_hhvv * std::sqrt(p_hh * p_vv));
  c.set_off(0, 1, rho_hhhv * std::sqrt(p_hh * p_hv));
  c.set_off(1, 2, rho_hvvv * std::sqrt(p_hv * p_vv));
  return c;
}

}  // namespace detail

/// Desk-scale default: 128x128, 4 looks, five classes in horizontal bands.
/// Class covariances are deliberately close (power ratios ~1.2-1.4 and
/// moderate coherence differences) so single-window classification is
/// imperfect and filtering has measurable headroom.
inline SceneSpec default_scene_spec(std::uint64_t seed = 20240819u) {
  using std::polar;
  SceneSpec spec;
  spec.width = 128;
  spec.height = 128;
  spec.looks = 4;
  spec.seed = seed;
  const int tops[6] = {0, 26, 52, 78, 103, 128};
  const char* names[5] = {"grass", "sea", "urban", "vegetation", "water"};
  CovarianceMatrix truth[5] = {
      detail::make_truth(1.00, 0.25, 0.80, polar(0.35, 0.40),
                         polar(0.10, 0.2), polar(0.08, -0.1)),
      detail::make_truth(1.18, 0.21, 0.82, polar(0.48, 0.55),
                         polar(0.08, 0.1), polar(0.06, 0.0)),
      detail::make_truth(1.42, 0.28, 0.94, polar(0.42, -1.3),
                         polar(0.15, 0.4), polar(0.09, 0.3)),
      detail::make_truth(0.99, 0.30, 0.77, polar(0.28, 0.25),
                         polar(0.11, -0.2), polar(0.09, 0.1)),
      detail::make_truth(0.99, 0.16, 0.70, polar(0.44, 0.80),
                         polar(0.07, 0.1), polar(0.05, -0.1))};
  for (int k = 0; k < 5; ++k) {
    SceneClass c;
    c.id = k + 1;
    c.name = names[k];
    c.truth = truth[k];
    c.rects.push_back({0, tops[k], 127, tops[k + 1] - 1});
    spec.classes.push_back(std::move(c));
  }
  return spec;
}

/// Training/testing ROIs matching default_scene_spec: per class band, an
/// 8-row training block on the left and a wider testing block on the right,
/// both inset 4 pixels from every band edge so windows up to 9x9 stay inside
/// their own class.
inline RegionSet default_regions() {
  const SceneSpec spec = default_scene_spec();
  std::vector<RegionEntry> entries;
  const int tops[6] = {0, 26, 52, 78, 103, 128};
  for (int k = 0; k < 5; ++k) {
    const int top = tops[k];
    const int bottom = tops[k + 1] - 1;
    RegionEntry train;
    train.role = RegionRole::train;
    train.class_id = spec.classes[static_cast<std::size_t>(k)].id;
    train.class_name = spec.classes[static_cast<std::size_t>(k)].name;
    train.rect = {4, top + 4, 35, top + 11};
    RegionEntry test = train;
    test.role = RegionRole::test;
    test.rect = {68, top + 4, 123, bottom - 4};
    entries.push_back(train);
    entries.push_back(test);
  }
  return RegionSet(std::move(entries), spec.width, spec.height);
}

}  // namespace polsar
