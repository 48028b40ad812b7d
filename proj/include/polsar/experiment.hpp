#pragma once

#include <cstdio>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "polsar/evaluation.hpp"
#include "polsar/filters.hpp"
#include "polsar/model_io.hpp"
#include "polsar/raster.hpp"
#include "polsar/regions.hpp"

namespace polsar {

/// The four filter x classifier methods:
///   1 = Local-Mean chain + ML     2 = MBPolSAR + ML
///   3 = Local-Mean chain + SVM    4 = MBPolSAR + SVM
/// The Local-Mean chain is a 3x3 refined Lee pass (run once per input)
/// followed by the w x w boxcar.
inline void check_method(int method) {
  if (method < 1 || method > 4)
    throw std::invalid_argument("method must be 1..4, got " +
                                std::to_string(method));
}
inline bool method_uses_mbpolsar(int method) {
  return method == 2 || method == 4;
}
inline bool method_uses_svm(int method) { return method == 3 || method == 4; }
inline const char* method_name(int method) {
  switch (method) {
    case 1: return "LM+ML";
    case 2: return "MBPolSAR+ML";
    case 3: return "LM+SVM";
    default: return "MBPolSAR+SVM";
  }
}

/// Class id -> RGB; class 0 renders black. Colors must be pairwise distinct.
struct Palette {
  std::map<int, std::array<std::uint8_t, 3>> colors;

  void validate() const {
    std::set<std::array<std::uint8_t, 3>> seen;
    for (const auto& [id, rgb] : colors) {
      if (!seen.insert(rgb).second)
        throw ValidationError("palette assigns the same color to two classes");
    }
    const auto it = colors.find(0);
    if (it != colors.end() && it->second != std::array<std::uint8_t, 3>{0, 0, 0})
      throw ValidationError("palette must map class 0 to black");
  }
};

/// Paper-legend defaults for the first five classes (yellow, blue, red,
/// green, cyan), then evenly spread hues for any further ids.
inline Palette default_palette(const std::vector<ClassInfo>& classes) {
  static const std::array<std::uint8_t, 3> base[5] = {{255, 255, 0},
                                                      {0, 0, 255},
                                                      {255, 0, 0},
                                                      {0, 255, 0},
                                                      {0, 255, 255}};
  Palette p;
  p.colors[0] = {0, 0, 0};
  std::size_t k = 0;
  for (const ClassInfo& ci : classes) {
    if (k < 5) {
      p.colors[ci.id] = base[k];
    } else {
      // Golden-angle hue walk, full saturation/value.
      const double hue = std::fmod(0.618033988749895 * static_cast<double>(k - 4), 1.0) * 6.0;
      const int sector = static_cast<int>(hue);
      const double f = hue - sector;
      const auto ch = [](double v) {
        return static_cast<std::uint8_t>(55.0 + 200.0 * v);
      };
      std::array<std::uint8_t, 3> rgb{};
      switch (sector % 6) {
        case 0: rgb = {255, ch(f), 55}; break;
        case 1: rgb = {ch(1 - f), 255, 55}; break;
        case 2: rgb = {55, 255, ch(f)}; break;
        case 3: rgb = {55, ch(1 - f), 255}; break;
        case 4: rgb = {ch(f), 55, 255}; break;
        default: rgb = {255, 55, ch(1 - f)}; break;
      }
      p.colors[ci.id] = rgb;
    }
    ++k;
  }
  p.validate();
  return p;
}

/// Serialize a thematic map as binary PPM (P6, 8-bit). Byte-deterministic.
inline std::string render_map_ppm(const LabelMap& labels, const Palette& palette) {
  palette.validate();
  std::ostringstream os;
  os << "P6\n" << labels.width() << ' ' << labels.height() << "\n255\n";
  std::string body;
  body.reserve(labels.size() * 3);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const int id = labels[i];
    const auto it = palette.colors.find(id);
    if (it == palette.colors.end())
      throw ValidationError("palette has no color for class " +
                            std::to_string(id));
    body.push_back(static_cast<char>(it->second[0]));
    body.push_back(static_cast<char>(it->second[1]));
    body.push_back(static_cast<char>(it->second[2]));
  }
  return os.str() + body;
}

inline void render_map(const LabelMap& labels, const Palette& palette,
                       const std::filesystem::path& file) {
  const std::string s = render_map_ppm(labels, palette);
  detail::write_file(file, s.data(), s.size());
}

/// Filtered feature images shared between methods with the same filter
/// column (1/3 and 2/4), keyed by (mbpolsar?, window).
class FilterCache {
 public:
  FilterCache(const CovarianceImage& input, int threads = 1)
      : input_(input), threads_(threads) {}

  const FeatureImage& features(bool mbpolsar_chain, int window) {
    const auto key = std::make_pair(mbpolsar_chain ? 1 : 0, window);
    auto it = cache_.find(key);
    if (it != cache_.end()) return it->second;
    FeatureImage f = mbpolsar_chain
                         ? to_features(mbpolsar_filter(input_, window,
                                                       std::nullopt, threads_))
                         : to_features(boxcar_filter(lee_prefiltered(), window,
                                                     threads_));
    return cache_.emplace(key, std::move(f)).first->second;
  }

  const CovarianceImage& lee_prefiltered() {
    if (!refined_) refined_ = refined_lee(input_, 3, std::nullopt, threads_);
    return *refined_;
  }

 private:
  const CovarianceImage& input_;
  int threads_;
  std::optional<CovarianceImage> refined_;
  std::map<std::pair<int, int>, FeatureImage> cache_;
};

struct CellMetrics {
  int method = 0;
  int window = 0;
  double overall = 0.0;
  KappaResult kappa;
  std::vector<std::optional<double>> ca;
  std::vector<std::optional<double>> ua;
};

struct MethodRun {
  LabelMap labels;
  ConfusionMatrix matrix;
  CellMetrics metrics;
  std::string model_text;
};

/// One cell of the study: filter per the method's column, extract the nine
/// channels, train on the training regions, predict every pixel, score on
/// the testing regions. Deterministic for fixed inputs at any thread count.
inline MethodRun run_method(const CovarianceImage& input,
                            const RegionSet& regions, int method, int window,
                            int threads = 1, FilterCache* cache = nullptr) {
  check_method(method);
  check_window(window);
  if (regions.empty())
    throw std::invalid_argument("run_method: empty region set");
  try {
    FilterCache local(input, threads);
    FilterCache& fc = cache ? *cache : local;
    const FeatureImage& feats =
        fc.features(method_uses_mbpolsar(method), window);

    AnyModel model =
        method_uses_svm(method)
            ? AnyModel(SvmMulticlassModel::fit(feats, regions))
            : AnyModel(GaussianModel::fit(feats, regions));
    LabelMap labels = model.predict_image(feats, threads);
    ConfusionMatrix cm = confusion(labels, regions);

    CellMetrics metrics;
    metrics.method = method;
    metrics.window = window;
    metrics.overall = overall_accuracy(cm);
    metrics.kappa = kappa_stat(cm);
    metrics.ca = per_class_accuracy(cm);
    metrics.ua = user_accuracy(cm);
    return MethodRun{std::move(labels), std::move(cm), std::move(metrics),
                     model.serialize()};
  } catch (const std::exception& e) {
    throw std::runtime_error("method " + std::to_string(method) + " (" +
                             method_name(method) + "), window " +
                             std::to_string(window) + ": " + e.what());
  }
}

namespace detail {

inline std::string format_metric(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.6f", v);
  return buf;
}

inline std::string format_metric(const std::optional<double>& v) {
  return v ? format_metric(*v) : "nan";
}

}  // namespace detail

/// CSV header + rows for a set of cells; one row per (method, window).
inline std::string metrics_csv(const std::vector<CellMetrics>& cells,
                               const std::vector<ClassInfo>& classes) {
  std::ostringstream os;
  os << "method,window,F,kappa";
  for (const ClassInfo& ci : classes) os << ",CA_" << ci.name;
  for (const ClassInfo& ci : classes) os << ",UA_" << ci.name;
  os << "\n";
  for (const CellMetrics& c : cells) {
    os << c.method << ',' << c.window << ','
       << detail::format_metric(c.overall) << ','
       << detail::format_metric(c.kappa.value);
    for (const auto& v : c.ca) os << ',' << detail::format_metric(v);
    for (const auto& v : c.ua) os << ',' << detail::format_metric(v);
    os << "\n";
  }
  return os.str();
}

struct SweepOptions {
  std::vector<int> methods{1, 2, 3, 4};
  std::vector<int> windows{3, 5, 7, 9, 11, 13, 15, 17, 19};
  int threads = 1;
  bool write_models = true;
};

struct SweepResult {
  std::vector<CellMetrics> cells;
  std::string csv;
};

/// Run the method x window grid, writing metrics.csv plus one thematic map
/// (and optionally one model file) per cell into out_dir. Cells run in a
/// fixed order and filtered features are shared per filter column, so method
/// pairs {1,3} and {2,4} see bit-identical inputs.
inline SweepResult sweep(const CovarianceImage& input, const RegionSet& regions,
                         const std::filesystem::path& out_dir,
                         const SweepOptions& opt = {}) {
  if (opt.methods.empty() || opt.windows.empty())
    throw std::invalid_argument("sweep: empty method or window list");
  for (int m : opt.methods) check_method(m);
  for (int w : opt.windows) check_window(w);
  std::filesystem::create_directories(out_dir);

  const Palette palette = default_palette(regions.classes());
  FilterCache cache(input, opt.threads);
  SweepResult result;
  for (int method : opt.methods) {
    for (int window : opt.windows) {
      MethodRun run =
          run_method(input, regions, method, window, opt.threads, &cache);
      const std::string stem =
          "m" + std::to_string(method) + "_w" + std::to_string(window);
      render_map(run.labels, palette, out_dir / ("map_" + stem + ".ppm"));
      if (opt.write_models) {
        const std::string& text = run.model_text;
        detail::write_file(out_dir / ("model_" + stem + ".txt"), text.data(),
                           text.size());
      }
      result.cells.push_back(std::move(run.metrics));
    }
  }
  result.csv = metrics_csv(result.cells, regions.classes());
  detail::write_file(out_dir / "metrics.csv", result.csv.data(),
                     result.csv.size());
  return result;
}

}  // namespace polsar
