#pragma once

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include "polsar/gaussian_ml.hpp"
#include "polsar/io.hpp"
#include "polsar/svm.hpp"

namespace polsar {

/// Plain-text model files, version 1. Doubles are written with %.17g so the
/// write -> read -> write cycle is byte-identical.
///
/// Common framing:
///   polsar-model 1
///   kind {gaussian|svm}
///   classes <K>
///   class <id> <name>            (K lines)
/// Gaussian payload, per class:
///   prior <v> / ridge <v> / mean <9 v> / cov <9 rows of 9 v>
/// SVM payload:
///   c <v> / gamma <v>
///   standardize-mean <9 v> / standardize-sd <9 v>
///   pairs <P>, then per pair:
///   pair <id_pos> <id_neg> nsv <n> bias <v>
///   sv <alpha_r> <9 standardized features>   (n lines)

inline std::string serialize_model(const GaussianModel& model) {
  std::ostringstream os;
  os << "polsar-model 1\nkind gaussian\nclasses " << model.classes().size()
     << "\n";
  for (const GaussianClass& g : model.classes())
    os << "class " << g.id << ' ' << g.name << "\n";
  for (const GaussianClass& g : model.classes()) {
    os << "prior " << detail::format_double(g.prior) << "\n";
    os << "ridge " << detail::format_double(g.ridge) << "\n";
    os << "mean";
    for (int c = 0; c < 9; ++c) os << ' ' << detail::format_double(g.mean(c));
    os << "\n";
    for (int r = 0; r < 9; ++r) {
      os << "cov";
      for (int c = 0; c < 9; ++c) os << ' ' << detail::format_double(g.cov(r, c));
      os << "\n";
    }
  }
  return os.str();
}

inline std::string serialize_model(const SvmMulticlassModel& model) {
  std::ostringstream os;
  os << "polsar-model 1\nkind svm\nclasses " << model.classes().size() << "\n";
  for (const ClassInfo& ci : model.classes())
    os << "class " << ci.id << ' ' << ci.name << "\n";
  const Standardization& st = model.standardization();
  double c_pen = 1.0, gamma = 1.0 / kFeatureDim;
  if (!model.pairs().empty()) {
    c_pen = model.pairs().front().c_penalty;
    gamma = model.pairs().front().gamma;
  }
  os << "c " << detail::format_double(c_pen) << "\n";
  os << "gamma " << detail::format_double(gamma) << "\n";
  os << "standardize-mean";
  for (double v : st.mean) os << ' ' << detail::format_double(v);
  os << "\nstandardize-sd";
  for (double v : st.sd) os << ' ' << detail::format_double(v);
  os << "\npairs " << model.pairs().size() << "\n";
  for (const SvmBinaryModel& m : model.pairs()) {
    os << "pair " << m.label_pos << ' ' << m.label_neg << " nsv " << m.nsv()
       << " bias " << detail::format_double(m.bias) << "\n";
    for (int i = 0; i < m.nsv(); ++i) {
      os << "sv " << detail::format_double(m.alpha_r[static_cast<std::size_t>(i)]);
      for (int c = 0; c < m.dim; ++c)
        os << ' '
           << detail::format_double(
                  m.sv[static_cast<std::size_t>(i) * static_cast<std::size_t>(m.dim) + static_cast<std::size_t>(c)]);
      os << "\n";
    }
  }
  return os.str();
}

/// Either classifier behind one prediction interface.
class AnyModel {
 public:
  explicit AnyModel(GaussianModel m) : model_(std::move(m)) {}
  explicit AnyModel(SvmMulticlassModel m) : model_(std::move(m)) {}

  bool is_gaussian() const {
    return std::holds_alternative<GaussianModel>(model_);
  }
  const GaussianModel& gaussian() const {
    return std::get<GaussianModel>(model_);
  }
  const SvmMulticlassModel& svm() const {
    return std::get<SvmMulticlassModel>(model_);
  }

  std::vector<ClassInfo> classes() const {
    if (is_gaussian()) {
      std::vector<ClassInfo> out;
      for (const GaussianClass& g : gaussian().classes())
        out.push_back({g.id, g.name});
      return out;
    }
    return svm().classes();
  }

  int predict(const FeatureVector& f) const {
    return is_gaussian() ? gaussian().predict(f) : svm().predict(f);
  }

  LabelMap predict_image(const FeatureImage& img, int threads = 1) const {
    return is_gaussian() ? gaussian().predict_image(img, threads)
                         : svm().predict_image(img, threads);
  }

  std::string serialize() const {
    return is_gaussian() ? serialize_model(gaussian())
                         : serialize_model(svm());
  }

 private:
  std::variant<GaussianModel, SvmMulticlassModel> model_;
};

namespace detail {

class LineReader {
 public:
  LineReader(std::istream& in, const std::filesystem::path& path)
      : in_(in), path_(path) {}

  /// Next non-empty line as a token stream; throws at EOF.
  std::istringstream next() {
    std::string line;
    while (std::getline(in_, line)) {
      ++lineno_;
      if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
      return std::istringstream(line);
    }
    throw ParseError(path_, "unexpected end of model file");
  }

  [[noreturn]] void fail(const std::string& msg) const {
    throw ParseError(path_, "line " + std::to_string(lineno_) + ": " + msg);
  }

  template <typename T>
  T expect(std::istringstream& ls, const std::string& what) {
    T v{};
    if (!(ls >> v)) fail("expected " + what);
    return v;
  }

  void expect_key(std::istringstream& ls, const std::string& key) {
    std::string k;
    if (!(ls >> k) || k != key) fail("expected '" + key + "'");
  }

 private:
  std::istream& in_;
  std::filesystem::path path_;
  int lineno_ = 0;
};

inline std::vector<ClassInfo> parse_class_list(LineReader& r,
                                               std::size_t count) {
  std::vector<ClassInfo> classes;
  int prev_id = 0;
  for (std::size_t k = 0; k < count; ++k) {
    auto ls = r.next();
    r.expect_key(ls, "class");
    ClassInfo ci;
    ci.id = r.expect<int>(ls, "class id");
    ci.name = r.expect<std::string>(ls, "class name");
    if (ci.id < 1 || ci.id > 255) r.fail("class id outside 1..255");
    if (ci.id <= prev_id) r.fail("class ids must be strictly ascending");
    prev_id = ci.id;
    classes.push_back(std::move(ci));
  }
  return classes;
}

}  // namespace detail

inline AnyModel parse_model(std::istream& in,
                            const std::filesystem::path& path) {
  detail::LineReader r(in, path);
  {
    auto ls = r.next();
    r.expect_key(ls, "polsar-model");
    if (r.expect<int>(ls, "format version") != 1)
      r.fail("unsupported model format version");
  }
  std::string kind;
  {
    auto ls = r.next();
    r.expect_key(ls, "kind");
    kind = r.expect<std::string>(ls, "model kind");
  }
  std::size_t nclasses = 0;
  {
    auto ls = r.next();
    r.expect_key(ls, "classes");
    nclasses = r.expect<std::size_t>(ls, "class count");
    if (nclasses == 0 || nclasses > 255) r.fail("class count outside 1..255");
  }
  std::vector<ClassInfo> classes = detail::parse_class_list(r, nclasses);

  if (kind == "gaussian") {
    std::vector<GaussianClass> gs;
    for (const ClassInfo& ci : classes) {
      GaussianClass g;
      g.id = ci.id;
      g.name = ci.name;
      {
        auto ls = r.next();
        r.expect_key(ls, "prior");
        g.prior = r.expect<double>(ls, "prior");
      }
      {
        auto ls = r.next();
        r.expect_key(ls, "ridge");
        g.ridge = r.expect<double>(ls, "ridge");
      }
      {
        auto ls = r.next();
        r.expect_key(ls, "mean");
        for (int c = 0; c < 9; ++c) g.mean(c) = r.expect<double>(ls, "mean value");
      }
      for (int row = 0; row < 9; ++row) {
        auto ls = r.next();
        r.expect_key(ls, "cov");
        for (int c = 0; c < 9; ++c)
          g.cov(row, c) = r.expect<double>(ls, "covariance value");
      }
      gs.push_back(std::move(g));
    }
    return AnyModel(GaussianModel(std::move(gs)));
  }
  if (kind != "svm") r.fail("unknown model kind '" + kind + "'");

  double c_pen = 0.0, gamma = 0.0;
  {
    auto ls = r.next();
    r.expect_key(ls, "c");
    c_pen = r.expect<double>(ls, "penalty C");
  }
  {
    auto ls = r.next();
    r.expect_key(ls, "gamma");
    gamma = r.expect<double>(ls, "gamma");
  }
  Standardization st;
  {
    auto ls = r.next();
    r.expect_key(ls, "standardize-mean");
    for (double& v : st.mean) v = r.expect<double>(ls, "mean value");
  }
  {
    auto ls = r.next();
    r.expect_key(ls, "standardize-sd");
    for (double& v : st.sd) v = r.expect<double>(ls, "sd value");
  }
  std::size_t npairs = 0;
  {
    auto ls = r.next();
    r.expect_key(ls, "pairs");
    npairs = r.expect<std::size_t>(ls, "pair count");
  }
  if (npairs != nclasses * (nclasses - 1) / 2)
    r.fail("pair count does not match class count");
  std::vector<SvmBinaryModel> pairs;
  for (std::size_t p = 0; p < npairs; ++p) {
    SvmBinaryModel m;
    m.gamma = gamma;
    m.c_penalty = c_pen;
    m.dim = kFeatureDim;
    int nsv = 0;
    {
      auto ls = r.next();
      r.expect_key(ls, "pair");
      m.label_pos = r.expect<int>(ls, "positive class id");
      m.label_neg = r.expect<int>(ls, "negative class id");
      r.expect_key(ls, "nsv");
      nsv = r.expect<int>(ls, "support vector count");
      r.expect_key(ls, "bias");
      m.bias = r.expect<double>(ls, "bias");
    }
    if (nsv < 0) r.fail("negative support vector count");
    for (int i = 0; i < nsv; ++i) {
      auto ls = r.next();
      r.expect_key(ls, "sv");
      m.alpha_r.push_back(r.expect<double>(ls, "alpha"));
      for (int c = 0; c < 9; ++c)
        m.sv.push_back(r.expect<double>(ls, "feature value"));
    }
    pairs.push_back(std::move(m));
  }
  return AnyModel(SvmMulticlassModel(st, std::move(classes), std::move(pairs)));
}

inline void write_model_file(const AnyModel& model,
                             const std::filesystem::path& path) {
  const std::string s = model.serialize();
  detail::write_file(path, s.data(), s.size());
}

inline AnyModel read_model_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError(path, "cannot open file");
  return parse_model(in, path);
}

}  // namespace polsar
