// Command-line front end: synthetic scenes, speckle filters, classifier
// training/prediction, accuracy evaluation and the method x window sweep.

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "polsar/evaluation.hpp"
#include "polsar/experiment.hpp"
#include "polsar/filters.hpp"
#include "polsar/io.hpp"
#include "polsar/model_io.hpp"
#include "polsar/scene.hpp"

namespace fs = std::filesystem;

namespace {

std::vector<int> parse_int_list(const std::string& text) {
  // "3:19:2" (inclusive range with step) or "1,2,3".
  std::vector<int> out;
  if (text.find(':') != std::string::npos) {
    int start = 0, stop = 0, step = 1;
    char c1 = 0, c2 = 0;
    std::istringstream is(text);
    if (!(is >> start >> c1 >> stop) || c1 != ':')
      throw std::invalid_argument("bad range '" + text + "'");
    if (is >> c2 >> step) {
      if (c2 != ':') throw std::invalid_argument("bad range '" + text + "'");
    }
    if (step <= 0) throw std::invalid_argument("range step must be positive");
    for (int v = start; v <= stop; v += step) out.push_back(v);
  } else {
    std::istringstream is(text);
    std::string tok;
    while (std::getline(is, tok, ','))
      if (!tok.empty()) out.push_back(std::stoi(tok));
  }
  if (out.empty()) throw std::invalid_argument("empty list '" + text + "'");
  return out;
}

polsar::RegionSet load_regions_for(const polsar::CovarianceImage& img,
                                   const fs::path& regions_path) {
  return polsar::read_regions(regions_path, img.width(), img.height());
}

void write_labels_with_header(const polsar::LabelMap& labels, double looks,
                              const fs::path& file) {
  polsar::write_labels(labels, file);
  const fs::path dir = file.parent_path().empty() ? fs::path(".")
                                                  : file.parent_path();
  if (!fs::exists(dir / "config.txt")) {
    std::ostringstream os;
    os << "Nrow " << labels.height() << "\n"
       << "Ncol " << labels.width() << "\n"
       << "Looks " << polsar::detail::format_double(looks) << "\n";
    const std::string s = os.str();
    polsar::detail::write_file(dir / "config.txt", s.data(), s.size());
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Polarimetric SAR filtering, classification and accuracy "
               "assessment toolkit"};
  app.require_subcommand(1);
  app.fallthrough();  // lets --threads appear after the subcommand name

  int threads = 0;  // 0 = hardware; results never depend on this
  app.add_option("--threads", threads, "Worker threads (0 = hardware)")
      ->capture_default_str();

  // simulate
  auto* sim = app.add_subcommand(
      "simulate", "Generate a synthetic scene from a scene spec file");
  fs::path sim_spec, sim_out;
  std::optional<std::uint64_t> sim_seed;
  sim->add_option("--spec", sim_spec, "Scene spec file")->required();
  sim->add_option("--out", sim_out, "Output scene directory")->required();
  sim->add_option("--seed", sim_seed, "Override the seed in the spec");

  // filter
  auto* flt = app.add_subcommand("filter", "Apply a speckle filter");
  std::string flt_method;
  int flt_window = 3;
  fs::path flt_in, flt_out;
  std::optional<double> flt_looks;
  flt->add_option("--method", flt_method, "boxcar | refined-lee | mbpolsar")
      ->required()
      ->check(CLI::IsMember({"boxcar", "refined-lee", "mbpolsar"}));
  flt->add_option("--window", flt_window, "Odd window side >= 3")->required();
  flt->add_option("--in", flt_in, "Input covariance directory")->required();
  flt->add_option("--out", flt_out, "Output covariance directory")->required();
  flt->add_option("--looks", flt_looks,
                  "Override the look count from config.txt");

  // train
  auto* trn = app.add_subcommand("train", "Train a classifier");
  std::string trn_kind;
  fs::path trn_in, trn_regions, trn_model;
  trn->add_option("--classifier", trn_kind, "ml | svm")
      ->required()
      ->check(CLI::IsMember({"ml", "svm"}));
  trn->add_option("--in", trn_in, "Input covariance directory")->required();
  trn->add_option("--regions", trn_regions, "Region file")->required();
  trn->add_option("--model", trn_model, "Output model file")->required();

  // classify
  auto* cls = app.add_subcommand("classify", "Predict every pixel");
  fs::path cls_model, cls_in, cls_map, cls_labels;
  cls->add_option("--model", cls_model, "Model file")->required();
  cls->add_option("--in", cls_in, "Input covariance directory")->required();
  cls->add_option("--out-map", cls_map, "Thematic map (binary PPM)")
      ->required();
  cls->add_option("--out-labels", cls_labels, "Label plane (u8 raster)")
      ->required();

  // evaluate
  auto* evl = app.add_subcommand("evaluate",
                                 "Score a label map on testing regions");
  fs::path evl_labels, evl_regions, evl_out;
  evl->add_option("--labels", evl_labels,
                  "Label plane (file with config.txt beside it, or directory)")
      ->required();
  evl->add_option("--regions", evl_regions, "Region file")->required();
  evl->add_option("--out", evl_out, "Output CSV")->required();

  // sweep
  auto* swp = app.add_subcommand(
      "sweep", "Run the method x window study and emit metrics + maps");
  fs::path swp_in, swp_regions, swp_out;
  std::string swp_methods = "1,2,3,4";
  std::string swp_windows = "3:19:2";
  bool swp_no_models = false;
  swp->add_option("--in", swp_in, "Input covariance directory")->required();
  swp->add_option("--regions", swp_regions, "Region file")->required();
  swp->add_option("--methods", swp_methods, "Methods, e.g. 1,2,3,4")
      ->capture_default_str();
  swp->add_option("--windows", swp_windows, "Windows, e.g. 3:19:2 or 3,5,7")
      ->capture_default_str();
  swp->add_option("--out", swp_out, "Output directory")->required();
  swp->add_flag("--no-models", swp_no_models, "Skip writing model files");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*sim) {
      polsar::SceneSpec spec = polsar::read_scene_spec(sim_spec);
      if (sim_seed) spec.seed = *sim_seed;
      auto [img, labels] = polsar::generate_scene(spec, threads);
      polsar::write_scene_dir(img, labels, spec, sim_out);
      std::cout << "wrote " << img.width() << "x" << img.height() << " scene ("
                << spec.classes.size() << " classes, " << spec.looks
                << " looks) to " << sim_out.string() << "\n";
    } else if (*flt) {
      const polsar::CovarianceImage img = polsar::read_covariance_dir(flt_in);
      polsar::CovarianceImage out =
          flt_method == "boxcar"
              ? polsar::boxcar_filter(img, flt_window, threads)
              : flt_method == "refined-lee"
                    ? polsar::refined_lee(img, flt_window, flt_looks, threads)
                    : polsar::mbpolsar_filter(img, flt_window, flt_looks,
                                              threads);
      polsar::write_covariance_dir(out, flt_out);
      std::cout << "wrote filtered image (" << flt_method << ", w="
                << flt_window << ") to " << flt_out.string() << "\n";
    } else if (*trn) {
      const polsar::CovarianceImage img = polsar::read_covariance_dir(trn_in);
      const polsar::RegionSet regions = load_regions_for(img, trn_regions);
      const polsar::FeatureImage feats = polsar::to_features(img);
      polsar::AnyModel model =
          trn_kind == "svm"
              ? polsar::AnyModel(polsar::SvmMulticlassModel::fit(feats, regions))
              : polsar::AnyModel(polsar::GaussianModel::fit(feats, regions));
      polsar::write_model_file(model, trn_model);
      std::cout << "trained " << trn_kind << " model on "
                << regions.classes().size() << " classes -> "
                << trn_model.string() << "\n";
    } else if (*cls) {
      const polsar::AnyModel model = polsar::read_model_file(cls_model);
      const polsar::CovarianceImage img = polsar::read_covariance_dir(cls_in);
      const polsar::FeatureImage feats = polsar::to_features(img);
      const polsar::LabelMap labels = model.predict_image(feats, threads);
      polsar::render_map(labels, polsar::default_palette(model.classes()),
                         cls_map);
      write_labels_with_header(labels, img.looks(), cls_labels);
      std::cout << "classified " << labels.width() << "x" << labels.height()
                << " pixels -> " << cls_map.string() << ", "
                << cls_labels.string() << "\n";
    } else if (*evl) {
      const polsar::LabelMap labels = polsar::read_labels_auto(evl_labels);
      const polsar::RegionSet regions =
          polsar::read_regions(evl_regions, labels.width(), labels.height());
      const polsar::ConfusionMatrix cm = polsar::confusion(labels, regions);
      polsar::CellMetrics m;
      m.overall = polsar::overall_accuracy(cm);
      m.kappa = polsar::kappa_stat(cm);
      m.ca = polsar::per_class_accuracy(cm);
      m.ua = polsar::user_accuracy(cm);
      // Single-row CSV without the method/window columns.
      std::ostringstream os;
      os << "F,kappa";
      for (const auto& ci : cm.classes()) os << ",CA_" << ci.name;
      for (const auto& ci : cm.classes()) os << ",UA_" << ci.name;
      os << "\n" << polsar::detail::format_metric(m.overall) << ','
         << polsar::detail::format_metric(m.kappa.value);
      for (const auto& v : m.ca) os << ',' << polsar::detail::format_metric(v);
      for (const auto& v : m.ua) os << ',' << polsar::detail::format_metric(v);
      os << "\n";
      const std::string s = os.str();
      polsar::detail::write_file(evl_out, s.data(), s.size());
      std::cout << "F=" << polsar::detail::format_metric(m.overall)
                << " kappa=" << polsar::detail::format_metric(m.kappa.value)
                << " -> " << evl_out.string() << "\n";
    } else if (*swp) {
      const polsar::CovarianceImage img = polsar::read_covariance_dir(swp_in);
      const polsar::RegionSet regions = load_regions_for(img, swp_regions);
      polsar::SweepOptions opt;
      opt.methods = parse_int_list(swp_methods);
      opt.windows = parse_int_list(swp_windows);
      opt.threads = threads;
      opt.write_models = !swp_no_models;
      const polsar::SweepResult res = polsar::sweep(img, regions, swp_out, opt);
      std::cout << res.cells.size() << " cells -> "
                << (swp_out / "metrics.csv").string() << "\n";
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
