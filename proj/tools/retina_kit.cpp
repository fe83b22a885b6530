// retina-kit: exudate detection, classification, grading and evaluation
// for color fundus images.

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "retina/retina.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitIo = 2;
constexpr int kExitPipeline = 3;

retina::PipelineConfig load_config_or_default(const std::string& path) {
  if (path.empty()) return retina::PipelineConfig{};
  return retina::load_config(path);
}

bool parse_point(const std::string& s, double& x, double& y) {
  const auto comma = s.find(',');
  if (comma == std::string::npos) return false;
  try {
    x = std::stod(s.substr(0, comma));
    y = std::stod(s.substr(comma + 1));
  } catch (...) {
    return false;
  }
  return true;
}

std::string hash_sidecar_path(const std::string& out) { return out + ".hash"; }

bool outputs_up_to_date(const std::string& out_path, uint64_t hash) {
  if (!fs::exists(out_path)) return false;
  std::ifstream f(hash_sidecar_path(out_path));
  if (!f) return false;
  uint64_t stored = 0;
  f >> stored;
  return f.good() && stored == hash;
}

void write_hash_sidecar(const std::string& out_path, uint64_t hash) {
  std::ofstream f(hash_sidecar_path(out_path), std::ios::trunc);
  f << hash << "\n";
}

json region_to_json(const retina::Region& r) {
  json j;
  j["area"] = r.area;
  j["centroid"] = {r.centroid_x, r.centroid_y};
  j["bbox"] = {r.bbox_x0, r.bbox_y0, r.bbox_x1, r.bbox_y1};
  j["solidity"] = retina::solidity(r);
  j["circularity"] = retina::circularity(r);
  return j;
}

int cmd_detect(const std::string& image_path, const std::string& config_path,
               const std::string& out_mask, const std::string& out_overlay,
               const std::string& dump_dir, const std::string& from_dmap) {
  const auto cfg = load_config_or_default(config_path);
  const auto input_bytes = retina::detail::read_file_bytes(image_path);
  const uint64_t hash = retina::content_hash(input_bytes, cfg);
  if (!out_mask.empty() && from_dmap.empty() && outputs_up_to_date(out_mask, hash)) {
    retina::log_info("detect: output up to date, skipping " + image_path);
    return kExitOk;
  }

  const retina::RasterImage original = retina::load_image(image_path);
  retina::DetectionResult det;
  if (!from_dmap.empty()) {
    const retina::RasterImage working = retina::resize_for_processing(original);
    const retina::InterestMap dmap = retina::load_npy(from_dmap);
    if (dmap.width != working.width || dmap.height != working.height)
      throw retina::ArgumentError("resume dmap dimensions do not match the working image");
    det = retina::detect_from_dmap(working, dmap, cfg, original.width, original.height);
  } else {
    det = retina::detect_exudates(original, cfg);
  }

  if (!out_mask.empty()) {
    retina::save_mask(det.mask_fullres, out_mask);
    write_hash_sidecar(out_mask, hash);
  }
  if (!out_overlay.empty()) {
    retina::RasterImage overlay = original;
    const double red[3] = {1.0, 0.1, 0.1};
    retina::detail::draw_outline(overlay, det.mask_fullres, red);
    retina::save_image(overlay, out_overlay);
  }
  if (!dump_dir.empty()) {
    fs::create_directories(dump_dir);
    const std::string stem = fs::path(image_path).stem().string();
    retina::save_npy(det.dmap, (fs::path(dump_dir) / (stem + "_dmap.npy")).string());
    retina::save_npy(det.enhanced, (fs::path(dump_dir) / (stem + "_enhanced.npy")).string());
    retina::save_mask(det.binarized, (fs::path(dump_dir) / (stem + "_binarized.png")).string());
    retina::save_mask(det.opened, (fs::path(dump_dir) / (stem + "_opened.png")).string());
    // Viewable rendering of the decision map alongside the lossless dump.
    retina::RasterImage view(det.dmap.width, det.dmap.height, 1, retina::ColorSpace::Gray);
    const double peak = std::max(det.dmap.max_value(), 1e-12);
    for (size_t i = 0; i < view.data.size(); ++i) view.data[i] = det.dmap.values[i] / peak;
    retina::save_image(view, (fs::path(dump_dir) / (stem + "_dmap.png")).string(), 16);
  }

  json summary;
  summary["image"] = image_path;
  summary["working_size"] = {det.working_rgb.width, det.working_rgb.height};
  summary["components"] = det.regions.size();
  summary["candidates"] = det.candidates.size();
  summary["positive_pixels"] = det.mask_fullres.count();
  std::cout << summary.dump(2) << "\n";
  return kExitOk;
}

int cmd_classify(const std::string& image_path, const std::string& model_path,
                 const std::string& config_path, const std::string& out_json) {
  const auto cfg = load_config_or_default(config_path);
  const retina::SvmModel model = retina::load_model(model_path);
  const retina::RasterImage original = retina::load_image(image_path);
  const retina::DetectionResult det = retina::detect_exudates(original, cfg);

  json out;
  out["image"] = image_path;
  out["regions"] = json::array();
  for (const auto& r : det.candidates) {
    const retina::FeatureVector fv =
        retina::extract_features(r, det.working_rgb, det.working_lab);
    const retina::PredictResult pr = retina::predict(model, fv);
    json jr = region_to_json(r);
    jr["class"] = retina::lesion_class_name(pr.cls);
    jr["votes"] = pr.votes;
    jr["features"] = fv;
    out["regions"].push_back(std::move(jr));
  }
  if (out_json.empty()) {
    std::cout << out.dump(2) << "\n";
  } else {
    std::ofstream f(out_json, std::ios::trunc);
    if (!f) throw retina::IoError("cannot write: " + out_json);
    f << out.dump(2) << "\n";
  }
  return kExitOk;
}

int cmd_train(const std::string& manifest_path, const std::string& config_path,
              const std::string& out_model, uint64_t seed, bool grid, int jobs) {
  const auto cfg = load_config_or_default(config_path);
  const auto entries = retina::load_manifest(manifest_path);

  std::vector<std::vector<retina::LabeledSample>> per_entry(entries.size());
  std::vector<std::string> errors(entries.size());
  retina::detail::run_parallel(entries.size(), jobs, [&](size_t i) {
    const auto& e = entries[i];
    try {
      const retina::RasterImage original = retina::load_image(e.image);
      const retina::DetectionResult det = retina::detect_exudates(original, cfg);
      retina::BinaryMask hard, soft;
      if (!e.hard_mask.empty())
        hard = retina::resize_mask_nearest(retina::load_mask(e.hard_mask),
                                           det.mask_working.width, det.mask_working.height);
      if (!e.soft_mask.empty())
        soft = retina::resize_mask_nearest(retina::load_mask(e.soft_mask),
                                           det.mask_working.width, det.mask_working.height);
      for (const auto& r : det.candidates) {
        const retina::FeatureVector fv =
            retina::extract_features(r, det.working_rgb, det.working_lab);
        const retina::LesionClass cls = retina::label_region(
            r, e.hard_mask.empty() ? nullptr : &hard, e.soft_mask.empty() ? nullptr : &soft);
        per_entry[i].emplace_back(fv, cls);
      }
    } catch (const std::exception& ex) {
      errors[i] = ex.what();
    }
  });

  std::vector<retina::LabeledSample> samples;
  for (size_t i = 0; i < entries.size(); ++i) {
    if (!errors[i].empty())
      retina::log_warn("train: skipping " + entries[i].image + ": " + errors[i]);
    samples.insert(samples.end(), per_entry[i].begin(), per_entry[i].end());
  }
  if (samples.empty()) throw retina::ArgumentError("train: no labeled regions produced");

  retina::SvmHyperParams hp{cfg.classifier.C, cfg.classifier.gamma};
  retina::CrossValResult cv;
  if (grid) {
    std::vector<double> Cs, gammas;
    for (int e = -1; e <= 3; ++e) Cs.push_back(std::pow(10.0, e));
    for (int e = -6; e <= 2; ++e) gammas.push_back(std::pow(2.0, e));
    hp = retina::grid_search(samples, Cs, gammas, cfg.classifier.folds, seed, &cv);
  } else {
    cv = retina::cross_validate(samples, hp, cfg.classifier.folds, seed);
  }
  const retina::SvmModel model = retina::train(samples, hp, seed);
  retina::save_model(model, out_model);

  json report;
  report["samples"] = samples.size();
  report["C"] = hp.C;
  report["gamma"] = hp.gamma;
  report["cv_mean_accuracy"] = cv.mean_accuracy;
  report["cv_std_accuracy"] = cv.std_accuracy;
  report["cv_class_mean"] = cv.class_mean;
  std::cout << report.dump(2) << "\n";
  std::ofstream f(out_model + ".cv.json", std::ios::trunc);
  if (f) f << report.dump(2) << "\n";
  return kExitOk;
}

int cmd_grade(const std::string& image_path, const std::string& model_path,
              const std::string& fovea_arg, const std::string& od_arg,
              const std::string& config_path) {
  const auto cfg = load_config_or_default(config_path);
  retina::RetinalLandmarks lm;
  if (!parse_point(fovea_arg, lm.fovea_x, lm.fovea_y) ||
      !parse_point(od_arg, lm.od_x, lm.od_y))
    throw retina::ArgumentError("grade: --fovea and --od must be 'x,y'");

  const retina::RasterImage original = retina::load_image(image_path);
  lm.image_width = original.width;
  lm.image_height = original.height;
  const retina::DetectionResult det = retina::detect_exudates(original, cfg);

  retina::BinaryMask exudates = det.mask_fullres;
  if (!model_path.empty()) {
    // With a classifier, predicted outliers are dropped before grading.
    const retina::SvmModel model = retina::load_model(model_path);
    retina::BinaryMask kept(det.mask_working.width, det.mask_working.height);
    for (const auto& r : det.candidates) {
      const retina::FeatureVector fv =
          retina::extract_features(r, det.working_rgb, det.working_lab);
      if (retina::predict(model, fv).cls == retina::LesionClass::Outlier) continue;
      for (const auto& [x, y] : r.pixels) kept.set(x, y, true);
    }
    exudates = retina::resize_mask_nearest(kept, original.width, original.height);
  }

  const retina::SeverityGrade g = retina::grade_combined(exudates, lm);
  json out;
  out["image"] = image_path;
  out["grade"] = retina::severity_name(g.grade);
  out["fovea"] = {{"grade", retina::severity_name(g.fovea.grade)},
                  {"band_counts", g.fovea.counts}};
  out["optic_disc"] = {{"grade", retina::severity_name(g.optic_disc.grade)},
                       {"band_counts", g.optic_disc.counts}};
  std::cout << out.dump(2) << "\n";
  return kExitOk;
}

int cmd_eval(const std::string& manifest_path, const std::string& config_path, bool sweep,
             bool score_roc, const std::string& out_report, const std::string& model_path,
             const std::string& overlay_dir, int jobs) {
  const auto cfg = load_config_or_default(config_path);
  retina::SvmModel model;
  retina::EvalOptions opts;
  opts.jobs = jobs;
  opts.sweep = sweep;
  opts.score_roc = score_roc;
  opts.out_dir = overlay_dir;
  if (!overlay_dir.empty()) fs::create_directories(overlay_dir);
  if (!model_path.empty()) {
    model = retina::load_model(model_path);
    opts.model = &model;
  }

  const retina::EvalReport report = retina::evaluate_dataset(manifest_path, cfg, opts);
  if (!out_report.empty()) {
    retina::write_report_json(report, out_report + ".json");
    retina::write_report_csv(report, out_report + ".csv");
  }

  json summary;
  summary["images"] = report.entries.size();
  size_t failures = 0;
  for (const auto& e : report.entries) failures += e.ok ? 0 : 1;
  summary["failures"] = failures;
  summary["aggregate"] = {{"tp", report.aggregate.tp},
                          {"fp", report.aggregate.fp},
                          {"fn", report.aggregate.fn},
                          {"tn", report.aggregate.tn}};
  if (report.aggregate_rates.se) summary["se"] = *report.aggregate_rates.se;
  if (report.aggregate_rates.pred) summary["pred"] = *report.aggregate_rates.pred;
  if (report.aggregate_rates.sp) summary["sp"] = *report.aggregate_rates.sp;
  if (report.aggregate_rates.ac) summary["ac"] = *report.aggregate_rates.ac;
  if (sweep) summary["sweep_auc"] = report.sweep_auc;
  if (score_roc) summary["score_auc"] = report.score_roc.auc;
  std::cout << summary.dump(2) << "\n";
  return kExitOk;
}

retina::PhantomSpec phantom_spec_from_json(const json& j) {
  retina::PhantomSpec spec;
  retina::detail::reject_unknown_keys(
      j,
      {"width", "height", "ramp_amplitude", "vessel_count", "vessel_width_min",
       "vessel_width_max", "hard_count", "hard_radius_min", "hard_radius_max", "soft_count",
       "soft_radius_min", "soft_radius_max", "flare_count", "flare_radius_min",
       "flare_radius_max", "seed"},
      "phantom.");
  retina::detail::maybe(j, "width", spec.width);
  retina::detail::maybe(j, "height", spec.height);
  retina::detail::maybe(j, "ramp_amplitude", spec.ramp_amplitude);
  retina::detail::maybe(j, "vessel_count", spec.vessel_count);
  retina::detail::maybe(j, "vessel_width_min", spec.vessel_width_min);
  retina::detail::maybe(j, "vessel_width_max", spec.vessel_width_max);
  retina::detail::maybe(j, "hard_count", spec.hard_count);
  retina::detail::maybe(j, "hard_radius_min", spec.hard_radius_min);
  retina::detail::maybe(j, "hard_radius_max", spec.hard_radius_max);
  retina::detail::maybe(j, "soft_count", spec.soft_count);
  retina::detail::maybe(j, "soft_radius_min", spec.soft_radius_min);
  retina::detail::maybe(j, "soft_radius_max", spec.soft_radius_max);
  retina::detail::maybe(j, "flare_count", spec.flare_count);
  retina::detail::maybe(j, "flare_radius_min", spec.flare_radius_min);
  retina::detail::maybe(j, "flare_radius_max", spec.flare_radius_max);
  retina::detail::maybe(j, "seed", spec.seed);
  return spec;
}

int cmd_phantom(const std::string& spec_path, int count, uint64_t seed,
                const std::string& out_dir) {
  retina::PhantomSpec base;
  if (!spec_path.empty()) {
    std::ifstream f(spec_path);
    if (!f) throw retina::IoError("cannot open phantom spec: " + spec_path);
    json j;
    f >> j;
    base = phantom_spec_from_json(j);
  }
  fs::create_directories(out_dir);

  json manifest = json::array();
  for (int i = 0; i < count; ++i) {
    retina::PhantomSpec spec = base;
    spec.seed = seed + uint64_t(i);
    const retina::PhantomResult ph = retina::generate_phantom(spec);
    char name[32];
    std::snprintf(name, sizeof(name), "phantom_%03d", i);
    const std::string stem = (fs::path(out_dir) / name).string();
    retina::save_image(ph.image, stem + ".png");
    retina::save_mask(ph.exudate_mask, stem + "_exudate.png");
    retina::save_mask(ph.hard_mask, stem + "_hard.png");
    retina::save_mask(ph.soft_mask, stem + "_soft.png");

    json e;
    e["image"] = std::string(name) + ".png";
    e["exudate_mask"] = std::string(name) + "_exudate.png";
    e["hard_mask"] = std::string(name) + "_hard.png";
    e["soft_mask"] = std::string(name) + "_soft.png";
    e["fovea"] = {ph.landmarks.fovea_x, ph.landmarks.fovea_y};
    e["optic_disc"] = {ph.landmarks.od_x, ph.landmarks.od_y};
    manifest.push_back(std::move(e));
  }
  std::ofstream mf((fs::path(out_dir) / "manifest.json").string(), std::ios::trunc);
  if (!mf) throw retina::IoError("cannot write manifest in: " + out_dir);
  mf << manifest.dump(2) << "\n";
  std::cout << "wrote " << count << " phantoms to " << out_dir << "\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"retina-kit: exudate screening for color fundus images"};
  app.require_subcommand(1);

  std::string image_path, config_path, out_mask, out_overlay, dump_dir, from_dmap;
  std::string model_path, out_json, manifest_path, out_model, fovea_arg, od_arg;
  std::string out_report, overlay_dir, spec_path, out_dir;
  uint64_t seed = 1;
  int count = 10;
  int jobs = 0;
  bool sweep = false, score_roc = false, no_grid = false;

  auto* detect = app.add_subcommand("detect", "detect exudate candidates in one image");
  detect->add_option("image", image_path)->required();
  detect->add_option("--config", config_path);
  detect->add_option("--out-mask", out_mask);
  detect->add_option("--out-overlay", out_overlay);
  detect->add_option("--dump-intermediates", dump_dir);
  detect->add_option("--from-dmap", from_dmap);

  auto* classify = app.add_subcommand("classify", "detect and classify candidate regions");
  classify->add_option("image", image_path)->required();
  classify->add_option("--model", model_path)->required();
  classify->add_option("--config", config_path);
  classify->add_option("--out-json", out_json);

  auto* train = app.add_subcommand("train", "train the region classifier from a manifest");
  train->add_option("manifest", manifest_path)->required();
  train->add_option("--config", config_path);
  train->add_option("--out-model", out_model)->required();
  train->add_option("--seed", seed);
  train->add_option("--jobs", jobs);
  train->add_flag("--no-grid", no_grid, "skip the hyperparameter grid search");

  auto* grade = app.add_subcommand("grade", "grade disease severity for one image");
  grade->add_option("image", image_path)->required();
  grade->add_option("--model", model_path);
  grade->add_option("--fovea", fovea_arg, "fovea center as 'x,y'")->required();
  grade->add_option("--od", od_arg, "optic disc center as 'x,y'")->required();
  grade->add_option("--config", config_path);

  auto* eval = app.add_subcommand("eval", "evaluate the pipeline over a manifest");
  eval->add_option("manifest", manifest_path)->required();
  eval->add_option("--config", config_path);
  eval->add_flag("--sweep", sweep, "sweep the Sauvola c operating parameter");
  eval->add_flag("--score-roc", score_roc, "ROC over raw decision-map scores");
  eval->add_option("--out-report", out_report, "report path prefix (.json/.csv)");
  eval->add_option("--model", model_path);
  eval->add_option("--out-overlays", overlay_dir);
  eval->add_option("--jobs", jobs);

  auto* phantom = app.add_subcommand("phantom", "generate synthetic phantoms with truth");
  phantom->add_option("--spec", spec_path, "phantom spec JSON");
  phantom->add_option("--count", count);
  phantom->add_option("--seed", seed);
  phantom->add_option("--out-dir", out_dir)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (detect->parsed())
      return cmd_detect(image_path, config_path, out_mask, out_overlay, dump_dir, from_dmap);
    if (classify->parsed()) return cmd_classify(image_path, model_path, config_path, out_json);
    if (train->parsed())
      return cmd_train(manifest_path, config_path, out_model, seed, !no_grid, jobs);
    if (grade->parsed()) return cmd_grade(image_path, model_path, fovea_arg, od_arg, config_path);
    if (eval->parsed())
      return cmd_eval(manifest_path, config_path, sweep, score_roc, out_report, model_path,
                      overlay_dir, jobs);
    if (phantom->parsed()) return cmd_phantom(spec_path, count, seed, out_dir);
  } catch (const retina::IoError& e) {
    retina::log_error(e.what());
    std::cerr << "error: " << e.what() << "\n";
    return kExitIo;
  } catch (const retina::FormatError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitIo;
  } catch (const retina::ArgumentError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "pipeline failure: " << e.what() << "\n";
    return kExitPipeline;
  }
  return kExitUsage;
}
