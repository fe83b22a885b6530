#pragma once

#include <array>
#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "retina/binarize.hpp"
#include "retina/color.hpp"
#include "retina/diffusion.hpp"
#include "retina/morphology.hpp"
#include "retina/regions.hpp"
#include "retina/resize.hpp"
#include "retina/scalespace.hpp"
#include "retina/svm.hpp"
#include "retina/types.hpp"

namespace retina {

struct MorphologyConfig {
  std::array<int, 2> enhance_disk_radii = {2, 3};
  int vessel_se_side = 5;

  void validate() const {
    if (enhance_disk_radii[0] < 1 || enhance_disk_radii[1] < 1)
      throw ArgumentError("morphology: enhance disk radii must be >= 1");
    if (vessel_se_side < 1 || vessel_se_side % 2 == 0)
      throw ArgumentError("morphology: vessel_se_side must be odd and >= 1");
  }
};

struct SeverityConfig {
  double c1 = 0.5;
  double c2 = 0.5;
};

struct EvalConfig {
  bool fov_restrict = true;   // evaluate only pixels inside the camera field
  int sweep_steps = 31;       // Sauvola-c operating points for the ROC
  double sweep_min = 0.2;
  double sweep_max = 0.5;
};

struct ClassifierConfig {
  double C = 10.0;
  double gamma = 0.25;
  int folds = 10;
};

struct PipelineConfig {
  DiffusionParams diffusion;
  ScaleSpaceParams scalespace;
  MorphologyConfig morphology;
  SauvolaParams binarize;
  RegionFilterConfig regions;
  SeverityConfig severity;
  EvalConfig eval;
  ClassifierConfig classifier;

  void validate() const {
    diffusion.validate();
    scalespace.validate();
    morphology.validate();
    binarize.validate();
    if (!(severity.c1 >= 0.0 && severity.c1 <= 1.0 && severity.c2 >= 0.0 &&
          severity.c2 <= 1.0))
      throw ArgumentError("severity: c1 and c2 must lie in [0,1]");
    if (eval.sweep_steps < 2 || !(eval.sweep_min < eval.sweep_max))
      throw ArgumentError("eval: bad sweep specification");
    if (!(classifier.C > 0.0) || !(classifier.gamma > 0.0) || classifier.folds < 2)
      throw ArgumentError("classifier: bad configuration");
  }
};

namespace detail {

inline void reject_unknown_keys(const nlohmann::json& j,
                                std::initializer_list<const char*> known,
                                const std::string& scope) {
  for (const auto& [key, value] : j.items()) {
    bool ok = false;
    for (const char* k : known)
      if (key == k) { ok = true; break; }
    if (!ok) throw ArgumentError("config: unknown key '" + scope + key + "'");
  }
}

template <typename T>
void maybe(const nlohmann::json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

}  // namespace detail

inline PipelineConfig config_from_json(const nlohmann::json& j) {
  PipelineConfig cfg;
  detail::reject_unknown_keys(j,
                              {"diffusion", "scalespace", "morphology", "binarize",
                               "regions", "severity", "eval", "classifier"},
                              "");
  if (j.contains("diffusion")) {
    const auto& s = j.at("diffusion");
    detail::reject_unknown_keys(s, {"K", "alpha", "iterations", "dt"}, "diffusion.");
    detail::maybe(s, "K", cfg.diffusion.K);
    detail::maybe(s, "alpha", cfg.diffusion.alpha);
    detail::maybe(s, "iterations", cfg.diffusion.iterations);
    detail::maybe(s, "dt", cfg.diffusion.dt);
  }
  if (j.contains("scalespace")) {
    const auto& s = j.at("scalespace");
    detail::reject_unknown_keys(s, {"num_scales", "base_sigma", "k", "normalize"},
                                "scalespace.");
    detail::maybe(s, "num_scales", cfg.scalespace.num_scales);
    detail::maybe(s, "base_sigma", cfg.scalespace.base_sigma);
    detail::maybe(s, "k", cfg.scalespace.k);
    detail::maybe(s, "normalize", cfg.scalespace.normalize);
  }
  if (j.contains("morphology")) {
    const auto& s = j.at("morphology");
    detail::reject_unknown_keys(s, {"enhance_disk_radii", "vessel_se_side"}, "morphology.");
    detail::maybe(s, "enhance_disk_radii", cfg.morphology.enhance_disk_radii);
    detail::maybe(s, "vessel_se_side", cfg.morphology.vessel_se_side);
  }
  if (j.contains("binarize")) {
    const auto& s = j.at("binarize");
    detail::reject_unknown_keys(s, {"window", "c"}, "binarize.");
    detail::maybe(s, "window", cfg.binarize.window);
    detail::maybe(s, "c", cfg.binarize.c);
  }
  if (j.contains("regions")) {
    const auto& s = j.at("regions");
    detail::reject_unknown_keys(
        s, {"min_solidity", "max_circularity", "min_area", "max_area"}, "regions.");
    detail::maybe(s, "min_solidity", cfg.regions.min_solidity);
    detail::maybe(s, "max_circularity", cfg.regions.max_circularity);
    detail::maybe(s, "min_area", cfg.regions.min_area);
    detail::maybe(s, "max_area", cfg.regions.max_area);
  }
  if (j.contains("severity")) {
    const auto& s = j.at("severity");
    detail::reject_unknown_keys(s, {"c1", "c2"}, "severity.");
    detail::maybe(s, "c1", cfg.severity.c1);
    detail::maybe(s, "c2", cfg.severity.c2);
  }
  if (j.contains("eval")) {
    const auto& s = j.at("eval");
    detail::reject_unknown_keys(s, {"fov_restrict", "sweep_steps", "sweep_min", "sweep_max"},
                                "eval.");
    detail::maybe(s, "fov_restrict", cfg.eval.fov_restrict);
    detail::maybe(s, "sweep_steps", cfg.eval.sweep_steps);
    detail::maybe(s, "sweep_min", cfg.eval.sweep_min);
    detail::maybe(s, "sweep_max", cfg.eval.sweep_max);
  }
  if (j.contains("classifier")) {
    const auto& s = j.at("classifier");
    detail::reject_unknown_keys(s, {"C", "gamma", "folds"}, "classifier.");
    detail::maybe(s, "C", cfg.classifier.C);
    detail::maybe(s, "gamma", cfg.classifier.gamma);
    detail::maybe(s, "folds", cfg.classifier.folds);
  }
  cfg.validate();
  return cfg;
}

inline nlohmann::json config_to_json(const PipelineConfig& cfg) {
  nlohmann::json j;
  j["diffusion"] = {{"K", cfg.diffusion.K},
                    {"alpha", cfg.diffusion.alpha},
                    {"iterations", cfg.diffusion.iterations},
                    {"dt", cfg.diffusion.dt}};
  j["scalespace"] = {{"num_scales", cfg.scalespace.num_scales},
                     {"base_sigma", cfg.scalespace.base_sigma},
                     {"k", cfg.scalespace.k},
                     {"normalize", cfg.scalespace.normalize}};
  j["morphology"] = {{"enhance_disk_radii", cfg.morphology.enhance_disk_radii},
                     {"vessel_se_side", cfg.morphology.vessel_se_side}};
  j["binarize"] = {{"window", cfg.binarize.window}, {"c", cfg.binarize.c}};
  j["regions"] = {{"min_solidity", cfg.regions.min_solidity},
                  {"max_circularity", cfg.regions.max_circularity},
                  {"min_area", cfg.regions.min_area},
                  {"max_area", cfg.regions.max_area}};
  j["severity"] = {{"c1", cfg.severity.c1}, {"c2", cfg.severity.c2}};
  j["eval"] = {{"fov_restrict", cfg.eval.fov_restrict},
               {"sweep_steps", cfg.eval.sweep_steps},
               {"sweep_min", cfg.eval.sweep_min},
               {"sweep_max", cfg.eval.sweep_max}};
  j["classifier"] = {{"C", cfg.classifier.C},
                     {"gamma", cfg.classifier.gamma},
                     {"folds", cfg.classifier.folds}};
  return j;
}

inline PipelineConfig load_config(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw IoError("cannot open config file: " + path);
  nlohmann::json j;
  try {
    f >> j;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("bad config JSON in " + path + ": " + e.what());
  }
  return config_from_json(j);
}

struct DetectionResult {
  RasterImage working_rgb;   // resized input, pre-diffusion
  RasterImage working_lab;
  InterestMap dmap;          // decision map from the scale space
  InterestMap enhanced;      // after morphological enhancement
  BinaryMask binarized;      // Sauvola output
  BinaryMask opened;         // after vessel opening
  std::vector<Region> regions;     // all components of the opened mask
  std::vector<Region> candidates;  // survivors of the geometric filters
  BinaryMask mask_working;         // candidate pixels at working resolution
  BinaryMask mask_fullres;         // same, resampled to the input resolution
};

inline BinaryMask mask_from_regions(const std::vector<Region>& regions, int w, int h) {
  BinaryMask m(w, h);
  for (const auto& r : regions)
    for (const auto& [x, y] : r.pixels) m.set(x, y, true);
  return m;
}

/// Pipeline stages downstream of the decision map; split out so a dumped
/// dmap can be reloaded and the run resumed bit-exactly.
inline DetectionResult detect_from_dmap(const RasterImage& working_rgb,
                                        const InterestMap& dmap,
                                        const PipelineConfig& cfg, int full_w,
                                        int full_h) {
  DetectionResult res;
  res.working_rgb = working_rgb;
  res.working_lab = rgb_to_lab(working_rgb);
  res.dmap = dmap;
  res.enhanced = enhance_interest_map(dmap, cfg.morphology.enhance_disk_radii[0],
                                      cfg.morphology.enhance_disk_radii[1]);
  res.binarized = sauvola_threshold(res.enhanced, cfg.binarize);
  res.opened = open(res.binarized, StructuringElement::square(cfg.morphology.vessel_se_side));
  res.regions = connected_components(res.opened);
  res.candidates = filter_candidates(res.regions, res.dmap, working_rgb, cfg.regions);
  res.mask_working = mask_from_regions(res.candidates, working_rgb.width, working_rgb.height);
  res.mask_fullres = (full_w == working_rgb.width && full_h == working_rgb.height)
                         ? res.mask_working
                         : resize_mask_nearest(res.mask_working, full_w, full_h);
  return res;
}

/// Full detection pipeline: resize, diffuse, scale-space decision map,
/// enhancement, Sauvola binarization, vessel opening, component analysis,
/// and geometric filtering.
inline DetectionResult detect_exudates(const RasterImage& original,
                                       const PipelineConfig& cfg) {
  cfg.validate();
  const RasterImage working = resize_for_processing(original);
  const RasterImage diffused = diffuse(working, cfg.diffusion);
  const InterestMap dmap = build_gimap(diffused, cfg.scalespace);
  return detect_from_dmap(working, dmap, cfg, original.width, original.height);
}

/// FNV-1a content hash, used to key stage outputs for rerun skipping.
inline uint64_t fnv1a64(const void* data, size_t len, uint64_t seed = 14695981039346656037ull) {
  const uint8_t* p = static_cast<const uint8_t*>(data);
  uint64_t hash = seed;
  for (size_t i = 0; i < len; ++i) {
    hash ^= p[i];
    hash *= 1099511628211ull;
  }
  return hash;
}

inline uint64_t content_hash(const std::vector<uint8_t>& input_bytes,
                             const PipelineConfig& cfg) {
  const std::string cfg_dump = config_to_json(cfg).dump();
  uint64_t h = fnv1a64(input_bytes.data(), input_bytes.size());
  return fnv1a64(cfg_dump.data(), cfg_dump.size(), h);
}

}  // namespace retina
