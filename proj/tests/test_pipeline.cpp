#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>

#include "retina/evalharness.hpp"
#include "retina/npy_io.hpp"
#include "retina/phantom.hpp"
#include "retina/pipeline.hpp"

using namespace retina;
namespace fs = std::filesystem;

TEST_CASE("config json round trips and rejects unknown keys", "[pipeline]") {
  const PipelineConfig defaults;
  const nlohmann::json j = config_to_json(defaults);
  const PipelineConfig back = config_from_json(j);
  CHECK(back.diffusion.K == defaults.diffusion.K);
  CHECK(back.scalespace.num_scales == defaults.scalespace.num_scales);
  CHECK(back.binarize.window == defaults.binarize.window);
  CHECK(back.regions.max_circularity == defaults.regions.max_circularity);

  nlohmann::json partial = {{"binarize", {{"c", 0.4}}}};
  const PipelineConfig merged = config_from_json(partial);
  CHECK(merged.binarize.c == 0.4);
  CHECK(merged.binarize.window == 9);

  nlohmann::json unknown_top = {{"binarise", {{"c", 0.4}}}};
  CHECK_THROWS_AS(config_from_json(unknown_top), ArgumentError);
  nlohmann::json unknown_nested = {{"binarize", {{"windoww", 9}}}};
  CHECK_THROWS_AS(config_from_json(unknown_nested), ArgumentError);
  nlohmann::json invalid = {{"diffusion", {{"dt", 0.5}}}};
  CHECK_THROWS_AS(config_from_json(invalid), ArgumentError);
}

TEST_CASE("detection finds phantom lesions and skips black frames", "[pipeline][slow]") {
  PhantomSpec spec;
  spec.seed = 2024;
  const PhantomResult ph = generate_phantom(spec);
  PipelineConfig cfg;
  const DetectionResult det = detect_exudates(ph.image, cfg);

  REQUIRE(!det.candidates.empty());
  // at least one candidate sits on a true lesion
  bool hit = false;
  for (const auto& r : det.candidates)
    for (const auto& [x, y] : r.pixels)
      if (ph.exudate_mask.at(x, y)) { hit = true; break; }
  CHECK(hit);

  RasterImage black(400, 400, 3, ColorSpace::RGB, 0.0);
  const DetectionResult nothing = detect_exudates(black, cfg);
  CHECK(nothing.mask_fullres.count() == 0);
}

TEST_CASE("resuming from a dumped dmap reproduces the run bit-exactly", "[pipeline][slow]") {
  PhantomSpec spec;
  spec.seed = 555;
  spec.width = 320;
  spec.height = 320;
  const PhantomResult ph = generate_phantom(spec);
  PipelineConfig cfg;
  const DetectionResult full = detect_exudates(ph.image, cfg);

  const auto dir = fs::temp_directory_path() / "retina_pipeline_tests";
  fs::create_directories(dir);
  const auto dmap_path = (dir / "dmap.npy").string();
  save_npy(full.dmap, dmap_path);
  const InterestMap dmap = load_npy(dmap_path);

  const RasterImage working = resize_for_processing(ph.image);
  const DetectionResult resumed =
      detect_from_dmap(working, dmap, cfg, ph.image.width, ph.image.height);
  REQUIRE(resumed.mask_fullres.bits == full.mask_fullres.bits);
  REQUIRE(resumed.binarized.bits == full.binarized.bits);
}

TEST_CASE("evaluate_dataset aggregates and records failures", "[pipeline][slow]") {
  const auto dir = fs::temp_directory_path() / "retina_eval_tests";
  fs::create_directories(dir);

  PhantomSpec spec;
  spec.seed = 31;
  const PhantomResult ph = generate_phantom(spec);
  save_image(ph.image, (dir / "img0.png").string());
  save_mask(ph.exudate_mask, (dir / "img0_exu.png").string());

  nlohmann::json manifest = nlohmann::json::array();
  manifest.push_back({{"image", "img0.png"},
                      {"exudate_mask", "img0_exu.png"},
                      {"fovea", {ph.landmarks.fovea_x, ph.landmarks.fovea_y}},
                      {"optic_disc", {ph.landmarks.od_x, ph.landmarks.od_y}}});
  manifest.push_back({{"image", "missing.png"}, {"exudate_mask", "missing_exu.png"}});
  const auto manifest_path = (dir / "manifest.json").string();
  std::ofstream(manifest_path) << manifest.dump();

  PipelineConfig cfg;
  EvalOptions opts;
  opts.jobs = 1;
  const EvalReport report = evaluate_dataset(manifest_path, cfg, opts);
  REQUIRE(report.entries.size() == 2);
  CHECK(report.entries[0].ok);
  CHECK(report.entries[0].grade.has_value());
  CHECK(!report.entries[1].ok);
  CHECK(report.entries[1].error.find("missing.png") != std::string::npos);

  // micro aggregate equals the per-image sum over successful entries
  CHECK(report.aggregate.tp == report.entries[0].counts.tp);
  CHECK(report.aggregate.total() == report.entries[0].counts.total());

  const auto json_path = (dir / "report").string();
  write_report_json(report, json_path + ".json");
  write_report_csv(report, json_path + ".csv");
  CHECK(fs::exists(json_path + ".json"));
  CHECK(fs::exists(json_path + ".csv"));
}

TEST_CASE("content hashes key on both input and config", "[pipeline]") {
  const std::vector<uint8_t> bytes = {1, 2, 3, 4, 5};
  PipelineConfig cfg;
  const uint64_t a = content_hash(bytes, cfg);
  cfg.binarize.c = 0.4;
  const uint64_t b = content_hash(bytes, cfg);
  CHECK(a != b);
  const std::vector<uint8_t> other = {1, 2, 3, 4, 6};
  CHECK(content_hash(other, cfg) != b);
}
