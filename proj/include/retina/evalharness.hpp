#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "retina/features.hpp"
#include "retina/image_io.hpp"
#include "retina/pipeline.hpp"
#include "retina/severity.hpp"
#include "retina/svm.hpp"
#include "retina/types.hpp"

namespace retina {

struct ConfusionCounts {
  long long tp = 0, fp = 0, fn = 0, tn = 0;
  long long total() const { return tp + fp + fn + tn; }
  ConfusionCounts& operator+=(const ConfusionCounts& o) {
    tp += o.tp;
    fp += o.fp;
    fn += o.fn;
    tn += o.tn;
    return *this;
  }
};

/// Per-pixel tally of prediction against truth; an optional mask restricts
/// the evaluated pixel universe (e.g. to the camera field of view).
inline ConfusionCounts confusion(const BinaryMask& pred, const BinaryMask& truth,
                                 const BinaryMask* universe = nullptr) {
  if (!pred.same_dims(truth) || (universe && !universe->same_dims(truth)))
    throw ArgumentError("confusion: mask dimensions differ");
  ConfusionCounts c;
  for (size_t i = 0; i < truth.bits.size(); ++i) {
    if (universe && !universe->bits[i]) continue;
    const bool p = pred.bits[i], t = truth.bits[i];
    if (p && t) c.tp++;
    else if (p && !t) c.fp++;
    else if (!p && t) c.fn++;
    else c.tn++;
  }
  return c;
}

/// SE, PRED, SP, AC; a rate with a zero denominator is left unset.
struct Rates {
  std::optional<double> se, pred, sp, ac;
};

inline Rates rates(const ConfusionCounts& c) {
  Rates r;
  if (c.tp + c.fn > 0) r.se = double(c.tp) / double(c.tp + c.fn);
  if (c.tp + c.fp > 0) r.pred = double(c.tp) / double(c.tp + c.fp);
  if (c.tn + c.fp > 0) r.sp = double(c.tn) / double(c.tn + c.fp);
  if (c.total() > 0) r.ac = double(c.tp + c.tn) / double(c.total());
  return r;
}

struct RocPoint {
  double threshold = 0.0;
  double se = 0.0;
  double one_minus_sp = 0.0;
  double pred = 1.0;
};

struct RocCurve {
  std::vector<RocPoint> points;  // threshold descending, SE non-decreasing
  double auc = std::numeric_limits<double>::quiet_NaN();
};

/// ROC from scored samples: sweeps every distinct score as a strict
/// threshold and integrates SE over 1-SP with trapezoids. With full
/// resolution of ties this equals the Mann-Whitney U statistic.
inline RocCurve roc_from_samples(std::vector<std::pair<double, bool>> samples) {
  RocCurve out;
  std::sort(samples.begin(), samples.end(),
            [](const auto& a, const auto& b) { return a.first > b.first; });
  long long n_pos = 0, n_neg = 0;
  for (const auto& s : samples) (s.second ? n_pos : n_neg)++;
  if (n_pos == 0 || n_neg == 0) return out;

  long long tp = 0, fp = 0;
  double auc = 0.0;
  double prev_fpr = 0.0, prev_tpr = 0.0;
  size_t i = 0;
  while (i < samples.size()) {
    const double v = samples[i].first;
    while (i < samples.size() && samples[i].first == v) {
      (samples[i].second ? tp : fp)++;
      ++i;
    }
    const double tpr = double(tp) / double(n_pos);
    const double fpr = double(fp) / double(n_neg);
    auc += (fpr - prev_fpr) * (tpr + prev_tpr) / 2.0;
    out.points.push_back({v, tpr, fpr, tp + fp > 0 ? double(tp) / double(tp + fp) : 1.0});
    prev_fpr = fpr;
    prev_tpr = tpr;
  }
  out.auc = auc;  // the sweep ends at (1,1), so the integral is complete
  return out;
}

/// ROC/AUC of a score map against a truth mask (optionally FOV-restricted).
inline RocCurve roc_auc(const InterestMap& scores, const BinaryMask& truth,
                        const BinaryMask* universe = nullptr) {
  if (scores.width != truth.width || scores.height != truth.height)
    throw ArgumentError("roc_auc: dimensions differ");
  std::vector<std::pair<double, bool>> samples;
  samples.reserve(truth.bits.size());
  for (size_t i = 0; i < truth.bits.size(); ++i) {
    if (universe && !universe->bits[i]) continue;
    samples.emplace_back(scores.values[i], truth.bits[i] != 0);
  }
  return roc_from_samples(std::move(samples));
}

/// Field of view: pixels where any channel exceeds a small threshold.
inline BinaryMask fov_mask(const RasterImage& img, double threshold = 0.02) {
  BinaryMask m(img.width, img.height);
  for (size_t px = 0; px < img.pixel_count(); ++px) {
    bool on = false;
    for (int c = 0; c < img.channels; ++c)
      if (img.data[px * img.channels + c] > threshold) { on = true; break; }
    m.bits[px] = on ? 1 : 0;
  }
  return m;
}

// ---------------------------------------------------------------------------
// Dataset evaluation

struct ManifestEntry {
  std::string image;
  std::string exudate_mask;
  std::string hard_mask;  // optional: empty when absent
  std::string soft_mask;
  bool has_landmarks = false;
  double fovea_x = 0, fovea_y = 0, od_x = 0, od_y = 0;
};

inline std::vector<ManifestEntry> load_manifest(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw IoError("cannot open manifest: " + path);
  nlohmann::json j;
  try {
    f >> j;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("bad manifest JSON in " + path + ": " + e.what());
  }
  if (!j.is_array()) throw FormatError("manifest must be a JSON array: " + path);

  const auto dir = std::filesystem::path(path).parent_path();
  auto resolve = [&dir](const std::string& p) {
    const std::filesystem::path fp(p);
    return fp.is_absolute() ? fp.string() : (dir / fp).string();
  };

  std::vector<ManifestEntry> entries;
  for (const auto& je : j) {
    ManifestEntry e;
    e.image = resolve(je.at("image").get<std::string>());
    if (je.contains("exudate_mask"))
      e.exudate_mask = resolve(je.at("exudate_mask").get<std::string>());
    if (je.contains("hard_mask")) e.hard_mask = resolve(je.at("hard_mask").get<std::string>());
    if (je.contains("soft_mask")) e.soft_mask = resolve(je.at("soft_mask").get<std::string>());
    if (je.contains("fovea") && je.contains("optic_disc")) {
      e.has_landmarks = true;
      e.fovea_x = je.at("fovea").at(0).get<double>();
      e.fovea_y = je.at("fovea").at(1).get<double>();
      e.od_x = je.at("optic_disc").at(0).get<double>();
      e.od_y = je.at("optic_disc").at(1).get<double>();
    }
    entries.push_back(std::move(e));
  }
  return entries;
}

struct EntryResult {
  std::string image;
  bool ok = false;
  std::string error;
  ConfusionCounts counts;
  Rates r;
  size_t candidate_count = 0;
  std::optional<Severity> grade;
  size_t predicted_hard = 0, predicted_soft = 0, predicted_outlier = 0;
  std::vector<ConfusionCounts> sweep_counts;  // one per sweep step
};

struct EvalReport {
  std::vector<EntryResult> entries;
  ConfusionCounts aggregate;  // micro-average over successful entries
  Rates aggregate_rates;
  std::vector<double> sweep_c;             // Sauvola c per sweep step
  std::vector<ConfusionCounts> sweep_aggregate;
  double sweep_auc = std::numeric_limits<double>::quiet_NaN();
  RocCurve score_roc;  // decision-map scores pooled over the dataset
};

struct EvalOptions {
  int jobs = 0;          // 0: hardware concurrency
  bool sweep = false;    // run the Sauvola-c operating-point sweep
  bool score_roc = false;
  const SvmModel* model = nullptr;
  std::string out_dir;   // when set: overlays are written here
};

namespace detail {

inline void run_parallel(size_t n, int jobs, const std::function<void(size_t)>& fn) {
  if (jobs <= 0) jobs = int(std::thread::hardware_concurrency());
  jobs = std::max(1, std::min<int>(jobs, int(n)));
  if (jobs == 1) {
    for (size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<size_t> next{0};
  std::vector<std::thread> workers;
  for (int t = 0; t < jobs; ++t) {
    workers.emplace_back([&] {
      for (size_t i = next.fetch_add(1); i < n; i = next.fetch_add(1)) fn(i);
    });
  }
  for (auto& w : workers) w.join();
}

inline void draw_outline(RasterImage& img, const BinaryMask& mask, const double color[3]) {
  for (int y = 0; y < mask.height; ++y) {
    for (int x = 0; x < mask.width; ++x) {
      if (!mask.at(x, y)) continue;
      bool edge = x == 0 || y == 0 || x == mask.width - 1 || y == mask.height - 1 ||
                  !mask.at(x - 1, y) || !mask.at(x + 1, y) || !mask.at(x, y - 1) ||
                  !mask.at(x, y + 1);
      if (!edge) continue;
      for (int c = 0; c < 3; ++c) img.at(x, y, c) = color[c];
    }
  }
}

}  // namespace detail

/// Runs the full pipeline over a manifest and aggregates pixel-level
/// metrics; per-entry failures are recorded and the run continues.
inline EvalReport evaluate_dataset(const std::string& manifest_path,
                                   const PipelineConfig& cfg,
                                   const EvalOptions& opts = {}) {
  const auto entries = load_manifest(manifest_path);
  EvalReport report;
  report.entries.resize(entries.size());
  if (opts.sweep) {
    report.sweep_c.resize(cfg.eval.sweep_steps);
    for (int s = 0; s < cfg.eval.sweep_steps; ++s)
      report.sweep_c[s] = cfg.eval.sweep_min + (cfg.eval.sweep_max - cfg.eval.sweep_min) *
                                                   double(s) / (cfg.eval.sweep_steps - 1);
  }
  std::vector<std::vector<std::pair<double, bool>>> score_samples(entries.size());

  detail::run_parallel(entries.size(), opts.jobs, [&](size_t i) {
    const auto& e = entries[i];
    EntryResult& res = report.entries[i];
    res.image = e.image;
    try {
      const RasterImage original = load_image(e.image);
      if (e.exudate_mask.empty())
        throw ArgumentError("manifest entry has no exudate_mask: " + e.image);
      const BinaryMask truth = load_mask(e.exudate_mask);
      if (truth.width != original.width || truth.height != original.height)
        throw ArgumentError("truth mask dimensions differ from image: " + e.image);

      const DetectionResult det = detect_exudates(original, cfg);
      const BinaryMask fov = cfg.eval.fov_restrict ? fov_mask(original) : BinaryMask();
      const BinaryMask* universe = cfg.eval.fov_restrict ? &fov : nullptr;
      res.counts = confusion(det.mask_fullres, truth, universe);
      res.r = rates(res.counts);
      res.candidate_count = det.candidates.size();

      std::vector<LesionClass> classes(det.candidates.size(), LesionClass::Hard);
      if (opts.model) {
        for (size_t ri = 0; ri < det.candidates.size(); ++ri) {
          const FeatureVector fv =
              extract_features(det.candidates[ri], det.working_rgb, det.working_lab);
          classes[ri] = predict(*opts.model, fv).cls;
          if (classes[ri] == LesionClass::Hard) res.predicted_hard++;
          else if (classes[ri] == LesionClass::Soft) res.predicted_soft++;
          else res.predicted_outlier++;
        }
      }

      if (e.has_landmarks) {
        RetinalLandmarks lm;
        lm.fovea_x = e.fovea_x;
        lm.fovea_y = e.fovea_y;
        lm.od_x = e.od_x;
        lm.od_y = e.od_y;
        lm.image_width = original.width;
        lm.image_height = original.height;
        res.grade = grade_combined(det.mask_fullres, lm).grade;
      }

      if (opts.sweep) {
        res.sweep_counts.resize(report.sweep_c.size());
        const StructuringElement se =
            StructuringElement::square(cfg.morphology.vessel_se_side);
        for (size_t s = 0; s < report.sweep_c.size(); ++s) {
          SauvolaParams sp = cfg.binarize;
          sp.c = report.sweep_c[s];
          const BinaryMask bin = sauvola_threshold(det.enhanced, sp);
          const BinaryMask op = open(bin, se);
          const auto regs = connected_components(op);
          const auto kept = filter_candidates(regs, det.dmap, det.working_rgb, cfg.regions);
          BinaryMask m = mask_from_regions(kept, op.width, op.height);
          const BinaryMask full = (m.width == original.width && m.height == original.height)
                                      ? m
                                      : resize_mask_nearest(m, original.width, original.height);
          res.sweep_counts[s] = confusion(full, truth, universe);
        }
      }

      if (opts.score_roc) {
        const BinaryMask truth_working =
            resize_mask_nearest(truth, det.dmap.width, det.dmap.height);
        const BinaryMask fov_working =
            cfg.eval.fov_restrict
                ? resize_mask_nearest(fov, det.dmap.width, det.dmap.height)
                : BinaryMask();
        auto& samples = score_samples[i];
        for (size_t px = 0; px < truth_working.bits.size(); ++px) {
          if (cfg.eval.fov_restrict && !fov_working.bits[px]) continue;
          samples.emplace_back(det.dmap.values[px], truth_working.bits[px] != 0);
        }
      }

      if (!opts.out_dir.empty()) {
        RasterImage overlay = original;
        BinaryMask hard_m(det.mask_working.width, det.mask_working.height);
        BinaryMask soft_m(det.mask_working.width, det.mask_working.height);
        for (size_t ri = 0; ri < det.candidates.size(); ++ri) {
          BinaryMask& target = classes[ri] == LesionClass::Soft ? soft_m : hard_m;
          for (const auto& [x, y] : det.candidates[ri].pixels) target.set(x, y, true);
        }
        const double red[3] = {1.0, 0.1, 0.1};
        const double cyan[3] = {0.1, 1.0, 1.0};
        detail::draw_outline(
            overlay, resize_mask_nearest(hard_m, original.width, original.height), red);
        detail::draw_outline(
            overlay, resize_mask_nearest(soft_m, original.width, original.height), cyan);
        std::string stem = std::filesystem::path(e.image).stem().string();
        std::string name = "overlay_" + stem;
        if (res.grade) name += std::string("_grade-") + severity_name(*res.grade);
        save_image(overlay, (std::filesystem::path(opts.out_dir) / (name + ".png")).string());
      }

      res.ok = true;
    } catch (const std::exception& ex) {
      res.ok = false;
      res.error = ex.what();
    }
  });

  for (const auto& res : report.entries)
    if (res.ok) report.aggregate += res.counts;
  report.aggregate_rates = rates(report.aggregate);

  if (opts.sweep) {
    report.sweep_aggregate.assign(report.sweep_c.size(), {});
    for (const auto& res : report.entries) {
      if (!res.ok || res.sweep_counts.empty()) continue;
      for (size_t s = 0; s < report.sweep_c.size(); ++s)
        report.sweep_aggregate[s] += res.sweep_counts[s];
    }
    // Operating-point AUC: sorted by false-positive rate with chance anchors.
    std::vector<std::pair<double, double>> pts{{0.0, 0.0}, {1.0, 1.0}};
    for (const auto& c : report.sweep_aggregate) {
      const Rates r = rates(c);
      if (r.se && r.sp) pts.emplace_back(1.0 - *r.sp, *r.se);
    }
    std::sort(pts.begin(), pts.end());
    double auc = 0.0;
    for (size_t i = 1; i < pts.size(); ++i)
      auc += (pts[i].first - pts[i - 1].first) * (pts[i].second + pts[i - 1].second) / 2.0;
    report.sweep_auc = auc;
  }

  if (opts.score_roc) {
    std::vector<std::pair<double, bool>> all;
    for (auto& s : score_samples) all.insert(all.end(), s.begin(), s.end());
    report.score_roc = roc_from_samples(std::move(all));
  }
  return report;
}

inline nlohmann::json report_to_json(const EvalReport& report) {
  nlohmann::json j;
  auto rates_json = [](const Rates& r) {
    nlohmann::json o;
    o["se"] = r.se ? nlohmann::json(*r.se) : nlohmann::json();
    o["pred"] = r.pred ? nlohmann::json(*r.pred) : nlohmann::json();
    o["sp"] = r.sp ? nlohmann::json(*r.sp) : nlohmann::json();
    o["ac"] = r.ac ? nlohmann::json(*r.ac) : nlohmann::json();
    return o;
  };
  j["images"] = nlohmann::json::array();
  for (const auto& e : report.entries) {
    nlohmann::json je;
    je["image"] = e.image;
    je["ok"] = e.ok;
    if (!e.ok) {
      je["error"] = e.error;
    } else {
      je["tp"] = e.counts.tp;
      je["fp"] = e.counts.fp;
      je["fn"] = e.counts.fn;
      je["tn"] = e.counts.tn;
      je["rates"] = rates_json(e.r);
      je["candidates"] = e.candidate_count;
      if (e.grade) je["grade"] = severity_name(*e.grade);
      je["predicted"] = {{"hard", e.predicted_hard},
                         {"soft", e.predicted_soft},
                         {"outlier", e.predicted_outlier}};
    }
    j["images"].push_back(std::move(je));
  }
  j["aggregate"] = {{"tp", report.aggregate.tp},
                    {"fp", report.aggregate.fp},
                    {"fn", report.aggregate.fn},
                    {"tn", report.aggregate.tn},
                    {"rates", rates_json(report.aggregate_rates)}};
  if (!report.sweep_c.empty()) {
    nlohmann::json sweep = nlohmann::json::array();
    for (size_t s = 0; s < report.sweep_c.size(); ++s) {
      const Rates r = rates(report.sweep_aggregate[s]);
      nlohmann::json p;
      p["c"] = report.sweep_c[s];
      p["rates"] = rates_json(r);
      sweep.push_back(std::move(p));
    }
    j["sweep"] = std::move(sweep);
    j["sweep_auc"] = report.sweep_auc;
  }
  if (!report.score_roc.points.empty()) {
    j["score_auc"] = report.score_roc.auc;
    nlohmann::json pts = nlohmann::json::array();
    // The full pixel sweep is huge; store a readable subsample.
    const size_t stride = std::max<size_t>(1, report.score_roc.points.size() / 256);
    for (size_t i = 0; i < report.score_roc.points.size(); i += stride) {
      const auto& p = report.score_roc.points[i];
      pts.push_back({{"threshold", p.threshold},
                     {"se", p.se},
                     {"one_minus_sp", p.one_minus_sp},
                     {"pred", p.pred}});
    }
    j["score_roc"] = std::move(pts);
  }
  return j;
}

inline void write_report_json(const EvalReport& report, const std::string& path) {
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw IoError("cannot write report: " + path);
  f << report_to_json(report).dump(2) << "\n";
}

inline void write_report_csv(const EvalReport& report, const std::string& path) {
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw IoError("cannot write report: " + path);
  auto cell = [](const std::optional<double>& v) {
    return v ? std::to_string(*v) : std::string("");
  };
  f << "image,ok,tp,fp,fn,tn,se,pred,sp,ac,candidates,grade\n";
  for (const auto& e : report.entries) {
    f << e.image << ',' << (e.ok ? 1 : 0) << ',' << e.counts.tp << ',' << e.counts.fp << ','
      << e.counts.fn << ',' << e.counts.tn << ',' << cell(e.r.se) << ',' << cell(e.r.pred)
      << ',' << cell(e.r.sp) << ',' << cell(e.r.ac) << ',' << e.candidate_count << ','
      << (e.grade ? severity_name(*e.grade) : "") << "\n";
  }
}

}  // namespace retina
