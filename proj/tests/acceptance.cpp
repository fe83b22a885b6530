// Acceptance suite: one line per criterion, nonzero exit when any fails.

#include <chrono>
#include <cstdio>
#include <random>
#include <sstream>
#include <vector>

#include "retina/retina.hpp"
#include "support/oracles.hpp"

using namespace retina;
using Clock = std::chrono::steady_clock;

namespace {

int failures = 0;

void report(int id, const char* name, bool pass, const std::string& detail) {
  std::printf("%s  %2d  %-34s %s\n", pass ? "PASS" : "FAIL", id, name, detail.c_str());
  std::fflush(stdout);
  if (!pass) ++failures;
}

InterestMap random_map(int w, int h, uint32_t seed) {
  InterestMap m(w, h);
  std::mt19937 rng(seed);
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  for (double& v : m.values) v = uni(rng);
  return m;
}

BinaryMask random_mask(int w, int h, double density, uint32_t seed) {
  BinaryMask m(w, h);
  std::mt19937 rng(seed);
  std::bernoulli_distribution bit(density);
  for (auto& b : m.bits) b = bit(rng) ? 1 : 0;
  return m;
}

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

// --- criterion 1 -----------------------------------------------------------

void criterion_sauvola() {
  const auto t0 = Clock::now();
  size_t mismatches = 0, cases = 0;
  for (uint32_t seed = 0; seed < 25; ++seed) {
    const InterestMap m = random_map(32, 32, 1000 + seed);
    for (int window : {5, 9}) {
      for (double c : {0.2, 0.35, 0.5}) {
        SauvolaParams p;
        p.window = window;
        p.c = c;
        const BinaryMask got = sauvola_threshold(m, p);
        const BinaryMask want = oracle::sauvola(m, window, c);
        ++cases;
        if (got.bits != want.bits) ++mismatches;
      }
    }
  }
  const double dt = seconds_since(t0);
  std::ostringstream os;
  os << cases << " cases, " << mismatches << " mismatches, " << dt << " s";
  report(1, "sauvola-oracle-equivalence", mismatches == 0 && dt < 5.0, os.str());
}

// --- criterion 2 -----------------------------------------------------------

void criterion_morphology_laws() {
  const auto se = StructuringElement::disk(2);
  size_t violations = 0;

  for (uint32_t seed = 0; seed < 50; ++seed) {
    const BinaryMask m = random_mask(14, 14, 0.45, 2000 + seed);
    const BinaryMask o = open(m, se), c = close(m, se);
    const BinaryMask er = erode(m, se), di = dilate(m, se);
    if (open(o, se).bits != o.bits) ++violations;
    if (close(c, se).bits != c.bits) ++violations;
    BinaryMask inv(m.width, m.height);
    for (size_t i = 0; i < m.bits.size(); ++i) inv.bits[i] = m.bits[i] ? 0 : 1;
    const BinaryMask er_inv = erode(inv, se);
    for (size_t i = 0; i < m.bits.size(); ++i) {
      if (!(er.bits[i] <= o.bits[i] && o.bits[i] <= m.bits[i] && m.bits[i] <= c.bits[i] &&
            c.bits[i] <= di.bits[i]))
        ++violations;
      if (di.bits[i] != (er_inv.bits[i] ? 0 : 1)) ++violations;
    }
  }

  for (uint32_t seed = 0; seed < 50; ++seed) {
    const InterestMap m = random_map(14, 14, 3000 + seed);
    const InterestMap o = open(m, se), c = close(m, se);
    const InterestMap er = erode(m, se), di = dilate(m, se);
    if (open(o, se).values != o.values) ++violations;
    if (close(c, se).values != c.values) ++violations;
    InterestMap neg(m.width, m.height);
    for (size_t i = 0; i < m.values.size(); ++i) neg.values[i] = -m.values[i];
    const InterestMap er_neg = erode(neg, se);
    for (size_t i = 0; i < m.values.size(); ++i) {
      if (!(er.values[i] <= o.values[i] && o.values[i] <= m.values[i] &&
            m.values[i] <= c.values[i] && c.values[i] <= di.values[i]))
        ++violations;
      if (di.values[i] != -er_neg.values[i]) ++violations;
    }
  }
  report(2, "morphology-laws", violations == 0,
         "duality/idempotence/ordering on 100 inputs, " + std::to_string(violations) +
             " violations");
}

// --- criterion 3 -----------------------------------------------------------

void criterion_diffusion() {
  bool ok = true;
  std::ostringstream os;
  double worst_drift = 0.0;

  for (uint32_t seed = 0; seed < 10; ++seed) {
    RasterImage img(32, 32, 3, ColorSpace::RGB);
    std::mt19937 rng(4000 + seed);
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    for (double& v : img.data) v = uni(rng);

    double mean0[3];
    for (int c = 0; c < 3; ++c) {
      mean0[c] = 0.0;
      for (size_t px = 0; px < img.pixel_count(); ++px) mean0[c] += img.data[px * 3 + c];
      mean0[c] /= double(img.pixel_count());
    }

    DiffusionParams step;
    step.iterations = 1;
    RasterImage cur = img;
    double tv_prev[3];
    auto tv_of = [](const RasterImage& im, int c) {
      double tv = 0.0;
      for (int y = 0; y < im.height; ++y)
        for (int x = 0; x < im.width; ++x) {
          if (x + 1 < im.width) tv += std::fabs(im.at(x + 1, y, c) - im.at(x, y, c));
          if (y + 1 < im.height) tv += std::fabs(im.at(x, y + 1, c) - im.at(x, y, c));
        }
      return tv;
    };
    for (int c = 0; c < 3; ++c) tv_prev[c] = tv_of(cur, c);

    for (int it = 0; it < 50; ++it) {
      cur = diffuse(cur, step);
      for (int c = 0; c < 3; ++c) {
        const double tv = tv_of(cur, c);
        if (tv > tv_prev[c] + 1e-12) ok = false;
        tv_prev[c] = tv;
      }
    }
    for (int c = 0; c < 3; ++c) {
      double mean = 0.0;
      for (size_t px = 0; px < cur.pixel_count(); ++px) mean += cur.data[px * 3 + c];
      mean /= double(cur.pixel_count());
      worst_drift = std::max(worst_drift, std::fabs(mean - mean0[c]));
    }
  }
  if (worst_drift >= 1e-9) ok = false;

  RasterImage constant(24, 24, 3, ColorSpace::RGB, 0.37);
  DiffusionParams p;
  p.iterations = 50;
  const RasterImage fixed = diffuse(constant, p);
  if (fixed.data != constant.data) ok = false;

  os << "worst mean drift " << worst_drift << ", constant fixed, TV monotone";
  report(3, "diffusion-conservation", ok, os.str());
}

// --- criterion 4 -----------------------------------------------------------

void criterion_scalespace() {
  bool ok = true;
  std::ostringstream os;

  for (double sigma : {1.0, std::sqrt(2.0), 2.0, 4.0, 8.0}) {
    const auto g = gaussian_kernel(sigma);
    double s = 0.0;
    for (double v : g) s += v;
    if (std::fabs(s - 1.0) > 1e-6) ok = false;
    const auto d = gaussian_derivative_kernel(sigma);
    s = 0.0;
    for (double v : d) s += v;
    if (std::fabs(s) > 1e-6) ok = false;
  }

  {
    const auto k2 = gaussian_kernel(2.0);
    const auto target = gaussian_kernel(2.0 * std::sqrt(2.0));
    std::vector<double> conv(2 * k2.size() - 1, 0.0);
    for (size_t i = 0; i < k2.size(); ++i)
      for (size_t j = 0; j < k2.size(); ++j) conv[i + j] += k2[i] * k2[j];
    const int rc = int(conv.size() / 2), rk = int(target.size() / 2);
    double worst = 0.0;
    for (int i = -rc; i <= rc; ++i) {
      const double a = conv[i + rc];
      const double b = std::abs(i) <= rk ? target[i + rk] : 0.0;
      worst = std::max(worst, std::fabs(a - b));
    }
    if (worst >= 2e-3) ok = false;
    os << "semigroup dev " << worst;
  }

  {
    RasterImage img(48, 48, 3, ColorSpace::RGB);
    std::mt19937 rng(5100);
    std::uniform_real_distribution<double> uni(0.1, 0.6);
    for (double& v : img.data) v = uni(rng);
    ScaleSpaceParams p;
    p.num_scales = 4;
    const InterestMap a = build_gimap(img, p);
    RasterImage shifted = img;
    for (double& v : shifted.data) v += 0.35;
    const InterestMap b = build_gimap(shifted, p);
    double worst = 0.0;
    for (size_t i = 0; i < a.values.size(); ++i)
      worst = std::max(worst, std::fabs(a.values[i] - b.values[i]));
    if (worst >= 1e-9) ok = false;
    os << ", dc dev " << worst;
  }

  {
    ScaleSpaceParams p;
    std::vector<int> argmax;
    for (double blob_sigma : {2.0, 4.0, 8.0}) {
      InterestMap m(129, 129);
      for (int y = 0; y < 129; ++y)
        for (int x = 0; x < 129; ++x)
          m.at(x, y) = std::exp(-((x - 64.0) * (x - 64.0) + (y - 64.0) * (y - 64.0)) /
                                (2 * blob_sigma * blob_sigma));
      double best = -1.0;
      int best_i = -1;
      for (int i = 0; i < p.num_scales; ++i) {
        const InterestMap r = log_response(m, p.sigma_at(i), p.k, true);
        if (r.at(64, 64) > best) {
          best = r.at(64, 64);
          best_i = i;
        }
      }
      argmax.push_back(best_i);
    }
    if (!(argmax[0] < argmax[1] && argmax[1] < argmax[2])) ok = false;
    os << ", blob argmax " << argmax[0] << "<" << argmax[1] << "<" << argmax[2];
  }
  report(4, "scalespace-normalization", ok, os.str());
}

// --- criterion 5 -----------------------------------------------------------

void criterion_regions() {
  std::vector<BinaryMask> masks;
  std::mt19937 size_rng(6000);
  std::uniform_int_distribution<int> dim(5, 20);
  for (uint32_t seed = 0; seed < 100; ++seed)
    masks.push_back(
        random_mask(dim(size_rng), dim(size_rng), 0.30 + 0.02 * (seed % 10), 6100 + seed));
  // crafted shapes
  {
    BinaryMask disk(17, 17);
    for (int y = 0; y < 17; ++y)
      for (int x = 0; x < 17; ++x) disk.set(x, y, (x - 8) * (x - 8) + (y - 8) * (y - 8) <= 36);
    masks.push_back(disk);
    BinaryMask square(12, 12);
    for (int y = 2; y < 10; ++y)
      for (int x = 2; x < 10; ++x) square.set(x, y, true);
    masks.push_back(square);
    BinaryMask diag(15, 15);
    for (int i = 0; i < 15; ++i) diag.set(i, i, true);
    masks.push_back(diag);
    BinaryMask plus(13, 13);
    for (int i = 1; i <= 11; ++i) {
      plus.set(i, 6, true);
      plus.set(6, i, true);
    }
    masks.push_back(plus);
    BinaryMask donut(15, 15);
    for (int y = 0; y < 15; ++y)
      for (int x = 0; x < 15; ++x) {
        const int d2 = (x - 7) * (x - 7) + (y - 7) * (y - 7);
        donut.set(x, y, d2 <= 36 && d2 >= 9);
      }
    masks.push_back(donut);
  }

  size_t mismatches = 0, regions_checked = 0;
  for (const auto& m : masks) {
    const auto regions = connected_components(m);
    const auto labels = oracle::flood_fill_labels(m);

    size_t total = 0;
    int max_label = 0;
    for (int l : labels) max_label = std::max(max_label, l);
    if (size_t(max_label) != regions.size()) ++mismatches;
    for (const auto& r : regions) {
      total += r.pixels.size();
      ++regions_checked;
      int expected_label = -1;
      for (const auto& [x, y] : r.pixels) {
        const int l = labels[m.index(x, y)];
        if (expected_label == -1) expected_label = l;
        if (l != expected_label) ++mismatches;
      }
      const double hull = oracle::hull_area_of_pixels(r.pixels);
      if (hull > 0.0 && std::fabs(hull - r.hull_area) > 1e-9) ++mismatches;
      const double steps = oracle::boundary_steps(r.pixels);
      if (std::fabs(steps * kPerimeterCorrection - r.perimeter) > 1e-9) ++mismatches;
      if (std::fabs(solidity(r) - double(r.area) / r.hull_area) > 1e-12) ++mismatches;
    }
    if (total != m.count()) ++mismatches;
  }
  report(5, "cca-hull-perimeter-oracle", mismatches == 0,
         std::to_string(regions_checked) + " regions, " + std::to_string(mismatches) +
             " mismatches");
}

// --- criterion 6 -----------------------------------------------------------

void criterion_svm() {
  bool ok = true;
  std::ostringstream os;

  // XOR
  {
    auto fv2 = [](double a, double b) {
      FeatureVector fv{};
      fv[0] = a;
      fv[1] = b;
      return fv;
    };
    std::vector<LabeledSample> xor_set = {{fv2(0, 0), LesionClass::Hard},
                                          {fv2(1, 1), LesionClass::Hard},
                                          {fv2(0, 1), LesionClass::Soft},
                                          {fv2(1, 0), LesionClass::Soft}};
    const SvmModel model = train(xor_set, {10.0, 1.0}, 1);
    for (const auto& [fv, cls] : xor_set)
      if (predict(model, fv).cls != cls) ok = false;
    os << "xor 1.0";
  }

  // 3-class blobs, 10-fold CV
  std::vector<LabeledSample> samples;
  {
    std::mt19937 rng(7000);
    std::normal_distribution<double> noise(0.0, 1.0);
    const double centers[3][2] = {{0, 0}, {6, 0}, {0, 6}};
    for (int c = 0; c < 3; ++c)
      for (int i = 0; i < 200; ++i) {
        FeatureVector fv{};
        fv[0] = centers[c][0] + noise(rng);
        fv[1] = centers[c][1] + noise(rng);
        for (int f = 2; f < kFeatureCount; ++f) fv[f] = 0.1 * noise(rng);
        samples.emplace_back(fv, LesionClass(c));
      }
    const CrossValResult cv = cross_validate(samples, {10.0, 0.25}, 10, 42);
    if (cv.mean_accuracy < 0.95) ok = false;
    os << ", cv " << cv.mean_accuracy;
  }

  // KKT residuals on the trained full model
  {
    const SvmHyperParams hp{10.0, 0.25};
    const SvmModel model = train(samples, hp, 1);
    double worst = 0.0;
    for (const auto& m : model.machines) {
      for (const auto& [fv, cls] : samples) {
        if (int(cls) != m.pos_class && int(cls) != m.neg_class) continue;
        const FeatureVector z = model.normalize(fv);
        const double y = int(cls) == m.pos_class ? 1.0 : -1.0;
        const double yf = y * decision_value(m, z, hp.gamma);
        double alpha = 0.0;
        for (size_t i = 0; i < m.support_vectors.size(); ++i)
          if (m.support_vectors[i] == z) {
            alpha = std::fabs(m.coeffs[i]);
            break;
          }
        double violation;
        if (alpha <= 1e-12) violation = std::max(0.0, 1.0 - yf);
        else if (alpha >= hp.C - 1e-9) violation = std::max(0.0, yf - 1.0);
        else violation = std::fabs(yf - 1.0);
        worst = std::max(worst, violation);
      }
    }
    if (worst > 1e-3) ok = false;
    os << ", kkt " << worst;

    // model round trip: bit-identical predictions
    const std::string path = "/tmp/retina_acceptance_model.json";
    save_model(model, path);
    const SvmModel back = load_model(path);
    std::mt19937 rng(7100);
    std::normal_distribution<double> noise(0.0, 4.0);
    for (int trial = 0; trial < 100; ++trial) {
      FeatureVector fv{};
      for (int f = 0; f < kFeatureCount; ++f) fv[f] = noise(rng);
      const PredictResult a = predict(model, fv);
      const PredictResult b = predict(back, fv);
      if (a.cls != b.cls || a.votes != b.votes || a.margin_sums != b.margin_sums) ok = false;
    }
    os << ", roundtrip exact";
  }
  report(6, "svm-smo", ok, os.str());
}

// --- criterion 7 -----------------------------------------------------------

void criterion_severity() {
  bool ok = true;

  const std::array<double, 4> areas = {1600, 4800, 8000, 11200};
  std::array<long long, 4> choices[4];
  for (int b = 0; b < 4; ++b) {
    const long long t = (long long)(areas[b] / 16.0);
    choices[b] = {0, t, t + 1, 4 * t};
  }
  for (int i0 = 0; i0 < 4; ++i0)
    for (int i1 = 0; i1 < 4; ++i1)
      for (int i2 = 0; i2 < 4; ++i2)
        for (int i3 = 0; i3 < 4; ++i3) {
          const std::array<long long, 4> n = {choices[0][i0], choices[1][i1],
                                              choices[2][i2], choices[3][i3]};
          if (int(grade_from_counts(n, areas)) != oracle::severity_rank(n, areas)) ok = false;
        }

  RetinalLandmarks lm;
  lm.image_width = 1500;
  lm.image_height = 1152;
  lm.fovea_x = 750;
  lm.fovea_y = 576;
  lm.od_x = 400;
  lm.od_y = 576;
  const auto [fovea, od] = build_circles(lm);
  if (fovea.radii != std::array<double, 4>{80, 160, 240, 320}) ok = false;

  // 200 random growth sequences on a smaller canvas
  RetinalLandmarks small;
  small.image_width = 160;
  small.image_height = 160;
  small.fovea_x = 60;
  small.fovea_y = 80;
  small.od_x = 120;
  small.od_y = 80;
  std::mt19937 rng(8000);
  std::uniform_int_distribution<int> coord(0, 159);
  for (int sequence = 0; sequence < 200 && ok; ++sequence) {
    BinaryMask grow(160, 160);
    Severity prev = Severity::None;
    for (int step = 0; step < 8; ++step) {
      for (int add = 0; add < 10; ++add) grow.set(coord(rng), coord(rng), true);
      const Severity cur = grade_combined(grow, small).grade;
      if (cur < prev) ok = false;
      prev = cur;
    }
  }
  report(7, "severity-rule-table", ok, "256 ladder cases, paper radii, 200 growth runs");
}

// --- criterion 8 -----------------------------------------------------------

void criterion_metrics() {
  bool ok = true;
  double worst = 0.0;
  for (uint32_t seed = 0; seed < 50; ++seed) {
    std::mt19937 rng(9000 + seed);
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    std::bernoulli_distribution bit(0.35);
    std::vector<std::pair<double, bool>> samples;
    bool has_pos = false, has_neg = false;
    for (int i = 0; i < 200; ++i) {
      const double s = std::round(uni(rng) * 25.0) / 25.0;
      const bool t = bit(rng);
      has_pos |= t;
      has_neg |= !t;
      samples.emplace_back(s, t);
    }
    if (!has_pos || !has_neg) continue;
    const double got = roc_from_samples(samples).auc;
    const double want = oracle::mann_whitney_auc(samples);
    worst = std::max(worst, std::fabs(got - want));
  }
  if (worst >= 1e-9) ok = false;

  {
    InterestMap scores(16, 1);
    BinaryMask truth(16, 1);
    for (int x = 0; x < 16; ++x) {
      scores.at(x, 0) = x >= 8 ? 0.9 : 0.1;
      truth.set(x, 0, x >= 8);
    }
    if (std::fabs(roc_auc(scores, truth).auc - 1.0) > 1e-12) ok = false;
    InterestMap flat(16, 1, 0.5);
    if (std::fabs(roc_auc(flat, truth).auc - 0.5) > 1e-12) ok = false;
  }
  std::ostringstream os;
  os << "worst |auc - U| = " << worst;
  report(8, "auc-mann-whitney", ok, os.str());
}

// --- criteria 9 and 10: phantom screening end to end ------------------------

struct PhantomCase {
  PhantomResult truth;
  DetectionResult det;
  double runtime = 0.0;
};

PhantomCase run_phantom(uint64_t seed, const PipelineConfig& cfg) {
  PhantomCase pc{generate_phantom([&] {
                   PhantomSpec spec;
                   spec.seed = seed;
                   return spec;
                 }()),
                 {},
                 0.0};
  const auto t0 = Clock::now();
  pc.det = detect_exudates(pc.truth.image, cfg);
  pc.runtime = seconds_since(t0);
  return pc;
}

void criteria_end_to_end() {
  const PipelineConfig cfg;
  ConfusionCounts total;
  int flare_images = 0, flare_clean = 0;
  double worst_runtime = 0.0;

  std::vector<PhantomCase> eval_cases;
  for (uint64_t seed = 2000; seed < 2020; ++seed) {
    PhantomCase pc = run_phantom(seed, cfg);
    worst_runtime = std::max(worst_runtime, pc.runtime);

    const BinaryMask fov = fov_mask(pc.truth.image);
    total += confusion(pc.det.mask_fullres, pc.truth.exudate_mask, &fov);

    if (pc.truth.flare_mask.count() > 0) {
      ++flare_images;
      long long overlap = 0;
      for (size_t i = 0; i < pc.det.mask_fullres.bits.size(); ++i)
        overlap += (pc.det.mask_fullres.bits[i] && pc.truth.flare_mask.bits[i]) ? 1 : 0;
      if (double(overlap) <= 0.10 * double(pc.truth.flare_mask.count())) ++flare_clean;
    }
    eval_cases.push_back(std::move(pc));
  }

  const Rates r = rates(total);
  const double se = r.se.value_or(0.0), pred = r.pred.value_or(0.0);
  std::ostringstream os;
  os << "SE " << se << ", PRED " << pred << ", flares clean " << flare_clean << "/"
     << flare_images << ", max runtime " << worst_runtime << " s";
  report(9, "phantom-screening", se >= 0.90 && pred >= 0.90 && flare_clean >= 18 &&
                                     flare_images == 20 && worst_runtime < 5.0,
         os.str());

  // --- criterion 10: classification on a disjoint training split ---
  std::vector<LabeledSample> train_set;
  for (uint64_t seed = 1000; seed < 1040; ++seed) {
    const PhantomCase pc = run_phantom(seed, cfg);
    const BinaryMask hard = resize_mask_nearest(pc.truth.hard_mask, pc.det.mask_working.width,
                                                pc.det.mask_working.height);
    const BinaryMask soft = resize_mask_nearest(pc.truth.soft_mask, pc.det.mask_working.width,
                                                pc.det.mask_working.height);
    for (const auto& reg : pc.det.candidates) {
      const FeatureVector fv = extract_features(reg, pc.det.working_rgb, pc.det.working_lab);
      train_set.emplace_back(fv, label_region(reg, &hard, &soft));
    }
  }

  const SvmModel model = train(train_set, {10.0, 0.25}, 7);
  size_t correct = 0, total_regions = 0;
  for (const auto& pc : eval_cases) {
    const BinaryMask hard = resize_mask_nearest(pc.truth.hard_mask, pc.det.mask_working.width,
                                                pc.det.mask_working.height);
    const BinaryMask soft = resize_mask_nearest(pc.truth.soft_mask, pc.det.mask_working.width,
                                                pc.det.mask_working.height);
    for (const auto& reg : pc.det.candidates) {
      const LesionClass truth_cls = label_region(reg, &hard, &soft);
      if (truth_cls == LesionClass::Outlier) continue;
      const FeatureVector fv = extract_features(reg, pc.det.working_rgb, pc.det.working_lab);
      ++total_regions;
      if (predict(model, fv).cls == truth_cls) ++correct;
    }
  }
  const double acc = total_regions > 0 ? double(correct) / double(total_regions) : 0.0;
  std::ostringstream os10;
  os10 << correct << "/" << total_regions << " regions, accuracy " << acc << " ("
       << train_set.size() << " training samples)";
  report(10, "phantom-classification", acc >= 0.85 && total_regions > 0, os10.str());
}

}  // namespace

int main() {
  std::printf("retina-kit acceptance suite\n");
  criterion_sauvola();
  criterion_morphology_laws();
  criterion_diffusion();
  criterion_scalespace();
  criterion_regions();
  criterion_svm();
  criterion_severity();
  criterion_metrics();
  criteria_end_to_end();
  if (failures > 0) {
    std::printf("%d criterion(s) failed\n", failures);
    return 1;
  }
  std::printf("all criteria passed\n");
  return 0;
}
