#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <string>
#include <vector>

#include "retina/regions.hpp"
#include "retina/types.hpp"

namespace retina {

enum class Severity { None = 0, Mild = 1, Moderate = 2, Severe = 3, Proliferate = 4 };

inline const char* severity_name(Severity s) {
  switch (s) {
    case Severity::None: return "none";
    case Severity::Mild: return "mild";
    case Severity::Moderate: return "moderate";
    case Severity::Severe: return "severe";
    default: return "proliferate";
  }
}

struct RetinalLandmarks {
  double fovea_x = 0.0, fovea_y = 0.0;
  double od_x = 0.0, od_y = 0.0;
  int image_width = 0;
  int image_height = 0;
};

constexpr int kSeverityBands = 4;

/// Concentric circles around one landmark with per-annulus pixel areas
/// (clipped to image bounds).
struct CircleSystem {
  double center_x = 0.0, center_y = 0.0;
  std::array<double, kSeverityBands> radii{};
  std::array<double, kSeverityBands> band_areas{};
};

namespace detail {

inline CircleSystem make_circles(double cx, double cy, double base_radius, double scale,
                                 int w, int h) {
  CircleSystem cs;
  cs.center_x = cx;
  cs.center_y = cy;
  for (int i = 0; i < kSeverityBands; ++i) cs.radii[i] = scale * base_radius * (i + 1);
  const double rmax = cs.radii[kSeverityBands - 1];
  const int x0 = std::max(0, int(std::floor(cx - rmax)) - 1);
  const int x1 = std::min(w - 1, int(std::ceil(cx + rmax)) + 1);
  const int y0 = std::max(0, int(std::floor(cy - rmax)) - 1);
  const int y1 = std::min(h - 1, int(std::ceil(cy + rmax)) + 1);
  for (int y = y0; y <= y1; ++y) {
    for (int x = x0; x <= x1; ++x) {
      const double d = std::hypot(x - cx, y - cy);
      for (int i = 0; i < kSeverityBands; ++i) {
        if (d <= cs.radii[i]) {
          cs.band_areas[i] += 1.0;
          break;
        }
      }
    }
  }
  return cs;
}

}  // namespace detail

/// Builds the two circle systems: fovea radii are multiples of 80 px and
/// optic-disc radii multiples of 55 px, both scaled by image_width / 1500.
inline std::pair<CircleSystem, CircleSystem> build_circles(const RetinalLandmarks& lm) {
  if (lm.image_width <= 0 || lm.image_height <= 0)
    throw ArgumentError("build_circles: bad image dimensions");
  auto inside = [&](double x, double y) {
    return x >= 0 && x < lm.image_width && y >= 0 && y < lm.image_height;
  };
  if (!inside(lm.fovea_x, lm.fovea_y) || !inside(lm.od_x, lm.od_y))
    throw ArgumentError("build_circles: landmark outside image bounds");
  const double scale = double(lm.image_width) / 1500.0;
  return {detail::make_circles(lm.fovea_x, lm.fovea_y, 80.0, scale, lm.image_width,
                               lm.image_height),
          detail::make_circles(lm.od_x, lm.od_y, 55.0, scale, lm.image_width,
                               lm.image_height)};
}

/// Exudate pixel count per annulus band of one circle system.
inline std::array<long long, kSeverityBands> band_counts(const BinaryMask& mask,
                                                         const CircleSystem& cs) {
  std::array<long long, kSeverityBands> counts{};
  for (int y = 0; y < mask.height; ++y) {
    for (int x = 0; x < mask.width; ++x) {
      if (!mask.at(x, y)) continue;
      const double d = std::hypot(x - cs.center_x, y - cs.center_y);
      for (int i = 0; i < kSeverityBands; ++i) {
        if (d <= cs.radii[i]) {
          counts[i]++;
          break;
        }
      }
    }
  }
  return counts;
}

/// Severity ladder over band counts n and thresholds t_i = band_area_i / 16:
/// proliferate when n1 > t1; severe when 0 < n1 <= t1 or n2 > t2; moderate
/// when 0 < n2 <= t2 or n3 > t3; mild when 0 < n3 <= t3 or n4 > 0; none
/// otherwise. The highest matching grade wins.
inline Severity grade_from_counts(const std::array<long long, kSeverityBands>& n,
                                  const std::array<double, kSeverityBands>& band_areas) {
  std::array<double, kSeverityBands> t{};
  for (int i = 0; i < kSeverityBands; ++i) t[i] = band_areas[i] / 16.0;
  if (double(n[0]) > t[0]) return Severity::Proliferate;
  if (n[0] > 0 || double(n[1]) > t[1]) return Severity::Severe;
  if (n[1] > 0 || double(n[2]) > t[2]) return Severity::Moderate;
  if (n[2] > 0 || n[3] > 0) return Severity::Mild;
  return Severity::None;
}

struct CenterGrade {
  Severity grade = Severity::None;
  std::array<long long, kSeverityBands> counts{};
};

inline CenterGrade grade(const BinaryMask& mask, const CircleSystem& cs) {
  CenterGrade g;
  g.counts = band_counts(mask, cs);
  g.grade = grade_from_counts(g.counts, cs.band_areas);
  return g;
}

struct SeverityWeights {
  double c1 = 0.5;
  double c2 = 0.5;
};

/// Continuous per-region score c1*A + c2/D, D floored at one pixel.
inline std::vector<double> severity_score(const std::vector<Region>& regions,
                                          const CircleSystem& cs,
                                          const SeverityWeights& w = {}) {
  if (!(w.c1 >= 0.0 && w.c1 <= 1.0 && w.c2 >= 0.0 && w.c2 <= 1.0))
    throw ArgumentError("severity_score: weights must lie in [0,1]");
  std::vector<double> scores;
  scores.reserve(regions.size());
  for (const auto& r : regions) {
    const double d =
        std::max(1.0, std::hypot(r.centroid_x - cs.center_x, r.centroid_y - cs.center_y));
    scores.push_back(w.c1 * double(r.area) + w.c2 / d);
  }
  return scores;
}

struct SeverityGrade {
  Severity grade = Severity::None;
  CenterGrade fovea;
  CenterGrade optic_disc;
};

/// Grades both circle systems and combines them with max.
inline SeverityGrade grade_combined(const BinaryMask& mask, const RetinalLandmarks& lm) {
  if (mask.width != lm.image_width || mask.height != lm.image_height)
    throw ArgumentError("grade_combined: mask dimensions do not match landmarks");
  const auto [fovea_cs, od_cs] = build_circles(lm);
  SeverityGrade out;
  out.fovea = grade(mask, fovea_cs);
  out.optic_disc = grade(mask, od_cs);
  out.grade = std::max(out.fovea.grade, out.optic_disc.grade);
  return out;
}

}  // namespace retina
