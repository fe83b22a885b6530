#pragma once

#include <array>
#include <cmath>

#include "retina/regions.hpp"
#include "retina/types.hpp"

namespace retina {

constexpr int kFeatureCount = 22;
using FeatureVector = std::array<double, kFeatureCount>;

// Feature layout:
//  0      area
//  1..3   mean R, G, B
//  4..6   std R, G, B
//  7..8   mean a, b (Lab)
//  9..10  std a, b
//  11     eccentricity
//  12     extent
//  13..14 major / minor axis length
//  15     convexity (solidity)
//  16     mean gradient magnitude at boundary pixels (green channel)
//  17     compactness A/P^2
//  18     energy: mean squared green intensity over the region
//  19..21 color contrast: mean R,G,B inside minus mean over a 3-px ring

inline void validate_features(const FeatureVector& fv) {
  for (double v : fv)
    if (!std::isfinite(v)) throw ArgumentError("feature vector has non-finite entries");
}

namespace detail {

inline double gradient_magnitude(const RasterImage& img, int x, int y, int c) {
  const int xm = std::max(x - 1, 0), xp = std::min(x + 1, img.width - 1);
  const int ym = std::max(y - 1, 0), yp = std::min(y + 1, img.height - 1);
  const double gx = (img.at(xp, y, c) - img.at(xm, y, c)) / 2.0;
  const double gy = (img.at(x, yp, c) - img.at(x, ym, c)) / 2.0;
  return std::sqrt(gx * gx + gy * gy);
}

}  // namespace detail

/// Builds the 22-dimensional descriptor of a candidate region from the
/// working RGB image and its Lab conversion.
inline FeatureVector extract_features(const Region& r, const RasterImage& img_rgb,
                                      const RasterImage& img_lab) {
  if (r.area < 1) throw ArgumentError("extract_features: empty region");
  if (img_rgb.space != ColorSpace::RGB || img_lab.space != ColorSpace::Lab)
    throw ArgumentError("extract_features: need RGB and Lab images");
  if (img_rgb.width != img_lab.width || img_rgb.height != img_lab.height)
    throw ArgumentError("extract_features: image dimensions differ");

  FeatureVector fv{};
  const double n = double(r.area);

  double mean_rgb[3] = {0, 0, 0}, sq_rgb[3] = {0, 0, 0};
  double mean_ab[2] = {0, 0}, sq_ab[2] = {0, 0};
  double energy = 0.0;
  for (const auto& [x, y] : r.pixels) {
    for (int c = 0; c < 3; ++c) {
      const double v = img_rgb.at(x, y, c);
      mean_rgb[c] += v;
      sq_rgb[c] += v * v;
    }
    for (int c = 0; c < 2; ++c) {
      const double v = img_lab.at(x, y, c + 1);
      mean_ab[c] += v;
      sq_ab[c] += v * v;
    }
    const double g = img_rgb.at(x, y, 1);
    energy += g * g;
  }
  for (int c = 0; c < 3; ++c) {
    mean_rgb[c] /= n;
    sq_rgb[c] = std::sqrt(std::max(sq_rgb[c] / n - mean_rgb[c] * mean_rgb[c], 0.0));
  }
  for (int c = 0; c < 2; ++c) {
    mean_ab[c] /= n;
    sq_ab[c] = std::sqrt(std::max(sq_ab[c] / n - mean_ab[c] * mean_ab[c], 0.0));
  }

  // Boundary pixels: region pixels with a 4-neighbor outside the region.
  BinaryMask in_region(img_rgb.width, img_rgb.height);
  for (const auto& [x, y] : r.pixels) in_region.set(x, y, true);
  double edge_grad = 0.0;
  long long edge_count = 0;
  for (const auto& [x, y] : r.pixels) {
    bool boundary = false;
    const int nbr[4][2] = {{1, 0}, {-1, 0}, {0, 1}, {0, -1}};
    for (const auto& d : nbr) {
      const int nx = x + d[0], ny = y + d[1];
      if (nx < 0 || nx >= img_rgb.width || ny < 0 || ny >= img_rgb.height ||
          !in_region.at(nx, ny)) {
        boundary = true;
        break;
      }
    }
    if (boundary) {
      edge_grad += detail::gradient_magnitude(img_rgb, x, y, 1);
      ++edge_count;
    }
  }
  if (edge_count > 0) edge_grad /= double(edge_count);

  // 3-px dilation ring around the region.
  const StructuringElement ring_se = StructuringElement::disk(3);
  double ring_mean[3] = {0, 0, 0};
  long long ring_count = 0;
  const BinaryMask dilated = dilate(in_region, ring_se);
  for (int y = std::max(r.bbox_y0 - 3, 0); y <= std::min(r.bbox_y1 + 3, img_rgb.height - 1); ++y)
    for (int x = std::max(r.bbox_x0 - 3, 0); x <= std::min(r.bbox_x1 + 3, img_rgb.width - 1); ++x)
      if (dilated.at(x, y) && !in_region.at(x, y)) {
        for (int c = 0; c < 3; ++c) ring_mean[c] += img_rgb.at(x, y, c);
        ++ring_count;
      }
  if (ring_count > 0)
    for (double& v : ring_mean) v /= double(ring_count);

  fv[0] = n;
  for (int c = 0; c < 3; ++c) fv[1 + c] = mean_rgb[c];
  for (int c = 0; c < 3; ++c) fv[4 + c] = sq_rgb[c];
  fv[7] = mean_ab[0];
  fv[8] = mean_ab[1];
  fv[9] = sq_ab[0];
  fv[10] = sq_ab[1];
  fv[11] = r.eccentricity;
  fv[12] = r.extent;
  fv[13] = r.major_axis;
  fv[14] = r.minor_axis;
  fv[15] = solidity(r);
  fv[16] = edge_grad;
  fv[17] = compactness(r);
  fv[18] = energy / n;
  for (int c = 0; c < 3; ++c)
    fv[19 + c] = ring_count > 0 ? mean_rgb[c] - ring_mean[c] : 0.0;
  validate_features(fv);
  return fv;
}

enum class LesionClass { Hard = 0, Soft = 1, Outlier = 2 };

inline const char* lesion_class_name(LesionClass c) {
  switch (c) {
    case LesionClass::Hard: return "hard";
    case LesionClass::Soft: return "soft";
    default: return "outlier";
  }
}

/// Training label for a candidate region: Hard/Soft when more than half of
/// its pixels fall in the corresponding truth mask, else Outlier.
inline LesionClass label_region(const Region& r, const BinaryMask* hard,
                                const BinaryMask* soft) {
  long long in_hard = 0, in_soft = 0;
  for (const auto& [x, y] : r.pixels) {
    if (hard && x < hard->width && y < hard->height && hard->at(x, y)) ++in_hard;
    if (soft && x < soft->width && y < soft->height && soft->at(x, y)) ++in_soft;
  }
  if (2 * in_hard > r.area && in_hard >= in_soft) return LesionClass::Hard;
  if (2 * in_soft > r.area) return LesionClass::Soft;
  return LesionClass::Outlier;
}

}  // namespace retina
