#pragma once

#include <algorithm>
#include <cmath>

#include "retina/types.hpp"

namespace retina {

namespace detail {

// Catmull-Rom cubic (a = -0.5), interpolating.
inline double cubic_weight(double t) {
  constexpr double a = -0.5;
  t = std::fabs(t);
  if (t <= 1.0) return ((a + 2.0) * t - (a + 3.0)) * t * t + 1.0;
  if (t < 2.0) return ((a * t - 5.0 * a) * t + 8.0 * a) * t - 4.0 * a;
  return 0.0;
}

}  // namespace detail

/// Bicubic resample (Catmull-Rom, edge clamp); samples clamped to [0,1].
inline RasterImage resize_to(const RasterImage& img, int new_w, int new_h) {
  if (new_w <= 0 || new_h <= 0) throw ArgumentError("resize_to: bad target size");
  RasterImage out(new_w, new_h, img.channels, img.space);
  const double sx = double(img.width) / new_w;
  const double sy = double(img.height) / new_h;
  for (int y = 0; y < new_h; ++y) {
    const double src_y = (y + 0.5) * sy - 0.5;
    const int iy = int(std::floor(src_y));
    const double fy = src_y - iy;
    double wy[4];
    for (int j = 0; j < 4; ++j) wy[j] = detail::cubic_weight(fy - (j - 1));
    for (int x = 0; x < new_w; ++x) {
      const double src_x = (x + 0.5) * sx - 0.5;
      const int ix = int(std::floor(src_x));
      const double fx = src_x - ix;
      double wx[4];
      for (int i = 0; i < 4; ++i) wx[i] = detail::cubic_weight(fx - (i - 1));
      for (int c = 0; c < img.channels; ++c) {
        double acc = 0.0;
        for (int j = 0; j < 4; ++j) {
          const int yy = std::clamp(iy + j - 1, 0, img.height - 1);
          double row = 0.0;
          for (int i = 0; i < 4; ++i) {
            const int xx = std::clamp(ix + i - 1, 0, img.width - 1);
            row += wx[i] * img.at(xx, yy, c);
          }
          acc += wy[j] * row;
        }
        out.at(x, y, c) = std::clamp(acc, 0.0, 1.0);
      }
    }
  }
  return out;
}

/// Rescales so that max(width, height) becomes 400 (factor 400/max dim),
/// preserving aspect ratio. Identity when the image is already at 400.
inline RasterImage resize_for_processing(const RasterImage& img) {
  if (img.width < 8 || img.height < 8)
    throw ArgumentError("resize_for_processing: image smaller than 8 px");
  constexpr int kWorkingSize = 400;
  const double scale = double(kWorkingSize) / std::max(img.width, img.height);
  const int nw = std::max(1, int(std::lround(img.width * scale)));
  const int nh = std::max(1, int(std::lround(img.height * scale)));
  return resize_to(img, nw, nh);
}

/// Nearest-neighbor mask resample (for mapping masks between resolutions).
inline BinaryMask resize_mask_nearest(const BinaryMask& mask, int new_w, int new_h) {
  if (new_w <= 0 || new_h <= 0) throw ArgumentError("resize_mask_nearest: bad size");
  BinaryMask out(new_w, new_h);
  for (int y = 0; y < new_h; ++y) {
    const int sy = std::min(int((y + 0.5) * mask.height / new_h), mask.height - 1);
    for (int x = 0; x < new_w; ++x) {
      const int sx = std::min(int((x + 0.5) * mask.width / new_w), mask.width - 1);
      out.set(x, y, mask.at(sx, sy));
    }
  }
  return out;
}

}  // namespace retina
