#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "retina/types.hpp"

namespace retina {

struct SauvolaParams {
  int window = 9;   // odd side length of the local window
  double c = 0.35;  // sensitivity, in [0.2, 0.5]

  void validate() const {
    if (window < 3 || window % 2 == 0)
      throw ArgumentError("sauvola: window must be odd and >= 3");
    if (!(c >= 0.2 && c <= 0.5)) throw ArgumentError("sauvola: c must be in [0.2, 0.5]");
  }
};

/// Summed-area tables of a map (values and squared values), enabling O(1)
/// rectangle sums via inclusion-exclusion.
struct IntegralStats {
  int width = 0, height = 0;
  std::vector<double> sum;    // (width+1) x (height+1)
  std::vector<double> sumsq;

  explicit IntegralStats(const InterestMap& m) : width(m.width), height(m.height) {
    const size_t stride = width + 1;
    sum.assign(stride * (height + 1), 0.0);
    sumsq.assign(stride * (height + 1), 0.0);
    for (int y = 0; y < height; ++y) {
      double row = 0.0, rowsq = 0.0;
      for (int x = 0; x < width; ++x) {
        const double v = m.at(x, y);
        row += v;
        rowsq += v * v;
        sum[(y + 1) * stride + x + 1] = sum[y * stride + x + 1] + row;
        sumsq[(y + 1) * stride + x + 1] = sumsq[y * stride + x + 1] + rowsq;
      }
    }
  }

  // Inclusive rectangle [x0,x1] x [y0,y1].
  double rect_sum(int x0, int y0, int x1, int y1) const {
    const size_t s = width + 1;
    return sum[(y1 + 1) * s + x1 + 1] - sum[y0 * s + x1 + 1] -
           sum[(y1 + 1) * s + x0] + sum[y0 * s + x0];
  }
  double rect_sumsq(int x0, int y0, int x1, int y1) const {
    const size_t s = width + 1;
    return sumsq[(y1 + 1) * s + x1 + 1] - sumsq[y0 * s + x1 + 1] -
           sumsq[(y1 + 1) * s + x0] + sumsq[y0 * s + x0];
  }
};

inline IntegralStats integral_stats(const InterestMap& m) { return IntegralStats(m); }

namespace detail {

// E[x^2] - E[x]^2 with round-off (negative or vanishing) clamped to zero, so
// flat windows report exactly zero deviation.
inline double window_variance(double mean_sq, double mu) {
  const double var = mean_sq - mu * mu;
  return var <= 1e-12 * std::max(1.0, mu * mu) ? 0.0 : var;
}

inline InterestMap pad_replicate(const InterestMap& m, int r) {
  InterestMap out(m.width + 2 * r, m.height + 2 * r);
  for (int y = 0; y < out.height; ++y) {
    const int sy = std::clamp(y - r, 0, m.height - 1);
    for (int x = 0; x < out.width; ++x)
      out.at(x, y) = m.at(std::clamp(x - r, 0, m.width - 1), sy);
  }
  return out;
}

}  // namespace detail

/// Sauvola local adaptive threshold: a pixel is set iff its value strictly
/// exceeds th(x,y) = m(x,y) * (1 + c * (s(x,y)/S - 1)), where m and s are
/// the window mean and standard deviation (replicated boundaries) and S is
/// the maximum window standard deviation over the whole map. A perfectly
/// flat map (S = 0) yields an all-false mask.
inline BinaryMask sauvola_threshold(const InterestMap& m, const SauvolaParams& p) {
  p.validate();
  if (p.window > m.width || p.window > m.height)
    throw ArgumentError("sauvola: window larger than image");
  for (double v : m.values)
    if (!std::isfinite(v) || v < 0.0)
      throw ArgumentError("sauvola: map must be finite and non-negative");

  const int r = p.window / 2;
  const InterestMap padded = detail::pad_replicate(m, r);
  const IntegralStats stats(padded);
  const double n = double(p.window) * p.window;

  InterestMap mean(m.width, m.height), sd(m.width, m.height);
  double sd_max = 0.0;
  for (int y = 0; y < m.height; ++y) {
    for (int x = 0; x < m.width; ++x) {
      // Window centered at (x,y) maps to [x, x+2r] x [y, y+2r] in the padded map.
      const double s1 = stats.rect_sum(x, y, x + 2 * r, y + 2 * r);
      const double s2 = stats.rect_sumsq(x, y, x + 2 * r, y + 2 * r);
      const double mu = s1 / n;
      mean.at(x, y) = mu;
      sd.at(x, y) = std::sqrt(detail::window_variance(s2 / n, mu));
      sd_max = std::max(sd_max, sd.at(x, y));
    }
  }

  BinaryMask out(m.width, m.height);
  if (sd_max == 0.0) return out;
  for (int y = 0; y < m.height; ++y) {
    for (int x = 0; x < m.width; ++x) {
      const double th = mean.at(x, y) * (1.0 + p.c * (sd.at(x, y) / sd_max - 1.0));
      out.set(x, y, m.at(x, y) > th);
    }
  }
  return out;
}

}  // namespace retina
