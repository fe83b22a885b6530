#pragma once

#include <algorithm>
#include <array>
#include <cmath>

#include "retina/types.hpp"

namespace retina {

namespace detail {

// sRGB companding and CIELAB under D65. The white point is taken as the
// row sums of the RGB->XYZ matrix so that (1,1,1) maps exactly to neutral.
constexpr double kXyz[3][3] = {
    {0.4124564, 0.3575761, 0.1804375},
    {0.2126729, 0.7151522, 0.0721750},
    {0.0193339, 0.1191920, 0.9503041},
};
constexpr double kWhite[3] = {
    kXyz[0][0] + kXyz[0][1] + kXyz[0][2],
    kXyz[1][0] + kXyz[1][1] + kXyz[1][2],
    kXyz[2][0] + kXyz[2][1] + kXyz[2][2],
};

inline double srgb_to_linear(double v) {
  return v <= 0.04045 ? v / 12.92 : std::pow((v + 0.055) / 1.055, 2.4);
}
inline double linear_to_srgb(double v) {
  return v <= 0.0031308 ? v * 12.92 : 1.055 * std::pow(v, 1.0 / 2.4) - 0.055;
}

inline double lab_f(double t) {
  constexpr double d = 6.0 / 29.0;
  return t > d * d * d ? std::cbrt(t) : t / (3.0 * d * d) + 4.0 / 29.0;
}
inline double lab_f_inv(double t) {
  constexpr double d = 6.0 / 29.0;
  return t > d ? t * t * t : 3.0 * d * d * (t - 4.0 / 29.0);
}

}  // namespace detail

/// Converts an RGB image to CIELAB (sRGB companding, D65 white point).
inline RasterImage rgb_to_lab(const RasterImage& img) {
  if (img.space != ColorSpace::RGB || img.channels != 3)
    throw ArgumentError("rgb_to_lab: input must be RGB");
  RasterImage out(img.width, img.height, 3, ColorSpace::Lab);
  for (size_t px = 0; px < img.pixel_count(); ++px) {
    double lin[3];
    for (int c = 0; c < 3; ++c) lin[c] = detail::srgb_to_linear(img.data[px * 3 + c]);
    double f[3];
    for (int i = 0; i < 3; ++i) {
      double xyz = 0.0;
      for (int c = 0; c < 3; ++c) xyz += detail::kXyz[i][c] * lin[c];
      f[i] = detail::lab_f(xyz / detail::kWhite[i]);
    }
    out.data[px * 3 + 0] = 116.0 * f[1] - 16.0;
    out.data[px * 3 + 1] = 500.0 * (f[0] - f[1]);
    out.data[px * 3 + 2] = 200.0 * (f[1] - f[2]);
  }
  return out;
}

/// Inverse of rgb_to_lab; output clamped to [0,1].
inline RasterImage lab_to_rgb(const RasterImage& img) {
  if (img.space != ColorSpace::Lab || img.channels != 3)
    throw ArgumentError("lab_to_rgb: input must be Lab");
  // Inverse of the XYZ matrix above (computed once, Cramer's rule).
  static const auto inv = [] {
    const auto& m = detail::kXyz;
    double det = 0.0;
    double r[3][3];
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j)
        r[i][j] = m[(j + 1) % 3][(i + 1) % 3] * m[(j + 2) % 3][(i + 2) % 3] -
                  m[(j + 1) % 3][(i + 2) % 3] * m[(j + 2) % 3][(i + 1) % 3];
    for (int c = 0; c < 3; ++c) det += m[0][c] * r[c][0];
    std::array<std::array<double, 3>, 3> out{};
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) out[i][j] = r[i][j] / det;
    return out;
  }();

  RasterImage out(img.width, img.height, 3, ColorSpace::RGB);
  for (size_t px = 0; px < img.pixel_count(); ++px) {
    const double L = img.data[px * 3 + 0];
    const double a = img.data[px * 3 + 1];
    const double b = img.data[px * 3 + 2];
    const double fy = (L + 16.0) / 116.0;
    const double xyz[3] = {
        detail::lab_f_inv(fy + a / 500.0) * detail::kWhite[0],
        detail::lab_f_inv(fy) * detail::kWhite[1],
        detail::lab_f_inv(fy - b / 200.0) * detail::kWhite[2],
    };
    for (int i = 0; i < 3; ++i) {
      double lin = 0.0;
      for (int c = 0; c < 3; ++c) lin += inv[i][c] * xyz[c];
      out.data[px * 3 + i] = std::clamp(detail::linear_to_srgb(lin), 0.0, 1.0);
    }
  }
  return out;
}

}  // namespace retina
