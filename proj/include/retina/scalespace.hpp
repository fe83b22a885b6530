#pragma once

#include <algorithm>
#include <cmath>
#include <future>
#include <vector>

#include "retina/types.hpp"

namespace retina {

struct ScaleSpaceParams {
  int num_scales = 10;
  double base_sigma = std::sqrt(2.0);
  double k = std::sqrt(2.0);   // ratio between consecutive scales
  bool normalize = true;       // gamma-normalized responses

  void validate() const {
    if (num_scales < 1) throw ArgumentError("scalespace: num_scales must be >= 1");
    if (!(base_sigma > 0.0)) throw ArgumentError("scalespace: base_sigma must be > 0");
    if (!(k > 1.0)) throw ArgumentError("scalespace: k must be > 1");
  }

  double sigma_at(int i) const { return base_sigma * std::pow(k, i); }
};

/// Sampled 1-D Gaussian, half-width ceil(3*sigma), coefficients summing to 1.
inline std::vector<double> gaussian_kernel(double sigma) {
  if (!(sigma > 0.0)) throw ArgumentError("gaussian_kernel: sigma must be > 0");
  const int r = int(std::ceil(3.0 * sigma));
  std::vector<double> k(2 * r + 1);
  double sum = 0.0;
  for (int i = -r; i <= r; ++i) {
    k[i + r] = std::exp(-0.5 * double(i) * double(i) / (sigma * sigma));
    sum += k[i + r];
  }
  for (double& v : k) v /= sum;
  return k;
}

/// Sampled first derivative of the normalized Gaussian: -(x / sigma^2) G(x).
/// Antisymmetric, so coefficients sum to zero exactly.
inline std::vector<double> gaussian_derivative_kernel(double sigma) {
  auto g = gaussian_kernel(sigma);
  const int r = int(g.size() / 2);
  for (int i = -r; i <= r; ++i) g[i + r] *= -double(i) / (sigma * sigma);
  return g;
}

namespace detail {

inline InterestMap convolve_rows(const InterestMap& m, const std::vector<double>& k) {
  const int r = int(k.size() / 2);
  InterestMap out(m.width, m.height);
  for (int y = 0; y < m.height; ++y) {
    const double* row = &m.values[size_t(y) * m.width];
    for (int x = 0; x < m.width; ++x) {
      double acc = 0.0;
      for (int i = -r; i <= r; ++i) {
        const int xx = std::clamp(x + i, 0, m.width - 1);
        acc += k[i + r] * row[xx];
      }
      out.at(x, y) = acc;
    }
  }
  return out;
}

inline InterestMap convolve_cols(const InterestMap& m, const std::vector<double>& k) {
  const int r = int(k.size() / 2);
  InterestMap out(m.width, m.height);
  for (int y = 0; y < m.height; ++y) {
    for (int x = 0; x < m.width; ++x) {
      double acc = 0.0;
      for (int i = -r; i <= r; ++i) {
        const int yy = std::clamp(y + i, 0, m.height - 1);
        acc += k[i + r] * m.at(x, yy);
      }
      out.at(x, y) = acc;
    }
  }
  return out;
}

inline InterestMap smooth(const InterestMap& m, double sigma) {
  const auto g = gaussian_kernel(sigma);
  return convolve_cols(convolve_rows(m, g), g);
}

inline void max_combine(InterestMap& acc, const InterestMap& m) {
  for (size_t i = 0; i < acc.values.size(); ++i)
    acc.values[i] = std::max(acc.values[i], m.values[i]);
}

}  // namespace detail

/// Gradient response at one scale: max(|dGx * I|, |dGy * I|), smoothed by
/// the same Gaussian. Left unscaled across scales: a step edge of height dI
/// responds as dI/(sigma*sqrt(2*pi)), so fine scales dominate for sharp
/// lesion edges while a smooth luminance ramp stays at slope level at every
/// scale. Multiplying by sigma would instead amplify ramps linearly and let
/// the coarsest scale flood the cross-scale max.
inline InterestMap derivative_response(const InterestMap& img, double sigma) {
  if (!(sigma > 0.0)) throw ArgumentError("derivative_response: sigma must be > 0");
  const auto g = gaussian_kernel(sigma);
  const auto d = gaussian_derivative_kernel(sigma);
  InterestMap dx = detail::convolve_cols(detail::convolve_rows(img, d), g);
  const InterestMap dy = detail::convolve_rows(detail::convolve_cols(img, d), g);
  for (size_t i = 0; i < dx.values.size(); ++i)
    dx.values[i] = std::max(std::fabs(dx.values[i]), std::fabs(dy.values[i]));
  return detail::smooth(dx, sigma);
}

/// Laplacian-of-Gaussian approximation by difference of Gaussians at
/// (sigma, k*sigma). The DoG divided by (k - 1) already approximates the
/// scale-normalized operator sigma^2 * Laplacian(G), so that division is the
/// whole gamma normalization here; adding another sigma^2 factor would let
/// coarse scales swamp the cross-scale max.
inline InterestMap log_response(const InterestMap& img, double sigma, double k,
                                bool normalize = true) {
  if (!(sigma > 0.0)) throw ArgumentError("log_response: sigma must be > 0");
  if (!(k > 1.0)) throw ArgumentError("log_response: k must be > 1");
  const InterestMap a = detail::smooth(img, sigma);
  const InterestMap b = detail::smooth(img, k * sigma);
  InterestMap out(img.width, img.height);
  const double scale = normalize ? 1.0 / (k - 1.0) : 1.0;
  for (size_t i = 0; i < out.values.size(); ++i)
    out.values[i] = std::fabs(b.values[i] - a.values[i]) * scale;
  return out;
}

/// Per-scale interest map: max over both filters and all channels.
inline InterestMap scale_interest_map(const std::vector<InterestMap>& planes,
                                      double sigma, double k, bool normalize) {
  InterestMap acc(planes.front().width, planes.front().height);
  for (const auto& plane : planes) {
    detail::max_combine(acc, derivative_response(plane, sigma));
    detail::max_combine(acc, log_response(plane, sigma, k, normalize));
  }
  return acc;
}

/// Decision map: pointwise max of filter responses over color channels,
/// filters, and scales.
inline InterestMap build_gimap(const RasterImage& img, const ScaleSpaceParams& p) {
  if (img.space != ColorSpace::RGB || img.channels != 3)
    throw ArgumentError("build_gimap: input must be RGB");
  p.validate();

  std::vector<InterestMap> planes;
  planes.reserve(3);
  for (int c = 0; c < 3; ++c) planes.push_back(channel_plane(img, c));

  std::vector<std::future<InterestMap>> jobs;
  jobs.reserve(p.num_scales);
  for (int i = 0; i < p.num_scales; ++i) {
    jobs.push_back(std::async(std::launch::async, [&planes, &p, i] {
      return scale_interest_map(planes, p.sigma_at(i), p.k, p.normalize);
    }));
  }
  InterestMap dmap(img.width, img.height);
  for (auto& job : jobs) detail::max_combine(dmap, job.get());
  return dmap;
}

}  // namespace retina
