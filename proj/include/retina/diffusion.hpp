#pragma once

#include <algorithm>
#include <cmath>

#include "retina/types.hpp"

namespace retina {

struct DiffusionParams {
  double K = 0.1;       // diffusion constant, normalized-intensity units
  double alpha = 1.0;   // conductance exponent, > 0
  int iterations = 10;
  double dt = 0.15;     // explicit-scheme time step, stability bound 0.25

  void validate() const {
    if (!(K > 0.0)) throw ArgumentError("diffusion: K must be positive");
    if (!(alpha > 0.0)) throw ArgumentError("diffusion: alpha must be positive");
    if (iterations < 0) throw ArgumentError("diffusion: iterations must be >= 0");
    if (!(dt > 0.0 && dt <= 0.25)) throw ArgumentError("diffusion: dt must be in (0, 0.25]");
  }
};

/// Conductance c(g) = 1 / (1 + (g/K)^(1+alpha)); c(0) = 1, strictly decreasing.
inline double conductance(double g, double K, double alpha) {
  if (g < 0.0) throw ArgumentError("conductance: gradient magnitude must be >= 0");
  if (!(K > 0.0) || !(alpha > 0.0)) throw ArgumentError("conductance: bad parameters");
  return 1.0 / (1.0 + std::pow(g / K, 1.0 + alpha));
}

/// Edge-preserving smoothing: explicit Perona-Malik updates per channel on
/// 4-neighborhoods with replicated (Neumann) boundaries. The flux form keeps
/// the per-channel mean constant and respects the input extrema.
inline RasterImage diffuse(const RasterImage& img, const DiffusionParams& p) {
  if (img.space == ColorSpace::Lab)
    throw ArgumentError("diffuse: input must be RGB or Gray");
  p.validate();

  RasterImage cur = img;
  if (p.iterations == 0) return cur;
  const int w = img.width, h = img.height, nc = img.channels;
  RasterImage next = cur;

  for (int it = 0; it < p.iterations; ++it) {
    for (int c = 0; c < nc; ++c) {
      for (int y = 0; y < h; ++y) {
        const int yn = std::max(y - 1, 0);
        const int ys = std::min(y + 1, h - 1);
        for (int x = 0; x < w; ++x) {
          const int xw = std::max(x - 1, 0);
          const int xe = std::min(x + 1, w - 1);
          const double v = cur.at(x, y, c);
          const double gn = cur.at(x, yn, c) - v;
          const double gs = cur.at(x, ys, c) - v;
          const double ge = cur.at(xe, y, c) - v;
          const double gw = cur.at(xw, y, c) - v;
          const double flux = conductance(std::fabs(gn), p.K, p.alpha) * gn +
                              conductance(std::fabs(gs), p.K, p.alpha) * gs +
                              conductance(std::fabs(ge), p.K, p.alpha) * ge +
                              conductance(std::fabs(gw), p.K, p.alpha) * gw;
          next.at(x, y, c) = v + p.dt * flux;
        }
      }
    }
    std::swap(cur, next);
  }
  for (double& v : cur.data) v = std::clamp(v, 0.0, 1.0);
  return cur;
}

}  // namespace retina
