#pragma once

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "retina/severity.hpp"
#include "retina/types.hpp"

namespace retina {

/// Desk-scale stand-in for a fundus photograph: shaded background with a
/// luminance ramp, dark vessel curves, sharp yellowish hard-exudate blobs,
/// feathered pale soft-exudate blobs, and circular flare artifacts.
struct PhantomSpec {
  int width = 400;
  int height = 400;
  double ramp_amplitude = 0.12;     // relative luminance ramp across the field
  int vessel_count = 5;
  double vessel_width_min = 2.0, vessel_width_max = 4.0;
  int hard_count = 4;
  double hard_radius_min = 10.0, hard_radius_max = 22.0;
  int soft_count = 2;
  double soft_radius_min = 12.0, soft_radius_max = 24.0;
  int flare_count = 2;
  double flare_radius_min = 6.0, flare_radius_max = 12.0;
  uint64_t seed = 1;

  void validate() const {
    if (width < 64 || height < 64) throw ArgumentError("phantom: size too small");
    if (hard_count < 0 || soft_count < 0 || flare_count < 0 || vessel_count < 0)
      throw ArgumentError("phantom: negative object count");
  }
};

struct PhantomResult {
  RasterImage image;
  BinaryMask exudate_mask;
  BinaryMask hard_mask;
  BinaryMask soft_mask;
  BinaryMask flare_mask;  // painted flare artifacts; not part of the truth
  RetinalLandmarks landmarks;
};

namespace detail {

// Star-shaped blob: radius varies with angle through low harmonics, with an
// optional anisotropic stretch. alpha() is 1 deep inside, 0 outside, and
// crosses 0.5 exactly on the nominal contour, which defines the truth mask.
struct Blob {
  double cx = 0.0, cy = 0.0;
  double r0 = 0.0;                 // mean radius
  std::array<double, 4> amp{};     // harmonics 2..5 amplitude
  std::array<double, 4> phase{};
  double stretch = 1.0;            // anisotropy along `angle`
  double angle = 0.0;
  double feather = 1.0;

  double max_radius() const {
    double a = 0.0;
    for (double v : amp) a += v;
    return r0 * (1.0 + a) * std::max(stretch, 1.0) + feather + 1.0;
  }

  double alpha(double x, double y) const {
    const double dx = x - cx, dy = y - cy;
    const double ca = std::cos(-angle), sa = std::sin(-angle);
    const double lx = (dx * ca - dy * sa) / stretch;
    const double ly = dx * sa + dy * ca;
    const double d = std::hypot(lx, ly);
    const double theta = std::atan2(ly, lx);
    double rb = 1.0;
    for (int m = 0; m < 4; ++m) rb += amp[m] * std::cos(double(m + 2) * theta + phase[m]);
    rb *= r0;
    const double t = (rb - d) / std::max(feather, 1e-6) + 0.5;
    return std::clamp(t, 0.0, 1.0);
  }
};

}  // namespace detail

inline PhantomResult generate_phantom(const PhantomSpec& spec) {
  spec.validate();
  std::mt19937_64 rng(spec.seed);
  auto uni = [&rng](double lo, double hi) {
    return std::uniform_real_distribution<double>(lo, hi)(rng);
  };

  const int w = spec.width, h = spec.height;
  const double cx = w / 2.0, cy = h / 2.0;
  const double fov_r = 0.48 * std::min(w, h);

  PhantomResult out{RasterImage(w, h, 3, ColorSpace::RGB), BinaryMask(w, h),
                    BinaryMask(w, h), BinaryMask(w, h), BinaryMask(w, h), {}};

  // Background: reddish base, radial shading, linear luminance ramp.
  const double ramp_dir = uni(0.0, 2.0 * 3.14159265358979323846);
  const double rdx = std::cos(ramp_dir), rdy = std::sin(ramp_dir);
  const double base[3] = {0.58, 0.30, 0.10};
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const double d = std::hypot(x - cx, y - cy);
      if (d > fov_r) continue;  // stays black outside the field of view
      const double shade = 1.0 - 0.22 * (d / fov_r) * (d / fov_r);
      const double u = ((x - cx) * rdx + (y - cy) * rdy) / fov_r;
      const double ramp = 1.0 + spec.ramp_amplitude * u;
      for (int c = 0; c < 3; ++c)
        out.image.at(x, y, c) = std::clamp(base[c] * shade * ramp, 0.0, 1.0);
    }
  }

  // Landmarks: fovea near the center, optic disc offset to one side.
  out.landmarks.image_width = w;
  out.landmarks.image_height = h;
  out.landmarks.fovea_x = cx + uni(-0.02 * w, 0.02 * w);
  out.landmarks.fovea_y = cy + uni(-0.02 * h, 0.02 * h);
  const double od_side = uni(0.0, 1.0) < 0.5 ? -1.0 : 1.0;
  out.landmarks.od_x = cx + od_side * 0.30 * w + uni(-0.02 * w, 0.02 * w);
  out.landmarks.od_y = cy + uni(-0.05 * h, 0.05 * h);

  // Vessels: quadratic Bezier curves fanning out from the disc position,
  // stamped as dark disks. Recorded so lesions can avoid them.
  BinaryMask vessel_zone(w, h);
  for (int v = 0; v < spec.vessel_count; ++v) {
    const double ang = uni(0.0, 2.0 * 3.14159265358979323846);
    const double reach = uni(0.55, 0.95) * fov_r;
    const double p0x = out.landmarks.od_x, p0y = out.landmarks.od_y;
    const double p2x = cx + reach * std::cos(ang), p2y = cy + reach * std::sin(ang);
    const double p1x = (p0x + p2x) / 2.0 + uni(-0.18, 0.18) * fov_r;
    const double p1y = (p0y + p2y) / 2.0 + uni(-0.18, 0.18) * fov_r;
    const double width = uni(spec.vessel_width_min, spec.vessel_width_max);
    const int steps = 300;
    for (int s = 0; s <= steps; ++s) {
      const double t = double(s) / steps;
      const double bx = (1 - t) * (1 - t) * p0x + 2 * (1 - t) * t * p1x + t * t * p2x;
      const double by = (1 - t) * (1 - t) * p0y + 2 * (1 - t) * t * p1y + t * t * p2y;
      const double rad = width / 2.0;
      for (int yy = int(by - rad - 1); yy <= int(by + rad + 1); ++yy) {
        for (int xx = int(bx - rad - 1); xx <= int(bx + rad + 1); ++xx) {
          if (xx < 0 || xx >= w || yy < 0 || yy >= h) continue;
          if (std::hypot(xx - bx, yy - by) > rad) continue;
          if (std::hypot(xx - cx, yy - cy) > fov_r) continue;
          out.image.at(xx, yy, 0) = 0.30;
          out.image.at(xx, yy, 1) = 0.09;
          out.image.at(xx, yy, 2) = 0.05;
          vessel_zone.set(xx, yy, true);
        }
      }
    }
  }

  struct Placed {
    double x, y, r;
  };
  std::vector<Placed> placed;
  auto try_place = [&](double radius, double margin, double& px, double& py) {
    for (int attempt = 0; attempt < 400; ++attempt) {
      const double ang = uni(0.0, 2.0 * 3.14159265358979323846);
      const double rad = uni(0.0, fov_r - radius - 8.0);
      const double x = cx + rad * std::cos(ang);
      const double y = cy + rad * std::sin(ang);
      bool ok = true;
      for (const auto& p : placed)
        if (std::hypot(x - p.x, y - p.y) < radius + p.r + margin) {
          ok = false;
          break;
        }
      if (!ok) continue;
      // keep clear of vessels
      const int x0 = std::max(0, int(x - radius - 3)), x1 = std::min(w - 1, int(x + radius + 3));
      const int y0 = std::max(0, int(y - radius - 3)), y1 = std::min(h - 1, int(y + radius + 3));
      for (int yy = y0; yy <= y1 && ok; ++yy)
        for (int xx = x0; xx <= x1; ++xx)
          if (vessel_zone.at(xx, yy) &&
              std::hypot(xx - x, yy - y) < radius + 3.0) {
            ok = false;
            break;
          }
      if (!ok) continue;
      px = x;
      py = y;
      placed.push_back({x, y, radius});
      return true;
    }
    return false;
  };

  auto paint_blob = [&](const detail::Blob& b, const double color[3], double strength,
                        BinaryMask* truth) {
    const double reach = b.max_radius();
    const int x0 = std::max(0, int(b.cx - reach)), x1 = std::min(w - 1, int(b.cx + reach));
    const int y0 = std::max(0, int(b.cy - reach)), y1 = std::min(h - 1, int(b.cy + reach));
    for (int y = y0; y <= y1; ++y) {
      for (int x = x0; x <= x1; ++x) {
        const double raw = b.alpha(x, y);
        const double a = raw * strength;
        if (a <= 0.0) continue;
        for (int c = 0; c < 3; ++c)
          out.image.at(x, y, c) =
              std::clamp(out.image.at(x, y, c) * (1.0 - a) + color[c] * a, 0.0, 1.0);
        if (truth && raw > 0.5) truth->set(x, y, true);
      }
    }
  };

  auto make_blob = [&](double rmin, double rmax, double feather, double stretch_max) {
    detail::Blob b;
    b.r0 = uni(rmin, rmax);
    for (int m = 0; m < 4; ++m) {
      b.amp[m] = uni(0.04, 0.15) / (m + 1);
      b.phase[m] = uni(0.0, 2.0 * 3.14159265358979323846);
    }
    b.stretch = uni(1.25, stretch_max);
    b.angle = uni(0.0, 3.14159265358979323846);
    b.feather = feather;
    return b;
  };

  // Shrink-and-retry keeps the requested object count even on crowded fields.
  auto place_or_shrink = [&](detail::Blob& b) {
    double px = 0.0, py = 0.0;
    for (int round = 0; round < 8; ++round) {
      if (try_place(b.max_radius(), 6.0, px, py)) {
        b.cx = px;
        b.cy = py;
        return true;
      }
      b.r0 *= 0.8;
    }
    return false;
  };

  for (int i = 0; i < spec.hard_count; ++i) {
    detail::Blob b = make_blob(spec.hard_radius_min, spec.hard_radius_max, 0.8, 1.8);
    if (!place_or_shrink(b)) continue;
    const double jitter = uni(-0.04, 0.04);
    const double color[3] = {0.93 + jitter, 0.86 + jitter, 0.22};
    paint_blob(b, color, 1.0, &out.hard_mask);
  }
  for (int i = 0; i < spec.soft_count; ++i) {
    detail::Blob b = make_blob(spec.soft_radius_min, spec.soft_radius_max, 4.0, 2.1);
    if (!place_or_shrink(b)) continue;
    const double color[3] = {0.90, 0.88, 0.78};
    paint_blob(b, color, 0.95, &out.soft_mask);
  }
  for (int i = 0; i < spec.flare_count; ++i) {
    detail::Blob b;  // flares are clean disks
    b.r0 = uni(spec.flare_radius_min, spec.flare_radius_max);
    b.feather = 1.0;
    if (!place_or_shrink(b)) continue;
    const double color[3] = {0.98, 0.97, 0.92};
    paint_blob(b, color, 1.0, &out.flare_mask);
  }

  for (size_t i = 0; i < out.exudate_mask.bits.size(); ++i)
    out.exudate_mask.bits[i] = (out.hard_mask.bits[i] || out.soft_mask.bits[i]) ? 1 : 0;
  return out;
}

}  // namespace retina
