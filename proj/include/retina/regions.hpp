#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <unordered_map>
#include <utility>
#include <vector>

#include "retina/morphology.hpp"
#include "retina/types.hpp"

namespace retina {

// Chain-length correction for 8-connected boundary walks (Kulpa's constant).
// With it, rasterized disks measure a normalized circularity of ~1, which is
// what the flare-rejection gate expects.
constexpr double kPerimeterCorrection = 0.948;

struct Region {
  int label = 0;
  std::vector<std::pair<int, int>> pixels;
  long long area = 0;
  double perimeter = 0.0;  // corrected 8-connected boundary length
  // Digital convex-hull area: the number of pixels whose centers lie inside
  // the hull of the region's pixel centers. Convex digitized shapes then
  // score a solidity of exactly 1.
  double hull_area = 0.0;
  double centroid_x = 0.0, centroid_y = 0.0;
  int bbox_x0 = 0, bbox_y0 = 0, bbox_x1 = 0, bbox_y1 = 0;  // inclusive
  double eccentricity = 0.0;
  double major_axis = 0.0, minor_axis = 0.0;
  double extent = 0.0;
  double mean_edge_gradient = 0.0;  // filled by feature extraction

  int bbox_width() const { return bbox_x1 - bbox_x0 + 1; }
  int bbox_height() const { return bbox_y1 - bbox_y0 + 1; }
};

inline double solidity(const Region& r) {
  if (r.area < 1) throw ArgumentError("solidity: empty region");
  return double(r.area) / r.hull_area;
}

inline double compactness(const Region& r) {
  if (!(r.perimeter > 0.0)) throw ArgumentError("compactness: zero perimeter");
  return double(r.area) / (r.perimeter * r.perimeter);
}

/// 4*pi*A/P^2; close to 1 for disk-like regions.
inline double circularity(const Region& r) {
  return 4.0 * 3.14159265358979323846 * compactness(r);
}

namespace detail {

// Moore-neighbor boundary walk with sqrt(2)-weighted diagonal steps. The
// walk state (pixel, last empty neighbor) is deterministic, so the outer
// contour length is the length of the walk's limit cycle.
inline double trace_boundary_steps(const std::vector<uint8_t>& in, int w, int h,
                                   int sx, int sy) {
  static const int DX[8] = {1, 1, 0, -1, -1, -1, 0, 1};
  static const int DY[8] = {0, 1, 1, 1, 0, -1, -1, -1};
  const double kSqrt2 = std::sqrt(2.0);
  auto inside = [&](int x, int y) {
    return x >= 0 && x < w && y >= 0 && y < h && in[size_t(y) * w + x] != 0;
  };

  int px = sx, py = sy;        // current boundary pixel
  int ex = sx - 1, ey = sy;    // last empty cell scanned (start's W neighbor)
  auto pack = [&](int a, int b, int c, int d) {
    return (uint64_t(uint16_t(a)) << 48) | (uint64_t(uint16_t(b)) << 32) |
           (uint64_t(uint16_t(c)) << 16) | uint64_t(uint16_t(d));
  };

  std::unordered_map<uint64_t, double> seen;  // state -> accumulated length
  double len = 0.0;
  while (true) {
    const uint64_t state = pack(px, py, ex, ey);
    auto [it, fresh] = seen.emplace(state, len);
    if (!fresh) return len - it->second;  // closed the contour cycle

    int b = 0;
    for (int d = 0; d < 8; ++d)
      if (px + DX[d] == ex && py + DY[d] == ey) { b = d; break; }

    int j = -1;
    for (int i = 1; i <= 8; ++i) {
      const int cand = (b + i) % 8;
      const int nx = px + DX[cand], ny = py + DY[cand];
      if (inside(nx, ny)) { j = cand; break; }
      ex = nx;
      ey = ny;
    }
    if (j < 0) return 4.0 / kPerimeterCorrection;  // isolated pixel: unit square
    len += (j % 2 == 1) ? kSqrt2 : 1.0;
    px += DX[j];
    py += DY[j];
  }
}

// Convex hull (monotone chain) of integer points, counterclockwise, strict.
inline std::vector<std::pair<long long, long long>> convex_hull(
    std::vector<std::pair<long long, long long>> pts) {
  std::sort(pts.begin(), pts.end());
  pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
  const size_t n = pts.size();
  if (n < 3) return pts;
  auto cross = [](const auto& o, const auto& a, const auto& b) {
    return (a.first - o.first) * (b.second - o.second) -
           (a.second - o.second) * (b.first - o.first);
  };
  std::vector<std::pair<long long, long long>> hull(2 * n);
  size_t k = 0;
  for (size_t i = 0; i < n; ++i) {
    while (k >= 2 && cross(hull[k - 2], hull[k - 1], pts[i]) <= 0) --k;
    hull[k++] = pts[i];
  }
  const size_t lower = k + 1;
  for (size_t i = n - 1; i-- > 0;) {
    while (k >= lower && cross(hull[k - 2], hull[k - 1], pts[i]) <= 0) --k;
    hull[k++] = pts[i];
  }
  hull.resize(k - 1);
  return hull;
}

// Counts lattice points inside or on the hull polygon over the given bbox.
// All-integer cross products keep the test exact.
inline long long lattice_points_in_hull(
    const std::vector<std::pair<long long, long long>>& hull, int x0, int y0, int x1,
    int y1) {
  if (hull.size() < 3) return 0;
  long long count = 0;
  for (int y = y0; y <= y1; ++y) {
    for (int x = x0; x <= x1; ++x) {
      bool pos = false, neg = false;
      for (size_t i = 0; i < hull.size(); ++i) {
        const auto& a = hull[i];
        const auto& b = hull[(i + 1) % hull.size()];
        const long long cr = (b.first - a.first) * (y - a.second) -
                             (b.second - a.second) * (x - a.first);
        pos = pos || cr > 0;
        neg = neg || cr < 0;
      }
      if (!(pos && neg)) ++count;
    }
  }
  return count;
}

inline void fill_descriptors(Region& r) {
  long long sx = 0, sy = 0;
  r.bbox_x0 = r.bbox_y0 = INT32_MAX;
  r.bbox_x1 = r.bbox_y1 = INT32_MIN;
  for (const auto& [x, y] : r.pixels) {
    sx += x;
    sy += y;
    r.bbox_x0 = std::min(r.bbox_x0, x);
    r.bbox_y0 = std::min(r.bbox_y0, y);
    r.bbox_x1 = std::max(r.bbox_x1, x);
    r.bbox_y1 = std::max(r.bbox_y1, y);
  }
  r.area = (long long)r.pixels.size();
  r.centroid_x = double(sx) / r.area;
  r.centroid_y = double(sy) / r.area;
  r.extent = double(r.area) / (double(r.bbox_width()) * r.bbox_height());

  // Second-moment ellipse with the 1/12 per-pixel correction, axes scaled so
  // a filled ellipse reproduces its own axis lengths.
  double cxx = 0.0, cyy = 0.0, cxy = 0.0;
  for (const auto& [x, y] : r.pixels) {
    const double dx = x - r.centroid_x, dy = y - r.centroid_y;
    cxx += dx * dx;
    cyy += dy * dy;
    cxy += dx * dy;
  }
  cxx = cxx / r.area + 1.0 / 12.0;
  cyy = cyy / r.area + 1.0 / 12.0;
  cxy /= r.area;
  const double mid = (cxx + cyy) / 2.0;
  const double span = std::sqrt(std::max(mid * mid - (cxx * cyy - cxy * cxy), 0.0));
  const double l1 = mid + span, l2 = std::max(mid - span, 0.0);
  r.major_axis = 4.0 * std::sqrt(l1);
  r.minor_axis = 4.0 * std::sqrt(l2);
  r.eccentricity = l1 > 0.0 ? std::sqrt(std::max(1.0 - l2 / l1, 0.0)) : 0.0;

  // Local bitmap over the bbox for tracing and hull input.
  const int bw = r.bbox_width(), bh = r.bbox_height();
  std::vector<uint8_t> local(size_t(bw) * bh, 0);
  for (const auto& [x, y] : r.pixels)
    local[size_t(y - r.bbox_y0) * bw + (x - r.bbox_x0)] = 1;

  int tx = 0, ty = 0;  // topmost-leftmost pixel of the local bitmap
  for (size_t i = 0; i < local.size(); ++i)
    if (local[i]) {
      tx = int(i % bw);
      ty = int(i / bw);
      break;
    }
  r.perimeter =
      kPerimeterCorrection * trace_boundary_steps(local, bw, bh, tx, ty);

  // Hull over boundary pixel centers (interior pixels cannot be vertices).
  std::vector<std::pair<long long, long long>> boundary_pts;
  for (const auto& [x, y] : r.pixels) {
    const int lx = x - r.bbox_x0, ly = y - r.bbox_y0;
    bool interior = true;
    for (int dy = -1; dy <= 1 && interior; ++dy)
      for (int dx = -1; dx <= 1; ++dx) {
        const int nx = lx + dx, ny = ly + dy;
        if (nx < 0 || nx >= bw || ny < 0 || ny >= bh || !local[size_t(ny) * bw + nx]) {
          interior = false;
          break;
        }
      }
    if (!interior) boundary_pts.emplace_back(x, y);
  }
  const auto hull = convex_hull(std::move(boundary_pts));
  const long long inside =
      lattice_points_in_hull(hull, r.bbox_x0, r.bbox_y0, r.bbox_x1, r.bbox_y1);
  // Degenerate hulls (single pixels, straight lines) are trivially convex.
  r.hull_area = inside > 0 ? double(inside) : double(r.area);
}

}  // namespace detail

/// 8-connected component labeling; every set pixel lands in exactly one
/// region, with shape descriptors populated.
inline std::vector<Region> connected_components(const BinaryMask& mask) {
  std::vector<int> labels(mask.bits.size(), 0);
  std::vector<Region> regions;
  std::vector<std::pair<int, int>> stack;
  int next_label = 0;
  for (int y = 0; y < mask.height; ++y) {
    for (int x = 0; x < mask.width; ++x) {
      if (!mask.at(x, y) || labels[mask.index(x, y)] != 0) continue;
      Region r;
      r.label = ++next_label;
      stack.assign(1, {x, y});
      labels[mask.index(x, y)] = r.label;
      while (!stack.empty()) {
        const auto [cx, cy] = stack.back();
        stack.pop_back();
        r.pixels.emplace_back(cx, cy);
        for (int dy = -1; dy <= 1; ++dy)
          for (int dx = -1; dx <= 1; ++dx) {
            if (dx == 0 && dy == 0) continue;
            const int nx = cx + dx, ny = cy + dy;
            if (nx < 0 || nx >= mask.width || ny < 0 || ny >= mask.height) continue;
            if (!mask.at(nx, ny) || labels[mask.index(nx, ny)] != 0) continue;
            labels[mask.index(nx, ny)] = r.label;
            stack.emplace_back(nx, ny);
          }
      }
      detail::fill_descriptors(r);
      regions.push_back(std::move(r));
    }
  }
  return regions;
}

struct RegionFilterConfig {
  double min_solidity = 0.2;
  double max_circularity = 0.95;  // flare rejection: near-perfect circles go
  double min_area = 4.0;          // pixels
  double max_area = 0.02;         // fraction of image pixels when <= 1, else pixels

  double max_area_pixels(size_t image_pixels) const {
    return max_area <= 1.0 ? max_area * double(image_pixels) : max_area;
  }
};

/// Geometric and photometric outlier rejection. Keeps regions that are
/// reasonably solid, not circular enough to be a flare, inside the area
/// band, and brighter in green than the image-wide mean.
inline std::vector<Region> filter_candidates(const std::vector<Region>& regions,
                                             const InterestMap& dmap,
                                             const RasterImage& img,
                                             const RegionFilterConfig& cfg) {
  (void)dmap;
  if (img.channels != 3) throw ArgumentError("filter_candidates: image must be RGB");
  double green_mean = 0.0;
  for (size_t px = 0; px < img.pixel_count(); ++px) green_mean += img.data[px * 3 + 1];
  green_mean /= double(img.pixel_count());

  const double max_area = cfg.max_area_pixels(img.pixel_count());
  std::vector<Region> kept;
  for (const auto& r : regions) {
    if (double(r.area) < cfg.min_area || double(r.area) > max_area) continue;
    if (solidity(r) < cfg.min_solidity) continue;
    if (circularity(r) > cfg.max_circularity) continue;
    double region_green = 0.0;
    for (const auto& [x, y] : r.pixels) region_green += img.at(x, y, 1);
    region_green /= double(r.area);
    if (!(region_green > green_mean)) continue;
    kept.push_back(r);
  }
  return kept;
}

}  // namespace retina
