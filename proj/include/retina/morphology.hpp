#pragma once

#include <algorithm>
#include <limits>
#include <utility>
#include <vector>

#include "retina/types.hpp"

namespace retina {

/// Pixel-offset set defining a morphological operator; always contains (0,0).
struct StructuringElement {
  enum class Shape { Disk, Rect, Square };
  Shape shape = Shape::Disk;
  std::vector<std::pair<int, int>> offsets;

  static StructuringElement disk(int radius) {
    if (radius < 0) throw ArgumentError("disk SE: radius must be >= 0");
    StructuringElement se;
    se.shape = Shape::Disk;
    for (int dy = -radius; dy <= radius; ++dy)
      for (int dx = -radius; dx <= radius; ++dx)
        if (dx * dx + dy * dy <= radius * radius) se.offsets.emplace_back(dx, dy);
    return se;
  }

  static StructuringElement square(int side) {
    if (side < 1 || side % 2 == 0)
      throw ArgumentError("square SE: side must be odd and >= 1");
    StructuringElement se;
    se.shape = Shape::Square;
    const int r = side / 2;
    for (int dy = -r; dy <= r; ++dy)
      for (int dx = -r; dx <= r; ++dx) se.offsets.emplace_back(dx, dy);
    return se;
  }

  static StructuringElement rect(int width, int height) {
    if (width < 1 || height < 1) throw ArgumentError("rect SE: bad dimensions");
    StructuringElement se;
    se.shape = Shape::Rect;
    for (int dy = -(height - 1) / 2; dy <= height / 2; ++dy)
      for (int dx = -(width - 1) / 2; dx <= width / 2; ++dx)
        se.offsets.emplace_back(dx, dy);
    return se;
  }
};

namespace detail {

enum class MorphOp { Dilate, Erode };

// Grayscale dilation is a max-filter over reflected offsets; erosion a
// min-filter over direct offsets. Out-of-bounds samples are the identity
// element (-inf for max, +inf for min), i.e. they are ignored.
inline InterestMap morph(const InterestMap& m, const StructuringElement& se, MorphOp op) {
  InterestMap out(m.width, m.height);
  const bool dil = op == MorphOp::Dilate;
  for (int y = 0; y < m.height; ++y) {
    for (int x = 0; x < m.width; ++x) {
      double best = dil ? -std::numeric_limits<double>::infinity()
                        : std::numeric_limits<double>::infinity();
      for (const auto& [dx, dy] : se.offsets) {
        const int xx = dil ? x - dx : x + dx;
        const int yy = dil ? y - dy : y + dy;
        if (xx < 0 || xx >= m.width || yy < 0 || yy >= m.height) continue;
        const double v = m.at(xx, yy);
        best = dil ? std::max(best, v) : std::min(best, v);
      }
      out.at(x, y) = best;
    }
  }
  return out;
}

inline BinaryMask morph(const BinaryMask& m, const StructuringElement& se, MorphOp op) {
  BinaryMask out(m.width, m.height);
  const bool dil = op == MorphOp::Dilate;
  for (int y = 0; y < m.height; ++y) {
    for (int x = 0; x < m.width; ++x) {
      bool acc = !dil;
      for (const auto& [dx, dy] : se.offsets) {
        const int xx = dil ? x - dx : x + dx;
        const int yy = dil ? y - dy : y + dy;
        if (xx < 0 || xx >= m.width || yy < 0 || yy >= m.height) continue;
        const bool v = m.at(xx, yy);
        if (dil && v) { acc = true; break; }
        if (!dil && !v) { acc = false; break; }
      }
      out.set(x, y, acc);
    }
  }
  return out;
}

}  // namespace detail

template <typename MapT>
MapT dilate(const MapT& m, const StructuringElement& se) {
  return detail::morph(m, se, detail::MorphOp::Dilate);
}

template <typename MapT>
MapT erode(const MapT& m, const StructuringElement& se) {
  return detail::morph(m, se, detail::MorphOp::Erode);
}

template <typename MapT>
MapT open(const MapT& m, const StructuringElement& se) {
  return dilate(erode(m, se), se);
}

template <typename MapT>
MapT close(const MapT& m, const StructuringElement& se) {
  return erode(dilate(m, se), se);
}

/// Interest-map enhancement: pointwise max of closings with two disk SEs.
inline InterestMap enhance_interest_map(const InterestMap& m, int radius_a = 2,
                                        int radius_b = 3) {
  const InterestMap a = close(m, StructuringElement::disk(radius_a));
  const InterestMap b = close(m, StructuringElement::disk(radius_b));
  InterestMap out(m.width, m.height);
  for (size_t i = 0; i < out.values.size(); ++i)
    out.values[i] = std::max(a.values[i], b.values[i]);
  return out;
}

}  // namespace retina
