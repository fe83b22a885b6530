#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace retina {

struct ArgumentError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};
struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct FormatError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum class ColorSpace { RGB, Lab, Gray };

/// Row-major multi-channel raster. RGB/Gray samples live in [0,1];
/// Lab keeps native ranges (L in [0,100], a and b in [-128,127]).
struct RasterImage {
  int width = 0;
  int height = 0;
  int channels = 0;
  ColorSpace space = ColorSpace::RGB;
  std::vector<double> data;

  RasterImage() = default;
  RasterImage(int w, int h, int c, ColorSpace s, double fill = 0.0)
      : width(w), height(h), channels(c), space(s),
        data(static_cast<size_t>(w) * h * c, fill) {
    if (w <= 0 || h <= 0 || (c != 1 && c != 3))
      throw ArgumentError("RasterImage: bad dimensions");
  }

  size_t index(int x, int y, int c = 0) const {
    return (static_cast<size_t>(y) * width + x) * channels + c;
  }
  double& at(int x, int y, int c = 0) { return data[index(x, y, c)]; }
  double at(int x, int y, int c = 0) const { return data[index(x, y, c)]; }
  size_t pixel_count() const { return static_cast<size_t>(width) * height; }

  /// Checks the type invariants; throws ArgumentError on violation.
  void validate() const {
    if (width <= 0 || height <= 0 || (channels != 1 && channels != 3))
      throw ArgumentError("RasterImage: bad dimensions");
    if (data.size() != static_cast<size_t>(width) * height * channels)
      throw ArgumentError("RasterImage: data length mismatch");
    const bool unit_range = (space != ColorSpace::Lab);
    for (double v : data) {
      if (!std::isfinite(v)) throw ArgumentError("RasterImage: non-finite sample");
      if (unit_range && (v < 0.0 || v > 1.0))
        throw ArgumentError("RasterImage: sample outside [0,1]");
    }
  }
};

/// One boolean per pixel, dimensions matching the image it annotates.
struct BinaryMask {
  int width = 0;
  int height = 0;
  std::vector<uint8_t> bits;

  BinaryMask() = default;
  BinaryMask(int w, int h, bool fill = false)
      : width(w), height(h), bits(static_cast<size_t>(w) * h, fill ? 1 : 0) {
    if (w <= 0 || h <= 0) throw ArgumentError("BinaryMask: bad dimensions");
  }

  size_t index(int x, int y) const { return static_cast<size_t>(y) * width + x; }
  bool at(int x, int y) const { return bits[index(x, y)] != 0; }
  void set(int x, int y, bool v) { bits[index(x, y)] = v ? 1 : 0; }
  size_t count() const {
    size_t n = 0;
    for (uint8_t b : bits) n += b;
    return n;
  }
  bool same_dims(const BinaryMask& o) const {
    return width == o.width && height == o.height;
  }
};

/// Single-channel non-negative response grid (the decision/interest map).
/// Also serves as the scratch grid type for map-level operators.
struct InterestMap {
  int width = 0;
  int height = 0;
  std::vector<double> values;

  InterestMap() = default;
  InterestMap(int w, int h, double fill = 0.0)
      : width(w), height(h), values(static_cast<size_t>(w) * h, fill) {
    if (w <= 0 || h <= 0) throw ArgumentError("InterestMap: bad dimensions");
  }

  size_t index(int x, int y) const { return static_cast<size_t>(y) * width + x; }
  double& at(int x, int y) { return values[index(x, y)]; }
  double at(int x, int y) const { return values[index(x, y)]; }
  size_t pixel_count() const { return static_cast<size_t>(width) * height; }

  double max_value() const {
    double m = 0.0;
    for (double v : values) m = std::max(m, v);
    return m;
  }
};

/// Extracts one plane of a multi-channel image as a Gray image.
inline RasterImage channel(const RasterImage& img, int idx) {
  if (idx < 0 || idx >= img.channels)
    throw ArgumentError("channel: index out of range");
  RasterImage out(img.width, img.height, 1, ColorSpace::Gray);
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x)
      out.at(x, y) = img.at(x, y, idx);
  return out;
}

/// Extracts one plane as an InterestMap-shaped grid (no color-space tag).
inline InterestMap channel_plane(const RasterImage& img, int idx) {
  if (idx < 0 || idx >= img.channels)
    throw ArgumentError("channel_plane: index out of range");
  InterestMap out(img.width, img.height);
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x)
      out.at(x, y) = img.at(x, y, idx);
  return out;
}

}  // namespace retina
