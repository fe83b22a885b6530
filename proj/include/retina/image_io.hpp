#pragma once

#include <zlib.h>

#include <array>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "retina/types.hpp"

namespace retina {

namespace detail {

inline std::vector<uint8_t> read_file_bytes(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open file: " + path);
  f.seekg(0, std::ios::end);
  const auto n = f.tellg();
  f.seekg(0, std::ios::beg);
  std::vector<uint8_t> bytes(static_cast<size_t>(n));
  if (n > 0) f.read(reinterpret_cast<char*>(bytes.data()), n);
  if (!f) throw IoError("cannot read file: " + path);
  return bytes;
}

inline void write_file_bytes(const std::string& path, const std::vector<uint8_t>& bytes) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot open file for writing: " + path);
  f.write(reinterpret_cast<const char*>(bytes.data()),
          static_cast<std::streamsize>(bytes.size()));
  if (!f) throw IoError("cannot write file: " + path);
}

inline uint32_t be32(const uint8_t* p) {
  return (uint32_t(p[0]) << 24) | (uint32_t(p[1]) << 16) | (uint32_t(p[2]) << 8) | uint32_t(p[3]);
}

inline void push_be32(std::vector<uint8_t>& v, uint32_t x) {
  v.push_back(uint8_t(x >> 24));
  v.push_back(uint8_t(x >> 16));
  v.push_back(uint8_t(x >> 8));
  v.push_back(uint8_t(x));
}

constexpr std::array<uint8_t, 8> kPngSig = {137, 80, 78, 71, 13, 10, 26, 10};

inline int paeth(int a, int b, int c) {
  const int p = a + b - c;
  const int pa = std::abs(p - a), pb = std::abs(p - b), pc = std::abs(p - c);
  if (pa <= pb && pa <= pc) return a;
  if (pb <= pc) return b;
  return c;
}

struct PngRaw {
  int width = 0, height = 0;
  int bit_depth = 0;    // 8 or 16
  int channels = 0;     // after alpha drop: 1 or 3
  std::vector<uint16_t> samples;  // row-major, channels interleaved
};

inline PngRaw decode_png(const std::vector<uint8_t>& bytes, const std::string& path) {
  if (bytes.size() < 8 || !std::equal(kPngSig.begin(), kPngSig.end(), bytes.begin()))
    throw FormatError("not a PNG file: " + path);

  size_t pos = 8;
  int w = 0, h = 0, depth = 0, color_type = 0, interlace = 0;
  std::vector<uint8_t> idat;
  bool saw_ihdr = false, saw_iend = false;
  while (pos + 8 <= bytes.size()) {
    const uint32_t len = be32(&bytes[pos]);
    if (pos + 12 + len > bytes.size()) throw FormatError("truncated PNG chunk: " + path);
    const char* type = reinterpret_cast<const char*>(&bytes[pos + 4]);
    const uint8_t* data = &bytes[pos + 8];
    if (std::memcmp(type, "IHDR", 4) == 0) {
      if (len != 13) throw FormatError("bad IHDR: " + path);
      w = int(be32(data));
      h = int(be32(data + 4));
      depth = data[8];
      color_type = data[9];
      interlace = data[12];
      saw_ihdr = true;
    } else if (std::memcmp(type, "IDAT", 4) == 0) {
      idat.insert(idat.end(), data, data + len);
    } else if (std::memcmp(type, "IEND", 4) == 0) {
      saw_iend = true;
      break;
    }
    pos += 12 + len;
  }
  if (!saw_ihdr || !saw_iend || w <= 0 || h <= 0)
    throw FormatError("malformed PNG: " + path);
  if (depth != 8 && depth != 16)
    throw FormatError("unsupported PNG bit depth (want 8 or 16): " + path);
  if (interlace != 0) throw FormatError("interlaced PNG not supported: " + path);

  int src_channels = 0;
  switch (color_type) {
    case 0: src_channels = 1; break;  // gray
    case 2: src_channels = 3; break;  // rgb
    case 4: src_channels = 2; break;  // gray + alpha
    case 6: src_channels = 4; break;  // rgba
    default: throw FormatError("unsupported PNG color type: " + path);
  }

  const size_t bytes_per_sample = depth / 8;
  const size_t bpp = src_channels * bytes_per_sample;
  const size_t row_bytes = static_cast<size_t>(w) * bpp;
  const size_t raw_size = (row_bytes + 1) * h;

  std::vector<uint8_t> raw(raw_size);
  uLongf dst_len = raw_size;
  const int zrc = uncompress(raw.data(), &dst_len, idat.data(), idat.size());
  if (zrc != Z_OK || dst_len != raw_size)
    throw FormatError("PNG inflate failed: " + path);

  // Undo per-row filters in place (output shifted to drop the filter byte).
  std::vector<uint8_t> prev_row(row_bytes, 0);
  std::vector<uint8_t> pix(static_cast<size_t>(h) * row_bytes);
  for (int y = 0; y < h; ++y) {
    const uint8_t filter = raw[(row_bytes + 1) * y];
    const uint8_t* src = &raw[(row_bytes + 1) * y + 1];
    uint8_t* dst = &pix[row_bytes * y];
    for (size_t i = 0; i < row_bytes; ++i) {
      const int a = i >= bpp ? dst[i - bpp] : 0;
      const int b = prev_row[i];
      const int c = i >= bpp ? prev_row[i - bpp] : 0;
      int v = src[i];
      switch (filter) {
        case 0: break;
        case 1: v += a; break;
        case 2: v += b; break;
        case 3: v += (a + b) / 2; break;
        case 4: v += paeth(a, b, c); break;
        default: throw FormatError("bad PNG filter type: " + path);
      }
      dst[i] = uint8_t(v & 0xff);
    }
    std::memcpy(prev_row.data(), dst, row_bytes);
  }

  PngRaw out;
  out.width = w;
  out.height = h;
  out.bit_depth = depth;
  out.channels = src_channels >= 3 ? 3 : 1;
  out.samples.resize(static_cast<size_t>(w) * h * out.channels);
  const int keep = out.channels;
  for (size_t px = 0; px < static_cast<size_t>(w) * h; ++px) {
    for (int c = 0; c < keep; ++c) {
      const size_t si = (px * src_channels + c) * bytes_per_sample;
      uint16_t v = depth == 8 ? pix[si] : uint16_t((pix[si] << 8) | pix[si + 1]);
      out.samples[px * keep + c] = v;
    }
  }
  return out;
}

inline std::vector<uint8_t> encode_png(int w, int h, int channels, int bit_depth,
                                       const std::vector<uint16_t>& samples) {
  const int color_type = channels == 3 ? 2 : 0;
  const size_t bytes_per_sample = bit_depth / 8;
  const size_t row_bytes = static_cast<size_t>(w) * channels * bytes_per_sample;
  std::vector<uint8_t> raw((row_bytes + 1) * h);
  for (int y = 0; y < h; ++y) {
    uint8_t* dst = &raw[(row_bytes + 1) * y];
    *dst++ = 0;  // filter: None
    for (int x = 0; x < w; ++x) {
      for (int c = 0; c < channels; ++c) {
        const uint16_t v = samples[(static_cast<size_t>(y) * w + x) * channels + c];
        if (bit_depth == 8) {
          *dst++ = uint8_t(v);
        } else {
          *dst++ = uint8_t(v >> 8);
          *dst++ = uint8_t(v & 0xff);
        }
      }
    }
  }

  uLongf bound = compressBound(raw.size());
  std::vector<uint8_t> compressed(bound);
  if (compress2(compressed.data(), &bound, raw.data(), raw.size(), 6) != Z_OK)
    throw IoError("PNG deflate failed");
  compressed.resize(bound);

  std::vector<uint8_t> out(kPngSig.begin(), kPngSig.end());
  auto chunk = [&out](const char* type, const std::vector<uint8_t>& data) {
    push_be32(out, uint32_t(data.size()));
    const size_t start = out.size();
    out.insert(out.end(), type, type + 4);
    out.insert(out.end(), data.begin(), data.end());
    const uint32_t crc = uint32_t(
        crc32(0, out.data() + start, uInt(out.size() - start)));
    push_be32(out, crc);
  };

  std::vector<uint8_t> ihdr;
  push_be32(ihdr, uint32_t(w));
  push_be32(ihdr, uint32_t(h));
  ihdr.push_back(uint8_t(bit_depth));
  ihdr.push_back(uint8_t(color_type));
  ihdr.push_back(0);  // compression
  ihdr.push_back(0);  // filter method
  ihdr.push_back(0);  // no interlace
  chunk("IHDR", ihdr);
  chunk("IDAT", compressed);
  chunk("IEND", {});
  return out;
}

inline RasterImage decode_ppm(const std::vector<uint8_t>& bytes, const std::string& path) {
  size_t pos = 2;  // past "P6"
  auto next_token = [&]() -> long {
    while (pos < bytes.size()) {
      if (std::isspace(bytes[pos])) {
        ++pos;
      } else if (bytes[pos] == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
      } else {
        break;
      }
    }
    long v = 0;
    bool any = false;
    while (pos < bytes.size() && std::isdigit(bytes[pos])) {
      v = v * 10 + (bytes[pos] - '0');
      ++pos;
      any = true;
    }
    if (!any) throw FormatError("bad PPM header: " + path);
    return v;
  };
  const long w = next_token();
  const long h = next_token();
  const long maxval = next_token();
  ++pos;  // single whitespace after maxval
  if (w <= 0 || h <= 0 || maxval <= 0 || maxval > 65535)
    throw FormatError("bad PPM dimensions: " + path);
  const int bps = maxval > 255 ? 2 : 1;
  const size_t need = static_cast<size_t>(w) * h * 3 * bps;
  if (bytes.size() < pos + need) throw FormatError("truncated PPM raster: " + path);

  RasterImage img(int(w), int(h), 3, ColorSpace::RGB);
  const double scale = 1.0 / double(maxval);
  for (size_t i = 0; i < static_cast<size_t>(w) * h * 3; ++i) {
    uint32_t v;
    if (bps == 1) {
      v = bytes[pos + i];
    } else {
      v = (uint32_t(bytes[pos + 2 * i]) << 8) | bytes[pos + 2 * i + 1];
    }
    img.data[i] = double(v) * scale;
  }
  return img;
}

}  // namespace detail

/// Loads an 8/16-bit PNG or binary PPM (P6) as a normalized RGB image.
/// Grayscale sources are replicated to three channels; alpha is dropped.
inline RasterImage load_image(const std::string& path) {
  const auto bytes = detail::read_file_bytes(path);
  if (bytes.size() >= 8 &&
      std::equal(detail::kPngSig.begin(), detail::kPngSig.end(), bytes.begin())) {
    const auto png = detail::decode_png(bytes, path);
    RasterImage img(png.width, png.height, 3, ColorSpace::RGB);
    const double scale = png.bit_depth == 8 ? 1.0 / 255.0 : 1.0 / 65535.0;
    for (size_t px = 0; px < img.pixel_count(); ++px) {
      for (int c = 0; c < 3; ++c) {
        const uint16_t v = png.channels == 3 ? png.samples[px * 3 + c] : png.samples[px];
        img.data[px * 3 + c] = double(v) * scale;
      }
    }
    return img;
  }
  if (bytes.size() >= 2 && bytes[0] == 'P' && bytes[1] == '6')
    return detail::decode_ppm(bytes, path);
  throw FormatError("unsupported image format: " + path);
}

/// Writes an RGB or Gray image as a PNG (8-bit by default).
inline void save_image(const RasterImage& img, const std::string& path, int bit_depth = 8) {
  if (img.space == ColorSpace::Lab)
    throw ArgumentError("save_image: convert Lab to RGB before saving");
  if (bit_depth != 8 && bit_depth != 16)
    throw ArgumentError("save_image: bit depth must be 8 or 16");
  const int maxv = bit_depth == 8 ? 255 : 65535;
  std::vector<uint16_t> samples(img.data.size());
  for (size_t i = 0; i < img.data.size(); ++i) {
    const double v = std::clamp(img.data[i], 0.0, 1.0);
    samples[i] = uint16_t(std::lround(v * maxv));
  }
  detail::write_file_bytes(
      path, detail::encode_png(img.width, img.height, img.channels, bit_depth, samples));
}

/// Writes a mask as an 8-bit grayscale PNG with values {0, 255}.
inline void save_mask(const BinaryMask& mask, const std::string& path) {
  std::vector<uint16_t> samples(mask.bits.size());
  for (size_t i = 0; i < mask.bits.size(); ++i) samples[i] = mask.bits[i] ? 255 : 0;
  detail::write_file_bytes(path,
                           detail::encode_png(mask.width, mask.height, 1, 8, samples));
}

/// Reads a mask PNG; a pixel is positive iff its value exceeds 127/255.
inline BinaryMask load_mask(const std::string& path) {
  const RasterImage img = load_image(path);
  BinaryMask mask(img.width, img.height);
  for (size_t px = 0; px < img.pixel_count(); ++px)
    mask.bits[px] = img.data[px * 3] > 127.0 / 255.0 ? 1 : 0;
  return mask;
}

}  // namespace retina
