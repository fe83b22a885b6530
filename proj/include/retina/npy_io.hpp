#pragma once

#include <cstring>
#include <string>
#include <vector>

#include "retina/image_io.hpp"
#include "retina/types.hpp"

namespace retina {

// Lossless float64 grid dumps in NumPy .npy v1.0 format, little-endian.
// Used for intermediate-map dumps so a pipeline can be resumed bit-exactly.

inline void save_npy(const InterestMap& m, const std::string& path) {
  std::string header = "{'descr': '<f8', 'fortran_order': False, 'shape': (" +
                       std::to_string(m.height) + ", " + std::to_string(m.width) + "), }";
  const size_t base = 10 + header.size() + 1;
  header.append((64 - base % 64) % 64, ' ');
  header.push_back('\n');

  std::vector<uint8_t> bytes;
  const uint8_t magic[8] = {0x93, 'N', 'U', 'M', 'P', 'Y', 1, 0};
  bytes.insert(bytes.end(), magic, magic + 8);
  bytes.push_back(uint8_t(header.size() & 0xff));
  bytes.push_back(uint8_t(header.size() >> 8));
  bytes.insert(bytes.end(), header.begin(), header.end());
  const size_t off = bytes.size();
  bytes.resize(off + m.values.size() * sizeof(double));
  std::memcpy(bytes.data() + off, m.values.data(), m.values.size() * sizeof(double));
  detail::write_file_bytes(path, bytes);
}

inline InterestMap load_npy(const std::string& path) {
  const auto bytes = detail::read_file_bytes(path);
  const uint8_t magic[6] = {0x93, 'N', 'U', 'M', 'P', 'Y'};
  if (bytes.size() < 10 || std::memcmp(bytes.data(), magic, 6) != 0)
    throw FormatError("not an npy file: " + path);
  const size_t header_len = bytes[8] | (size_t(bytes[9]) << 8);
  if (bytes.size() < 10 + header_len) throw FormatError("truncated npy header: " + path);
  const std::string header(bytes.begin() + 10, bytes.begin() + 10 + header_len);
  if (header.find("'<f8'") == std::string::npos)
    throw FormatError("npy dtype must be <f8: " + path);

  const auto sp = header.find("'shape': (");
  if (sp == std::string::npos) throw FormatError("bad npy header: " + path);
  int h = 0, w = 0;
  if (std::sscanf(header.c_str() + sp, "'shape': (%d, %d)", &h, &w) != 2 || h <= 0 || w <= 0)
    throw FormatError("npy shape must be 2-D: " + path);

  InterestMap m(w, h);
  const size_t need = 10 + header_len + m.values.size() * sizeof(double);
  if (bytes.size() < need) throw FormatError("truncated npy data: " + path);
  std::memcpy(m.values.data(), bytes.data() + 10 + header_len,
              m.values.size() * sizeof(double));
  return m;
}

}  // namespace retina
