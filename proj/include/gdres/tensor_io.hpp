// SPDX-License-Identifier: Apache-2.0
//
// Tensor files.
//
// Native format: "GDTN1", u32 LE height, width, channels, then the planar
// data as f64 LE. Portable graymap/pixmap export maps values affinely,
//   value = offset + scale * pixel / maxval,
// and records offset, scale and maxval in a sidecar text file `<path>.txt`.
#pragma once

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <sstream>
#include <string>

#include "gdres/binary_io.hpp"
#include "gdres/error.hpp"
#include "gdres/tensor.hpp"

namespace gdres {

inline constexpr char kTensorMagic[] = "GDTN1";

inline io::Bytes encode_tensor(const Tensor& t) {
  io::Bytes out;
  io::put_str(out, kTensorMagic);
  io::put_u32(out, static_cast<std::uint32_t>(t.height()));
  io::put_u32(out, static_cast<std::uint32_t>(t.width()));
  io::put_u32(out, static_cast<std::uint32_t>(t.channels()));
  for (double v : t.data()) io::put_f64(out, v);
  return out;
}

inline Tensor decode_tensor(const io::Bytes& bytes) {
  io::Reader r(bytes);
  if (bytes.size() < 5 || r.str(5) != kTensorMagic) throw FormatError("not a GDTN1 tensor file");
  const std::uint64_t h = r.u32(), w = r.u32(), c = r.u32();
  if (h == 0 || w == 0 || c == 0) throw FormatError("tensor file has a zero dimension");
  // A byte-swapped header gives dimensions that disagree with the file size.
  if (h * w * c > r.remaining() / 8 || h * w * c * 8 != r.remaining())
    throw FormatError("tensor file size does not match its header (truncated or foreign byte order)");
  std::vector<double> data(static_cast<std::size_t>(h * w * c));
  for (double& v : data) v = r.f64();
  return Tensor(static_cast<int>(h), static_cast<int>(w), static_cast<int>(c), std::move(data));
}

inline void write_tensor(const std::filesystem::path& path, const Tensor& t) {
  io::write_file_atomic(path, encode_tensor(t));
}

inline Tensor read_tensor(const std::filesystem::path& path) { return decode_tensor(io::read_file(path)); }

struct ValueMapping {
  double offset = 0.0;
  double scale = 1.0;
};

/// Mapping that spreads [min, max] of `t` over the full pixel range.
inline ValueMapping auto_mapping(const Tensor& t) {
  const auto d = t.data();
  const auto [lo, hi] = std::minmax_element(d.begin(), d.end());
  ValueMapping m;
  m.offset = *lo;
  m.scale = *hi > *lo ? *hi - *lo : 1.0;
  return m;
}

inline std::filesystem::path sidecar_path(const std::filesystem::path& p) { return p.string() + ".txt"; }

/// Writes a 1-channel tensor as P5 or a 3-channel tensor as P6 with 8- or
/// 16-bit samples (16-bit samples big-endian, as the format requires).
inline void write_pnm(const std::filesystem::path& path, const Tensor& t, int bits,
                      std::optional<ValueMapping> mapping = std::nullopt) {
  if (bits != 8 && bits != 16) throw InvalidArgument("write_pnm: bits must be 8 or 16");
  if (t.channels() != 1 && t.channels() != 3) throw InvalidArgument("write_pnm: need 1 or 3 channels");
  const ValueMapping m = mapping.value_or(auto_mapping(t));
  const int maxval = bits == 8 ? 255 : 65535;
  std::string head = (t.channels() == 1 ? "P5\n" : "P6\n") + std::to_string(t.width()) + " " +
                     std::to_string(t.height()) + "\n" + std::to_string(maxval) + "\n";
  io::Bytes out(head.begin(), head.end());
  for (int y = 0; y < t.height(); ++y)
    for (int x = 0; x < t.width(); ++x)
      for (int c = 0; c < t.channels(); ++c) {
        const double q = std::round((t.at(c, y, x) - m.offset) / m.scale * maxval);
        const auto p = static_cast<std::uint32_t>(std::clamp(q, 0.0, static_cast<double>(maxval)));
        if (bits == 16) out.push_back(static_cast<unsigned char>(p >> 8));
        out.push_back(static_cast<unsigned char>(p & 0xff));
      }
  io::write_file_atomic(path, out);
  std::ostringstream side;
  side.precision(17);
  side << "offset=" << m.offset << "\nscale=" << m.scale << "\nmaxval=" << maxval << "\n";
  io::write_text_atomic(sidecar_path(path), side.str());
}

/// Reads P5/P6. Uses the sidecar mapping when present, else value =
/// pixel / maxval.
inline Tensor read_pnm(const std::filesystem::path& path) {
  const io::Bytes b = io::read_file(path);
  std::size_t pos = 0;
  auto token = [&]() {
    while (pos < b.size()) {
      if (b[pos] == '#') {
        while (pos < b.size() && b[pos] != '\n') ++pos;
      } else if (std::isspace(b[pos])) {
        ++pos;
      } else {
        break;
      }
    }
    std::string s;
    while (pos < b.size() && !std::isspace(b[pos])) s.push_back(static_cast<char>(b[pos++]));
    if (s.empty()) throw FormatError("truncated PNM header");
    return s;
  };
  const std::string magic = token();
  if (magic != "P5" && magic != "P6") throw FormatError("unsupported PNM type " + magic);
  const int channels = magic == "P5" ? 1 : 3;
  int w = 0, h = 0, maxval = 0;
  try {
    w = std::stoi(token());
    h = std::stoi(token());
    maxval = std::stoi(token());
  } catch (const std::exception&) {
    throw FormatError("malformed PNM header");
  }
  if (w < 1 || h < 1 || maxval < 1 || maxval > 65535) throw FormatError("bad PNM dimensions");
  ++pos;  // single whitespace before the raster
  const int bytes_per = maxval > 255 ? 2 : 1;
  const std::size_t need = static_cast<std::size_t>(w) * h * channels * bytes_per;
  if (b.size() < pos + need) throw FormatError("truncated PNM raster");
  ValueMapping m;
  m.scale = 1.0;
  const auto side = sidecar_path(path);
  if (std::filesystem::exists(side)) {
    std::istringstream in(io::read_text(side));
    std::string line;
    while (std::getline(in, line)) {
      const auto eq = line.find('=');
      if (eq == std::string::npos) continue;
      const std::string k = line.substr(0, eq);
      const double v = std::stod(line.substr(eq + 1));
      if (k == "offset") m.offset = v;
      if (k == "scale") m.scale = v;
    }
  }
  Tensor t(h, w, channels);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int c = 0; c < channels; ++c) {
        std::uint32_t p = b[pos++];
        if (bytes_per == 2) p = (p << 8) | b[pos++];
        t.at(c, y, x) = m.offset + m.scale * static_cast<double>(p) / maxval;
      }
  return t;
}

}  // namespace gdres
