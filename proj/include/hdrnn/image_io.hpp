#pragma once

// Radiance RGBE (.hdr), PFM and binary PPM codecs. Everything here works on
// in-memory byte buffers; the *_file helpers at the bottom add filesystem I/O.

#include <algorithm>
#include <array>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <span>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "hdrnn/error.hpp"
#include "hdrnn/image.hpp"

namespace hdrnn {

using Bytes = std::vector<std::uint8_t>;
using ByteView = std::span<const std::uint8_t>;

namespace detail {

inline std::string at_offset(std::size_t off) { return " (at byte " + std::to_string(off) + ")"; }

/// Sequential reader over a byte buffer that reports failures with offsets.
class ByteCursor {
 public:
  explicit ByteCursor(ByteView bytes) : bytes_(bytes) {}

  std::size_t offset() const { return pos_; }
  bool done() const { return pos_ >= bytes_.size(); }
  std::size_t remaining() const { return bytes_.size() - pos_; }

  std::uint8_t next(const char* what) {
    if (pos_ >= bytes_.size()) fail(ErrorCategory::truncation, std::string("unexpected end of data in ") + what + at_offset(pos_));
    return bytes_[pos_++];
  }

  std::uint8_t peek(std::size_t ahead = 0) const { return bytes_[pos_ + ahead]; }

  ByteView take(std::size_t n, const char* what) {
    if (remaining() < n) fail(ErrorCategory::truncation, std::string("unexpected end of data in ") + what + at_offset(bytes_.size()));
    ByteView out = bytes_.subspan(pos_, n);
    pos_ += n;
    return out;
  }

  /// Reads up to (not including) the next '\n'. Returns false at end of data.
  bool line(std::string& out) {
    if (done()) return false;
    out.clear();
    while (pos_ < bytes_.size() && bytes_[pos_] != '\n') out.push_back(static_cast<char>(bytes_[pos_++]));
    if (pos_ < bytes_.size()) ++pos_;
    return true;
  }

  /// Netpbm-style token: skips whitespace and '#' comments.
  std::string token(const char* what) {
    for (;;) {
      while (pos_ < bytes_.size() && std::isspace(bytes_[pos_])) ++pos_;
      if (pos_ < bytes_.size() && bytes_[pos_] == '#') {
        while (pos_ < bytes_.size() && bytes_[pos_] != '\n') ++pos_;
        continue;
      }
      break;
    }
    std::string tok;
    while (pos_ < bytes_.size() && !std::isspace(bytes_[pos_])) tok.push_back(static_cast<char>(bytes_[pos_++]));
    if (tok.empty()) fail(ErrorCategory::truncation, std::string("missing ") + what + at_offset(pos_));
    return tok;
  }

  /// Consumes the single whitespace byte separating a header from its payload.
  void single_space(const char* what) {
    if (pos_ >= bytes_.size()) fail(ErrorCategory::truncation, std::string("missing payload after ") + what + at_offset(pos_));
    if (!std::isspace(bytes_[pos_])) fail(ErrorCategory::format, std::string("expected whitespace after ") + what + at_offset(pos_));
    ++pos_;
  }

 private:
  ByteView bytes_;
  std::size_t pos_ = 0;
};

template <typename T>
T parse_number(const std::string& tok, std::size_t off, const char* what) {
  T value{};
  auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), value);
  if (ec != std::errc() || ptr != tok.data() + tok.size())
    fail(ErrorCategory::format, std::string("invalid ") + what + " '" + tok + "'" + at_offset(off));
  return value;
}

inline void append(Bytes& out, std::string_view s) { out.insert(out.end(), s.begin(), s.end()); }

inline std::uint32_t float_bits(float f) {
  std::uint32_t u;
  std::memcpy(&u, &f, 4);
  return u;
}

inline float bits_float(std::uint32_t u) {
  float f;
  std::memcpy(&f, &u, 4);
  return f;
}

inline void put_le32(Bytes& out, std::uint32_t u) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(u >> (8 * i)));
}

inline std::uint32_t get_le32(const std::uint8_t* p) {
  return std::uint32_t(p[0]) | (std::uint32_t(p[1]) << 8) | (std::uint32_t(p[2]) << 16) | (std::uint32_t(p[3]) << 24);
}

inline std::uint32_t get_be32(const std::uint8_t* p) {
  return std::uint32_t(p[3]) | (std::uint32_t(p[2]) << 8) | (std::uint32_t(p[1]) << 16) | (std::uint32_t(p[0]) << 24);
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Radiance RGBE

/// Shared-exponent decode: byte * 2^(e-128) / 256, exponent 0 meaning black.
inline std::array<float, 3> rgbe_to_float(std::uint8_t r, std::uint8_t g, std::uint8_t b, std::uint8_t e) {
  if (e == 0) return {0.0f, 0.0f, 0.0f};
  const int shift = int(e) - 136;
  return {std::ldexp(float(r), shift), std::ldexp(float(g), shift), std::ldexp(float(b), shift)};
}

inline std::array<std::uint8_t, 4> float_to_rgbe(float r, float g, float b) {
  const double m = std::max({double(r), double(g), double(b)});
  if (m < 1e-32) return {0, 0, 0, 0};
  int e = 0;
  std::frexp(m, &e);  // m in [2^(e-1), 2^e)
  if (e + 128 > 255) fail(ErrorCategory::validation, "value " + std::to_string(m) + " exceeds the RGBE range");
  const double scale = std::ldexp(1.0, 8 - e);
  auto mant = [scale](float v) {
    return static_cast<std::uint8_t>(std::min(255.0, std::floor(double(v) * scale)));
  };
  return {mant(r), mant(g), mant(b), static_cast<std::uint8_t>(e + 128)};
}

inline RadianceMap decode_hdr(ByteView bytes) {
  detail::ByteCursor cur(bytes);
  std::string line;
  if (!cur.line(line) || !(line.rfind("#?RADIANCE", 0) == 0 || line.rfind("#?RGBE", 0) == 0))
    fail(ErrorCategory::format, "missing Radiance magic" + detail::at_offset(0));

  bool have_format = false;
  for (;;) {
    const std::size_t off = cur.offset();
    if (!cur.line(line)) fail(ErrorCategory::truncation, "header not terminated by a blank line" + detail::at_offset(off));
    if (line.empty()) break;
    if (line.rfind("FORMAT=", 0) == 0) {
      if (line != "FORMAT=32-bit_rle_rgbe")
        fail(ErrorCategory::format, "unsupported pixel format '" + line.substr(7) + "'" + detail::at_offset(off));
      have_format = true;
    }
  }
  if (!have_format) fail(ErrorCategory::format, "header lacks FORMAT=32-bit_rle_rgbe" + detail::at_offset(cur.offset()));

  const std::size_t res_off = cur.offset();
  if (!cur.line(line)) fail(ErrorCategory::truncation, "missing resolution line" + detail::at_offset(res_off));
  long long h = 0, w = 0;
  {
    char ya[3] = {}, xa[3] = {};
    char tail = 0;
    if (std::sscanf(line.c_str(), "%2s %lld %2s %lld %c", ya, &h, xa, &w, &tail) != 4 || std::string(ya) != "-Y" ||
        std::string(xa) != "+X" || h <= 0 || w <= 0 || h > (1 << 20) || w > (1 << 20))
      fail(ErrorCategory::format, "bad resolution line '" + line + "'" + detail::at_offset(res_off));
  }

  RadianceMap map(static_cast<std::size_t>(w), static_cast<std::size_t>(h));
  std::vector<std::uint8_t> planes(static_cast<std::size_t>(w) * 4);
  for (long long y = 0; y < h; ++y) {
    const std::size_t row_off = cur.offset();
    const bool rle = w >= 8 && w < 0x8000 && cur.remaining() >= 4 && cur.peek(0) == 2 && cur.peek(1) == 2 &&
                     (cur.peek(2) & 0x80) == 0;
    if (rle) {
      const long long encoded_w = (static_cast<long long>(cur.peek(2)) << 8) | cur.peek(3);
      if (encoded_w != w)
        fail(ErrorCategory::corruption, "RLE scanline width " + std::to_string(encoded_w) + " != image width" + detail::at_offset(row_off));
      cur.take(4, "scanline header");
      for (int c = 0; c < 4; ++c) {
        std::uint8_t* plane = planes.data() + c * w;
        long long x = 0;
        while (x < w) {
          const std::size_t run_off = cur.offset();
          const std::uint8_t count = cur.next("RLE scanline");
          if (count > 128) {
            const long long run = count - 128;
            const std::uint8_t value = cur.next("RLE run");
            if (x + run > w) fail(ErrorCategory::corruption, "RLE run overflows scanline" + detail::at_offset(run_off));
            std::memset(plane + x, value, static_cast<std::size_t>(run));
            x += run;
          } else {
            if (count == 0 || x + count > w)
              fail(ErrorCategory::corruption, "RLE literal overflows scanline" + detail::at_offset(run_off));
            ByteView lit = cur.take(count, "RLE literal");
            std::memcpy(plane + x, lit.data(), count);
            x += count;
          }
        }
      }
      for (long long x = 0; x < w; ++x) {
        auto px = rgbe_to_float(planes[x], planes[w + x], planes[2 * w + x], planes[3 * w + x]);
        for (int c = 0; c < 3; ++c) map.at(x, y, c) = px[c];
      }
    } else {
      ByteView row = cur.take(static_cast<std::size_t>(w) * 4, "flat scanline");
      for (long long x = 0; x < w; ++x) {
        const std::uint8_t* p = row.data() + 4 * x;
        auto px = rgbe_to_float(p[0], p[1], p[2], p[3]);
        for (int c = 0; c < 3; ++c) map.at(x, y, c) = px[c];
      }
    }
  }
  return map;
}

inline Bytes encode_hdr(const RadianceMap& map) {
  for (float v : map.data)
    if (!std::isfinite(v)) fail(ErrorCategory::validation, "cannot encode non-finite radiance");
  Bytes out;
  detail::append(out, "#?RADIANCE\nFORMAT=32-bit_rle_rgbe\n\n");
  detail::append(out, "-Y " + std::to_string(map.height) + " +X " + std::to_string(map.width) + "\n");
  out.reserve(out.size() + map.pixels() * 4);
  for (std::size_t i = 0; i < map.pixels(); ++i) {
    auto px = float_to_rgbe(std::max(0.0f, map.data[3 * i]), std::max(0.0f, map.data[3 * i + 1]),
                            std::max(0.0f, map.data[3 * i + 2]));
    out.insert(out.end(), px.begin(), px.end());
  }
  return out;
}

// ---------------------------------------------------------------------------
// PFM

inline RadianceMap read_pfm(ByteView bytes) {
  detail::ByteCursor cur(bytes);
  const std::string magic = cur.token("PFM magic");
  if (magic != "PF" && magic != "Pf") fail(ErrorCategory::format, "bad PFM magic '" + magic + "'" + detail::at_offset(0));
  const int channels = magic == "PF" ? 3 : 1;
  std::size_t off = cur.offset();
  const auto w = detail::parse_number<long long>(cur.token("width"), off, "PFM width");
  off = cur.offset();
  const auto h = detail::parse_number<long long>(cur.token("height"), off, "PFM height");
  off = cur.offset();
  const auto scale = detail::parse_number<double>(cur.token("scale"), off, "PFM scale");
  if (w <= 0 || h <= 0) fail(ErrorCategory::format, "non-positive PFM dimensions" + detail::at_offset(off));
  if (scale == 0.0 || !std::isfinite(scale)) fail(ErrorCategory::format, "PFM scale must be non-zero" + detail::at_offset(off));
  cur.single_space("PFM header");
  const bool little = scale < 0.0;

  const std::size_t count = static_cast<std::size_t>(w * h * channels);
  ByteView payload = cur.take(count * 4, "PFM payload");
  RadianceMap map(static_cast<std::size_t>(w), static_cast<std::size_t>(h));
  for (long long row = 0; row < h; ++row) {
    const std::size_t y = static_cast<std::size_t>(h - 1 - row);  // stored bottom-to-top
    for (long long x = 0; x < w; ++x) {
      for (int c = 0; c < 3; ++c) {
        const std::size_t idx = (static_cast<std::size_t>(row * w + x) * channels + (channels == 3 ? c : 0)) * 4;
        const std::uint32_t bits = little ? detail::get_le32(payload.data() + idx) : detail::get_be32(payload.data() + idx);
        map.at(x, y, c) = detail::bits_float(bits);
      }
    }
  }
  validate(map);
  return map;
}

inline Bytes write_pfm(const RadianceMap& map) {
  validate(map);
  Bytes out;
  detail::append(out, "PF\n" + std::to_string(map.width) + " " + std::to_string(map.height) + "\n-1.0\n");
  out.reserve(out.size() + map.data.size() * 4);
  for (std::size_t row = 0; row < map.height; ++row) {
    const std::size_t y = map.height - 1 - row;
    for (std::size_t x = 0; x < map.width; ++x)
      for (int c = 0; c < 3; ++c) detail::put_le32(out, detail::float_bits(map.at(x, y, c)));
  }
  return out;
}

// ---------------------------------------------------------------------------
// PPM (binary P6, 8-bit only)

inline LdrImage read_ppm(ByteView bytes) {
  detail::ByteCursor cur(bytes);
  const std::string magic = cur.token("PPM magic");
  if (magic != "P6") fail(ErrorCategory::format, "bad PPM magic '" + magic + "'" + detail::at_offset(0));
  std::size_t off = cur.offset();
  const auto w = detail::parse_number<long long>(cur.token("width"), off, "PPM width");
  off = cur.offset();
  const auto h = detail::parse_number<long long>(cur.token("height"), off, "PPM height");
  off = cur.offset();
  const auto maxval = detail::parse_number<long long>(cur.token("maxval"), off, "PPM maxval");
  if (w <= 0 || h <= 0) fail(ErrorCategory::format, "non-positive PPM dimensions" + detail::at_offset(off));
  if (maxval != 255) fail(ErrorCategory::unsupported, "PPM maxval " + std::to_string(maxval) + " (only 255 is supported)");
  cur.single_space("PPM header");
  LdrImage img(static_cast<std::size_t>(w), static_cast<std::size_t>(h));
  ByteView payload = cur.take(img.data.size(), "PPM payload");
  std::copy(payload.begin(), payload.end(), img.data.begin());
  return img;
}

inline Bytes write_ppm(const LdrImage& img) {
  Bytes out;
  detail::append(out, "P6\n" + std::to_string(img.width) + " " + std::to_string(img.height) + "\n255\n");
  out.insert(out.end(), img.data.begin(), img.data.end());
  return out;
}

/// 8-bit rendition of a tone map (round half up).
inline LdrImage to_ldr(const ToneMap& tm) {
  LdrImage img(tm.width, tm.height);
  for (std::size_t i = 0; i < tm.data.size(); ++i) img.data[i] = quantize_unit(tm.data[i]);
  return img;
}

// ---------------------------------------------------------------------------
// Files

inline Bytes read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCategory::io, "cannot open '" + path.string() + "' for reading");
  Bytes out((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return out;
}

inline void write_file(const std::filesystem::path& path, ByteView bytes) {
  std::error_code ec;
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path(), ec);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorCategory::io, "cannot open '" + path.string() + "' for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) fail(ErrorCategory::io, "write to '" + path.string() + "' failed");
}

inline void write_text(const std::filesystem::path& path, std::string_view text) {
  write_file(path, ByteView(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

inline std::string read_text(const std::filesystem::path& path) {
  Bytes b = read_file(path);
  return std::string(b.begin(), b.end());
}

/// Loads .hdr or .pfm by extension.
inline RadianceMap load_radiance(const std::filesystem::path& path) {
  const auto ext = path.extension().string();
  if (ext == ".pfm") return read_pfm(read_file(path));
  return decode_hdr(read_file(path));
}

inline void save_radiance(const std::filesystem::path& path, const RadianceMap& map) {
  write_file(path, path.extension() == ".pfm" ? write_pfm(map) : encode_hdr(map));
}

inline std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

/// `<name>.exposure` next to `<name>.ppm`.
inline std::filesystem::path exposure_sidecar_path(const std::filesystem::path& ppm) {
  auto p = ppm;
  p.replace_extension(".exposure");
  return p;
}

inline void save_ldr(const std::filesystem::path& ppm, const LdrImage& img) {
  write_file(ppm, write_ppm(img));
  write_text(exposure_sidecar_path(ppm), format_double(img.exposure) + "\n");
}

inline LdrImage load_ldr(const std::filesystem::path& ppm) {
  LdrImage img = read_ppm(read_file(ppm));
  const auto sidecar = exposure_sidecar_path(ppm);
  if (std::filesystem::exists(sidecar)) {
    std::string text = read_text(sidecar);
    while (!text.empty() && std::isspace(static_cast<unsigned char>(text.back()))) text.pop_back();
    img.exposure = detail::parse_number<double>(text, 0, "exposure sidecar value");
    if (!(img.exposure > 0.0)) fail(ErrorCategory::validation, "exposure in '" + sidecar.string() + "' must be > 0");
  }
  return img;
}

}  // namespace hdrnn
