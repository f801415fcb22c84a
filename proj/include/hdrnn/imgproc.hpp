#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <vector>

#include "hdrnn/error.hpp"
#include "hdrnn/image.hpp"

namespace hdrnn {

// ---------------------------------------------------------------------------
// sRGB transfer

inline double srgb_decode_value(double v) {
  return v <= 0.04045 ? v / 12.92 : std::pow((v + 0.055) / 1.055, 2.4);
}

inline double srgb_encode_value(double linear) {
  const double v = std::clamp(linear, 0.0, 1.0);
  return v <= 0.0031308 ? 12.92 * v : 1.055 * std::pow(v, 1.0 / 2.4) - 0.055;
}

inline float srgb_decode(std::uint8_t code) { return static_cast<float>(srgb_decode_value(code / 255.0)); }

inline std::uint8_t srgb_encode(double linear) { return quantize_unit(srgb_encode_value(linear)); }

// ---------------------------------------------------------------------------
// CIE L*a*b*

struct Xyz {
  double x, y, z;
};

inline constexpr Xyz kD65{0.95047, 1.0, 1.08883};

namespace detail {

// Linear sRGB (D65) -> XYZ.
inline constexpr std::array<std::array<double, 3>, 3> kRgbToXyz{{
    {0.4124564, 0.3575761, 0.1804375},
    {0.2126729, 0.7151522, 0.0721750},
    {0.0193339, 0.1191920, 0.9503041},
}};

inline std::array<std::array<double, 3>, 3> invert3(const std::array<std::array<double, 3>, 3>& m) {
  const double det = m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0]) +
                     m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
  std::array<std::array<double, 3>, 3> r{};
  r[0][0] = (m[1][1] * m[2][2] - m[1][2] * m[2][1]) / det;
  r[0][1] = (m[0][2] * m[2][1] - m[0][1] * m[2][2]) / det;
  r[0][2] = (m[0][1] * m[1][2] - m[0][2] * m[1][1]) / det;
  r[1][0] = (m[1][2] * m[2][0] - m[1][0] * m[2][2]) / det;
  r[1][1] = (m[0][0] * m[2][2] - m[0][2] * m[2][0]) / det;
  r[1][2] = (m[0][2] * m[1][0] - m[0][0] * m[1][2]) / det;
  r[2][0] = (m[1][0] * m[2][1] - m[1][1] * m[2][0]) / det;
  r[2][1] = (m[0][1] * m[2][0] - m[0][0] * m[2][1]) / det;
  r[2][2] = (m[0][0] * m[1][1] - m[0][1] * m[1][0]) / det;
  return r;
}

inline const std::array<std::array<double, 3>, 3>& xyz_to_rgb_matrix() {
  static const auto inv = invert3(kRgbToXyz);
  return inv;
}

constexpr double kLabDelta = 6.0 / 29.0;

inline double lab_f(double t) {
  return t > kLabDelta * kLabDelta * kLabDelta ? std::cbrt(t) : t / (3.0 * kLabDelta * kLabDelta) + 4.0 / 29.0;
}

inline double lab_f_inv(double u) {
  return u > kLabDelta ? u * u * u : 3.0 * kLabDelta * kLabDelta * (u - 4.0 / 29.0);
}

}  // namespace detail

/// Linear RGB (non-negative) to L*a*b*, all in double.
inline std::array<double, 3> rgb_to_lab_pixel(double r, double g, double b, const Xyz& white = kD65) {
  const auto& m = detail::kRgbToXyz;
  const double x = m[0][0] * r + m[0][1] * g + m[0][2] * b;
  const double y = m[1][0] * r + m[1][1] * g + m[1][2] * b;
  const double z = m[2][0] * r + m[2][1] * g + m[2][2] * b;
  const double fx = detail::lab_f(x / white.x), fy = detail::lab_f(y / white.y), fz = detail::lab_f(z / white.z);
  return {116.0 * fy - 16.0, 500.0 * (fx - fy), 200.0 * (fy - fz)};
}

inline std::array<double, 3> lab_to_rgb_pixel(double L, double a, double b, const Xyz& white = kD65) {
  const double fy = (L + 16.0) / 116.0;
  const double fx = fy + a / 500.0;
  const double fz = fy - b / 200.0;
  const double x = white.x * detail::lab_f_inv(fx), y = white.y * detail::lab_f_inv(fy), z = white.z * detail::lab_f_inv(fz);
  const auto& m = detail::xyz_to_rgb_matrix();
  return {m[0][0] * x + m[0][1] * y + m[0][2] * z, m[1][0] * x + m[1][1] * y + m[1][2] * z,
          m[2][0] * x + m[2][1] * y + m[2][2] * z};
}

struct LabImage {
  std::size_t width = 0;
  std::size_t height = 0;
  Plane L, a, b;
  /// Number of negative input samples clamped to zero during conversion.
  std::size_t clamped = 0;
};

inline LabImage rgb_to_lab(const RadianceMap& map, const Xyz& white = kD65) {
  LabImage lab{map.width, map.height, Plane(map.width, map.height), Plane(map.width, map.height),
               Plane(map.width, map.height), 0};
  for (std::size_t i = 0; i < map.pixels(); ++i) {
    std::array<double, 3> rgb{};
    for (int c = 0; c < 3; ++c) {
      const double v = map.data[3 * i + c];
      if (v < 0.0) ++lab.clamped;
      rgb[c] = std::max(0.0, v);
    }
    const auto px = rgb_to_lab_pixel(rgb[0], rgb[1], rgb[2], white);
    lab.L.data[i] = static_cast<float>(px[0]);
    lab.a.data[i] = static_cast<float>(px[1]);
    lab.b.data[i] = static_cast<float>(px[2]);
  }
  return lab;
}

/// Out-of-gamut results are clamped at zero to keep the radiance invariant.
inline RadianceMap lab_to_rgb(const LabImage& lab, const Xyz& white = kD65) {
  RadianceMap map(lab.width, lab.height);
  for (std::size_t i = 0; i < map.pixels(); ++i) {
    const auto px = lab_to_rgb_pixel(lab.L.data[i], lab.a.data[i], lab.b.data[i], white);
    for (int c = 0; c < 3; ++c) map.data[3 * i + c] = static_cast<float>(std::max(0.0, px[c]));
  }
  return map;
}

// ---------------------------------------------------------------------------
// Luminance and entropy

inline constexpr std::array<double, 3> kLumaWeights{0.2126, 0.7152, 0.0722};

inline double luminance_of(double r, double g, double b) {
  return kLumaWeights[0] * r + kLumaWeights[1] * g + kLumaWeights[2] * b;
}

template <typename Tag>
Plane luminance(const RgbImage<Tag>& img) {
  Plane out(img.width, img.height);
  for (std::size_t i = 0; i < img.pixels(); ++i)
    out.data[i] = static_cast<float>(luminance_of(img.data[3 * i], img.data[3 * i + 1], img.data[3 * i + 2]));
  return out;
}

struct Histogram {
  std::array<std::uint64_t, 256> bins{};
  std::uint64_t total = 0;
};

inline std::uint8_t luma_code(std::uint8_t r, std::uint8_t g, std::uint8_t b) {
  return static_cast<std::uint8_t>(std::clamp(round_half_up(luminance_of(r, g, b)), 0, 255));
}

inline Histogram luma_histogram(const LdrImage& img) {
  Histogram h;
  for (std::size_t i = 0; i < img.pixels(); ++i) {
    ++h.bins[luma_code(img.data[3 * i], img.data[3 * i + 1], img.data[3 * i + 2])];
    ++h.total;
  }
  return h;
}

/// Shannon entropy in bits of a normalized histogram.
inline double entropy(const Histogram& h) {
  if (h.total == 0) return 0.0;
  double e = 0.0;
  for (auto count : h.bins) {
    if (count == 0) continue;
    const double p = double(count) / double(h.total);
    e -= p * std::log2(p);
  }
  return std::max(0.0, e);
}

inline double entropy(const LdrImage& img) { return entropy(luma_histogram(img)); }

// ---------------------------------------------------------------------------
// Filtering

/// Brute-force bilateral filter with a square window of radius ceil(3 sigma_s)
/// and reflect padding. The result is written as the centre value plus a
/// weighted mean of differences, so constant regions come back bit-exact.
template <typename T>
PlaneT<T> bilateral_filter(const PlaneT<T>& in, double sigma_s, double sigma_r) {
  require(sigma_s > 0.0 && sigma_r > 0.0, ErrorCategory::parameter, "bilateral_filter: sigmas must be positive");
  const auto radius = static_cast<std::ptrdiff_t>(std::ceil(3.0 * sigma_s));
  const auto w = static_cast<std::ptrdiff_t>(in.width), h = static_cast<std::ptrdiff_t>(in.height);
  const std::size_t side = static_cast<std::size_t>(2 * radius + 1);
  std::vector<double> spatial(side * side);
  for (std::ptrdiff_t dy = -radius; dy <= radius; ++dy)
    for (std::ptrdiff_t dx = -radius; dx <= radius; ++dx)
      spatial[(dy + radius) * side + (dx + radius)] = std::exp(-double(dx * dx + dy * dy) / (2.0 * sigma_s * sigma_s));
  const double range_scale = -1.0 / (2.0 * sigma_r * sigma_r);

  PlaneT<T> out(in.width, in.height);
  for (std::ptrdiff_t y = 0; y < h; ++y) {
    for (std::ptrdiff_t x = 0; x < w; ++x) {
      const double centre = in.data[y * w + x];
      double wsum = 0.0, acc = 0.0, lo = centre, hi = centre;
      for (std::ptrdiff_t dy = -radius; dy <= radius; ++dy) {
        const std::ptrdiff_t yy = reflect_index(y + dy, h);
        for (std::ptrdiff_t dx = -radius; dx <= radius; ++dx) {
          const double v = in.data[yy * w + reflect_index(x + dx, w)];
          const double d = v - centre;
          const double wt = spatial[(dy + radius) * side + (dx + radius)] * std::exp(d * d * range_scale);
          wsum += wt;
          acc += wt * d;
          lo = std::min(lo, v);
          hi = std::max(hi, v);
        }
      }
      out.data[y * w + x] = static_cast<T>(std::clamp(centre + acc / wsum, lo, hi));
    }
  }
  return out;
}

}  // namespace hdrnn
