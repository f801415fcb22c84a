#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "hdrnn/error.hpp"

namespace hdrnn {

/// Row-major H x W x 3 float image. The tag keeps scene-referred radiance
/// and display-referred tone maps from being mixed up.
template <typename Tag>
struct RgbImage {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<float> data;

  RgbImage() = default;
  RgbImage(std::size_t w, std::size_t h, float fill = 0.0f) : width(w), height(h), data(w * h * 3, fill) {}

  std::size_t pixels() const { return width * height; }
  float& at(std::size_t x, std::size_t y, int c) { return data[(y * width + x) * 3 + c]; }
  float at(std::size_t x, std::size_t y, int c) const { return data[(y * width + x) * 3 + c]; }

  bool same_size(std::size_t w, std::size_t h) const { return w == width && h == height; }
  template <typename Other>
  bool same_size(const Other& o) const { return o.width == width && o.height == height; }

  friend bool operator==(const RgbImage&, const RgbImage&) = default;
};

struct RadianceTag {};
struct ToneTag {};

/// Linear scene irradiance, non-negative and finite.
using RadianceMap = RgbImage<RadianceTag>;
/// Display-referred image with every sample in [0,1].
using ToneMap = RgbImage<ToneTag>;

inline void validate(const RadianceMap& m) {
  require(m.data.size() == m.width * m.height * 3, ErrorCategory::validation,
          "radiance map: data size does not match dimensions");
  for (std::size_t i = 0; i < m.data.size(); ++i) {
    if (!std::isfinite(m.data[i]) || m.data[i] < 0.0f)
      fail(ErrorCategory::validation, "radiance map: sample " + std::to_string(i) + " is negative or non-finite");
  }
}

/// 8-bit exposure together with its relative exposure time.
struct LdrImage {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<std::uint8_t> data;
  double exposure = 1.0;

  LdrImage() = default;
  LdrImage(std::size_t w, std::size_t h, double dt = 1.0) : width(w), height(h), data(w * h * 3, 0), exposure(dt) {}

  std::size_t pixels() const { return width * height; }
  std::uint8_t& at(std::size_t x, std::size_t y, int c) { return data[(y * width + x) * 3 + c]; }
  std::uint8_t at(std::size_t x, std::size_t y, int c) const { return data[(y * width + x) * 3 + c]; }

  friend bool operator==(const LdrImage&, const LdrImage&) = default;
};

/// Single-channel row-major plane.
template <typename T>
struct PlaneT {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<T> data;

  PlaneT() = default;
  PlaneT(std::size_t w, std::size_t h, T fill = T(0)) : width(w), height(h), data(w * h, fill) {}

  T& at(std::size_t x, std::size_t y) { return data[y * width + x]; }
  T at(std::size_t x, std::size_t y) const { return data[y * width + x]; }

  friend bool operator==(const PlaneT&, const PlaneT&) = default;
};

using Plane = PlaneT<float>;

/// Mirror index into [0, n) without repeating the edge sample (dcb|abcd|cba).
inline std::ptrdiff_t reflect_index(std::ptrdiff_t i, std::ptrdiff_t n) {
  if (n == 1) return 0;
  const std::ptrdiff_t period = 2 * (n - 1);
  i %= period;
  if (i < 0) i += period;
  return i < n ? i : period - i;
}

/// Round half up, the quantization rule used for every float -> code step.
inline int round_half_up(double v) { return static_cast<int>(std::floor(v + 0.5)); }

inline std::uint8_t quantize_unit(double v) {
  return static_cast<std::uint8_t>(std::clamp(round_half_up(255.0 * v), 0, 255));
}

}  // namespace hdrnn
