#pragma once

// Base/detail Lab decomposition for the tone-mapping networks.

#include <array>
#include <cmath>

#include "hdrnn/error.hpp"
#include "hdrnn/image.hpp"
#include "hdrnn/imgproc.hpp"
#include "hdrnn/pipeline/models.hpp"

namespace hdrnn {

struct DecomposeParams {
  double sigma_s = 8.0;
  double sigma_r = 10.0;  // Lab L units
};

/// Network-space value = (v + offset) / scale.
struct ChannelScaling {
  double offset = 0.0;
  double scale = 1.0;
  double to_net(double v) const { return (v + offset) / scale; }
  double from_net(double v) const { return v * scale - offset; }
};

/// Indexed by TmChannel.
inline constexpr std::array<ChannelScaling, 4> kTmScalings{{{0.0, 100.0}, {0.0, 20.0}, {128.0, 255.0}, {128.0, 255.0}}};

/// L is snapped to this grid so base + detail reproduces it exactly.
inline constexpr double kLGrid = 0x1.0p-20;

inline double snap_l(double v) { return std::round(v / kLGrid) * kLGrid; }

/// Unscaled planes, indexed by TmChannel via `channel()`.
struct LabDecomposition {
  std::size_t width = 0, height = 0;
  PlaneT<double> L, base, detail, a, b;

  const PlaneT<double>& channel(TmChannel c) const {
    switch (c) {
      case TmChannel::L_base: return base;
      case TmChannel::L_detail: return detail;
      case TmChannel::a: return a;
      case TmChannel::b: return b;
    }
    return base;
  }

  PlaneT<double> scaled(TmChannel c) const {
    PlaneT<double> p = channel(c);
    const auto& s = kTmScalings[static_cast<int>(c)];
    for (auto& v : p.data) v = s.to_net(v);
    return p;
  }
};

/// Takes linear RGB (radiance, or a decoded tone map).
template <typename Tag>
LabDecomposition decompose_linear(const RgbImage<Tag>& img, const DecomposeParams& p, bool srgb_encoded) {
  LabDecomposition d;
  d.width = img.width;
  d.height = img.height;
  d.L = d.a = d.b = PlaneT<double>(img.width, img.height);
  for (std::size_t i = 0; i < img.pixels(); ++i) {
    std::array<double, 3> rgb{};
    for (int c = 0; c < 3; ++c) {
      const double v = std::max(0.0, double(img.data[3 * i + c]));
      rgb[c] = srgb_encoded ? srgb_decode_value(v) : v;
    }
    const auto lab = rgb_to_lab_pixel(rgb[0], rgb[1], rgb[2]);
    d.L.data[i] = snap_l(lab[0]);
    d.a.data[i] = lab[1];
    d.b.data[i] = lab[2];
  }
  d.base = bilateral_filter(d.L, p.sigma_s, p.sigma_r);
  d.detail = PlaneT<double>(img.width, img.height);
  for (std::size_t i = 0; i < d.L.data.size(); ++i) {
    d.base.data[i] = snap_l(d.base.data[i]);
    d.detail.data[i] = d.L.data[i] - d.base.data[i];
  }
  return d;
}

inline LabDecomposition decompose_radiance(const RadianceMap& map, const DecomposeParams& p = {}) {
  return decompose_linear(map, p, false);
}

inline LabDecomposition decompose_tone_map(const ToneMap& tm, const DecomposeParams& p = {}) {
  return decompose_linear(tm, p, true);
}

/// Input/target pair for the four tone-mapping networks.
struct TonemapPairs {
  LabDecomposition input;   // from the radiance map
  LabDecomposition target;  // from the tone map
};

inline TonemapPairs decompose_tonemap_channels(const RadianceMap& map, const ToneMap& tm, const DecomposeParams& p = {}) {
  require(map.same_size(tm), ErrorCategory::shape, "decompose_tonemap_channels: map and tone map differ in size");
  return {decompose_radiance(map, p), decompose_tone_map(tm, p)};
}

/// Inverse of the channel scalings followed by Lab -> sRGB, clipped to [0,1].
/// `planes` are network-space predictions indexed by TmChannel.
inline ToneMap recompose(const std::array<PlaneT<double>, 4>& planes) {
  const std::size_t w = planes[0].width, h = planes[0].height;
  for (const auto& pl : planes)
    require(pl.width == w && pl.height == h, ErrorCategory::shape, "recompose: planes differ in size");
  ToneMap tm(w, h);
  for (std::size_t i = 0; i < w * h; ++i) {
    const double L = kTmScalings[0].from_net(planes[0].data[i]) + kTmScalings[1].from_net(planes[1].data[i]);
    const double a = kTmScalings[2].from_net(planes[2].data[i]);
    const double b = kTmScalings[3].from_net(planes[3].data[i]);
    const auto rgb = lab_to_rgb_pixel(L, a, b);
    for (int c = 0; c < 3; ++c)
      tm.data[3 * i + c] = static_cast<float>(std::clamp(srgb_encode_value(std::clamp(rgb[c], 0.0, 1.0)), 0.0, 1.0));
  }
  return tm;
}

}  // namespace hdrnn
