#pragma once

#include <array>
#include <cmath>

#include "hdrnn/camera.hpp"
#include "hdrnn/error.hpp"
#include "hdrnn/image.hpp"

namespace hdrnn {

/// Per-code confidence for the merge; extremes carry no weight.
struct WeightFn {
  std::array<double, 256> values{};

  double operator()(std::uint8_t z) const { return values[z]; }
};

inline WeightFn hat_weight() {
  WeightFn w;
  for (int z = 0; z < 256; ++z) w.values[z] = z <= 127 ? z : 255 - z;
  return w;
}

/// Weighted average of f^-1(Z_i)/dt_i over the stack, per pixel and channel.
/// Pixels with zero total weight (all clipped) fall back to the middle
/// exposure's estimate. Accepts any non-empty stack of equally sized images.
inline RadianceMap debevec_merge(const ExposureStack& stack, const Crf& crf, const WeightFn& w = hat_weight()) {
  require(!stack.images.empty(), ErrorCategory::validation, "debevec_merge: empty stack");
  require(crf.channels() == 1 || crf.channels() == 3, ErrorCategory::validation,
          "debevec_merge: crf has " + std::to_string(crf.channels()) + " channels, stack has 3");
  const auto& first = stack.images.front();
  for (const auto& im : stack.images) {
    require(im.width == first.width && im.height == first.height, ErrorCategory::validation,
            "debevec_merge: stack images differ in size");
    require(im.exposure > 0.0, ErrorCategory::validation, "debevec_merge: exposure must be > 0");
  }
  const auto& mid = stack.images[stack.images.size() / 2];

  RadianceMap out(first.width, first.height);
  for (std::size_t i = 0; i < out.data.size(); ++i) {
    const int c = static_cast<int>(i % 3);
    double num = 0.0, den = 0.0;
    for (const auto& im : stack.images) {
      const std::uint8_t z = im.data[i];
      const double wz = w(z);
      num += wz * (crf.inverse(z, c) / im.exposure);
      den += wz;
    }
    const double e = den > 0.0 ? num / den : crf.inverse(mid.data[i], c) / mid.exposure;
    out.data[i] = static_cast<float>(e);
  }
  return out;
}

}  // namespace hdrnn
