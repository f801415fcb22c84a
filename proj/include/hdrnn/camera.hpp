#pragma once

// Camera forward model: Z = f(E * dt), quantized to 8 bits, and the exposure
// ladders used to synthesize LDR stacks from a radiance map.

#include <array>
#include <cmath>
#include <sstream>
#include <string>
#include <vector>

#include "hdrnn/error.hpp"
#include "hdrnn/image.hpp"
#include "hdrnn/image_io.hpp"
#include "hdrnn/imgproc.hpp"

namespace hdrnn {

using CrfCurve = std::array<double, 256>;

/// Monotone 256-entry response LUT per channel (one curve is broadcast to all
/// three channels). forward[i] is f(i/255); values in between interpolate.
class Crf {
 public:
  Crf() : Crf("identity", {identity_curve()}) {}

  Crf(std::string name, std::vector<CrfCurve> curves) : name_(std::move(name)), curves_(std::move(curves)) {
    require(!curves_.empty(), ErrorCategory::validation, "crf: no curves");
    for (std::size_t c = 0; c < curves_.size(); ++c) {
      const auto& f = curves_[c];
      require(f[0] == 0.0 && f[255] == 1.0, ErrorCategory::validation,
              "crf: channel " + std::to_string(c) + " must satisfy forward[0]==0 and forward[255]==1");
      for (std::size_t i = 1; i < 256; ++i)
        if (!(f[i] >= f[i - 1]))
          fail(ErrorCategory::validation, "crf: channel " + std::to_string(c) + " not monotone at index " + std::to_string(i));
    }
    inverse_.resize(curves_.size());
    for (std::size_t c = 0; c < curves_.size(); ++c)
      for (int z = 0; z < 256; ++z) inverse_[c][z] = invert_lut(curves_[c], z / 255.0);
  }

  const std::string& name() const { return name_; }
  std::size_t channels() const { return curves_.size(); }
  const CrfCurve& curve(int channel) const { return curves_[curves_.size() == 1 ? 0 : channel]; }

  /// f(x) for normalized exposure x in [0,1].
  double forward(double x, int channel) const {
    const auto& f = curve(channel);
    const double t = std::clamp(x, 0.0, 1.0) * 255.0;
    const int i = std::min(static_cast<int>(t), 254);
    const double frac = t - i;
    return f[i] + frac * (f[i + 1] - f[i]);
  }

  /// f^-1(code/255), piecewise-linear; flat runs map to their midpoint.
  double inverse(std::uint8_t code, int channel) const { return inverse_[curves_.size() == 1 ? 0 : channel][code]; }

  static CrfCurve identity_curve() {
    CrfCurve f{};
    for (int i = 0; i < 256; ++i) f[i] = i / 255.0;
    return f;
  }

 private:
  static double invert_lut(const CrfCurve& f, double y) {
    int lo = 0;
    while (lo < 256 && f[lo] < y) ++lo;  // first index with f >= y
    int hi = 255;
    while (hi >= 0 && f[hi] > y) --hi;  // last index with f <= y
    if (lo <= hi) return 0.5 * (lo + hi) / 255.0;
    // f[hi] < y < f[lo], lo == hi + 1
    return (hi + (y - f[hi]) / (f[lo] - f[hi])) / 255.0;
  }

  std::string name_;
  std::vector<CrfCurve> curves_;
  std::vector<std::array<double, 256>> inverse_;
};

inline Crf gamma_crf(double gamma) {
  require(gamma > 0.0 && std::isfinite(gamma), ErrorCategory::parameter, "gamma_crf: gamma must be > 0");
  CrfCurve f{};
  for (int i = 0; i < 256; ++i) f[i] = std::pow(i / 255.0, 1.0 / gamma);
  f[0] = 0.0;
  f[255] = 1.0;
  return Crf("gamma " + format_double(gamma), {f});
}

inline double invert_crf(const Crf& crf, std::uint8_t code, int channel) { return crf.inverse(code, channel); }

/// Parses 256 lines of `index r g b`. Blank lines and '#' comments are ignored.
inline Crf load_crf(const std::string& text, std::string name = "loaded") {
  std::vector<CrfCurve> curves(3);
  std::array<bool, 256> seen{};
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#' || line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::istringstream ls(line);
    int idx = -1;
    double r, g, b;
    if (!(ls >> idx >> r >> g >> b) || idx < 0 || idx > 255)
      fail(ErrorCategory::format, "crf line " + std::to_string(lineno) + ": expected `index r g b`");
    if (seen[idx]) fail(ErrorCategory::validation, "crf: duplicate index " + std::to_string(idx));
    seen[idx] = true;
    for (double v : {r, g, b})
      if (!(v >= 0.0 && v <= 1.0)) fail(ErrorCategory::validation, "crf: value out of [0,1] at index " + std::to_string(idx));
    curves[0][idx] = r;
    curves[1][idx] = g;
    curves[2][idx] = b;
  }
  for (int i = 0; i < 256; ++i)
    if (!seen[i]) fail(ErrorCategory::validation, "crf: missing index " + std::to_string(i));
  return Crf(std::move(name), std::move(curves));
}

inline std::string write_crf(const Crf& crf) {
  std::string out;
  for (int i = 0; i < 256; ++i) {
    out += std::to_string(i);
    for (int c = 0; c < 3; ++c) out += " " + format_double(crf.curve(c)[i]);
    out += "\n";
  }
  return out;
}

/// Z = round(255 * f(clip(E * dt, 0, 1))).
inline LdrImage expose(const RadianceMap& map, double dt, const Crf& crf) {
  require(dt > 0.0, ErrorCategory::parameter, "expose: exposure must be > 0");
  require(crf.channels() == 1 || crf.channels() == 3, ErrorCategory::validation, "expose: crf must have 1 or 3 channels");
  LdrImage img(map.width, map.height, dt);
  for (std::size_t i = 0; i < map.pixels(); ++i)
    for (int c = 0; c < 3; ++c) {
      const double x = std::clamp(double(map.data[3 * i + c]) * dt, 0.0, 1.0);
      img.data[3 * i + c] = static_cast<std::uint8_t>(std::clamp(round_half_up(255.0 * crf.forward(x, c)), 0, 255));
    }
  return img;
}

// ---------------------------------------------------------------------------
// Exposure ladders and stacks

struct ExposureLadder {
  std::vector<double> times;
};

inline constexpr std::size_t kStackSize = 5;

/// 1, 4, 16, ..., 4^9.
inline ExposureLadder geometric_ladder() {
  ExposureLadder l;
  double t = 1.0;
  for (int i = 0; i < 10; ++i, t *= 4.0) l.times.push_back(t);
  return l;
}

inline ExposureLadder fixed_exposures() { return {{1.0, 8.0, 64.0, 512.0, 4096.0}}; }

struct ExposureStack {
  std::vector<LdrImage> images;
  std::vector<std::size_t> ladder_indices;

  std::vector<double> exposures() const {
    std::vector<double> out;
    for (const auto& im : images) out.push_back(im.exposure);
    return out;
  }
};

/// Checks the network-input invariant: exactly five same-sized images with
/// strictly increasing exposure.
inline void validate(const ExposureStack& s) {
  require(s.images.size() == kStackSize, ErrorCategory::validation, "stack must hold exactly 5 images");
  for (std::size_t i = 0; i < s.images.size(); ++i) {
    require(s.images[i].width == s.images[0].width && s.images[i].height == s.images[0].height,
            ErrorCategory::validation, "stack images differ in size");
    require(s.images[i].exposure > 0.0, ErrorCategory::validation, "stack exposure must be > 0");
    if (i > 0)
      require(s.images[i].exposure > s.images[i - 1].exposure, ErrorCategory::validation,
              "stack exposures must be strictly increasing");
  }
}

inline ExposureStack stack_from_ladder(const RadianceMap& map, const Crf& crf, const ExposureLadder& ladder,
                                       std::size_t first) {
  ExposureStack s;
  for (std::size_t i = first; i < first + kStackSize; ++i) {
    s.images.push_back(expose(map, ladder.times[i], crf));
    s.ladder_indices.push_back(i);
  }
  return s;
}

inline ExposureStack fixed_stack(const RadianceMap& map, const Crf& crf) {
  return stack_from_ladder(map, crf, fixed_exposures(), 0);
}

/// First index of the 5-wide window centred on the entropy argmax (ties go to
/// the smaller exposure), shifted to stay inside the ladder.
inline std::size_t entropy_window_start(const std::vector<double>& entropies) {
  require(entropies.size() >= kStackSize, ErrorCategory::parameter, "adaptive selection needs a ladder of at least 5 exposures");
  std::size_t k = 0;
  for (std::size_t i = 1; i < entropies.size(); ++i)
    if (entropies[i] > entropies[k]) k = i;
  const std::size_t max_start = entropies.size() - kStackSize;
  return std::min(k < 2 ? 0 : k - 2, max_start);
}

struct AdaptiveSelection {
  ExposureStack stack;
  std::vector<double> entropies;
  std::size_t center = 0;  // entropy argmax
};

inline AdaptiveSelection adaptive_select(const RadianceMap& map, const Crf& crf, const ExposureLadder& ladder) {
  require(ladder.times.size() >= kStackSize, ErrorCategory::parameter, "adaptive_stack: ladder shorter than 5");
  AdaptiveSelection sel;
  std::vector<LdrImage> all;
  for (double dt : ladder.times) {
    all.push_back(expose(map, dt, crf));
    sel.entropies.push_back(entropy(all.back()));
  }
  const std::size_t start = entropy_window_start(sel.entropies);
  for (std::size_t i = 1; i < sel.entropies.size(); ++i)
    if (sel.entropies[i] > sel.entropies[sel.center]) sel.center = i;
  for (std::size_t i = start; i < start + kStackSize; ++i) {
    sel.stack.images.push_back(std::move(all[i]));
    sel.stack.ladder_indices.push_back(i);
  }
  return sel;
}

inline ExposureStack adaptive_stack(const RadianceMap& map, const Crf& crf, const ExposureLadder& ladder) {
  return adaptive_select(map, crf, ladder).stack;
}

}  // namespace hdrnn
