#pragma once

// Global tone-mapping operators, single-scale exposure fusion, the TMQI
// quality index and best-operator selection.

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>
#include <vector>

#include "hdrnn/camera.hpp"
#include "hdrnn/error.hpp"
#include "hdrnn/image.hpp"
#include "hdrnn/imgproc.hpp"

namespace hdrnn {

namespace detail {

inline ToneMap scale_by_luminance(const RadianceMap& map, const Plane& lum, const std::vector<double>& ld) {
  ToneMap out(map.width, map.height);
  for (std::size_t i = 0; i < map.pixels(); ++i) {
    const double L = lum.data[i];
    const double r = L > 0.0 ? ld[i] / L : 0.0;
    for (int c = 0; c < 3; ++c) out.data[3 * i + c] = static_cast<float>(std::clamp(map.data[3 * i + c] * r, 0.0, 1.0));
  }
  return out;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Reinhard global

struct ReinhardParams {
  double key = 0.18;
  /// Luminance mapped to white; <= 0 selects the largest scaled luminance.
  double white = 0.0;
};

/// Photographic global operator: L_s = a L / geomean(L), then
/// L_d = L_s (1 + L_s / L_w^2) / (1 + L_s). Colours keep their ratios.
inline ToneMap reinhard_global(const RadianceMap& map, const ReinhardParams& p = {}) {
  validate(map);
  require(p.key > 0.0, ErrorCategory::parameter, "reinhard: key must be > 0");
  const Plane lum = luminance(map);
  double log_sum = 0.0;
  for (float L : lum.data) log_sum += std::log(double(L) + 1e-6);
  const double geomean = lum.data.empty() ? 1.0 : std::exp(log_sum / double(lum.data.size()));
  std::vector<double> ls(lum.data.size());
  double max_ls = 0.0;
  for (std::size_t i = 0; i < ls.size(); ++i) {
    ls[i] = p.key * lum.data[i] / geomean;
    max_ls = std::max(max_ls, ls[i]);
  }
  const double white = p.white > 0.0 ? p.white : max_ls;
  const double inv_w2 = white > 0.0 && std::isfinite(white) ? 1.0 / (white * white) : 0.0;
  std::vector<double> ld(ls.size());
  for (std::size_t i = 0; i < ls.size(); ++i) ld[i] = ls[i] * (1.0 + ls[i] * inv_w2) / (1.0 + ls[i]);
  return detail::scale_by_luminance(map, lum, ld);
}

// ---------------------------------------------------------------------------
// Drago adaptive logarithmic

struct DragoParams {
  double bias = 0.85;
  /// <= 0 selects the map's maximum luminance.
  double lmax = 0.0;
};

inline double drago_value(double L, double lmax, double bias) {
  if (lmax <= 0.0) return 0.0;
  const double exponent = std::log(bias) / std::log(0.5);
  const double ratio = std::pow(L / lmax, exponent);
  return (std::log1p(L) / std::log1p(lmax)) * (std::log(10.0) / std::log(2.0 + 8.0 * ratio));
}

/// L_d = log10(1+L) / log10(1+L_max) / log10(2 + 8 (L/L_max)^(ln b / ln 0.5)),
/// which maps L_max to 1.
inline ToneMap drago(const RadianceMap& map, const DragoParams& p = {}) {
  validate(map);
  require(p.bias > 0.0 && p.bias <= 1.0, ErrorCategory::parameter, "drago: bias must be in (0,1]");
  const Plane lum = luminance(map);
  double lmax = p.lmax;
  if (lmax <= 0.0)
    for (float L : lum.data) lmax = std::max(lmax, double(L));
  std::vector<double> ld(lum.data.size());
  for (std::size_t i = 0; i < ld.size(); ++i) ld[i] = drago_value(lum.data[i], lmax, p.bias);
  return detail::scale_by_luminance(map, lum, ld);
}

// ---------------------------------------------------------------------------
// Exposure fusion (single scale)

struct MertensParams {
  double w_contrast = 1.0;
  double w_saturation = 1.0;
  double w_exposedness = 1.0;
};

inline constexpr double kMertensSigma = 0.2;
inline constexpr double kMertensGuard = 1e-12;

/// Unnormalized weight maps, one per stack image.
inline std::vector<std::vector<double>> mertens_weights(const ExposureStack& stack, const MertensParams& p = {}) {
  require(!stack.images.empty(), ErrorCategory::validation, "mertens: empty stack");
  const std::size_t w = stack.images[0].width, h = stack.images[0].height;
  auto pw = [](double v, double e) { return e == 0.0 ? 1.0 : std::pow(v, e); };
  std::vector<std::vector<double>> weights;
  for (const auto& im : stack.images) {
    require(im.width == w && im.height == h, ErrorCategory::validation, "mertens: stack images differ in size");
    std::vector<double> gray(w * h);
    for (std::size_t i = 0; i < w * h; ++i)
      gray[i] = luminance_of(im.data[3 * i], im.data[3 * i + 1], im.data[3 * i + 2]) / 255.0;
    std::vector<double> wt(w * h);
    const auto W = static_cast<std::ptrdiff_t>(w), H = static_cast<std::ptrdiff_t>(h);
    for (std::ptrdiff_t y = 0; y < H; ++y)
      for (std::ptrdiff_t x = 0; x < W; ++x) {
        const std::size_t i = static_cast<std::size_t>(y * W + x);
        auto g = [&](std::ptrdiff_t xx, std::ptrdiff_t yy) {
          return gray[static_cast<std::size_t>(reflect_index(yy, H) * W + reflect_index(xx, W))];
        };
        const double lap = g(x - 1, y) + g(x + 1, y) + g(x, y - 1) + g(x, y + 1) - 4.0 * gray[i];
        double rgb[3], mean = 0.0, well = 1.0;
        for (int c = 0; c < 3; ++c) {
          rgb[c] = im.data[3 * i + c] / 255.0;
          mean += rgb[c] / 3.0;
          well *= std::exp(-(rgb[c] - 0.5) * (rgb[c] - 0.5) / (2.0 * kMertensSigma * kMertensSigma));
        }
        double var = 0.0;
        for (double v : rgb) var += (v - mean) * (v - mean) / 3.0;
        wt[i] = pw(std::abs(lap), p.w_contrast) * pw(std::sqrt(var), p.w_saturation) * pw(well, p.w_exposedness) +
                kMertensGuard;
      }
    weights.push_back(std::move(wt));
  }
  return weights;
}

/// Per-pixel normalization of weight maps so they sum to one.
inline void normalize_weights(std::vector<std::vector<double>>& weights) {
  if (weights.empty()) return;
  for (std::size_t i = 0; i < weights[0].size(); ++i) {
    double s = 0.0;
    for (const auto& w : weights) s += w[i];
    for (auto& w : weights) w[i] /= s;
  }
}

inline ToneMap mertens_fuse(const ExposureStack& stack, const MertensParams& p = {}) {
  auto weights = mertens_weights(stack, p);
  normalize_weights(weights);
  const auto& first = stack.images[0];
  ToneMap out(first.width, first.height);
  for (std::size_t i = 0; i < out.data.size(); ++i) {
    double v = 0.0;
    for (std::size_t k = 0; k < stack.images.size(); ++k) v += weights[k][i / 3] * (stack.images[k].data[i] / 255.0);
    out.data[i] = static_cast<float>(std::clamp(v, 0.0, 1.0));
  }
  return out;
}

// ---------------------------------------------------------------------------
// TMQI

struct TmqiParams {
  double a = 0.8012;
  double alpha = 0.3046;
  double beta = 0.7088;
  // structural fidelity
  double spatial_frequency = 16.0;
  std::size_t window = 11;
  double window_sigma = 1.5;
  double c1 = 0.01;
  double c2 = 10.0;
  // naturalness
  double mean_mu = 115.94;
  double mean_sigma = 27.99;
  double beta_a = 4.4;
  double beta_b = 10.1;
  double contrast_scale = 64.29;
  std::size_t block = 11;
};

struct TmqiScore {
  double S = 0.0;
  double N = 0.0;
  double Q = 0.0;
};

namespace detail {

inline double normal_cdf(double x, double mu, double sigma) {
  return 0.5 * std::erfc(-(x - mu) / (sigma * std::numbers::sqrt2));
}

inline double normal_pdf(double x, double mu, double sigma) {
  const double z = (x - mu) / sigma;
  return std::exp(-0.5 * z * z) / (sigma * std::sqrt(2.0 * std::numbers::pi));
}

inline double beta_pdf(double x, double a, double b) {
  if (x <= 0.0 || x >= 1.0) return 0.0;
  const double log_norm = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b);
  return std::exp(log_norm + (a - 1.0) * std::log(x) + (b - 1.0) * std::log1p(-x));
}

/// Local mean, deviation and covariance over every fully contained window.
struct LocalStats {
  std::size_t width = 0, height = 0;
  std::vector<double> mu1, mu2, s11, s22, s12;
};

inline LocalStats local_stats(const PlaneT<double>& a, const PlaneT<double>& b, std::size_t win, double sigma) {
  const std::size_t kw = std::min(win, a.width), kh = std::min(win, a.height);
  std::vector<double> k(kw * kh);
  double ksum = 0.0;
  for (std::size_t y = 0; y < kh; ++y)
    for (std::size_t x = 0; x < kw; ++x) {
      const double dx = double(x) - (double(kw) - 1.0) / 2.0, dy = double(y) - (double(kh) - 1.0) / 2.0;
      k[y * kw + x] = std::exp(-(dx * dx + dy * dy) / (2.0 * sigma * sigma));
      ksum += k[y * kw + x];
    }
  for (auto& v : k) v /= ksum;
  LocalStats s;
  s.width = a.width - kw + 1;
  s.height = a.height - kh + 1;
  const std::size_t n = s.width * s.height;
  s.mu1.resize(n);
  s.mu2.resize(n);
  s.s11.resize(n);
  s.s22.resize(n);
  s.s12.resize(n);
  for (std::size_t oy = 0; oy < s.height; ++oy)
    for (std::size_t ox = 0; ox < s.width; ++ox) {
      double m1 = 0, m2 = 0, e11 = 0, e22 = 0, e12 = 0;
      for (std::size_t y = 0; y < kh; ++y)
        for (std::size_t x = 0; x < kw; ++x) {
          const double wk = k[y * kw + x];
          const double u = a.at(ox + x, oy + y), v = b.at(ox + x, oy + y);
          m1 += wk * u;
          m2 += wk * v;
          e11 += wk * u * u;
          e22 += wk * v * v;
          e12 += wk * u * v;
        }
      const std::size_t i = oy * s.width + ox;
      s.mu1[i] = m1;
      s.mu2[i] = m2;
      s.s11[i] = e11 - m1 * m1;
      s.s22[i] = e22 - m2 * m2;
      s.s12[i] = e12 - m1 * m2;
    }
  return s;
}

}  // namespace detail

/// Single-scale structural fidelity between two luminance planes (HDR first).
inline double structural_fidelity(const PlaneT<double>& hdr, const PlaneT<double>& ldr, const TmqiParams& p = {}) {
  require(hdr.width == ldr.width && hdr.height == ldr.height && hdr.width > 0 && hdr.height > 0, ErrorCategory::shape,
          "tmqi: plane dimensions differ");
  const auto st = detail::local_stats(hdr, ldr, p.window, p.window_sigma);
  const double f = p.spatial_frequency;
  const double csf = 100.0 * 2.6 * (0.0192 + 0.114 * f) * std::exp(-std::pow(0.114 * f, 1.1));
  const double u = 128.0 / (1.4 * csf), sig = u / 3.0;
  double total = 0.0;
  for (std::size_t i = 0; i < st.mu1.size(); ++i) {
    const double s1 = std::sqrt(std::max(0.0, st.s11[i])), s2 = std::sqrt(std::max(0.0, st.s22[i]));
    const double p1 = detail::normal_cdf(s1, u, sig), p2 = detail::normal_cdf(s2, u, sig);
    const double significance = (2.0 * p1 * p2 + p.c1) / (p1 * p1 + p2 * p2 + p.c1);
    const double structure = (st.s12[i] + p.c2) / (s1 * s2 + p.c2);
    total += significance * structure;
  }
  return total / double(st.mu1.size());
}

/// Statistical naturalness of an 8-bit-range luminance plane: Gaussian prior
/// on the mean, Beta prior on the mean 11x11 block deviation, both scaled to
/// peak at 1.
inline double naturalness(const PlaneT<double>& ldr, const TmqiParams& p = {}) {
  require(!ldr.data.empty(), ErrorCategory::shape, "tmqi: empty plane");
  double mean = 0.0;
  for (double v : ldr.data) mean += v;
  mean /= double(ldr.data.size());
  double dev_sum = 0.0;
  std::size_t blocks = 0;
  for (std::size_t by = 0; by < ldr.height; by += p.block)
    for (std::size_t bx = 0; bx < ldr.width; bx += p.block) {
      const std::size_t ex = std::min(bx + p.block, ldr.width), ey = std::min(by + p.block, ldr.height);
      const double n = double((ex - bx) * (ey - by));
      double m = 0.0;
      for (std::size_t y = by; y < ey; ++y)
        for (std::size_t x = bx; x < ex; ++x) m += ldr.at(x, y);
      m /= n;
      double v = 0.0;
      for (std::size_t y = by; y < ey; ++y)
        for (std::size_t x = bx; x < ex; ++x) v += (ldr.at(x, y) - m) * (ldr.at(x, y) - m);
      dev_sum += n > 1.0 ? std::sqrt(v / (n - 1.0)) : 0.0;
      ++blocks;
    }
  const double dev = dev_sum / double(blocks);
  const double mode = (p.beta_a - 1.0) / (p.beta_a + p.beta_b - 2.0);
  const double pc = detail::beta_pdf(dev / p.contrast_scale, p.beta_a, p.beta_b) / detail::beta_pdf(mode, p.beta_a, p.beta_b);
  const double pb = detail::normal_pdf(mean, p.mean_mu, p.mean_sigma) / detail::normal_pdf(p.mean_mu, p.mean_mu, p.mean_sigma);
  return std::clamp(pb * pc, 0.0, 1.0);
}

inline double tmqi_combine(double S, double N, const TmqiParams& p = {}) {
  return p.a * std::pow(S, p.alpha) + (1.0 - p.a) * std::pow(N, p.beta);
}

/// HDR luminance stretched to [0, 2^32-1] as the reference implementation does.
inline PlaneT<double> tmqi_hdr_plane(const RadianceMap& map) {
  PlaneT<double> out(map.width, map.height);
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (std::size_t i = 0; i < map.pixels(); ++i) {
    out.data[i] = luminance_of(map.data[3 * i], map.data[3 * i + 1], map.data[3 * i + 2]);
    lo = std::min(lo, out.data[i]);
    hi = std::max(hi, out.data[i]);
  }
  const double factor = hi > lo ? std::round(4294967295.0 / (hi - lo)) : 0.0;
  for (auto& v : out.data) v = factor * (v - lo);
  return out;
}

/// Tone-map luma on the 0..255 scale.
inline PlaneT<double> tmqi_ldr_plane(const ToneMap& tm) {
  PlaneT<double> out(tm.width, tm.height);
  for (std::size_t i = 0; i < tm.pixels(); ++i)
    out.data[i] = 255.0 * luminance_of(tm.data[3 * i], tm.data[3 * i + 1], tm.data[3 * i + 2]);
  return out;
}

inline TmqiScore tmqi(const RadianceMap& map, const ToneMap& tm, const TmqiParams& p = {}) {
  require(map.same_size(tm), ErrorCategory::shape, "tmqi: radiance map and tone map differ in size");
  const auto ldr = tmqi_ldr_plane(tm);
  TmqiScore s;
  s.S = std::clamp(structural_fidelity(tmqi_hdr_plane(map), ldr, p), 0.0, 1.0);
  s.N = naturalness(ldr, p);
  s.Q = std::clamp(tmqi_combine(s.S, s.N, p), 0.0, 1.0);
  return s;
}

// ---------------------------------------------------------------------------
// Operator selection

enum class TmoKind { reinhard, drago, mertens };

inline std::string tmo_name(TmoKind k) {
  switch (k) {
    case TmoKind::reinhard: return "reinhard";
    case TmoKind::drago: return "drago";
    case TmoKind::mertens: return "mertens";
  }
  return "?";
}

inline TmoKind parse_tmo(const std::string& name) {
  if (name == "reinhard") return TmoKind::reinhard;
  if (name == "drago") return TmoKind::drago;
  if (name == "mertens") return TmoKind::mertens;
  fail(ErrorCategory::usage, "unknown tone-mapping operator '" + name + "' (expected reinhard, drago or mertens)");
}

struct TmoParams {
  ReinhardParams reinhard;
  DragoParams drago;
  MertensParams mertens;
  /// Camera used to synthesize the fusion stack.
  Crf crf;
};

inline const std::vector<TmoKind>& all_tmos() {
  static const std::vector<TmoKind> ops{TmoKind::reinhard, TmoKind::drago, TmoKind::mertens};
  return ops;
}

/// Fusion runs on the fixed stack synthesized from the map.
inline ToneMap apply_tmo(TmoKind kind, const RadianceMap& map, const TmoParams& p = {}) {
  switch (kind) {
    case TmoKind::reinhard: return reinhard_global(map, p.reinhard);
    case TmoKind::drago: return drago(map, p.drago);
    case TmoKind::mertens: return mertens_fuse(fixed_stack(map, p.crf), p.mertens);
  }
  fail(ErrorCategory::parameter, "apply_tmo: unknown operator");
}

struct TmoCandidate {
  TmoKind kind;
  TmqiScore score;
};

struct TmoSelection {
  ToneMap tone_map;
  TmoKind kind = TmoKind::reinhard;
  std::size_t index = 0;
  TmqiScore score;
  std::vector<TmoCandidate> candidates;  // in operator-list order
};

/// Highest Q wins; exact ties keep the earlier operator.
inline TmoSelection select_best_tmo(const RadianceMap& map, const std::vector<TmoKind>& ops = all_tmos(),
                                    const TmoParams& params = {}, const TmqiParams& tq = {}) {
  require(!ops.empty(), ErrorCategory::parameter, "select_best_tmo: no operators");
  TmoSelection best;
  for (std::size_t i = 0; i < ops.size(); ++i) {
    ToneMap tm = apply_tmo(ops[i], map, params);
    const TmqiScore s = tmqi(map, tm, tq);
    best.candidates.push_back({ops[i], s});
    if (i == 0 || s.Q > best.score.Q) {
      best.tone_map = std::move(tm);
      best.kind = ops[i];
      best.index = i;
      best.score = s;
    }
  }
  return best;
}

inline std::string tmqi_csv_header() { return "image,operator,S,N,Q\n"; }

inline std::string tmqi_csv_row(const std::string& image, const std::string& op, const TmqiScore& s) {
  return image + "," + op + "," + format_double(s.S) + "," + format_double(s.N) + "," + format_double(s.Q) + "\n";
}

}  // namespace hdrnn
