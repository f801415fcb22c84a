#pragma once

// HDR normalization, the procedural scene generator and the dataset manifest.

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <numbers>
#include <string>
#include <vector>

#include <json.hpp>

#include "hdrnn/camera.hpp"
#include "hdrnn/error.hpp"
#include "hdrnn/image.hpp"
#include "hdrnn/imgproc.hpp"
#include "hdrnn/nn/random.hpp"

namespace hdrnn {

/// Nearest-rank percentile (q in (0,1]) of a plane's samples.
inline double percentile(std::vector<double> v, double q) {
  require(!v.empty(), ErrorCategory::validation, "percentile of an empty set");
  const auto rank = static_cast<std::size_t>(std::ceil(q * double(v.size())));
  const std::size_t idx = std::clamp<std::size_t>(rank, 1, v.size()) - 1;
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(idx), v.end());
  return v[idx];
}

inline double luminance_percentile(const RadianceMap& map, double q) {
  std::vector<double> lum(map.pixels());
  for (std::size_t i = 0; i < lum.size(); ++i)
    lum[i] = luminance_of(map.data[3 * i], map.data[3 * i + 1], map.data[3 * i + 2]);
  return percentile(std::move(lum), q);
}

struct Normalized {
  RadianceMap map;
  double scale = 1.0;  // original = map * scale
};

/// Divides by the 99th percentile of luminance.
inline Normalized normalize_hdr(const RadianceMap& map) {
  validate(map);
  const double p99 = luminance_percentile(map, 0.99);
  require(p99 > 0.0, ErrorCategory::validation, "normalize_hdr: 99th percentile luminance is zero");
  Normalized n{map, p99};
  for (auto& v : n.map.data) v = static_cast<float>(v / p99);
  return n;
}

inline RadianceMap denormalize(RadianceMap map, double scale) {
  for (auto& v : map.data) v = static_cast<float>(v * scale);
  return map;
}

// ---------------------------------------------------------------------------
// Procedural scenes

struct SynthParams {
  std::size_t width = 64;
  std::size_t height = 64;
  double blob_peak_mean = 8.0;  // mean of the exponential peak radiance
  /// Lower bound applied after normalization so the darkest pixels still
  /// reach mid-range codes at the longest fixed exposure.
  double floor = 1e-4;
};

/// Seeded scene: tinted linear gradient, a checkerboard patch and Gaussian
/// blobs with exponentially distributed peaks; normalized to p99 luminance 1.
inline RadianceMap synthetic_scene(std::uint64_t seed, const SynthParams& p = {}) {
  require(p.width >= 1 && p.height >= 1, ErrorCategory::parameter, "synthetic_scene: empty size");
  nn::Rng rng(nn::stream_seed(seed, {0x5CE4E}));
  const double W = double(p.width), H = double(p.height);
  RadianceMap m(p.width, p.height);

  const double angle = 2.0 * std::numbers::pi * rng.uniform();
  const double g0 = 0.002 + 0.05 * rng.uniform(), g1 = 0.05 + 0.4 * rng.uniform();
  std::array<double, 3> tint{};
  for (auto& t : tint) t = 0.6 + 0.4 * rng.uniform();

  const double cx0 = rng.uniform() * W * 0.6, cy0 = rng.uniform() * H * 0.6;
  const double cw = W * (0.2 + 0.3 * rng.uniform()), ch = H * (0.2 + 0.3 * rng.uniform());
  const double cell = std::max(2.0, std::min(W, H) / (4.0 + 6.0 * rng.uniform()));
  const double check_hi = 0.1 + 0.8 * rng.uniform(), check_lo = 0.01 + 0.05 * rng.uniform();

  struct Blob {
    double x, y, sigma, peak;
    std::array<double, 3> colour;
  };
  std::vector<Blob> blobs(2 + rng.below(4));
  for (auto& b : blobs) {
    b.x = rng.uniform() * W;
    b.y = rng.uniform() * H;
    b.sigma = std::max(1.0, std::min(W, H) * (0.03 + 0.12 * rng.uniform()));
    b.peak = rng.exponential(p.blob_peak_mean);
    for (auto& c : b.colour) c = 0.5 + 0.5 * rng.uniform();
  }

  const double ux = std::cos(angle), uy = std::sin(angle);
  for (std::size_t y = 0; y < p.height; ++y)
    for (std::size_t x = 0; x < p.width; ++x) {
      const double fx = (double(x) + 0.5) / W, fy = (double(y) + 0.5) / H;
      const double t = std::clamp(0.5 + 0.5 * ((fx - 0.5) * ux + (fy - 0.5) * uy) * 1.4142, 0.0, 1.0);
      double base = g0 + (g1 - g0) * t;
      if (double(x) >= cx0 && double(x) < cx0 + cw && double(y) >= cy0 && double(y) < cy0 + ch) {
        const bool on = (int((double(x) - cx0) / cell) + int((double(y) - cy0) / cell)) % 2 == 0;
        base = on ? check_hi : check_lo;
      }
      for (int c = 0; c < 3; ++c) {
        double v = base * tint[c];
        for (const auto& b : blobs) {
          const double d2 = (double(x) - b.x) * (double(x) - b.x) + (double(y) - b.y) * (double(y) - b.y);
          v += b.peak * b.colour[c] * std::exp(-d2 / (2.0 * b.sigma * b.sigma));
        }
        m.at(x, y, c) = static_cast<float>(v);
      }
    }
  RadianceMap n = normalize_hdr(m).map;
  for (auto& v : n.data) v = std::max(v, static_cast<float>(p.floor));
  return n;
}

// ---------------------------------------------------------------------------
// Manifest

enum class Split { train, val, test };

inline std::string split_name(Split s) {
  switch (s) {
    case Split::train: return "train";
    case Split::val: return "val";
    case Split::test: return "test";
  }
  return "?";
}

inline Split parse_split(const std::string& s) {
  if (s == "train") return Split::train;
  if (s == "val") return Split::val;
  if (s == "test") return Split::test;
  fail(ErrorCategory::validation, "manifest: unknown split '" + s + "'");
}

enum class LadderChoice { fixed, adaptive };

struct SceneEntry {
  std::string file;
  Split split = Split::train;
};

/// Scene list plus acquisition settings. Paths are relative to the manifest.
struct Manifest {
  std::vector<SceneEntry> scenes;
  std::string crf = "identity";  // "identity", "gamma:<g>" or a CRF text file
  LadderChoice ladder = LadderChoice::fixed;

  std::vector<std::string> files(Split s) const {
    std::vector<std::string> out;
    for (const auto& e : scenes)
      if (e.split == s) out.push_back(e.file);
    return out;
  }
};

inline std::string manifest_to_json(const Manifest& m) {
  nlohmann::json j;
  j["crf"] = m.crf;
  j["ladder"] = m.ladder == LadderChoice::fixed ? "fixed" : "adaptive";
  j["scenes"] = nlohmann::json::array();
  for (const auto& e : m.scenes) j["scenes"].push_back({{"file", e.file}, {"split", split_name(e.split)}});
  return j.dump(2) + "\n";
}

inline Manifest manifest_from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCategory::format, std::string("manifest: ") + e.what());
  }
  Manifest m;
  try {
    m.crf = j.value("crf", std::string("identity"));
    const std::string ladder = j.value("ladder", std::string("fixed"));
    require(ladder == "fixed" || ladder == "adaptive", ErrorCategory::validation, "manifest: ladder must be fixed or adaptive");
    m.ladder = ladder == "fixed" ? LadderChoice::fixed : LadderChoice::adaptive;
    for (const auto& e : j.at("scenes")) m.scenes.push_back({e.at("file").get<std::string>(), parse_split(e.value("split", "train"))});
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCategory::validation, std::string("manifest: ") + e.what());
  }
  return m;
}

/// "identity", "gamma:<g>", or a path (relative to `base`) to a CRF text file.
inline Crf resolve_crf(const std::string& spec, const std::filesystem::path& base = {}) {
  if (spec.empty() || spec == "identity") return Crf();
  if (spec.rfind("gamma:", 0) == 0) {
    double g = 0.0;
    try {
      g = std::stod(spec.substr(6));
    } catch (const std::exception&) {
      fail(ErrorCategory::validation, "crf: bad gamma in '" + spec + "'");
    }
    return gamma_crf(g);
  }
  const auto path = std::filesystem::path(spec).is_absolute() ? std::filesystem::path(spec) : base / spec;
  return load_crf(read_text(path), path.filename().string());
}

inline ExposureStack make_stack(const RadianceMap& map, const Crf& crf, LadderChoice ladder) {
  return ladder == LadderChoice::fixed ? fixed_stack(map, crf) : adaptive_stack(map, crf, geometric_ladder());
}

}  // namespace hdrnn
