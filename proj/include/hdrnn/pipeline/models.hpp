#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "hdrnn/error.hpp"
#include "hdrnn/nn/network.hpp"
#include "hdrnn/nn/random.hpp"

namespace hdrnn {

enum class RgbChannel { R = 0, G = 1, B = 2 };
enum class TmChannel { L_base = 0, L_detail = 1, a = 2, b = 3 };

inline constexpr std::size_t kLdrInputDepth = 5;

inline std::string channel_name(RgbChannel c) { return std::string(1, "RGB"[static_cast<int>(c)]); }
inline std::string channel_name(TmChannel c) {
  static const char* names[] = {"L_base", "L_detail", "a", "b"};
  return names[static_cast<int>(c)];
}

inline RgbChannel parse_rgb_channel(const std::string& s) {
  if (s == "R") return RgbChannel::R;
  if (s == "G") return RgbChannel::G;
  if (s == "B") return RgbChannel::B;
  fail(ErrorCategory::usage, "unknown RGB channel '" + s + "'");
}

/// Conv block chain: first layer 3x3, the rest 1x1, BN + ReLU + dropout on
/// every hidden layer, linear 1x1 output of depth 1.
inline nn::NetworkSpec conv_chain(std::size_t in_depth, const std::vector<std::size_t>& hidden, double dropout_p,
                                  std::uint64_t seed) {
  nn::NetworkSpec s;
  s.seed = seed;
  std::size_t in = in_depth;
  for (std::size_t i = 0; i < hidden.size(); ++i) {
    s.layers.push_back({i == 0 ? nn::LayerKind::conv3x3 : nn::LayerKind::conv1x1, in, hidden[i], true, dropout_p});
    in = hidden[i];
  }
  s.layers.push_back({nn::LayerKind::output1x1, in, 1, false, 0.0});
  nn::validate(s);
  return s;
}

inline const std::vector<std::size_t>& ldr2hdr_depths() {
  static const std::vector<std::size_t> d{60, 40, 20, 20, 20};
  return d;
}

inline const std::vector<std::size_t>& tonemap_depths() {
  static const std::vector<std::size_t> d{100, 80, 50, 10};
  return d;
}

/// Per-channel radiance regressor over the 5 stacked exposures.
inline nn::NetworkSpec build_ldr2hdr_net(RgbChannel c, std::uint64_t seed, double dropout_p = 0.4) {
  return conv_chain(kLdrInputDepth, ldr2hdr_depths(), dropout_p,
                    nn::stream_seed(seed, {0x1D2, static_cast<std::uint64_t>(c)}));
}

/// Per-channel tone-map regressor over one decomposed Lab plane.
inline nn::NetworkSpec build_tonemap_net(TmChannel c, std::uint64_t seed, double dropout_p = 0.4) {
  return conv_chain(1, tonemap_depths(), dropout_p, nn::stream_seed(seed, {0x7A1, static_cast<std::uint64_t>(c)}));
}

}  // namespace hdrnn
