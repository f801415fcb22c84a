#pragma once

#include <array>
#include <cmath>
#include <vector>

#include "hdrnn/camera.hpp"
#include "hdrnn/nn/network.hpp"
#include "hdrnn/pipeline/dataset.hpp"
#include "hdrnn/pipeline/decompose.hpp"
#include "hdrnn/pipeline/patches.hpp"
#include "hdrnn/pipeline/train.hpp"

namespace hdrnn {

inline constexpr std::size_t kInferChunk = 16;  // patches per forward pass

/// Tiles the input planes, runs the net in eval mode and stitches the output.
template <typename T>
PlaneT<double> predict_plane(nn::Network<T>& net, const std::vector<PlaneT<double>>& inputs, std::size_t patch) {
  require(!inputs.empty(), ErrorCategory::shape, "predict_plane: no input planes");
  const PatchGrid grid = make_grid(inputs[0].width, inputs[0].height, patch);
  std::vector<std::vector<PlaneT<double>>> tiles;
  for (const auto& p : inputs) tiles.push_back(extract_patches(p, grid));
  std::vector<PlaneT<double>> out;
  for (std::size_t b = 0; b < grid.size(); b += kInferChunk) {
    const std::size_t e = std::min(grid.size(), b + kInferChunk);
    nn::Tensor4<T> x(e - b, inputs.size(), patch, patch);
    for (std::size_t k = b; k < e; ++k)
      for (std::size_t c = 0; c < inputs.size(); ++c) {
        T* dst = x.channel(k - b, c);
        for (std::size_t i = 0; i < patch * patch; ++i) dst[i] = static_cast<T>(tiles[c][k].data[i]);
      }
    const auto y = net.forward(x, nn::RunMode::eval());
    for (std::size_t k = 0; k < e - b; ++k) out.push_back(tensor_channel<double>(y, k, 0));
  }
  return reassemble(grid, out);
}

/// Radiance from an exposure stack with one net per RGB channel. `scale`
/// undoes the normalization applied to the training targets.
template <typename T>
RadianceMap infer_ldr2hdr(std::array<nn::Network<T>, 3>& nets, const ExposureStack& stack, double scale = 1.0,
                          bool log_target = false, std::size_t patch = 64) {
  validate(stack);
  const auto& im0 = stack.images[0];
  RadianceMap out(im0.width, im0.height);
  for (int c = 0; c < 3; ++c) {
    const auto pred = predict_plane(nets[c], stack_planes(stack, static_cast<RgbChannel>(c)), patch);
    for (std::size_t i = 0; i < pred.data.size(); ++i) {
      double v = std::max(0.0, pred.data[i]);
      if (log_target) v = std::expm1(v);
      out.data[3 * i + c] = static_cast<float>(v * scale);
    }
  }
  return out;
}

/// Tone map from a radiance map with the four decomposition nets (indexed by
/// TmChannel). The map is normalized first, as during training.
template <typename T>
ToneMap infer_tonemap(std::array<nn::Network<T>, 4>& nets, const RadianceMap& map, std::size_t patch = 64,
                      const DecomposeParams& dp = {}) {
  const auto input = decompose_radiance(normalize_hdr(map).map, dp);
  std::array<PlaneT<double>, 4> pred;
  for (int c = 0; c < 4; ++c)
    pred[c] = predict_plane(nets[c], {input.scaled(static_cast<TmChannel>(c))}, patch);
  return recompose(pred);
}

}  // namespace hdrnn
