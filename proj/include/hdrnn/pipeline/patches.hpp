#pragma once

// Non-overlapping patch tiling with reflect padding on the right and bottom.

#include <cstddef>
#include <vector>

#include "hdrnn/error.hpp"
#include "hdrnn/image.hpp"
#include "hdrnn/nn/tensor.hpp"

namespace hdrnn {

struct PatchGrid {
  std::size_t width = 0, height = 0;  // source
  std::size_t patch = 0;
  std::size_t pad_right = 0, pad_bottom = 0;
  struct Origin {
    std::size_t x, y;
  };
  std::vector<Origin> origins;  // row-major

  std::size_t padded_width() const { return width + pad_right; }
  std::size_t padded_height() const { return height + pad_bottom; }
  std::size_t size() const { return origins.size(); }
};

inline PatchGrid make_grid(std::size_t width, std::size_t height, std::size_t patch) {
  require(patch >= 8, ErrorCategory::parameter, "patch size must be >= 8");
  require(width >= 1 && height >= 1, ErrorCategory::parameter, "patch grid: empty plane");
  PatchGrid g;
  g.width = width;
  g.height = height;
  g.patch = patch;
  g.pad_right = (patch - width % patch) % patch;
  g.pad_bottom = (patch - height % patch) % patch;
  for (std::size_t y = 0; y < g.padded_height(); y += patch)
    for (std::size_t x = 0; x < g.padded_width(); x += patch) g.origins.push_back({x, y});
  return g;
}

template <typename T>
std::vector<PlaneT<T>> extract_patches(const PlaneT<T>& plane, const PatchGrid& g) {
  require(plane.width == g.width && plane.height == g.height, ErrorCategory::shape, "extract_patches: grid/plane mismatch");
  const auto W = static_cast<std::ptrdiff_t>(g.width), H = static_cast<std::ptrdiff_t>(g.height);
  std::vector<PlaneT<T>> out;
  out.reserve(g.size());
  for (const auto& o : g.origins) {
    PlaneT<T> p(g.patch, g.patch);
    for (std::size_t y = 0; y < g.patch; ++y) {
      const auto sy = static_cast<std::size_t>(reflect_index(static_cast<std::ptrdiff_t>(o.y + y), H));
      for (std::size_t x = 0; x < g.patch; ++x)
        p.at(x, y) = plane.at(static_cast<std::size_t>(reflect_index(static_cast<std::ptrdiff_t>(o.x + x), W)), sy);
    }
    out.push_back(std::move(p));
  }
  return out;
}

template <typename T>
PlaneT<T> reassemble(const PatchGrid& g, const std::vector<PlaneT<T>>& patches) {
  require(patches.size() == g.size(), ErrorCategory::shape, "reassemble: patch count does not match grid");
  PlaneT<T> out(g.width, g.height);
  for (std::size_t k = 0; k < g.size(); ++k) {
    const auto& o = g.origins[k];
    const auto& p = patches[k];
    require(p.width == g.patch && p.height == g.patch, ErrorCategory::shape, "reassemble: wrong patch size");
    for (std::size_t y = 0; y < g.patch && o.y + y < g.height; ++y)
      for (std::size_t x = 0; x < g.patch && o.x + x < g.width; ++x) out.at(o.x + x, o.y + y) = p.at(x, y);
  }
  return out;
}

/// Stacks same-sized planes as the channels of one sample.
template <typename T, typename P>
nn::Tensor4<T> planes_to_tensor(const std::vector<PlaneT<P>>& planes) {
  require(!planes.empty(), ErrorCategory::shape, "planes_to_tensor: no planes");
  nn::Tensor4<T> t(1, planes.size(), planes[0].height, planes[0].width);
  for (std::size_t c = 0; c < planes.size(); ++c) {
    require(planes[c].width == t.w() && planes[c].height == t.h(), ErrorCategory::shape, "planes_to_tensor: size mismatch");
    T* dst = t.channel(0, c);
    for (std::size_t i = 0; i < planes[c].data.size(); ++i) dst[i] = static_cast<T>(planes[c].data[i]);
  }
  return t;
}

template <typename P, typename T>
PlaneT<P> tensor_channel(const nn::Tensor4<T>& t, std::size_t n, std::size_t c) {
  PlaneT<P> p(t.w(), t.h());
  const T* src = t.channel(n, c);
  for (std::size_t i = 0; i < p.data.size(); ++i) p.data[i] = static_cast<P>(src[i]);
  return p;
}

}  // namespace hdrnn
