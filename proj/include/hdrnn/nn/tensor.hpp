#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "hdrnn/error.hpp"

namespace hdrnn::nn {

struct Dims {
  std::size_t n = 0, c = 0, h = 0, w = 0;

  std::size_t count() const { return n * c * h * w; }
  std::string str() const {
    return std::to_string(n) + "x" + std::to_string(c) + "x" + std::to_string(h) + "x" + std::to_string(w);
  }
  friend bool operator==(const Dims&, const Dims&) = default;
};

/// Dense NCHW array; the only value type the engine passes between layers.
template <typename T>
class Tensor4 {
 public:
  using value_type = T;

  Tensor4() = default;
  explicit Tensor4(Dims d, T fill = T(0)) : dims_(d), data_(d.count(), fill) {}
  Tensor4(std::size_t n, std::size_t c, std::size_t h, std::size_t w, T fill = T(0)) : Tensor4(Dims{n, c, h, w}, fill) {}

  const Dims& dims() const { return dims_; }
  std::size_t n() const { return dims_.n; }
  std::size_t c() const { return dims_.c; }
  std::size_t h() const { return dims_.h; }
  std::size_t w() const { return dims_.w; }
  std::size_t size() const { return data_.size(); }
  std::size_t plane() const { return dims_.h * dims_.w; }

  T* data() { return data_.data(); }
  const T* data() const { return data_.data(); }
  std::vector<T>& vec() { return data_; }
  const std::vector<T>& vec() const { return data_; }

  T& operator[](std::size_t i) { return data_[i]; }
  T operator[](std::size_t i) const { return data_[i]; }

  T& at(std::size_t n, std::size_t c, std::size_t y, std::size_t x) {
    return data_[((n * dims_.c + c) * dims_.h + y) * dims_.w + x];
  }
  T at(std::size_t n, std::size_t c, std::size_t y, std::size_t x) const {
    return data_[((n * dims_.c + c) * dims_.h + y) * dims_.w + x];
  }

  /// Pointer to the (n, c) spatial plane.
  T* channel(std::size_t n, std::size_t c) { return data_.data() + (n * dims_.c + c) * plane(); }
  const T* channel(std::size_t n, std::size_t c) const { return data_.data() + (n * dims_.c + c) * plane(); }
  /// Pointer to sample n (c*h*w values).
  T* sample(std::size_t n) { return data_.data() + n * dims_.c * plane(); }
  const T* sample(std::size_t n) const { return data_.data() + n * dims_.c * plane(); }

  void fill(T v) { std::fill(data_.begin(), data_.end(), v); }

  bool all_finite() const {
    for (T v : data_)
      if (!std::isfinite(v)) return false;
    return true;
  }

  template <typename U>
  Tensor4<U> cast() const {
    Tensor4<U> out(dims_);
    for (std::size_t i = 0; i < data_.size(); ++i) out[i] = static_cast<U>(data_[i]);
    return out;
  }

  friend bool operator==(const Tensor4&, const Tensor4&) = default;

 private:
  Dims dims_{};
  std::vector<T> data_;
};

template <typename T>
void require_same_dims(const Tensor4<T>& a, const Tensor4<T>& b, const std::string& where) {
  require(a.dims() == b.dims(), ErrorCategory::shape, where + ": shape " + a.dims().str() + " vs " + b.dims().str());
}

}  // namespace hdrnn::nn
