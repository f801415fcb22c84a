#pragma once

// Layer kernels as free functions over Tensor4. Backward functions accumulate
// into the parameter-gradient outputs (callers zero them once per step).

#include <Eigen/Core>
#include <cmath>
#include <string>
#include <vector>

#include "hdrnn/error.hpp"
#include "hdrnn/nn/random.hpp"
#include "hdrnn/nn/tensor.hpp"

namespace hdrnn::nn {

template <typename T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MatMap = Eigen::Map<RowMat<T>>;
template <typename T>
using ConstMatMap = Eigen::Map<const RowMat<T>>;

// ---------------------------------------------------------------------------
// Convolution (stride 1; 3x3 zero-padded by 1, 1x1 unpadded)

namespace detail {

/// cols[(ci*9 + ky*3 + kx), y*w + x] = x[ci, y+ky-1, x+kx-1] (zero outside).
template <typename T>
void im2col3x3(const T* x, std::size_t cin, std::size_t h, std::size_t w, T* cols) {
  const std::size_t hw = h * w;
  for (std::size_t ci = 0; ci < cin; ++ci) {
    const T* src = x + ci * hw;
    for (int ky = 0; ky < 3; ++ky)
      for (int kx = 0; kx < 3; ++kx) {
        T* dst = cols + (ci * 9 + ky * 3 + kx) * hw;
        for (std::size_t y = 0; y < h; ++y) {
          const std::ptrdiff_t sy = std::ptrdiff_t(y) + ky - 1;
          T* row = dst + y * w;
          if (sy < 0 || sy >= std::ptrdiff_t(h)) {
            std::fill(row, row + w, T(0));
            continue;
          }
          const T* srow = src + sy * w;
          for (std::size_t xx = 0; xx < w; ++xx) {
            const std::ptrdiff_t sx = std::ptrdiff_t(xx) + kx - 1;
            row[xx] = (sx < 0 || sx >= std::ptrdiff_t(w)) ? T(0) : srow[sx];
          }
        }
      }
  }
}

template <typename T>
void col2im3x3(const T* cols, std::size_t cin, std::size_t h, std::size_t w, T* gx) {
  const std::size_t hw = h * w;
  for (std::size_t ci = 0; ci < cin; ++ci) {
    T* dst = gx + ci * hw;
    for (int ky = 0; ky < 3; ++ky)
      for (int kx = 0; kx < 3; ++kx) {
        const T* src = cols + (ci * 9 + ky * 3 + kx) * hw;
        for (std::size_t y = 0; y < h; ++y) {
          const std::ptrdiff_t sy = std::ptrdiff_t(y) + ky - 1;
          if (sy < 0 || sy >= std::ptrdiff_t(h)) continue;
          const T* row = src + y * w;
          T* drow = dst + sy * w;
          for (std::size_t xx = 0; xx < w; ++xx) {
            const std::ptrdiff_t sx = std::ptrdiff_t(xx) + kx - 1;
            if (sx >= 0 && sx < std::ptrdiff_t(w)) drow[sx] += row[xx];
          }
        }
      }
  }
}

}  // namespace detail

/// weight: (out, in, k, k); bias: (out, 1, 1, 1).
template <typename T>
Tensor4<T> conv_forward(const Tensor4<T>& x, const Tensor4<T>& weight, const Tensor4<T>& bias, int kernel,
                        const std::string& layer = "conv") {
  require(kernel == 1 || kernel == 3, ErrorCategory::parameter, layer + ": kernel must be 1 or 3");
  const std::size_t cout = weight.n(), cin = weight.c();
  require(weight.h() == std::size_t(kernel) && weight.w() == std::size_t(kernel), ErrorCategory::shape,
          layer + ": weight is not " + std::to_string(kernel) + "x" + std::to_string(kernel));
  require(x.c() == cin, ErrorCategory::shape,
          layer + ": input has " + std::to_string(x.c()) + " channels, expected " + std::to_string(cin));
  require(bias.size() == cout, ErrorCategory::shape, layer + ": bias size mismatch");
  const std::size_t hw = x.plane(), kk = cin * kernel * kernel;
  Tensor4<T> y(x.n(), cout, x.h(), x.w());
  ConstMatMap<T> W(weight.data(), cout, kk);
  Eigen::Map<const Eigen::Matrix<T, Eigen::Dynamic, 1>> b(bias.data(), cout);
  std::vector<T> cols(kernel == 3 ? kk * hw : 0);
  for (std::size_t n = 0; n < x.n(); ++n) {
    const T* src = x.sample(n);
    if (kernel == 3) {
      detail::im2col3x3(src, cin, x.h(), x.w(), cols.data());
      src = cols.data();
    }
    MatMap<T> Y(y.sample(n), cout, hw);
    Y.noalias() = W * ConstMatMap<T>(src, kk, hw);
    Y.colwise() += b;
  }
  return y;
}

/// Returns the input gradient; accumulates weight and bias gradients.
template <typename T>
Tensor4<T> conv_backward(const Tensor4<T>& x, const Tensor4<T>& weight, int kernel, const Tensor4<T>& gy,
                         Tensor4<T>& gweight, Tensor4<T>& gbias) {
  const std::size_t cout = weight.n(), cin = weight.c(), hw = x.plane(), kk = cin * kernel * kernel;
  require(gy.n() == x.n() && gy.c() == cout && gy.plane() == hw, ErrorCategory::shape, "conv_backward: gradient shape");
  Tensor4<T> gx(x.dims());
  ConstMatMap<T> W(weight.data(), cout, kk);
  MatMap<T> GW(gweight.data(), cout, kk);
  Eigen::Map<Eigen::Matrix<T, Eigen::Dynamic, 1>> GB(gbias.data(), cout);
  std::vector<T> cols(kernel == 3 ? kk * hw : 0), gcols(kernel == 3 ? kk * hw : 0);
  for (std::size_t n = 0; n < x.n(); ++n) {
    ConstMatMap<T> GY(gy.sample(n), cout, hw);
    const T* src = x.sample(n);
    if (kernel == 3) {
      detail::im2col3x3(src, cin, x.h(), x.w(), cols.data());
      src = cols.data();
    }
    GW.noalias() += GY * ConstMatMap<T>(src, kk, hw).transpose();
    GB += GY.rowwise().sum();
    if (kernel == 3) {
      MatMap<T>(gcols.data(), kk, hw).noalias() = W.transpose() * GY;
      detail::col2im3x3(gcols.data(), cin, x.h(), x.w(), gx.sample(n));
    } else {
      MatMap<T>(gx.sample(n), cin, hw).noalias() = W.transpose() * GY;
    }
  }
  return gx;
}

// ---------------------------------------------------------------------------
// Spatial batch normalization

enum class BnMode { train, eval };

/// Per-channel running statistics; eval before any training uses (0, 1).
template <typename T>
struct BnRunning {
  std::vector<T> mean, var;
  explicit BnRunning(std::size_t channels = 0) : mean(channels, T(0)), var(channels, T(1)) {}
};

template <typename T>
struct BnCache {
  Tensor4<T> xhat;
  std::vector<T> inv_std;
  BnMode mode = BnMode::train;
};

inline constexpr double kBnEps = 1e-5;
inline constexpr double kBnMomentum = 0.1;

/// gamma, beta: one value per channel. Train mode normalizes over (n,h,w)
/// with the biased variance and folds the unbiased variance into the
/// running estimate.
template <typename T>
Tensor4<T> batchnorm_forward(const Tensor4<T>& x, const std::vector<T>& gamma, const std::vector<T>& beta, BnMode mode,
                             BnRunning<T>& running, BnCache<T>* cache = nullptr, double eps = kBnEps,
                             double momentum = kBnMomentum) {
  const std::size_t C = x.c(), N = x.n(), HW = x.plane();
  require(gamma.size() == C && beta.size() == C && running.mean.size() == C, ErrorCategory::shape,
          "batchnorm: channel count mismatch");
  Tensor4<T> y(x.dims());
  Tensor4<T> xhat(x.dims());
  std::vector<T> inv_std(C);
  const double M = double(N * HW);
  for (std::size_t c = 0; c < C; ++c) {
    double mean, var;
    if (mode == BnMode::train) {
      double s = 0.0;
      for (std::size_t n = 0; n < N; ++n) {
        const T* p = x.channel(n, c);
        for (std::size_t i = 0; i < HW; ++i) s += p[i];
      }
      mean = s / M;
      double v = 0.0;
      for (std::size_t n = 0; n < N; ++n) {
        const T* p = x.channel(n, c);
        for (std::size_t i = 0; i < HW; ++i) v += (p[i] - mean) * (p[i] - mean);
      }
      var = v / M;
      const double unbiased = M > 1.0 ? v / (M - 1.0) : var;
      running.mean[c] = static_cast<T>((1.0 - momentum) * running.mean[c] + momentum * mean);
      running.var[c] = static_cast<T>((1.0 - momentum) * running.var[c] + momentum * unbiased);
    } else {
      mean = running.mean[c];
      var = running.var[c];
    }
    const double is = 1.0 / std::sqrt(var + eps);
    inv_std[c] = static_cast<T>(is);
    for (std::size_t n = 0; n < N; ++n) {
      const T* p = x.channel(n, c);
      T* xh = xhat.channel(n, c);
      T* q = y.channel(n, c);
      for (std::size_t i = 0; i < HW; ++i) {
        xh[i] = static_cast<T>((p[i] - mean) * is);
        q[i] = gamma[c] * xh[i] + beta[c];
      }
    }
  }
  if (cache) *cache = BnCache<T>{std::move(xhat), std::move(inv_std), mode};
  return y;
}

template <typename T>
Tensor4<T> batchnorm_backward(const Tensor4<T>& gy, const std::vector<T>& gamma, const BnCache<T>& cache,
                              std::vector<T>& ggamma, std::vector<T>& gbeta) {
  const std::size_t C = gy.c(), N = gy.n(), HW = gy.plane();
  require(cache.xhat.dims() == gy.dims(), ErrorCategory::shape, "batchnorm_backward: gradient shape");
  Tensor4<T> gx(gy.dims());
  const double M = double(N * HW);
  for (std::size_t c = 0; c < C; ++c) {
    double sum_dy = 0.0, sum_dy_xhat = 0.0;
    for (std::size_t n = 0; n < N; ++n) {
      const T* g = gy.channel(n, c);
      const T* xh = cache.xhat.channel(n, c);
      for (std::size_t i = 0; i < HW; ++i) {
        sum_dy += g[i];
        sum_dy_xhat += double(g[i]) * xh[i];
      }
    }
    ggamma[c] += static_cast<T>(sum_dy_xhat);
    gbeta[c] += static_cast<T>(sum_dy);
    const double scale = double(gamma[c]) * cache.inv_std[c];
    for (std::size_t n = 0; n < N; ++n) {
      const T* g = gy.channel(n, c);
      const T* xh = cache.xhat.channel(n, c);
      T* out = gx.channel(n, c);
      if (cache.mode == BnMode::train) {
        const double mean_dy = sum_dy / M, mean_dy_xhat = sum_dy_xhat / M;
        for (std::size_t i = 0; i < HW; ++i) out[i] = static_cast<T>(scale * (g[i] - mean_dy - xh[i] * mean_dy_xhat));
      } else {
        for (std::size_t i = 0; i < HW; ++i) out[i] = static_cast<T>(scale * g[i]);
      }
    }
  }
  return gx;
}

// ---------------------------------------------------------------------------
// ReLU, dropout

template <typename T>
Tensor4<T> relu(const Tensor4<T>& x) {
  Tensor4<T> y(x.dims());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = x[i] > T(0) ? x[i] : T(0);
  return y;
}

/// Gradient passes where the forward input was strictly positive.
template <typename T>
Tensor4<T> relu_backward(const Tensor4<T>& x, const Tensor4<T>& gy) {
  Tensor4<T> gx(x.dims());
  for (std::size_t i = 0; i < x.size(); ++i) gx[i] = x[i] > T(0) ? gy[i] : T(0);
  return gx;
}

/// Inverted dropout. In train mode with p > 0 each element is zeroed with
/// probability p and survivors are scaled by 1/(1-p); `mask` receives the
/// per-element multiplier. Otherwise the input is returned unchanged and the
/// mask is left empty.
template <typename T>
Tensor4<T> dropout(const Tensor4<T>& x, double p, bool train, Rng& rng, std::vector<T>* mask = nullptr) {
  require(p >= 0.0 && p < 1.0, ErrorCategory::parameter, "dropout: p must be in [0,1)");
  if (mask) mask->clear();
  if (!train || p == 0.0) return x;
  const T keep = static_cast<T>(1.0 / (1.0 - p));
  Tensor4<T> y(x.dims());
  std::vector<T> m(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    m[i] = rng.uniform() < p ? T(0) : keep;
    y[i] = x[i] * m[i];
  }
  if (mask) *mask = std::move(m);
  return y;
}

template <typename T>
Tensor4<T> dropout_backward(const Tensor4<T>& gy, const std::vector<T>& mask) {
  if (mask.empty()) return gy;
  Tensor4<T> gx(gy.dims());
  for (std::size_t i = 0; i < gy.size(); ++i) gx[i] = gy[i] * mask[i];
  return gx;
}

// ---------------------------------------------------------------------------
// Loss and optimizer

template <typename T>
struct LossResult {
  double loss = 0.0;
  Tensor4<T> grad;
};

/// Mean squared error over all elements; grad = 2 (pred - target) / count.
template <typename T>
LossResult<T> mse_loss(const Tensor4<T>& pred, const Tensor4<T>& target) {
  require_same_dims(pred, target, "mse_loss");
  LossResult<T> r{0.0, Tensor4<T>(pred.dims())};
  const double count = double(pred.size());
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double d = double(pred[i]) - double(target[i]);
    r.loss += d * d;
    r.grad[i] = static_cast<T>(2.0 * d / count);
  }
  r.loss /= count;
  return r;
}

/// v <- momentum * v - lr * g; p <- p + v.
template <typename T>
void sgd_step(std::vector<T>& param, const std::vector<T>& grad, std::vector<T>& velocity, double lr, double momentum) {
  require(param.size() == grad.size() && param.size() == velocity.size(), ErrorCategory::shape, "sgd_step: size mismatch");
  const T mu = static_cast<T>(momentum), eta = static_cast<T>(lr);
  for (std::size_t i = 0; i < param.size(); ++i) {
    velocity[i] = mu * velocity[i] - eta * grad[i];
    param[i] += velocity[i];
  }
}

}  // namespace hdrnn::nn
