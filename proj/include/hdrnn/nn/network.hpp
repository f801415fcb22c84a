#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "hdrnn/error.hpp"
#include "hdrnn/nn/layers.hpp"
#include "hdrnn/nn/random.hpp"
#include "hdrnn/nn/tensor.hpp"

namespace hdrnn::nn {

enum class LayerKind : std::uint8_t { conv3x3 = 0, conv1x1 = 1, output1x1 = 2 };

inline int kernel_size(LayerKind k) { return k == LayerKind::conv3x3 ? 3 : 1; }

inline std::string kind_name(LayerKind k) {
  switch (k) {
    case LayerKind::conv3x3: return "conv3x3";
    case LayerKind::conv1x1: return "conv1x1";
    case LayerKind::output1x1: return "output1x1";
  }
  return "?";
}

struct LayerSpec {
  LayerKind kind = LayerKind::conv1x1;
  std::size_t in_depth = 1;
  std::size_t out_depth = 1;
  bool batchnorm = false;
  double dropout_p = 0.0;

  friend bool operator==(const LayerSpec&, const LayerSpec&) = default;
};

struct NetworkSpec {
  std::vector<LayerSpec> layers;
  std::uint64_t seed = 0;

  friend bool operator==(const NetworkSpec&, const NetworkSpec&) = default;
};

inline std::string layer_label(const LayerSpec& l, std::size_t index) {
  return "layer " + std::to_string(index) + " " + kind_name(l.kind) + " " + std::to_string(l.in_depth) + "->" +
         std::to_string(l.out_depth);
}

inline void validate(const NetworkSpec& spec) {
  require(!spec.layers.empty(), ErrorCategory::validation, "network: no layers");
  for (std::size_t i = 0; i < spec.layers.size(); ++i) {
    const auto& l = spec.layers[i];
    const std::string label = layer_label(l, i);
    require(l.in_depth >= 1 && l.out_depth >= 1, ErrorCategory::validation, label + ": depths must be >= 1");
    require(l.dropout_p >= 0.0 && l.dropout_p < 1.0, ErrorCategory::validation, label + ": dropout_p must be in [0,1)");
    if (i + 1 < spec.layers.size()) {
      require(l.kind != LayerKind::output1x1, ErrorCategory::validation, label + ": output layer must be last");
      require(l.out_depth == spec.layers[i + 1].in_depth, ErrorCategory::validation,
              label + ": out_depth does not match next layer's in_depth");
    }
  }
  const auto& last = spec.layers.back();
  require(last.kind == LayerKind::output1x1 && last.out_depth == 1 && !last.batchnorm && last.dropout_p == 0.0,
          ErrorCategory::validation, "network: final layer must be a plain output1x1 with depth 1");
}

/// How a forward pass treats batch norm and dropout.
struct RunMode {
  bool bn_batch_stats = false;
  bool dropout = false;
  Rng* rng = nullptr;

  static RunMode train(Rng& rng) { return {true, true, &rng}; }
  static RunMode eval() { return {false, false, nullptr}; }
  /// Batch statistics without dropout, as used by the gradient checker.
  static RunMode deterministic_train() { return {true, false, nullptr}; }
  /// Running statistics for BN while dropout (if any) stays active.
  static RunMode frozen_bn(Rng* rng = nullptr) { return {false, rng != nullptr, rng}; }
};

template <typename T>
struct Param {
  std::string name;
  std::size_t layer = 0;
  Tensor4<T> value;
  Tensor4<T> grad;
  bool is_bias = false;  // conv bias or BN affine term
};

/// Sequential stack of conv -> [BN] -> ReLU -> [dropout] blocks ending in a
/// linear 1x1 output conv. Value type: copying yields an independent replica.
template <typename T>
class Network {
 public:
  Network() = default;

  explicit Network(NetworkSpec spec) : spec_(std::move(spec)) {
    validate(spec_);
    Rng rng(spec_.seed);
    for (std::size_t i = 0; i < spec_.layers.size(); ++i) {
      const auto& l = spec_.layers[i];
      const int k = kernel_size(l.kind);
      const std::string label = "layer" + std::to_string(i);
      Block b;
      b.weight = params_.size();
      Tensor4<T> w(l.out_depth, l.in_depth, k, k);
      const double stddev = std::sqrt(2.0 / double(l.in_depth * k * k));
      for (std::size_t j = 0; j < w.size(); ++j) w[j] = static_cast<T>(stddev * rng.normal());
      add_param(label + ".weight", i, std::move(w), false);
      b.bias = params_.size();
      add_param(label + ".bias", i, Tensor4<T>(l.out_depth, 1, 1, 1), true);
      if (l.batchnorm) {
        b.gamma = params_.size();
        add_param(label + ".bn_gamma", i, Tensor4<T>(l.out_depth, 1, 1, 1, T(1)), true);
        b.beta = params_.size();
        add_param(label + ".bn_beta", i, Tensor4<T>(l.out_depth, 1, 1, 1), true);
        b.running = BnRunning<T>(l.out_depth);
      }
      blocks_.push_back(std::move(b));
    }
  }

  const NetworkSpec& spec() const { return spec_; }
  std::size_t layer_count() const { return blocks_.size(); }

  std::vector<Param<T>>& params() { return params_; }
  const std::vector<Param<T>>& params() const { return params_; }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const auto& p : params_) n += p.value.size();
    return n;
  }

  BnRunning<T>& running_stats(std::size_t layer) { return blocks_[layer].running; }
  const BnRunning<T>& running_stats(std::size_t layer) const { return blocks_[layer].running; }

  void zero_grad() {
    for (auto& p : params_) p.grad = Tensor4<T>(p.value.dims());
  }

  Tensor4<T> forward(const Tensor4<T>& x, const RunMode& mode) {
    Tensor4<T> a = x;
    for (std::size_t i = 0; i < blocks_.size(); ++i) {
      Block& b = blocks_[i];
      const LayerSpec& l = spec_.layers[i];
      b.input = std::move(a);
      a = conv_forward(b.input, params_[b.weight].value, params_[b.bias].value, kernel_size(l.kind),
                       layer_label(l, i));
      if (l.kind == LayerKind::output1x1) break;
      if (l.batchnorm) {
        a = batchnorm_forward(a, params_[b.gamma].value.vec(), params_[b.beta].value.vec(),
                              mode.bn_batch_stats ? BnMode::train : BnMode::eval, b.running, &b.bn_cache);
      }
      b.pre_relu = std::move(a);
      a = relu(b.pre_relu);
      const bool drop = mode.dropout && l.dropout_p > 0.0;
      if (drop) {
        require(mode.rng != nullptr, ErrorCategory::parameter, "forward: dropout requires an RNG");
        a = dropout(a, l.dropout_p, true, *mode.rng, &b.mask);
      } else {
        b.mask.clear();
      }
    }
    return a;
  }

  /// Back-propagates from the output gradient of the latest forward pass;
  /// parameter gradients accumulate. Returns the input gradient.
  Tensor4<T> backward(const Tensor4<T>& gy) {
    Tensor4<T> g = gy;
    for (std::size_t i = blocks_.size(); i-- > 0;) {
      Block& b = blocks_[i];
      const LayerSpec& l = spec_.layers[i];
      if (l.kind != LayerKind::output1x1) {
        g = dropout_backward(g, b.mask);
        g = relu_backward(b.pre_relu, g);
        if (l.batchnorm)
          g = batchnorm_backward(g, params_[b.gamma].value.vec(), b.bn_cache, params_[b.gamma].grad.vec(),
                                 params_[b.beta].grad.vec());
      }
      g = conv_backward(b.input, params_[b.weight].value, kernel_size(l.kind), g, params_[b.weight].grad,
                        params_[b.bias].grad);
    }
    return g;
  }

  /// Sign pattern of every ReLU input from the latest forward pass.
  std::vector<std::vector<bool>> relu_pattern() const {
    std::vector<std::vector<bool>> out;
    for (const auto& b : blocks_) {
      std::vector<bool> bits(b.pre_relu.size());
      for (std::size_t j = 0; j < b.pre_relu.size(); ++j) bits[j] = b.pre_relu[j] > T(0);
      out.push_back(std::move(bits));
    }
    return out;
  }

  /// Per-layer min/mean/max of the pre-activation values of the last forward.
  std::string activation_report() const {
    std::ostringstream os;
    for (std::size_t i = 0; i < blocks_.size(); ++i) {
      const auto& t = blocks_[i].pre_relu.size() ? blocks_[i].pre_relu : blocks_[i].input;
      double lo = std::numeric_limits<double>::infinity(), hi = -lo, sum = 0.0;
      std::size_t nonfinite = 0;
      for (std::size_t j = 0; j < t.size(); ++j) {
        const double v = t[j];
        if (!std::isfinite(v)) {
          ++nonfinite;
          continue;
        }
        lo = std::min(lo, v);
        hi = std::max(hi, v);
        sum += v;
      }
      os << layer_label(spec_.layers[i], i) << ": min=" << lo << " mean=" << (t.size() ? sum / t.size() : 0.0)
         << " max=" << hi << " nonfinite=" << nonfinite << "\n";
    }
    return os.str();
  }

  /// Copies parameters and running statistics (not caches or gradients).
  void copy_state_from(const Network& other) {
    require(other.spec_.layers == spec_.layers, ErrorCategory::shape, "copy_state_from: architecture mismatch");
    for (std::size_t i = 0; i < params_.size(); ++i) params_[i].value = other.params_[i].value;
    for (std::size_t i = 0; i < blocks_.size(); ++i) blocks_[i].running = other.blocks_[i].running;
  }

  bool same_state(const Network& other) const {
    if (other.params_.size() != params_.size()) return false;
    for (std::size_t i = 0; i < params_.size(); ++i)
      if (!(params_[i].value == other.params_[i].value)) return false;
    for (std::size_t i = 0; i < blocks_.size(); ++i)
      if (blocks_[i].running.mean != other.blocks_[i].running.mean ||
          blocks_[i].running.var != other.blocks_[i].running.var)
        return false;
    return true;
  }

  template <typename U>
  Network<U> cast() const {
    Network<U> out(spec_);
    for (std::size_t i = 0; i < params_.size(); ++i) out.params()[i].value = params_[i].value.template cast<U>();
    for (std::size_t i = 0; i < blocks_.size(); ++i) {
      auto& r = out.running_stats(i);
      r.mean.assign(blocks_[i].running.mean.begin(), blocks_[i].running.mean.end());
      r.var.assign(blocks_[i].running.var.begin(), blocks_[i].running.var.end());
    }
    return out;
  }

 private:
  static constexpr std::size_t npos = std::size_t(-1);

  struct Block {
    std::size_t weight = npos, bias = npos, gamma = npos, beta = npos;
    BnRunning<T> running;
    Tensor4<T> input, pre_relu;
    BnCache<T> bn_cache;
    std::vector<T> mask;
  };

  void add_param(std::string name, std::size_t layer, Tensor4<T> value, bool is_bias) {
    Tensor4<T> grad(value.dims());
    params_.push_back(Param<T>{std::move(name), layer, std::move(value), std::move(grad), is_bias});
  }

  NetworkSpec spec_;
  std::vector<Param<T>> params_;
  std::vector<Block> blocks_;
};

/// Conv weights + biases + 2 affine terms per BN channel.
inline std::size_t expected_parameter_count(const NetworkSpec& spec) {
  std::size_t n = 0;
  for (const auto& l : spec.layers) {
    const std::size_t k = kernel_size(l.kind);
    n += l.in_depth * l.out_depth * k * k + l.out_depth;
    if (l.batchnorm) n += 2 * l.out_depth;
  }
  return n;
}

/// Momentum SGD over all parameters of a network.
template <typename T>
class Sgd {
 public:
  Sgd(double lr = 1e-2, double momentum = 0.9) : lr_(lr), momentum_(momentum) {
    require(lr >= 0.0 && momentum >= 0.0 && momentum < 1.0, ErrorCategory::parameter,
            "sgd: lr must be >= 0 and momentum in [0,1)");
  }

  void step(Network<T>& net) {
    auto& ps = net.params();
    if (velocity_.size() != ps.size()) {
      velocity_.clear();
      for (const auto& p : ps) velocity_.emplace_back(p.value.size(), T(0));
    }
    for (std::size_t i = 0; i < ps.size(); ++i) sgd_step(ps[i].value.vec(), ps[i].grad.vec(), velocity_[i], lr_, momentum_);
  }

  double lr() const { return lr_; }
  double momentum() const { return momentum_; }

 private:
  double lr_, momentum_;
  std::vector<std::vector<T>> velocity_;
};

}  // namespace hdrnn::nn
