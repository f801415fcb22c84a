#pragma once

// Central-difference verification of analytic gradients (64-bit).

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "hdrnn/nn/layers.hpp"
#include "hdrnn/nn/network.hpp"

namespace hdrnn::nn {

/// |a - n| / max(|a|, |n|, 1e-8)
inline double relative_error(double analytic, double numeric) {
  return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), 1e-8});
}

struct LayerCheck {
  std::string name;
  std::size_t checked = 0;
  std::size_t skipped_kinks = 0;  // perturbation flipped a ReLU; the difference quotient is invalid there
  double max_rel_error = 0.0;
  std::string worst_param;
  double worst_analytic = 0.0, worst_numeric = 0.0;
};

struct GradCheckReport {
  std::vector<LayerCheck> layers;
  double tolerance = 0.0;
  bool passed = false;

  std::string str() const {
    std::ostringstream os;
    for (const auto& l : layers) {
      os << l.name << ": checked=" << l.checked << " skipped_kinks=" << l.skipped_kinks
         << " max_rel_error=" << l.max_rel_error;
      if (!l.worst_param.empty())
        os << " at " << l.worst_param << " (analytic " << l.worst_analytic << ", numeric " << l.worst_numeric << ")";
      os << (l.max_rel_error < tolerance ? " ok" : " FAIL") << "\n";
    }
    os << (passed ? "PASS" : "FAIL") << " (tolerance " << tolerance << ")\n";
    return os.str();
  }

  /// Names of layers at or above tolerance.
  std::vector<std::string> failing_layers() const {
    std::vector<std::string> out;
    for (const auto& l : layers)
      if (!(l.max_rel_error < tolerance)) out.push_back(l.name);
    return out;
  }
};

struct GradCheckOptions {
  double h = 1e-3;
  double tolerance = 1e-4;
  std::size_t weights_per_layer = 200;
  std::uint64_t seed = 0;
  /// Combine the h and 2h quotients (five-point stencil) to cancel the O(h^2)
  /// truncation term.
  bool richardson = true;
  /// Hook applied to the analytic gradients before comparison (fault injection).
  std::function<void(Network<double>&)> tamper;
};

/// Compares backprop gradients of MSE(net(x), target) against central
/// differences. BN runs on batch statistics and dropout is off. For each layer
/// up to `weights_per_layer` randomly chosen weights plus every bias and BN
/// term are checked; a probe whose +h / -h evaluations change any ReLU sign
/// relative to the unperturbed pass straddles a kink and is skipped and
/// replaced by another weight.
inline GradCheckReport grad_check(Network<double>& net, const Tensor4<double>& x, const Tensor4<double>& target,
                                  const GradCheckOptions& opt = {}) {
  const RunMode mode = RunMode::deterministic_train();
  net.zero_grad();
  auto out = net.forward(x, mode);
  auto loss = mse_loss(out, target);
  net.backward(loss.grad);
  const auto baseline = net.relu_pattern();
  if (opt.tamper) opt.tamper(net);

  auto& params = net.params();
  std::vector<Tensor4<double>> analytic;
  for (const auto& p : params) analytic.push_back(p.grad);

  auto eval = [&]() {
    auto y = net.forward(x, mode);
    return mse_loss(y, target).loss;
  };

  GradCheckReport report;
  report.tolerance = opt.tolerance;
  report.layers.resize(net.layer_count());
  for (std::size_t i = 0; i < net.layer_count(); ++i) report.layers[i].name = layer_label(net.spec().layers[i], i);

  Rng rng(opt.seed);
  for (std::size_t pi = 0; pi < params.size(); ++pi) {
    auto& p = params[pi];
    LayerCheck& lc = report.layers[p.layer];
    std::vector<std::size_t> order(p.value.size());
    std::iota(order.begin(), order.end(), 0);
    std::size_t budget = order.size();
    if (!p.is_bias) {
      rng.shuffle(order.begin(), order.end());
      budget = std::min(order.size(), opt.weights_per_layer);
    }
    std::size_t valid = 0;
    for (std::size_t k = 0; k < order.size() && valid < budget; ++k) {
      const std::size_t idx = order[k];
      const double orig = p.value[idx];
      bool kink = false;
      auto diff = [&](double step) {
        p.value[idx] = orig + step;
        const double lp = eval();
        kink = kink || net.relu_pattern() != baseline;
        p.value[idx] = orig - step;
        const double lm = eval();
        kink = kink || net.relu_pattern() != baseline;
        return (lp - lm) / (2.0 * step);
      };
      double numeric = diff(opt.h);
      if (opt.richardson) numeric = (4.0 * numeric - diff(2.0 * opt.h)) / 3.0;
      p.value[idx] = orig;
      if (kink) {
        ++lc.skipped_kinks;
        continue;
      }
      const double err = relative_error(analytic[pi][idx], numeric);
      ++valid;
      ++lc.checked;
      if (err > lc.max_rel_error || std::isnan(err)) {
        lc.max_rel_error = std::isnan(err) ? INFINITY : err;
        lc.worst_param = p.name + "[" + std::to_string(idx) + "]";
        lc.worst_analytic = analytic[pi][idx];
        lc.worst_numeric = numeric;
      }
    }
  }
  // Restore caches and gradients to the unperturbed state.
  net.zero_grad();
  net.backward(mse_loss(net.forward(x, mode), target).grad);

  report.passed = true;
  for (const auto& l : report.layers)
    if (!(l.max_rel_error < opt.tolerance) || l.checked == 0) report.passed = false;
  return report;
}

/// Regression target near the network's current batch-statistics output:
/// prediction plus N(0, residual^2) noise. Small residuals keep the loss, and
/// with it the roundoff in the difference quotients, small.
inline Tensor4<double> gradcheck_target(Network<double>& net, const Tensor4<double>& x, std::uint64_t seed,
                                        double residual = 0.1) {
  Tensor4<double> t = net.forward(x, RunMode::deterministic_train());
  Rng rng(seed);
  for (std::size_t i = 0; i < t.size(); ++i) t[i] += residual * rng.normal();
  return t;
}

/// Standard-normal input batch.
inline Tensor4<double> gradcheck_input(Dims d, std::uint64_t seed) {
  Rng rng(seed);
  Tensor4<double> t(d);
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = rng.normal();
  return t;
}

/// Builds `spec` and checks it on a batch x (C x size x size) input with a
/// near-prediction target, both derived from `seed`.
inline GradCheckReport grad_check_spec(const NetworkSpec& spec, std::size_t batch, std::size_t size,
                                       std::uint64_t seed, GradCheckOptions opt = {}) {
  Network<double> net(spec);
  const auto x = gradcheck_input({batch, spec.layers.front().in_depth, size, size}, stream_seed(seed, {1}));
  const auto target = gradcheck_target(net, x, stream_seed(seed, {2}));
  opt.seed = stream_seed(seed, {3});
  return grad_check(net, x, target, opt);
}

/// Max relative error between `analytic` and central differences of a scalar
/// function of x, over every element of x.
inline double max_input_gradient_error(const std::function<double(const Tensor4<double>&)>& f, Tensor4<double> x,
                                       const Tensor4<double>& analytic, double h = 1e-3) {
  double worst = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double orig = x[i];
    x[i] = orig + h;
    const double lp = f(x);
    x[i] = orig - h;
    const double lm = f(x);
    x[i] = orig;
    worst = std::max(worst, relative_error(analytic[i], (lp - lm) / (2.0 * h)));
  }
  return worst;
}

}  // namespace hdrnn::nn
