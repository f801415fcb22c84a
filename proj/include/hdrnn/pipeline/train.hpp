#pragma once

// Samples, the training loop, the deterministic data-parallel step and the
// short-run hyperparameter search.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <exception>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "hdrnn/camera.hpp"
#include "hdrnn/error.hpp"
#include "hdrnn/image_io.hpp"
#include "hdrnn/nn/network.hpp"
#include "hdrnn/pipeline/decompose.hpp"
#include "hdrnn/pipeline/models.hpp"
#include "hdrnn/pipeline/patches.hpp"

namespace hdrnn {

enum class Dtype { f32, f64 };

inline std::string dtype_name(Dtype d) { return d == Dtype::f32 ? "f32" : "f64"; }

inline Dtype parse_dtype(const std::string& s) {
  if (s == "f32") return Dtype::f32;
  if (s == "f64") return Dtype::f64;
  fail(ErrorCategory::usage, "dtype must be f32 or f64, got '" + s + "'");
}

struct TrainConfig {
  double lr = 1e-2;
  double momentum = 0.9;
  std::size_t epochs = 30;
  std::size_t batch_size = 40;
  std::size_t patch = 64;
  double dropout_p = 0.4;
  std::uint64_t seed = 0;
  std::size_t workers = 1;
  Dtype dtype = Dtype::f64;
  /// Regress log1p of normalized radiance instead of linear radiance.
  bool log_target = false;
  /// Run BN on running statistics during training (used by the equivalence checks).
  bool freeze_bn = false;
};

inline void validate(const TrainConfig& c) {
  require(c.batch_size >= 1, ErrorCategory::validation, "train config: batch_size must be >= 1");
  require(c.patch >= 8, ErrorCategory::validation, "train config: patch must be >= 8");
  require(c.workers >= 1, ErrorCategory::validation, "train config: workers must be >= 1");
  require(c.lr >= 0.0 && std::isfinite(c.lr), ErrorCategory::validation, "train config: lr must be >= 0");
  require(c.momentum >= 0.0 && c.momentum < 1.0, ErrorCategory::validation, "train config: momentum must be in [0,1)");
  require(c.dropout_p >= 0.0 && c.dropout_p < 1.0, ErrorCategory::validation, "train config: dropout_p must be in [0,1)");
}

/// Flat JSON keys named like the fields; absent keys keep `base`.
inline TrainConfig train_config_from_json(const nlohmann::json& j, TrainConfig base = {}) {
  require(j.is_object(), ErrorCategory::validation, "config must be a JSON object");
  try {
    for (const auto& [key, v] : j.items()) {
      if (key == "lr") base.lr = v.get<double>();
      else if (key == "momentum") base.momentum = v.get<double>();
      else if (key == "epochs") base.epochs = v.get<std::size_t>();
      else if (key == "batch_size") base.batch_size = v.get<std::size_t>();
      else if (key == "patch") base.patch = v.get<std::size_t>();
      else if (key == "dropout_p") base.dropout_p = v.get<double>();
      else if (key == "seed") base.seed = v.get<std::uint64_t>();
      else if (key == "workers") base.workers = v.get<std::size_t>();
      else if (key == "dtype") base.dtype = parse_dtype(v.get<std::string>());
      else if (key == "log_target") base.log_target = v.get<bool>();
      else if (key == "freeze_bn") base.freeze_bn = v.get<bool>();
      else fail(ErrorCategory::validation, "config: unknown key '" + key + "'");
    }
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCategory::validation, std::string("config: ") + e.what());
  }
  return base;
}

inline nlohmann::json train_config_to_json(const TrainConfig& c) {
  return {{"lr", c.lr},
          {"momentum", c.momentum},
          {"epochs", c.epochs},
          {"batch_size", c.batch_size},
          {"patch", c.patch},
          {"dropout_p", c.dropout_p},
          {"seed", c.seed},
          {"workers", c.workers},
          {"dtype", dtype_name(c.dtype)},
          {"log_target", c.log_target},
          {"freeze_bn", c.freeze_bn}};
}

// ---------------------------------------------------------------------------
// Samples

template <typename T>
struct Sample {
  nn::Tensor4<T> input;   // 1 x C x p x p
  nn::Tensor4<T> target;  // 1 x 1 x p x p
};

/// Five [0,1]-scaled code planes of one colour channel.
inline std::vector<PlaneT<double>> stack_planes(const ExposureStack& stack, RgbChannel c) {
  validate(stack);
  std::vector<PlaneT<double>> planes;
  for (const auto& img : stack.images) {
    PlaneT<double> p(img.width, img.height);
    for (std::size_t i = 0; i < img.pixels(); ++i) p.data[i] = img.data[3 * i + static_cast<int>(c)] / 255.0;
    planes.push_back(std::move(p));
  }
  return planes;
}

/// Regression target for one channel of a normalized map.
inline PlaneT<double> radiance_target(const RadianceMap& normalized, RgbChannel c, bool log_target) {
  PlaneT<double> p(normalized.width, normalized.height);
  for (std::size_t i = 0; i < normalized.pixels(); ++i) {
    const double v = normalized.data[3 * i + static_cast<int>(c)];
    p.data[i] = log_target ? std::log1p(v) : v;
  }
  return p;
}

template <typename T>
std::vector<Sample<T>> make_samples(const std::vector<PlaneT<double>>& inputs, const PlaneT<double>& target,
                                    std::size_t patch) {
  const PatchGrid grid = make_grid(target.width, target.height, patch);
  std::vector<std::vector<PlaneT<double>>> in_patches;
  for (const auto& p : inputs) {
    require(p.width == target.width && p.height == target.height, ErrorCategory::shape,
            "make_samples: input and target planes differ in size");
    in_patches.push_back(extract_patches(p, grid));
  }
  const auto tgt = extract_patches(target, grid);
  std::vector<Sample<T>> out;
  for (std::size_t k = 0; k < grid.size(); ++k) {
    std::vector<PlaneT<double>> chans;
    for (const auto& ip : in_patches) chans.push_back(ip[k]);
    out.push_back({planes_to_tensor<T>(chans), planes_to_tensor<T>(std::vector<PlaneT<double>>{tgt[k]})});
  }
  return out;
}

template <typename T>
std::vector<Sample<T>> ldr2hdr_samples(const ExposureStack& stack, const RadianceMap& normalized, RgbChannel c,
                                       std::size_t patch, bool log_target) {
  return make_samples<T>(stack_planes(stack, c), radiance_target(normalized, c, log_target), patch);
}

template <typename T>
std::vector<Sample<T>> tonemap_samples(const TonemapPairs& pairs, TmChannel c, std::size_t patch) {
  return make_samples<T>({pairs.input.scaled(c)}, pairs.target.scaled(c), patch);
}

/// Stacks samples[idx[begin..end)] into one batch.
template <typename T>
std::pair<nn::Tensor4<T>, nn::Tensor4<T>> make_batch(const std::vector<Sample<T>>& samples,
                                                     const std::vector<std::size_t>& idx, std::size_t begin,
                                                     std::size_t end) {
  require(end > begin && end <= idx.size(), ErrorCategory::parameter, "make_batch: bad range");
  const auto& s0 = samples[idx[begin]];
  const std::size_t n = end - begin;
  nn::Tensor4<T> x(n, s0.input.c(), s0.input.h(), s0.input.w());
  nn::Tensor4<T> y(n, 1, s0.target.h(), s0.target.w());
  const std::size_t xs = x.size() / n, ys = y.size() / n;
  for (std::size_t k = 0; k < n; ++k) {
    const auto& s = samples[idx[begin + k]];
    require(s.input.size() == xs && s.target.size() == ys, ErrorCategory::shape, "make_batch: samples differ in shape");
    std::copy(s.input.vec().begin(), s.input.vec().end(), x.sample(k));
    std::copy(s.target.vec().begin(), s.target.vec().end(), y.sample(k));
  }
  return {std::move(x), std::move(y)};
}

/// Rows [begin, end) of a batch tensor.
template <typename T>
nn::Tensor4<T> slice_batch(const nn::Tensor4<T>& t, std::size_t begin, std::size_t end) {
  nn::Tensor4<T> out(end - begin, t.c(), t.h(), t.w());
  std::copy(t.sample(begin), t.sample(begin) + out.size(), out.data());
  return out;
}

/// Sample-weighted mean MSE in eval mode.
template <typename T>
double evaluate_mse(nn::Network<T>& net, const std::vector<Sample<T>>& samples, std::size_t batch_size = 40) {
  require(!samples.empty(), ErrorCategory::validation, "evaluate_mse: no samples");
  std::vector<std::size_t> idx(samples.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  double total = 0.0;
  for (std::size_t b = 0; b < idx.size(); b += batch_size) {
    const std::size_t e = std::min(idx.size(), b + batch_size);
    auto [x, y] = make_batch(samples, idx, b, e);
    total += nn::mse_loss(net.forward(x, nn::RunMode::eval()), y).loss * double(e - b);
  }
  return total / double(samples.size());
}

// ---------------------------------------------------------------------------
// Loss curve

struct CurveRow {
  std::size_t epoch = 0;  // 1-based
  double mean_loss = 0.0;
  std::optional<double> val_loss;
};

using LossCurve = std::vector<CurveRow>;

inline std::string curve_csv(const LossCurve& curve) {
  const bool with_val = std::any_of(curve.begin(), curve.end(), [](const CurveRow& r) { return r.val_loss.has_value(); });
  std::ostringstream os;
  os.precision(17);
  os << (with_val ? "epoch,mean_loss,val_loss\n" : "epoch,mean_loss\n");
  for (const auto& r : curve) {
    os << r.epoch << "," << r.mean_loss;
    if (with_val) os << "," << (r.val_loss ? *r.val_loss : std::nan(""));
    os << "\n";
  }
  return os.str();
}

// ---------------------------------------------------------------------------
// Trainer

struct StepResult {
  double loss = 0.0;
  std::size_t active_workers = 0;
};

/// Owns the worker replicas of one network. Replica 0 is the master copy: it
/// reduces the gradients, applies SGD and broadcasts.
template <typename T>
class Trainer {
 public:
  Trainer(nn::Network<T> net, TrainConfig cfg) : cfg_(cfg), sgd_(cfg.lr, cfg.momentum) {
    validate(cfg_);
    workers_.assign(cfg_.workers, std::move(net));
  }

  nn::Network<T>& net() { return workers_[0]; }
  const nn::Network<T>& net() const { return workers_[0]; }
  const std::vector<nn::Network<T>>& replicas() const { return workers_; }
  const TrainConfig& config() const { return cfg_; }
  const LossCurve& curve() const { return curve_; }
  std::uint64_t steps() const { return step_; }
  std::size_t epochs_done() const { return epoch_; }

  /// One data-parallel step on a batch. Shards are contiguous runs of
  /// ceil(B/K) samples; afterwards replica 0's gradients hold the reduced
  /// whole-batch gradient.
  StepResult step(const nn::Tensor4<T>& x, const nn::Tensor4<T>& y) {
    require(x.n() == y.n() && x.n() >= 1, ErrorCategory::shape, "train step: batch size mismatch");
    const std::size_t B = x.n(), K = workers_.size();
    const std::size_t shard = (B + K - 1) / K;
    struct Shard {
      std::size_t begin = 0, end = 0;
      double loss = 0.0;
      std::exception_ptr error;
    };
    std::vector<Shard> shards(K);
    for (std::size_t k = 0; k < K; ++k) {
      shards[k].begin = std::min(B, k * shard);
      shards[k].end = std::min(B, (k + 1) * shard);
    }

    auto run = [&](std::size_t k) {
      Shard& s = shards[k];
      try {
        nn::Network<T>& w = workers_[k];
        w.zero_grad();
        if (s.begin == s.end) return;
        nn::Rng rng(nn::stream_seed(cfg_.seed, {step_, k}));
        const nn::RunMode mode{!cfg_.freeze_bn, true, &rng};
        const auto xs = s.begin == 0 && s.end == B ? x : slice_batch(x, s.begin, s.end);
        const auto ys = s.begin == 0 && s.end == B ? y : slice_batch(y, s.begin, s.end);
        auto loss = nn::mse_loss(w.forward(xs, mode), ys);
        s.loss = loss.loss;
        if (!std::isfinite(s.loss))
          fail(ErrorCategory::numeric, "non-finite loss at step " + std::to_string(step_) + " (worker " +
                                           std::to_string(k) + ")\n" + w.activation_report());
        w.backward(loss.grad);
      } catch (...) {
        s.error = std::current_exception();
      }
    };

    if (K == 1) {
      run(0);
    } else {
      std::vector<std::thread> threads;
      for (std::size_t k = 0; k < K; ++k) threads.emplace_back(run, k);
      for (auto& t : threads) t.join();
    }
    for (const auto& s : shards)
      if (s.error) std::rethrow_exception(s.error);

    // Reduce into replica 0 in ascending worker order, weighted to the batch mean.
    StepResult r;
    auto& master = workers_[0].params();
    std::vector<std::vector<T>> total(master.size());
    for (std::size_t i = 0; i < master.size(); ++i) total[i].assign(master[i].grad.size(), T(0));
    for (std::size_t k = 0; k < K; ++k) {
      const std::size_t n = shards[k].end - shards[k].begin;
      if (n == 0) continue;
      ++r.active_workers;
      const double wk = double(n) / double(B);
      r.loss += wk * shards[k].loss;
      const auto& ps = workers_[k].params();
      for (std::size_t i = 0; i < ps.size(); ++i) {
        const auto& g = ps[i].grad.vec();
        for (std::size_t j = 0; j < g.size(); ++j) total[i][j] += static_cast<T>(wk) * g[j];
      }
    }
    for (std::size_t i = 0; i < master.size(); ++i) master[i].grad.vec() = std::move(total[i]);

    sgd_.step(workers_[0]);
    for (std::size_t k = 1; k < K; ++k) workers_[k].copy_state_from(workers_[0]);
    ++step_;
    return r;
  }

  /// Shuffles with the epoch RNG, runs mini-batches and appends a curve row.
  double train_epoch(const std::vector<Sample<T>>& samples, const std::vector<Sample<T>>* val = nullptr) {
    require(!samples.empty(), ErrorCategory::validation, "train_epoch: no samples");
    std::vector<std::size_t> idx(samples.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    nn::Rng rng(nn::stream_seed(cfg_.seed, {0xE70C, epoch_}));
    rng.shuffle(idx.begin(), idx.end());
    double total = 0.0;
    for (std::size_t b = 0; b < idx.size(); b += cfg_.batch_size) {
      const std::size_t e = std::min(idx.size(), b + cfg_.batch_size);
      auto [x, y] = make_batch(samples, idx, b, e);
      total += step(x, y).loss * double(e - b);
    }
    ++epoch_;
    CurveRow row{epoch_, total / double(samples.size()), std::nullopt};
    if (val && !val->empty()) row.val_loss = evaluate_mse(workers_[0], *val, cfg_.batch_size);
    curve_.push_back(row);
    return row.mean_loss;
  }

  /// cfg.epochs epochs.
  const LossCurve& fit(const std::vector<Sample<T>>& samples, const std::vector<Sample<T>>* val = nullptr) {
    for (std::size_t e = 0; e < cfg_.epochs; ++e) train_epoch(samples, val);
    return curve_;
  }

 private:
  TrainConfig cfg_;
  nn::Sgd<T> sgd_;
  std::vector<nn::Network<T>> workers_;
  LossCurve curve_;
  std::uint64_t step_ = 0;
  std::size_t epoch_ = 0;
};

// ---------------------------------------------------------------------------
// Hyperparameter search

struct SearchCandidate {
  std::string id;
  nn::NetworkSpec spec;
  TrainConfig cfg;
};

struct SearchResult {
  std::string id;
  std::size_t index = 0;  // position in the candidate list
  double val_error = 0.0;
  LossCurve curve;
};

inline constexpr std::size_t kSearchEpochs = 2;

/// Trains every candidate for exactly two epochs and ranks by eval-mode
/// validation MSE (ascending, ties in candidate order).
template <typename T>
std::vector<SearchResult> hyperparam_search(const std::vector<SearchCandidate>& candidates,
                                            const std::vector<Sample<T>>& train, const std::vector<Sample<T>>& val) {
  require(!candidates.empty(), ErrorCategory::validation, "hyperparam_search: no candidates");
  std::vector<SearchResult> out;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    Trainer<T> t(nn::Network<T>(candidates[i].spec), candidates[i].cfg);
    for (std::size_t e = 0; e < kSearchEpochs; ++e) t.train_epoch(train);
    out.push_back({candidates[i].id, i, evaluate_mse(t.net(), val, candidates[i].cfg.batch_size), t.curve()});
  }
  std::stable_sort(out.begin(), out.end(), [](const SearchResult& a, const SearchResult& b) { return a.val_error < b.val_error; });
  return out;
}

inline std::string search_report_csv(const std::vector<SearchResult>& results) {
  std::ostringstream os;
  os.precision(17);
  os << "rank,config,val_error,epoch1_loss,epoch2_loss\n";
  for (std::size_t r = 0; r < results.size(); ++r) {
    const auto& s = results[r];
    os << r + 1 << "," << s.id << "," << s.val_error;
    for (const auto& row : s.curve) os << "," << row.mean_loss;
    os << "\n";
  }
  return os.str();
}

}  // namespace hdrnn
