#include <gtest/gtest.h>

#include "hdrnn/nn/checkpoint.hpp"
#include "hdrnn/nn/gradcheck.hpp"
#include "hdrnn/nn/network.hpp"

namespace {

using namespace hdrnn::nn;

NetworkSpec chain(std::size_t in, const std::vector<std::size_t>& depths, double p, std::uint64_t seed) {
  NetworkSpec s;
  s.seed = seed;
  std::size_t prev = in;
  for (std::size_t i = 0; i < depths.size(); ++i) {
    s.layers.push_back({i == 0 ? LayerKind::conv3x3 : LayerKind::conv1x1, prev, depths[i], true, p});
    prev = depths[i];
  }
  s.layers.push_back({LayerKind::output1x1, prev, 1, false, 0.0});
  return s;
}

NetworkSpec fig1(double p = 0.0, std::uint64_t seed = 1) { return chain(5, {60, 40, 20, 20, 20}, p, seed); }
NetworkSpec fig2(double p = 0.0, std::uint64_t seed = 1) { return chain(1, {100, 80, 50, 10}, p, seed); }

Tensor4<double> random_tensor(Dims d, std::uint64_t seed) {
  Rng rng(seed);
  Tensor4<double> t(d);
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = rng.normal();
  return t;
}

TEST(Network, Ldr2HdrParameterCounts) {
  const Network<float> net(fig1());
  const std::vector<std::size_t> conv_counts{2760, 2440, 820, 420, 420, 21};
  std::vector<std::size_t> per_layer(6, 0), bn(6, 0);
  for (const auto& p : net.params()) {
    if (p.name.find("bn_") != std::string::npos)
      bn[p.layer] += p.value.size();
    else
      per_layer[p.layer] += p.value.size();
  }
  EXPECT_EQ(per_layer, conv_counts);
  EXPECT_EQ(bn, (std::vector<std::size_t>{120, 80, 40, 40, 40, 0}));
  std::size_t total = 0;
  for (auto c : conv_counts) total += c;
  EXPECT_EQ(net.parameter_count(), total + 2 * (60 + 40 + 20 + 20 + 20));
  EXPECT_EQ(expected_parameter_count(fig1()), net.parameter_count());
  EXPECT_EQ(expected_parameter_count(fig2()), Network<float>(fig2()).parameter_count());
}

TEST(Network, SpecValidation) {
  auto s = fig1();
  s.layers[2].in_depth = 41;
  EXPECT_THROW(Network<float>{s}, hdrnn::Error);
  s = fig1();
  s.layers.back().batchnorm = true;
  EXPECT_THROW(Network<float>{s}, hdrnn::Error);
  s = fig1();
  s.layers.back().out_depth = 2;
  EXPECT_THROW(Network<float>{s}, hdrnn::Error);
  s = fig1();
  s.layers[1].dropout_p = 1.0;
  EXPECT_THROW(Network<float>{s}, hdrnn::Error);
  s = fig1();
  s.layers.pop_back();
  EXPECT_THROW(Network<float>{s}, hdrnn::Error);
}

TEST(Network, HeInitialization) {
  const Network<double> net(chain(3, {200}, 0.0, 9));
  const auto& w = net.params()[0].value;
  double s = 0, s2 = 0;
  for (std::size_t i = 0; i < w.size(); ++i) {
    s += w[i];
    s2 += w[i] * w[i];
  }
  const double n = double(w.size());
  EXPECT_NEAR(s / n, 0.0, 0.02);
  EXPECT_NEAR(std::sqrt(s2 / n), std::sqrt(2.0 / 27.0), 0.02);
  for (const auto& p : net.params()) {
    if (p.name.find("bias") != std::string::npos || p.name.find("beta") != std::string::npos) {
      for (std::size_t i = 0; i < p.value.size(); ++i) EXPECT_EQ(p.value[i], 0.0);
    }
    if (p.name.find("gamma") != std::string::npos) {
      for (std::size_t i = 0; i < p.value.size(); ++i) EXPECT_EQ(p.value[i], 1.0);
    }
  }
}

TEST(Network, ForwardShapes) {
  Network<float> n1(fig1(0.4));
  Network<float> n2(fig2(0.4));
  Tensor4<float> x1(2, 5, 64, 64, 0.3f), x2(1, 1, 64, 64, 0.3f);
  EXPECT_EQ(n1.forward(x1, RunMode::eval()).dims(), (Dims{2, 1, 64, 64}));
  EXPECT_EQ(n2.forward(x2, RunMode::eval()).dims(), (Dims{1, 1, 64, 64}));
  EXPECT_THROW(n1.forward(x2, RunMode::eval()), hdrnn::Error);
}

TEST(Network, EvalForwardIsDeterministic) {
  Network<double> net(fig1(0.4));
  const auto x = random_tensor({2, 5, 8, 8}, 3);
  const auto a = net.forward(x, RunMode::eval());
  const auto b = net.forward(x, RunMode::eval());
  EXPECT_EQ(a, b);
  Network<double> twin(fig1(0.4));
  EXPECT_EQ(twin.forward(x, RunMode::eval()), a);
}

TEST(Network, DropoutNeedsRng) {
  Network<double> net(fig1(0.4));
  RunMode m = RunMode::eval();
  m.dropout = true;
  EXPECT_THROW(net.forward(random_tensor({1, 5, 8, 8}, 1), m), hdrnn::Error);
}

TEST(GradCheck, SingleOutputLayer) {
  NetworkSpec s;
  s.layers.push_back({LayerKind::output1x1, 4, 1, false, 0.0});
  Network<double> net(s);
  const auto x = random_tensor({2, 4, 5, 5}, 1);
  const auto r = grad_check(net, x, gradcheck_target(net, x, 2));
  EXPECT_TRUE(r.passed) << r.str();
}

TEST(GradCheck, EachLayerTypeAlone) {
  for (LayerKind k : {LayerKind::conv3x3, LayerKind::conv1x1}) {
    for (bool bn : {false, true}) {
      NetworkSpec s;
      s.seed = 4;
      s.layers.push_back({k, 3, 6, bn, 0.0});
      s.layers.push_back({LayerKind::output1x1, 6, 1, false, 0.0});
      Network<double> net(s);
      const auto x = random_tensor({2, 3, 6, 6}, 5);
      const auto r = grad_check(net, x, gradcheck_target(net, x, 6));
      EXPECT_TRUE(r.passed) << kind_name(k) << " bn=" << bn << "\n" << r.str();
    }
  }
}

TEST(GradCheck, Ldr2HdrArchitecture) {
  Network<double> net(fig1(0.4));
  const auto x = random_tensor({2, 5, 8, 8}, 7);
  const auto r = grad_check(net, x, gradcheck_target(net, x, 8));
  EXPECT_TRUE(r.passed) << r.str();
  // Every weight tensor is sampled 200 times, except the 20-weight output layer.
  for (std::size_t i = 0; i + 1 < r.layers.size(); ++i) EXPECT_GE(r.layers[i].checked, 200u) << r.layers[i].name;
  EXPECT_EQ(r.layers.back().checked, 21u);
}

TEST(GradCheck, PlainCentralDifferenceStillAgreesLoosely) {
  Network<double> net(fig1());
  GradCheckOptions opt;
  opt.richardson = false;
  const auto x = random_tensor({2, 5, 8, 8}, 7);
  const auto r = grad_check(net, x, gradcheck_target(net, x, 8), opt);
  for (const auto& l : r.layers) EXPECT_LT(l.max_rel_error, 1e-2) << l.name;
}

TEST(GradCheck, TamperedGradientIsReportedByLayer) {
  Network<double> net(fig1());
  GradCheckOptions opt;
  opt.tamper = [](Network<double>& n) {
    for (auto& p : n.params())
      if (p.name == "layer2.weight")
        for (std::size_t i = 0; i < p.grad.size(); ++i) p.grad[i] *= 1.1;
  };
  const auto x = random_tensor({2, 5, 8, 8}, 9);
  const auto r = grad_check(net, x, gradcheck_target(net, x, 10), opt);
  EXPECT_FALSE(r.passed);
  const auto bad = r.failing_layers();
  ASSERT_EQ(bad.size(), 1u) << r.str();
  EXPECT_NE(bad[0].find("layer 2"), std::string::npos) << bad[0];
}

TEST(Training, ReproducibleLossSequence) {
  auto run = [] {
    Network<double> net(fig1(0.0, 21));
    Sgd<double> opt(1e-2, 0.9);
    const auto x = random_tensor({2, 5, 8, 8}, 11);
    const auto t = random_tensor({2, 1, 8, 8}, 12);
    std::vector<double> losses;
    for (int k = 0; k < 5; ++k) {
      net.zero_grad();
      auto l = mse_loss(net.forward(x, RunMode::deterministic_train()), t);
      net.backward(l.grad);
      opt.step(net);
      losses.push_back(l.loss);
    }
    return losses;
  };
  const auto a = run();
  EXPECT_EQ(a, run());
  EXPECT_LT(a.back(), a.front());
}

TEST(Training, SgdRejectsBadHyperparameters) {
  EXPECT_THROW(Sgd<double>(-1.0, 0.5), hdrnn::Error);
  EXPECT_THROW(Sgd<double>(0.1, 1.0), hdrnn::Error);
}

TEST(NetworkState, CopyCastAndCompare) {
  Network<double> a(fig2(0.0, 1)), b(fig2(0.0, 2));
  EXPECT_FALSE(a.same_state(b));
  b.copy_state_from(a);
  EXPECT_TRUE(a.same_state(b));
  const auto f = a.cast<float>();
  EXPECT_EQ(f.params()[0].value[5], float(a.params()[0].value[5]));
  EXPECT_THROW(a.copy_state_from(Network<double>(fig1())), hdrnn::Error);
}

TEST(Checkpoint, RoundTripPreservesEverything) {
  Network<float> net(fig1(0.4, 77));
  Rng rng(1);
  net.forward(Tensor4<float>(2, 5, 8, 8, 0.25f), RunMode::train(rng));  // move running stats off (0,1)
  const auto bytes = save_checkpoint(net, R"({"channel":"R"})", false);
  EXPECT_EQ(std::string(bytes.begin(), bytes.begin() + 6), "HDRNN1");
  const auto ck = load_checkpoint<float>(bytes);
  EXPECT_EQ(ck.net.spec(), net.spec());
  EXPECT_TRUE(ck.net.same_state(net));
  EXPECT_EQ(ck.metadata, R"({"channel":"R"})");
  EXPECT_FALSE(ck.trained);
  EXPECT_EQ(save_checkpoint(ck.net, ck.metadata, false), bytes);
}

TEST(Checkpoint, RejectsCorruptFiles) {
  const auto bytes = save_checkpoint(Network<float>(fig2()));
  auto bad = bytes;
  bad[0] = 'X';
  EXPECT_THROW(load_checkpoint<float>(bad), hdrnn::Error);
  const hdrnn::Bytes cut(bytes.begin(), bytes.begin() + bytes.size() / 2);
  try {
    load_checkpoint<float>(cut);
    FAIL();
  } catch (const hdrnn::Error& e) {
    EXPECT_EQ(e.category(), hdrnn::ErrorCategory::truncation);
  }
}

}  // namespace
