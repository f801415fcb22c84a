#include <gtest/gtest.h>

#include <random>

#include "hdrnn/merge.hpp"

namespace {

using hdrnn::Crf;
using hdrnn::RadianceMap;

TEST(HatWeight, Shape) {
  const auto w = hdrnn::hat_weight();
  EXPECT_EQ(w(0), 0.0);
  EXPECT_EQ(w(255), 0.0);
  EXPECT_EQ(w(127), 127.0);
  EXPECT_EQ(w(128), 127.0);
  for (int z = 0; z < 256; ++z) EXPECT_EQ(w(std::uint8_t(z)), w(std::uint8_t(255 - z)));
}

RadianceMap random_map(unsigned seed, std::size_t w, std::size_t h, float lo, float hi) {
  std::mt19937 gen(seed);
  std::uniform_real_distribution<float> u(std::log(lo), std::log(hi));
  RadianceMap m(w, h);
  for (auto& v : m.data) v = std::exp(u(gen));
  return m;
}

TEST(Merge, QuantizationBoundPerContributingExposure) {
  const Crf id;
  const auto m = random_map(11, 32, 32, 1e-4f, 1.0f);
  const auto stack = hdrnn::fixed_stack(m, id);
  const auto e = hdrnn::debevec_merge(stack, id);
  for (std::size_t i = 0; i < m.data.size(); ++i) {
    // Each contributing estimate is within 0.5/(255 dt) of the truth; the
    // weighted average is bounded by the loosest contributor.
    double bound = 0.0;
    bool any = false;
    for (const auto& im : stack.images)
      if (im.data[i] > 0 && im.data[i] < 255) {
        bound = std::max(bound, 1.0 / (255.0 * im.exposure));
        any = true;
      }
    if (any) EXPECT_LE(std::abs(e.data[i] - m.data[i]), bound + 1e-7) << i;
  }
}

TEST(Merge, SingleImageIsExactInverse) {
  const Crf g = hdrnn::gamma_crf(2.2);
  const auto m = random_map(2, 8, 8, 0.01f, 0.9f);
  hdrnn::ExposureStack s;
  s.images.push_back(hdrnn::expose(m, 1.0, g));
  const auto e = hdrnn::debevec_merge(s, g);
  for (std::size_t i = 0; i < m.data.size(); ++i)
    EXPECT_EQ(e.data[i], float(g.inverse(s.images[0].data[i], int(i % 3)) / 1.0));
}

TEST(Merge, FallbackUsesMiddleExposure) {
  RadianceMap m(1, 1, 5.0f);
  const auto stack = hdrnn::fixed_stack(m, Crf());
  for (const auto& im : stack.images) ASSERT_EQ(im.data[0], 255);
  const auto e = hdrnn::debevec_merge(stack, Crf());
  EXPECT_FLOAT_EQ(e.data[0], float(1.0 / 64.0));
}

TEST(Merge, ScaleEquivariance) {
  const Crf id;
  const auto m = random_map(4, 16, 16, 1e-3f, 0.1f);
  RadianceMap m2 = m;
  const float alpha = 3.0f;
  for (auto& v : m2.data) v *= alpha;
  hdrnn::ExposureStack s1, s2;
  for (double dt : {1.0, 2.0, 3.0}) {
    s1.images.push_back(hdrnn::expose(m, dt, id));
    s2.images.push_back(hdrnn::expose(m2, dt, id));
  }
  const auto e1 = hdrnn::debevec_merge(s1, id);
  const auto e2 = hdrnn::debevec_merge(s2, id);
  for (std::size_t i = 0; i < m.data.size(); ++i) EXPECT_NEAR(e2.data[i], alpha * e1.data[i], 2.0 / 255.0 * alpha);
}

TEST(Merge, DuplicateExposureStaysWithinBound) {
  const Crf id;
  const auto m = random_map(6, 16, 16, 1e-4f, 1.0f);
  auto s = hdrnn::fixed_stack(m, id);
  const auto base = hdrnn::debevec_merge(s, id);
  s.images.insert(s.images.begin() + 2, s.images[2]);
  const auto dup = hdrnn::debevec_merge(s, id);
  for (std::size_t i = 0; i < m.data.size(); ++i) EXPECT_NEAR(dup.data[i], base.data[i], 1.0 / 255.0);
}

TEST(Merge, OutputFiniteAndNonNegative) {
  const Crf g = hdrnn::gamma_crf(1.8);
  const auto m = random_map(8, 20, 20, 1e-7f, 100.0f);
  const auto e = hdrnn::debevec_merge(hdrnn::fixed_stack(m, g), g);
  hdrnn::validate(e);
}

TEST(Merge, RejectsBadCrfAndStacks) {
  const auto m = random_map(1, 4, 4, 0.01f, 0.5f);
  auto s = hdrnn::fixed_stack(m, Crf());
  const auto c = Crf::identity_curve();
  EXPECT_THROW(hdrnn::debevec_merge(s, Crf("two", {c, c})), hdrnn::Error);
  EXPECT_THROW(hdrnn::debevec_merge(hdrnn::ExposureStack{}, Crf()), hdrnn::Error);
  s.images[1] = hdrnn::LdrImage(2, 2, 8);
  EXPECT_THROW(hdrnn::debevec_merge(s, Crf()), hdrnn::Error);
}

}  // namespace
