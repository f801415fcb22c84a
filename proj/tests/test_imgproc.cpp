#include <gtest/gtest.h>

#include <random>

#include "hdrnn/imgproc.hpp"

namespace {

using hdrnn::Plane;
using hdrnn::RadianceMap;

TEST(Srgb, Endpoints) {
  EXPECT_EQ(hdrnn::srgb_decode(0), 0.0f);
  EXPECT_FLOAT_EQ(hdrnn::srgb_decode(255), 1.0f);
  EXPECT_EQ(hdrnn::srgb_encode(0.0), 0);
  EXPECT_EQ(hdrnn::srgb_encode(1.0), 255);
  EXPECT_EQ(hdrnn::srgb_encode(7.0), 255);
  EXPECT_EQ(hdrnn::srgb_encode(-1.0), 0);
}

TEST(Srgb, ExhaustiveCodeRoundTrip) {
  for (int z = 0; z < 256; ++z) EXPECT_EQ(hdrnn::srgb_encode(hdrnn::srgb_decode(std::uint8_t(z))), z) << z;
}

TEST(Srgb, BranchesMeetAtTheKnee) {
  const double knee = 0.04045;
  const double linear_branch = knee / 12.92;
  const double power_branch = std::pow((knee + 0.055) / 1.055, 2.4);
  EXPECT_NEAR(linear_branch, power_branch, 1e-6);
  EXPECT_NEAR(hdrnn::srgb_decode_value(knee), hdrnn::srgb_decode_value(std::nextafter(knee, 1.0)), 1e-6);
  // code 10 = 0.0392 sits just below the knee, code 11 just above
  EXPECT_NEAR(hdrnn::srgb_decode(10), 10.0 / 255.0 / 12.92, 1e-7);
}

TEST(Lab, WhiteAndBlack) {
  const auto w = hdrnn::rgb_to_lab_pixel(1, 1, 1);
  EXPECT_NEAR(w[0], 100.0, 1e-3);
  EXPECT_LT(std::abs(w[1]), 1e-3);
  EXPECT_LT(std::abs(w[2]), 1e-3);
  EXPECT_EQ(hdrnn::rgb_to_lab_pixel(0, 0, 0)[0], 0.0);
}

TEST(Lab, RoundTripInGamut) {
  std::mt19937 gen(5);
  std::uniform_real_distribution<float> u(0.0f, 1.0f);
  RadianceMap m(32, 32);
  for (auto& v : m.data) v = u(gen);
  const auto back = hdrnn::lab_to_rgb(hdrnn::rgb_to_lab(m));
  for (std::size_t i = 0; i < m.data.size(); ++i) EXPECT_NEAR(back.data[i], m.data[i], 1e-3);
}

TEST(Lab, NegativeInputsClampedAndCounted) {
  RadianceMap m(2, 1, 0.5f);
  m.data[0] = -1.0f;
  m.data[4] = -0.1f;
  const auto lab = hdrnn::rgb_to_lab(m);
  EXPECT_EQ(lab.clamped, 2u);
  const auto ref = hdrnn::rgb_to_lab_pixel(0.0, 0.5, 0.5);
  EXPECT_FLOAT_EQ(lab.L.data[0], float(ref[0]));
}

TEST(Luminance, Coefficients) {
  RadianceMap m(3, 1);
  m.data = {1, 1, 1, 1, 0, 0, 2, 4, 8};
  const auto y = hdrnn::luminance(m);
  EXPECT_FLOAT_EQ(y.data[0], 1.0f);
  EXPECT_FLOAT_EQ(y.data[1], 0.2126f);
  RadianceMap scaled = m;
  for (auto& v : scaled.data) v *= 3.0f;
  const auto ys = hdrnn::luminance(scaled);
  for (std::size_t i = 0; i < 3; ++i) EXPECT_FLOAT_EQ(ys.data[i], 3.0f * y.data[i]);
}

hdrnn::LdrImage gray_image(const std::vector<int>& codes) {
  hdrnn::LdrImage img(codes.size(), 1);
  for (std::size_t i = 0; i < codes.size(); ++i)
    for (int c = 0; c < 3; ++c) img.data[3 * i + c] = std::uint8_t(codes[i]);
  return img;
}

TEST(Entropy, ConstantImageIsZero) { EXPECT_EQ(hdrnn::entropy(gray_image(std::vector<int>(50, 77))), 0.0); }

TEST(Entropy, UniformCodesGiveEightBits) {
  std::vector<int> codes;
  for (int rep = 0; rep < 3; ++rep)
    for (int z = 0; z < 256; ++z) codes.push_back(z);
  EXPECT_NEAR(hdrnn::entropy(gray_image(codes)), 8.0, 1e-9);
}

TEST(Entropy, ThreeToOneSplit) {
  const double expected = -(0.75 * std::log2(0.75) + 0.25 * std::log2(0.25));
  EXPECT_NEAR(hdrnn::entropy(gray_image({10, 10, 10, 20})), expected, 1e-12);
  EXPECT_NEAR(expected, 0.8113, 1e-4);
}

TEST(Entropy, HistogramUsesRoundedLuma) {
  hdrnn::LdrImage img(1, 1);
  img.data = {255, 0, 0};  // 54.213 -> 54
  const auto h = hdrnn::luma_histogram(img);
  EXPECT_EQ(h.bins[54], 1u);
  EXPECT_EQ(h.total, 1u);
}

TEST(Entropy, AlwaysWithinZeroToEightBits) {
  std::mt19937 gen(9);
  for (int trial = 0; trial < 20; ++trial) {
    hdrnn::LdrImage img(16, 16);
    const int spread = 1 + trial * 13;
    for (auto& v : img.data) v = std::uint8_t(gen() % spread);
    const double e = hdrnn::entropy(img);
    EXPECT_GE(e, 0.0);
    EXPECT_LE(e, 8.0);
  }
}

// Direct Gaussian blur with the same window and reflect padding.
Plane gaussian_oracle(const Plane& in, double sigma) {
  const int r = int(std::ceil(3 * sigma));
  Plane out(in.width, in.height);
  for (std::ptrdiff_t y = 0; y < std::ptrdiff_t(in.height); ++y)
    for (std::ptrdiff_t x = 0; x < std::ptrdiff_t(in.width); ++x) {
      double num = 0, den = 0;
      for (int dy = -r; dy <= r; ++dy)
        for (int dx = -r; dx <= r; ++dx) {
          const double wt = std::exp(-(dx * dx + dy * dy) / (2 * sigma * sigma));
          num += wt * in.at(hdrnn::reflect_index(x + dx, in.width), hdrnn::reflect_index(y + dy, in.height));
          den += wt;
        }
      out.at(x, y) = float(num / den);
    }
  return out;
}

Plane random_plane(std::size_t w, std::size_t h, unsigned seed, float lo = 0.0f, float hi = 100.0f) {
  std::mt19937 gen(seed);
  std::uniform_real_distribution<float> u(lo, hi);
  Plane p(w, h);
  for (auto& v : p.data) v = u(gen);
  return p;
}

TEST(Bilateral, ConstantPlaneUnchanged) {
  Plane p(20, 13, 42.125f);
  EXPECT_EQ(hdrnn::bilateral_filter(p, 2.0, 5.0), p);
}

TEST(Bilateral, LargeRangeSigmaIsGaussianBlur) {
  const Plane p = random_plane(24, 17, 1, 0.0f, 1.0f);
  const Plane b = hdrnn::bilateral_filter(p, 1.5, 1e6);
  const Plane g = gaussian_oracle(p, 1.5);
  for (std::size_t i = 0; i < p.data.size(); ++i) EXPECT_NEAR(b.data[i], g.data[i], 1e-4);
}

TEST(Bilateral, PreservesStepEdge) {
  const double sigma_s = 2.0, sigma_r = 1.0;
  Plane p(40, 8);
  for (std::size_t y = 0; y < 8; ++y)
    for (std::size_t x = 0; x < 40; ++x) p.at(x, y) = x < 20 ? 0.0f : float(10 * sigma_r);
  const Plane b = hdrnn::bilateral_filter(p, sigma_s, sigma_r);
  const std::size_t probe_low = 20 - 1 - std::size_t(2 * sigma_s), probe_high = 20 + std::size_t(2 * sigma_s);
  EXPECT_LT(b.at(probe_low, 4) - 0.0f, 0.05 * 10 * sigma_r);
  EXPECT_LT(10 * sigma_r - b.at(probe_high, 4), 0.05 * 10 * sigma_r);
}

TEST(Bilateral, OutputWithinInputRange) {
  for (unsigned seed = 0; seed < 5; ++seed) {
    const Plane p = random_plane(15, 11, seed, -5.0f, 50.0f);
    const Plane b = hdrnn::bilateral_filter(p, 1.0 + seed, 3.0);
    const auto [lo, hi] = std::minmax_element(p.data.begin(), p.data.end());
    for (float v : b.data) {
      EXPECT_GE(v, *lo);
      EXPECT_LE(v, *hi);
    }
  }
}

TEST(Bilateral, TinyPlanesAndBadSigmas) {
  Plane one(1, 1, 3.0f);
  EXPECT_EQ(hdrnn::bilateral_filter(one, 8.0, 10.0), one);
  EXPECT_THROW(hdrnn::bilateral_filter(one, 0.0, 1.0), hdrnn::Error);
  EXPECT_THROW(hdrnn::bilateral_filter(one, 1.0, -1.0), hdrnn::Error);
}

TEST(ReflectIndex, MirrorsWithoutRepeatingEdge) {
  EXPECT_EQ(hdrnn::reflect_index(-1, 5), 1);
  EXPECT_EQ(hdrnn::reflect_index(5, 5), 3);
  EXPECT_EQ(hdrnn::reflect_index(-9, 5), 1);
  EXPECT_EQ(hdrnn::reflect_index(3, 1), 0);
  EXPECT_EQ(hdrnn::reflect_index(2, 2), 0);
}

}  // namespace
