#include <gtest/gtest.h>

#include <random>
#include <string>

#include "hdrnn/image_io.hpp"

namespace {

using hdrnn::Bytes;
using hdrnn::ErrorCategory;
using hdrnn::RadianceMap;

Bytes bytes_of(const std::string& s) { return Bytes(s.begin(), s.end()); }

ErrorCategory category_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const hdrnn::Error& e) {
    return e.category();
  }
  ADD_FAILURE() << "expected hdrnn::Error";
  return ErrorCategory::usage;
}

Bytes hdr_header(std::size_t w, std::size_t h) {
  return bytes_of("#?RADIANCE\nFORMAT=32-bit_rle_rgbe\n\n-Y " + std::to_string(h) + " +X " + std::to_string(w) + "\n");
}

// Independent new-style RLE writer used only to produce reader input.
Bytes rle_encode(const std::vector<std::array<std::uint8_t, 4>>& pixels, std::size_t w, std::size_t h) {
  Bytes out = hdr_header(w, h);
  for (std::size_t y = 0; y < h; ++y) {
    out.insert(out.end(), {2, 2, std::uint8_t(w >> 8), std::uint8_t(w & 0xff)});
    for (int c = 0; c < 4; ++c) {
      std::size_t x = 0;
      while (x < w) {
        const auto v = pixels[y * w + x][c];
        std::size_t run = 1;
        while (x + run < w && run < 127 && pixels[y * w + x + run][c] == v) ++run;
        if (run >= 3) {
          out.push_back(std::uint8_t(128 + run));
          out.push_back(v);
          x += run;
        } else {
          std::size_t n = std::min<std::size_t>(128, w - x);
          // stop the literal before the next long run
          for (std::size_t k = 0; k + 2 < n; ++k) {
            const auto a = pixels[y * w + x + k][c];
            if (a == pixels[y * w + x + k + 1][c] && a == pixels[y * w + x + k + 2][c]) {
              n = std::max<std::size_t>(k, 1);
              break;
            }
          }
          out.push_back(std::uint8_t(n));
          for (std::size_t k = 0; k < n; ++k) out.push_back(pixels[y * w + x + k][c]);
          x += n;
        }
      }
    }
  }
  return out;
}

TEST(Rgbe, ZeroExponentDecodesToBlack) {
  auto px = hdrnn::rgbe_to_float(0, 0, 0, 0);
  EXPECT_EQ(px[0], 0.0f);
  EXPECT_EQ(px[1], 0.0f);
  EXPECT_EQ(px[2], 0.0f);
}

TEST(Rgbe, DecodeHandEvaluated) {
  // 128 * 2^(129-128) / 256 = 1
  auto px = hdrnn::rgbe_to_float(128, 128, 128, 129);
  EXPECT_EQ(px[0], 1.0f);
  EXPECT_EQ(px[2], 1.0f);
}

TEST(Rgbe, EncodeHandEvaluated) {
  EXPECT_EQ(hdrnn::float_to_rgbe(0, 0, 0), (std::array<std::uint8_t, 4>{0, 0, 0, 0}));
  // m = 1 in [2^0, 2^1) -> e = 1, scale 128
  EXPECT_EQ(hdrnn::float_to_rgbe(1, 1, 1), (std::array<std::uint8_t, 4>{128, 128, 128, 129}));
  EXPECT_EQ(hdrnn::float_to_rgbe(1e-33f, 0, 0), (std::array<std::uint8_t, 4>{0, 0, 0, 0}));
}

TEST(Rgbe, RoundTripErrorBoundedByMaxChannelOver128) {
  std::mt19937 gen(7);
  std::uniform_real_distribution<double> logmag(-20.0, 20.0), unit(0.0, 1.0);
  RadianceMap m(100, 10);
  for (std::size_t i = 0; i < m.pixels(); ++i) {
    const double scale = std::exp2(logmag(gen));
    for (int c = 0; c < 3; ++c) m.data[3 * i + c] = static_cast<float>(scale * unit(gen));
  }
  const auto back = hdrnn::decode_hdr(hdrnn::encode_hdr(m));
  ASSERT_EQ(back.width, m.width);
  ASSERT_EQ(back.height, m.height);
  for (std::size_t i = 0; i < m.pixels(); ++i) {
    const double mx = std::max({m.data[3 * i], m.data[3 * i + 1], m.data[3 * i + 2]});
    for (int c = 0; c < 3; ++c) EXPECT_LE(std::abs(m.data[3 * i + c] - back.data[3 * i + c]), mx / 128.0) << i;
  }
}

TEST(Rgbe, WriterEmitsPublishedHeaderAndFlatScanlines) {
  RadianceMap m(3, 2, 1.0f);
  const auto b = hdrnn::encode_hdr(m);
  const auto header = hdr_header(3, 2);
  ASSERT_EQ(b.size(), header.size() + 3 * 2 * 4);
  EXPECT_TRUE(std::equal(header.begin(), header.end(), b.begin()));
  EXPECT_EQ(b[header.size()], 128);
  EXPECT_EQ(b[header.size() + 3], 129);
}

TEST(Rgbe, RleAndFlatEncodingsDecodeIdentically) {
  const std::size_t w = 40, h = 3;
  std::vector<std::array<std::uint8_t, 4>> px(w * h);
  std::mt19937 gen(3);
  for (std::size_t i = 0; i < px.size(); ++i) {
    const bool runny = (i / 7) % 2 == 0;
    for (int c = 0; c < 4; ++c) px[i][c] = runny ? std::uint8_t(100 + c) : std::uint8_t(gen() % 256);
    px[i][3] = std::uint8_t(120 + (i % 3));
  }
  Bytes flat = hdr_header(w, h);
  for (auto& p : px) flat.insert(flat.end(), p.begin(), p.end());
  const Bytes rle = rle_encode(px, w, h);
  EXPECT_LT(rle.size(), flat.size());
  EXPECT_EQ(hdrnn::decode_hdr(rle), hdrnn::decode_hdr(flat));
}

TEST(Rgbe, AcceptsRgbeMagicAndExtraHeaderLines) {
  Bytes b = bytes_of("#?RGBE\n# comment\nEXPOSURE=1.0\nFORMAT=32-bit_rle_rgbe\n\n-Y 1 +X 1\n");
  b.insert(b.end(), {128, 64, 0, 129});
  const auto m = hdrnn::decode_hdr(b);
  EXPECT_EQ(m.data[0], 1.0f);
  EXPECT_EQ(m.data[1], 0.5f);
}

TEST(Rgbe, MalformedInputsRejectedWithCategory) {
  EXPECT_EQ(category_of([] { hdrnn::decode_hdr(bytes_of("P6\n1 1\n255\n")); }), ErrorCategory::format);
  EXPECT_EQ(category_of([] { hdrnn::decode_hdr(bytes_of("#?RADIANCE\n\n-Y 1 +X 1\n\0\0\0\0")); }), ErrorCategory::format);
  EXPECT_EQ(category_of([] { hdrnn::decode_hdr(bytes_of("#?RADIANCE\nFORMAT=32-bit_rle_xyze\n\n-Y 1 +X 1\n")); }),
            ErrorCategory::format);
  EXPECT_EQ(category_of([] { hdrnn::decode_hdr(bytes_of("#?RADIANCE\nFORMAT=32-bit_rle_rgbe\n\n+Y 1 +X 1\n")); }),
            ErrorCategory::format);
  EXPECT_EQ(category_of([] { hdrnn::decode_hdr(bytes_of("#?RADIANCE\nFORMAT=32-bit_rle_rgbe\n")); }),
            ErrorCategory::truncation);
  Bytes trunc = hdr_header(2, 1);
  trunc.insert(trunc.end(), {1, 2, 3, 4, 5});
  EXPECT_EQ(category_of([&] { hdrnn::decode_hdr(trunc); }), ErrorCategory::truncation);
  Bytes overrun = hdr_header(8, 1);
  overrun.insert(overrun.end(), {2, 2, 0, 8, 128 + 9, 7});
  EXPECT_EQ(category_of([&] { hdrnn::decode_hdr(overrun); }), ErrorCategory::corruption);
  Bytes width_mismatch = hdr_header(8, 1);
  width_mismatch.insert(width_mismatch.end(), {2, 2, 0, 9});
  EXPECT_EQ(category_of([&] { hdrnn::decode_hdr(width_mismatch); }), ErrorCategory::corruption);
}

TEST(Rgbe, ErrorsCarryByteOffset) {
  try {
    hdrnn::decode_hdr(bytes_of("#?RADIANCE\nFORMAT=32-bit_rle_rgbe\n\n-Y x +X 1\n"));
    FAIL();
  } catch (const hdrnn::Error& e) {
    EXPECT_NE(std::string(e.what()).find("at byte 35"), std::string::npos) << e.what();
  }
}

TEST(Rgbe, EncodeRejectsNonFinite) {
  RadianceMap m(1, 1);
  m.data[1] = INFINITY;
  EXPECT_EQ(category_of([&] { hdrnn::encode_hdr(m); }), ErrorCategory::validation);
}

TEST(Pfm, OnePixelPayloadIsLittleEndianIeee) {
  RadianceMap m(1, 1);
  m.data = {2.5f, 0.5f, 1.0f};
  const auto b = hdrnn::write_pfm(m);
  const std::string header = "PF\n1 1\n-1.0\n";
  ASSERT_EQ(b.size(), header.size() + 12);
  const Bytes payload(b.begin() + header.size(), b.end());
  // 2.5f = 0x40200000, 0.5f = 0x3f000000, 1.0f = 0x3f800000
  EXPECT_EQ(payload, (Bytes{0, 0, 0x20, 0x40, 0, 0, 0, 0x3f, 0, 0, 0x80, 0x3f}));
}

TEST(Pfm, WriteReadIsBitwiseLossless) {
  std::mt19937 gen(11);
  std::uniform_real_distribution<float> u(0.0f, 1e4f);
  RadianceMap m(7, 5);
  for (auto& v : m.data) v = u(gen);
  EXPECT_EQ(hdrnn::read_pfm(hdrnn::write_pfm(m)), m);
}

TEST(Pfm, BigEndianMatchesByteSwappedTwin) {
  RadianceMap m(2, 2);
  for (std::size_t i = 0; i < m.data.size(); ++i) m.data[i] = 0.25f * float(i) + 0.125f;
  Bytes le = hdrnn::write_pfm(m);
  const std::string header_le = "PF\n2 2\n-1.0\n";
  Bytes be = bytes_of("PF\n2 2\n1.0\n");
  for (std::size_t i = header_le.size(); i < le.size(); i += 4)
    for (int k = 3; k >= 0; --k) be.push_back(le[i + k]);
  EXPECT_EQ(hdrnn::read_pfm(be), hdrnn::read_pfm(le));
}

TEST(Pfm, RowsAreStoredBottomToTop) {
  RadianceMap m(1, 2);
  m.data = {1, 1, 1, 2, 2, 2};  // top row 1, bottom row 2
  const auto b = hdrnn::write_pfm(m);
  const std::size_t off = std::string("PF\n1 2\n-1.0\n").size();
  EXPECT_EQ(b[off + 3], 0x40);  // first stored float is 2.0f
}

TEST(Pfm, GrayscaleReplicatedAndBadMagicRejected) {
  Bytes g = bytes_of("Pf\n1 1\n-1.0\n");
  g.insert(g.end(), {0, 0, 0x80, 0x3f});
  const auto m = hdrnn::read_pfm(g);
  EXPECT_EQ(m.data, (std::vector<float>{1, 1, 1}));
  EXPECT_EQ(category_of([] { hdrnn::read_pfm(bytes_of("PX\n1 1\n-1.0\n0000")); }), ErrorCategory::format);
  EXPECT_EQ(category_of([] { hdrnn::read_pfm(bytes_of("PF\n2 2\n-1.0\n0000")); }), ErrorCategory::truncation);
}

TEST(Ppm, TwoPixelRoundTrip) {
  hdrnn::LdrImage img(2, 1);
  img.data = {0, 0, 0, 255, 255, 255};
  const auto back = hdrnn::read_ppm(hdrnn::write_ppm(img));
  EXPECT_EQ(back.data, img.data);
  EXPECT_EQ(back.width, 2u);
}

TEST(Ppm, HeaderFormat) {
  hdrnn::LdrImage img(64, 64);
  const auto b = hdrnn::write_ppm(img);
  EXPECT_EQ(std::string(b.begin(), b.begin() + 13), "P6\n64 64\n255\n");
}

TEST(Ppm, CommentsSkipped) {
  Bytes plain = bytes_of("P6\n2 1\n255\n");
  Bytes commented = bytes_of("P6\n# made by hand\n2 # width\n1\n# maxval next\n255\n");
  for (Bytes* b : {&plain, &commented}) b->insert(b->end(), {1, 2, 3, 4, 5, 6});
  EXPECT_EQ(hdrnn::read_ppm(commented), hdrnn::read_ppm(plain));
}

TEST(Ppm, RejectsOtherMaxvalAndMagic) {
  EXPECT_EQ(category_of([] { hdrnn::read_ppm(bytes_of("P6\n1 1\n65535\n000000")); }), ErrorCategory::unsupported);
  EXPECT_EQ(category_of([] { hdrnn::read_ppm(bytes_of("P3\n1 1\n255\n0 0 0")); }), ErrorCategory::format);
  EXPECT_EQ(category_of([] { hdrnn::read_ppm(bytes_of("P6\n2 2\n255\n0")); }), ErrorCategory::truncation);
}

}  // namespace
