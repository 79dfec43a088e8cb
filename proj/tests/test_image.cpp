#include <gtest/gtest.h>

#include <cmath>
#include <fstream>

#include "emotion/errors.hpp"
#include "emotion/image.hpp"
#include "emotion/rng.hpp"
#include "temp_dir.hpp"

using namespace emotion;

namespace {

std::string pgm_bytes(const std::string& header, std::initializer_list<int> pixels) {
  std::string s = header;
  for (int p : pixels) s.push_back(static_cast<char>(p));
  return s;
}

GrayImage random_image(std::size_t h, std::size_t w, std::uint64_t seed) {
  Rng rng(seed);
  GrayImage img(h, w);
  for (auto& v : img.tensor().values()) v = static_cast<float>(rng.below(256)) / 255.0f;
  return img;
}

/// Signature plus an IHDR chunk; the CRC is not meaningful.
std::string png_header(std::uint8_t depth, std::uint8_t color) {
  std::string s = "\x89PNG\r\n\x1a\n";
  s += std::string("\0\0\0\x0dIHDR", 8);
  s += std::string("\0\0\0\x02\0\0\0\x02", 8);
  s.push_back(static_cast<char>(depth));
  s.push_back(static_cast<char>(color));
  s += std::string("\0\0\0", 3);
  s += std::string("\0\0\0\0", 4);
  return s;
}

void expect_decode_error(const std::string& bytes, const std::string& cause) {
  try {
    decode_image(bytes);
    FAIL() << "expected a decode error mentioning " << cause;
  } catch (const DecodeError& e) {
    EXPECT_NE(std::string(e.what()).find(cause), std::string::npos) << e.what();
  }
}

}  // namespace

TEST(Decode, HandBuiltPgm) {
  const GrayImage img = decode_image(pgm_bytes("P5\n2 2\n255\n", {0, 255, 128, 64}));
  ASSERT_EQ(img.height(), 2u);
  EXPECT_EQ(img.at(0, 0), 0.0f);
  EXPECT_EQ(img.at(0, 1), 1.0f);
  EXPECT_NEAR(img.at(1, 0), 0.50196, 1e-5);
  EXPECT_NEAR(img.at(1, 1), 0.25098, 1e-5);
}

TEST(Decode, PgmHeaderComments) {
  const GrayImage img = decode_image(pgm_bytes("P5 # made by hand\n1 # width\n1\n255\n", {51}));
  EXPECT_NEAR(img.at(0, 0), 0.2, 1e-6);
}

TEST(Decode, ErrorsNameTheirCause) {
  expect_decode_error("", "empty byte stream");
  expect_decode_error(pgm_bytes("P5\n2 2\n255\n", {0, 255, 128}), "truncated stream");
  expect_decode_error("P5\n2 2\n65535\n", "non-8-bit depth");
  expect_decode_error("P2\n1 1\n255\n0\n", "unsupported format");
  expect_decode_error("GIF89a", "unsupported format");
  expect_decode_error(png_header(16, 0), "non-8-bit depth");
  expect_decode_error(png_header(8, 2), "unsupported format");
  expect_decode_error(png_header(8, 0).substr(0, 20), "truncated stream");
}

TEST(Decode, PgmRoundTripIsLossless) {
  const GrayImage img = random_image(13, 21, 1);
  EXPECT_EQ(decode_image(encode_pgm(img)), img);
}

TEST(Decode, PngRoundTripIsLossless) {
  const GrayImage img = random_image(17, 9, 2);
  const std::string png = encode_png(img);
  EXPECT_EQ(png.substr(1, 3), "PNG");
  EXPECT_EQ(decode_image(png), img);
}

TEST(Decode, LoadImageNamesPath) {
  oracle::TempDir dir;
  const std::string path = dir / "bad.pgm";
  { std::ofstream(path) << "nonsense"; }
  try {
    load_image(path);
    FAIL();
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("bad.pgm"), std::string::npos);
  }
  EXPECT_THROW(load_image(dir / "missing.pgm"), Error);
}

TEST(Resize, SameSizeIsIdentity) {
  const GrayImage img = random_image(7, 5, 3);
  EXPECT_EQ(resize_bilinear(img, 7, 5), img);
}

TEST(Resize, ConstantStaysConstant) {
  const GrayImage out = resize_bilinear(GrayImage(3, 4, 0.375f), 11, 2);
  for (float v : out.tensor().values()) EXPECT_FLOAT_EQ(v, 0.375f);
}

TEST(Resize, TwoByTwoUpscaleHandValues) {
  // f(u, v) = 0.6 u + 0.3 v on the unit square, sampled at thirds.
  GrayImage g(Tensor({2, 2}, std::vector<float>{0.0f, 0.3f, 0.6f, 0.9f}));
  const GrayImage out = resize_bilinear(g, 4, 4);
  for (std::size_t y = 0; y < 4; ++y)
    for (std::size_t x = 0; x < 4; ++x) EXPECT_NEAR(out.at(y, x), 0.2 * y + 0.1 * x, 1e-6);
  // Saddle: f = u + v - 2uv; at (1/3, 1/3) that is 4/9.
  GrayImage s(Tensor({2, 2}, std::vector<float>{0, 1, 1, 0}));
  EXPECT_NEAR(resize_bilinear(s, 4, 4).at(1, 1), 4.0 / 9.0, 1e-6);
}

TEST(Resize, StaysWithinInputRangeAndRejectsZero) {
  const GrayImage img = random_image(9, 14, 4);
  float lo = 1, hi = 0;
  for (float v : img.tensor().values()) lo = std::min(lo, v), hi = std::max(hi, v);
  for (auto [h, w] : {std::pair{64, 64}, {3, 100}, {1, 1}}) {
    const GrayImage out = resize_bilinear(img, h, w);
    for (float v : out.tensor().values()) {
      EXPECT_GE(v, lo);
      EXPECT_LE(v, hi);
    }
  }
  EXPECT_THROW(resize_bilinear(img, 0, 4), DimensionError);
}

TEST(Patches, SixteenExactCropsWithFullCoverage) {
  for (std::uint64_t seed : {5, 6, 7}) {
    const GrayImage img = random_image(64, 64, seed);
    const auto patches = extract_patches(img);
    ASSERT_EQ(patches.size(), 16u);
    std::vector<int> covered(64 * 64, 0);
    const std::size_t offsets[4] = {0, 5, 11, 16};
    for (std::size_t p = 0; p < 16; ++p) {
      const std::size_t top = offsets[p / 4], left = offsets[p % 4];
      ASSERT_EQ(patches[p].height(), 48u);
      ASSERT_EQ(patches[p].width(), 48u);
      for (std::size_t y = 0; y < 48; ++y)
        for (std::size_t x = 0; x < 48; ++x) {
          ASSERT_EQ(patches[p].at(y, x), img.at(top + y, left + x));
          covered[(top + y) * 64 + left + x] = 1;
        }
    }
    for (int c : covered) ASSERT_EQ(c, 1);
  }
}

TEST(Patches, RejectsWrongSize) { EXPECT_THROW(extract_patches(GrayImage(48, 48)), DimensionError); }
