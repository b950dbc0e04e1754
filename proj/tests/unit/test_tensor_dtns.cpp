#include <gtest/gtest.h>

#include <filesystem>

#include "disguise/dtns.hpp"
#include "disguise/png.hpp"
#include "disguise/tensor.hpp"
#include "test_support.hpp"

using namespace disguise;

TEST(Shape, RejectsBadRankAndDims) {
  EXPECT_THROW(Shape({1, 2, 3, 4, 5}), ShapeError);
  EXPECT_THROW(Shape({2, 0}), ShapeError);
  EXPECT_THROW(Shape({-1}), ShapeError);
  EXPECT_EQ(Shape({2, 3, 4}).numel(), 24u);
  EXPECT_TRUE(Shape({1, 1}).is_scalar());
  EXPECT_FALSE(Shape({1, 2}).is_scalar());
  EXPECT_EQ(Shape({2, 3}).str(), "[2x3]");
}

TEST(Tensor, DataLengthMustMatchShape) {
  EXPECT_THROW(Tensor<float>(Shape{2, 2}, std::vector<float>{1, 2, 3}), ShapeError);
  Tensor<float> t(Shape{2, 2, 1}, std::vector<float>{0, 1, 2, 3});
  EXPECT_EQ(t.at(1, 0, 0), 2.0f);
}

TEST(Tensor, ImageContract) {
  EXPECT_THROW(require_image(Shape{4, 4}, "x"), ShapeError);
  EXPECT_NO_THROW(require_image(Shape{4, 4, 2}, "x"));  // any channel count
  EXPECT_NO_THROW(require_image(Shape{4, 4, 3}, "x"));
}

TEST(Dtns, RoundTripIsBitExact) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    auto t = disguise::testing::random_normal<float>(Shape{3, 5, 2}, seed, 10.0);
    t[0] = -0.0f;
    t[1] = 1e-40f;  // subnormal
    const auto back = io::decode_dtns(io::encode_dtns(t));
    ASSERT_EQ(back.shape(), t.shape());
    for (std::size_t i = 0; i < t.size(); ++i)
      EXPECT_EQ(std::bit_cast<std::uint32_t>(back[i]), std::bit_cast<std::uint32_t>(t[i]));
  }
}

TEST(Dtns, LayoutIsLittleEndian) {
  Tensor<float> t(Shape{1, 2}, std::vector<float>{1.0f, -2.0f});
  const auto b = io::encode_dtns(t);
  ASSERT_EQ(b.size(), 4u + 1 + 1 + 2 * 4 + 2 * 4);
  EXPECT_EQ(std::string(b.begin(), b.begin() + 4), "DTNS");
  EXPECT_EQ(b[4], 0x01);
  EXPECT_EQ(b[5], 2);
  EXPECT_EQ(b[6], 1);
  EXPECT_EQ(b[10], 2);
  // 1.0f = 0x3f800000
  EXPECT_EQ(b[14], 0x00);
  EXPECT_EQ(b[17], 0x3f);
}

TEST(Dtns, TruncationReportsOffset) {
  Tensor<float> t(Shape{2, 2, 3}, 0.5f);
  auto b = io::encode_dtns(t);
  const std::size_t header = 4 + 1 + 1 + 3 * 4;
  b.resize(header + 5);
  try {
    io::decode_dtns(b);
    FAIL() << "expected FormatError";
  } catch (const FormatError& e) {
    EXPECT_EQ(e.offset(), header);
  }
}

TEST(Dtns, RejectsCorruptHeaders) {
  Tensor<float> t(Shape{2, 2}, 1.0f);
  auto good = io::encode_dtns(t);

  auto bad_magic = good;
  bad_magic[0] = 'X';
  EXPECT_THROW(io::decode_dtns(bad_magic), FormatError);

  auto bad_version = good;
  bad_version[4] = 7;
  try {
    io::decode_dtns(bad_version);
    FAIL();
  } catch (const FormatError& e) {
    EXPECT_EQ(e.offset(), 4u);
  }

  auto bad_rank = good;
  bad_rank[5] = 5;
  EXPECT_THROW(io::decode_dtns(bad_rank), FormatError);

  auto zero_dim = good;
  zero_dim[6] = 0;
  EXPECT_THROW(io::decode_dtns(zero_dim), FormatError);

  auto trailing = good;
  trailing.push_back(0);
  try {
    io::decode_dtns(trailing);
    FAIL();
  } catch (const FormatError& e) {
    EXPECT_EQ(e.offset(), good.size());
  }
}

TEST(Png, ByteMapsToExactFraction) {
  const auto dir = std::filesystem::temp_directory_path() / "disguise_png_test";
  std::filesystem::create_directories(dir);
  Image img(Shape{4, 64, 3});
  for (int x = 0; x < 64; ++x)
    for (int c = 0; c < 3; ++c) img.at(0, x, c) = static_cast<float>((x * 4 + c) % 256) / 255.0f;
  io::save_png(dir / "a.png", img);
  const auto back = io::load_png(dir / "a.png");
  ASSERT_EQ(back.shape(), img.shape());
  for (int x = 0; x < 64; ++x)
    for (int c = 0; c < 3; ++c) EXPECT_EQ(back.at(0, x, c), static_cast<float>((x * 4 + c) % 256) / 255.0f);
}

TEST(Png, QuantizationWithinOneLevel) {
  const auto dir = std::filesystem::temp_directory_path() / "disguise_png_test";
  std::filesystem::create_directories(dir);
  const auto img = disguise::testing::random_tensor<float>(Shape{8, 8, 3}, 3);
  io::save_png(dir / "b.png", img);
  const auto back = io::load_png(dir / "b.png");
  for (std::size_t i = 0; i < img.size(); ++i) EXPECT_LE(std::abs(back[i] - img[i]), 0.5f / 255.0f + 1e-7f);
}
