#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <random>

#include "dkrg/image.hpp"
#include "dkrg/image_io.hpp"
#include "dkrg/patches.hpp"
#include "dkrg/resample.hpp"
#include "oracles.hpp"

using namespace dkrg;

namespace {

ColorImage pixel(double r, double g, double b) {
  ColorImage img(1, 1, 3);
  img.at(0, 0, 0) = r;
  img.at(0, 0, 1) = g;
  img.at(0, 0, 2) = b;
  return img;
}

double variance(const Image& img) {
  const double m = img.mean();
  double acc = 0.0;
  for (double v : img.data()) acc += (v - m) * (v - m);
  return acc / static_cast<double>(img.size());
}

}  // namespace

TEST(Color, WhiteAndBlackPoints) {
  EXPECT_NEAR(rgb_to_ycbcr(pixel(255, 255, 255)).y(0, 0), 235.0, 1e-9);
  EXPECT_NEAR(rgb_to_ycbcr(pixel(0, 0, 0)).y(0, 0), 16.0, 1e-12);
}

TEST(Color, PureRedLuma) {
  // 16 + 65.481 * 255 / 255
  EXPECT_NEAR(rgb_to_ycbcr(pixel(255, 0, 0)).y(0, 0), 81.481, 1e-9);
}

TEST(Color, InverseOfReferencePoints) {
  YCbCrImage white{Image(1, 1, 235.0), Image(1, 1, 128.0), Image(1, 1, 128.0)};
  const ColorImage w = ycbcr_to_rgb(white);
  for (int c = 0; c < 3; ++c) EXPECT_NEAR(w.at(0, 0, c), 255.0, 1.0);
  YCbCrImage black{Image(1, 1, 16.0), Image(1, 1, 128.0), Image(1, 1, 128.0)};
  const ColorImage b = ycbcr_to_rgb(black);
  for (int c = 0; c < 3; ++c) EXPECT_NEAR(b.at(0, 0, c), 0.0, 1.0);
}

TEST(Color, RoundTripOnRandomPixels) {
  std::mt19937_64 rng(7);
  std::uniform_int_distribution<int> level(0, 255);
  ColorImage rgb(1, 1000, 3);
  for (double& v : rgb.data) v = level(rng);
  const ColorImage back = ycbcr_to_rgb(rgb_to_ycbcr(rgb));
  for (std::size_t i = 0; i < rgb.data.size(); ++i) {
    EXPECT_LT(std::abs(std::round(back.data[i]) - rgb.data[i]), 0.51);
  }
}

TEST(Color, RejectsWrongChannelCount) {
  EXPECT_THROW(rgb_to_ycbcr(ColorImage(2, 2, 1)), std::invalid_argument);
}

TEST(Resize, ConstantIsPreserved) {
  const Image c(13, 17, 91.5);
  for (double s : {0.25, 0.5, 1.0 / 3.0, 2.0, 3.0, 4.0}) {
    const Image out = bicubic_resize(c, s);
    for (double v : out.data()) EXPECT_NEAR(v, 91.5, 1e-9) << "scale " << s;
  }
}

TEST(Resize, UnitScaleIsIdentity) {
  std::mt19937_64 rng(3);
  const Image img = oracle::random_image(9, 11, rng);
  const Image out = bicubic_resize(img, 1.0);
  ASSERT_EQ(out.height(), 9);
  for (std::size_t i = 0; i < img.size(); ++i) EXPECT_NEAR(out.data()[i], img.data()[i], 1e-12);
}

TEST(Resize, RampUpsampleMatchesSeparableKeysOracle) {
  Image ramp(4, 4);
  for (int y = 0; y < 4; ++y) {
    for (int x = 0; x < 4; ++x) ramp(y, x) = 10.0 * y + 3.0 * x + 5.0;
  }
  const Image out = bicubic_resize(ramp, 2.0);
  ASSERT_EQ(out.height(), 8);
  ASSERT_EQ(out.width(), 8);

  // Rows first, then columns.
  std::vector<std::vector<double>> rows;
  for (int y = 0; y < 4; ++y) {
    std::vector<double> r(4);
    for (int x = 0; x < 4; ++x) r[static_cast<std::size_t>(x)] = ramp(y, x);
    rows.push_back(oracle::upsample_1d(r, 2));
  }
  for (int x = 0; x < 8; ++x) {
    std::vector<double> col(4);
    for (int y = 0; y < 4; ++y) col[static_cast<std::size_t>(y)] = rows[static_cast<std::size_t>(y)][static_cast<std::size_t>(x)];
    const std::vector<double> up = oracle::upsample_1d(col, 2);
    for (int y = 0; y < 8; ++y) EXPECT_NEAR(out(y, x), up[static_cast<std::size_t>(y)], 1e-9);
  }
}

TEST(Resize, AffineRampReproducedAwayFromBorders) {
  Image ramp(20, 24);
  for (int y = 0; y < 20; ++y) {
    for (int x = 0; x < 24; ++x) ramp(y, x) = 1.5 * y - 0.75 * x + 40.0;
  }
  const Image out = bicubic_resize(ramp, 3.0);
  for (int y = 9; y < 60 - 9; ++y) {
    for (int x = 9; x < 72 - 9; ++x) {
      const double sy = (y + 0.5) / 3.0 - 0.5;
      const double sx = (x + 0.5) / 3.0 - 0.5;
      EXPECT_NEAR(out(y, x), 1.5 * sy - 0.75 * sx + 40.0, 1e-9);
    }
  }
}

TEST(Resize, RejectsDegenerateScale) {
  EXPECT_THROW(bicubic_resize(Image(4, 4), 0.0), std::invalid_argument);
  EXPECT_THROW(bicubic_resize(Image(4, 4), 0.01), std::invalid_argument);
}

TEST(Degrade, ConstantIsPreserved) {
  const Image out = degrade(Image(30, 30, 77.0), 3);
  for (double v : out.data()) EXPECT_NEAR(v, 77.0, 1e-9);
}

TEST(Degrade, DimensionContract) {
  const Image out = degrade(Image(31, 31, 1.0), 3);
  EXPECT_EQ(out.height(), 30);
  EXPECT_EQ(out.width(), 30);
  const Image again = degrade(out, 3);
  EXPECT_EQ(again.height(), 30);
  EXPECT_EQ(again.width(), 30);
}

TEST(Degrade, CheckerboardIsFlattened) {
  Image board(32, 32);
  for (int y = 0; y < 32; ++y) {
    for (int x = 0; x < 32; ++x) board(y, x) = ((x + y) % 2) ? 255.0 : 0.0;
  }
  const Image out = degrade(board, 2);
  EXPECT_LT(variance(out), 0.05 * variance(board));
}

TEST(Modcrop, Dimensions) {
  Image a = modcrop(Image(10, 10), 3);
  EXPECT_EQ(a.height(), 9);
  EXPECT_EQ(a.width(), 9);
  a = modcrop(Image(9, 9), 3);
  EXPECT_EQ(a.height(), 9);
  a = modcrop(Image(321, 481), 4);
  EXPECT_EQ(a.height(), 320);
  EXPECT_EQ(a.width(), 480);
  EXPECT_THROW(modcrop(Image(2, 5), 3), std::invalid_argument);
}

TEST(Patches, Counts) {
  EXPECT_EQ(patch_count(31, 31), 1u);
  EXPECT_EQ(patch_count(52, 52), 4u);
  EXPECT_EQ(patch_count(73, 94), 12u);
  EXPECT_EQ(patch_offsets(52), (std::vector<int>{0, 21}));
  EXPECT_EQ(extract_patches(Image(73, 94), Image(73, 94)).patches.size(), 12u);
}

TEST(Patches, WindowsAreAlignedAndInBounds) {
  std::mt19937_64 rng(1);
  const Image lr = oracle::random_image(52, 60, rng);
  const Image hr = oracle::random_image(52, 60, rng);
  const PatchSet set = extract_patches(lr, hr);
  ASSERT_EQ(set.patches.size(), 4u);
  const PatchPair& p = set.patches[3];
  EXPECT_EQ(p.lr.height(), 31);
  EXPECT_EQ(p.lr(0, 0), lr(21, 21));
  EXPECT_EQ(p.hr(30, 30), hr(51, 51));
}

TEST(Patches, RejectsSmallOrMismatched) {
  EXPECT_THROW(extract_patches(Image(30, 40), Image(30, 40)), std::invalid_argument);
  EXPECT_THROW(extract_patches(Image(40, 40), Image(40, 41)), std::invalid_argument);
}

TEST(Augment, TwelveVariantsPerImage) {
  const std::vector<Image> images{oracle::smooth_image(40, 50)};
  const std::vector<int> scales{2, 3, 4};
  const auto variants = augment(images, scales);
  ASSERT_EQ(variants.size(), 12u);
  EXPECT_EQ(variants[0].quarter_turns, 0);
  EXPECT_EQ(variants[0].scale, 2);
  EXPECT_EQ(variants[5].quarter_turns, 1);
  EXPECT_EQ(variants[5].scale, 4);
  // 90 degrees: 50 x 40, modcropped by 3 -> 48 x 39
  EXPECT_EQ(variants[4].hr.height(), 48);
  EXPECT_EQ(variants[4].hr.width(), 39);
}

TEST(Rotate, InvolutionAndShape) {
  std::mt19937_64 rng(5);
  const Image img = oracle::random_image(7, 12, rng);
  EXPECT_EQ(rotate90(rotate90(img, 2), 2), img);
  EXPECT_EQ(rotate90(img, 4), img);
  const Image r = rotate90(img, 1);
  EXPECT_EQ(r.height(), 12);
  EXPECT_EQ(r.width(), 7);
  // Counter-clockwise: the top-right corner moves to the top-left.
  EXPECT_EQ(r(0, 0), img(0, 11));
}

TEST(ImageIo, NetpbmRoundTrip) {
  ColorImage rgb(3, 4, 3);
  for (std::size_t i = 0; i < rgb.data.size(); ++i) rgb.data[i] = static_cast<double>((i * 37) % 256);
  const ColorImage back = decode_netpbm(encode_netpbm(rgb));
  EXPECT_EQ(back.channels, 3);
  EXPECT_EQ(back.data, rgb.data);
}

TEST(ImageIo, PngAndPgmFilesRoundTrip) {
  const auto dir = std::filesystem::temp_directory_path() / "dkrg_test_io";
  std::filesystem::create_directories(dir);
  Image img(5, 6);
  for (std::size_t i = 0; i < img.size(); ++i) img.data()[i] = static_cast<double>(i * 7);
  for (const char* name : {"a.png", "a.pgm"}) {
    write_image(img, dir / name);
    const ColorImage back = read_image(dir / name);
    ASSERT_EQ(back.channels, 1);
    EXPECT_EQ(back.channel(0), img) << name;
  }
  EXPECT_EQ(list_images(dir).size(), 2u);
  std::filesystem::remove_all(dir);
}

TEST(ImageIo, RejectsGarbage) {
  EXPECT_THROW(decode_netpbm({'P', '5', '\n', 'x'}), ImageFormatError);
}
