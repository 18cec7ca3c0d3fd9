#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace dkrg {

/// Single-channel raster of continuous intensities, row-major.
///
/// Values are nominally in [0, 255] but are never quantized internally;
/// clamping and rounding happen only when an image is written to disk.
class Image {
 public:
  Image() = default;
  Image(int height, int width, double fill = 0.0);
  Image(int height, int width, std::vector<double> data);

  int height() const { return height_; }
  int width() const { return width_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  double& operator()(int y, int x) { return data_[index(y, x)]; }
  double operator()(int y, int x) const { return data_[index(y, x)]; }

  /// Edge-replicated read: coordinates are clamped into the raster.
  double clamped(int y, int x) const;

  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }

  double mean() const;
  bool all_finite() const;

  friend bool operator==(const Image&, const Image&) = default;

 private:
  std::size_t index(int y, int x) const {
    return static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) +
           static_cast<std::size_t>(x);
  }

  int height_ = 0;
  int width_ = 0;
  std::vector<double> data_;
};

/// Interleaved multi-channel raster as read from / written to image files.
struct ColorImage {
  int height = 0;
  int width = 0;
  int channels = 0;
  std::vector<double> data;

  ColorImage() = default;
  ColorImage(int h, int w, int c, double fill = 0.0);

  double& at(int y, int x, int c) {
    return data[(static_cast<std::size_t>(y) * width + x) * channels + c];
  }
  double at(int y, int x, int c) const {
    return data[(static_cast<std::size_t>(y) * width + x) * channels + c];
  }

  Image channel(int c) const;
  static ColorImage from_channels(std::span<const Image> planes);
};

struct YCbCrImage {
  Image y;
  Image cb;
  Image cr;
};

/// BT.601 studio-swing conversion (Y in [16, 235], chroma in [16, 240]).
/// Throws std::invalid_argument unless `rgb.channels == 3`.
YCbCrImage rgb_to_ycbcr(const ColorImage& rgb);
ColorImage ycbcr_to_rgb(const YCbCrImage& ycc);

/// Luma of a file image: the Y channel for RGB input, the plane itself for
/// grayscale input.
Image luma(const ColorImage& img);

/// Crops to the largest multiple of `scale` in each dimension, anchored at the
/// top-left corner.
Image modcrop(const Image& img, int scale);
ColorImage modcrop(const ColorImage& img, int scale);

Image crop(const Image& img, int top, int left, int height, int width);

/// Rotates counter-clockwise by `quarter_turns` x 90 degrees.
Image rotate90(const Image& img, int quarter_turns);

/// Clamps to [0, 255] and rounds to the nearest integer level.
Image quantize(const Image& img);

}  // namespace dkrg
