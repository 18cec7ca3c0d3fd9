#include "dkrg/image.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

namespace dkrg {

Image::Image(int height, int width, double fill)
    : height_(height), width_(width) {
  if (height < 1 || width < 1) {
    throw std::invalid_argument("Image: dimensions must be positive, got " +
                                std::to_string(height) + "x" +
                                std::to_string(width));
  }
  data_.assign(static_cast<std::size_t>(height) * width, fill);
}

Image::Image(int height, int width, std::vector<double> data)
    : height_(height), width_(width), data_(std::move(data)) {
  if (height < 1 || width < 1) {
    throw std::invalid_argument("Image: dimensions must be positive");
  }
  if (data_.size() != static_cast<std::size_t>(height) * width) {
    throw std::invalid_argument("Image: data length does not match dimensions");
  }
}

double Image::clamped(int y, int x) const {
  y = std::clamp(y, 0, height_ - 1);
  x = std::clamp(x, 0, width_ - 1);
  return data_[index(y, x)];
}

double Image::mean() const {
  if (data_.empty()) return 0.0;
  return std::accumulate(data_.begin(), data_.end(), 0.0) /
         static_cast<double>(data_.size());
}

bool Image::all_finite() const {
  return std::all_of(data_.begin(), data_.end(),
                     [](double v) { return std::isfinite(v); });
}

ColorImage::ColorImage(int h, int w, int c, double fill)
    : height(h), width(w), channels(c) {
  if (h < 1 || w < 1 || c < 1) {
    throw std::invalid_argument("ColorImage: dimensions must be positive");
  }
  data.assign(static_cast<std::size_t>(h) * w * c, fill);
}

Image ColorImage::channel(int c) const {
  if (c < 0 || c >= channels) throw std::out_of_range("ColorImage::channel");
  Image out(height, width);
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < width; ++x) out(y, x) = at(y, x, c);
  return out;
}

ColorImage ColorImage::from_channels(std::span<const Image> planes) {
  if (planes.empty()) throw std::invalid_argument("from_channels: no planes");
  const int h = planes[0].height();
  const int w = planes[0].width();
  for (const auto& p : planes) {
    if (p.height() != h || p.width() != w) {
      throw std::invalid_argument("from_channels: plane size mismatch");
    }
  }
  ColorImage out(h, w, static_cast<int>(planes.size()));
  for (int c = 0; c < out.channels; ++c)
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) out.at(y, x, c) = planes[c](y, x);
  return out;
}

namespace {

using Mat3 = std::array<std::array<double, 3>, 3>;

// Rows map (R, G, B) in [0, 255] to offset-free (Y, Cb, Cr).
constexpr Mat3 kRgbToYcc = {{
    {65.481 / 255.0, 128.553 / 255.0, 24.966 / 255.0},
    {-37.797 / 255.0, -74.203 / 255.0, 112.0 / 255.0},
    {112.0 / 255.0, -93.786 / 255.0, -18.214 / 255.0},
}};
constexpr std::array<double, 3> kYccOffset = {16.0, 128.0, 128.0};

Mat3 invert(const Mat3& m) {
  const double det = m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) -
                     m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0]) +
                     m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
  Mat3 inv{};
  inv[0][0] = (m[1][1] * m[2][2] - m[1][2] * m[2][1]) / det;
  inv[0][1] = (m[0][2] * m[2][1] - m[0][1] * m[2][2]) / det;
  inv[0][2] = (m[0][1] * m[1][2] - m[0][2] * m[1][1]) / det;
  inv[1][0] = (m[1][2] * m[2][0] - m[1][0] * m[2][2]) / det;
  inv[1][1] = (m[0][0] * m[2][2] - m[0][2] * m[2][0]) / det;
  inv[1][2] = (m[0][2] * m[1][0] - m[0][0] * m[1][2]) / det;
  inv[2][0] = (m[1][0] * m[2][1] - m[1][1] * m[2][0]) / det;
  inv[2][1] = (m[0][1] * m[2][0] - m[0][0] * m[2][1]) / det;
  inv[2][2] = (m[0][0] * m[1][1] - m[0][1] * m[1][0]) / det;
  return inv;
}

const Mat3& ycc_to_rgb_matrix() {
  static const Mat3 inv = invert(kRgbToYcc);
  return inv;
}

}  // namespace

YCbCrImage rgb_to_ycbcr(const ColorImage& rgb) {
  if (rgb.channels != 3) {
    throw std::invalid_argument("rgb_to_ycbcr: expected 3 channels, got " +
                                std::to_string(rgb.channels));
  }
  YCbCrImage out{Image(rgb.height, rgb.width), Image(rgb.height, rgb.width),
                 Image(rgb.height, rgb.width)};
  for (int y = 0; y < rgb.height; ++y) {
    for (int x = 0; x < rgb.width; ++x) {
      const double r = rgb.at(y, x, 0);
      const double g = rgb.at(y, x, 1);
      const double b = rgb.at(y, x, 2);
      Image* planes[3] = {&out.y, &out.cb, &out.cr};
      for (int c = 0; c < 3; ++c) {
        (*planes[c])(y, x) = kYccOffset[c] + kRgbToYcc[c][0] * r +
                             kRgbToYcc[c][1] * g + kRgbToYcc[c][2] * b;
      }
    }
  }
  return out;
}

ColorImage ycbcr_to_rgb(const YCbCrImage& ycc) {
  const int h = ycc.y.height();
  const int w = ycc.y.width();
  if (ycc.cb.height() != h || ycc.cb.width() != w || ycc.cr.height() != h ||
      ycc.cr.width() != w) {
    throw std::invalid_argument("ycbcr_to_rgb: channel size mismatch");
  }
  const Mat3& m = ycc_to_rgb_matrix();
  ColorImage out(h, w, 3);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const double v[3] = {ycc.y(y, x) - kYccOffset[0],
                           ycc.cb(y, x) - kYccOffset[1],
                           ycc.cr(y, x) - kYccOffset[2]};
      for (int c = 0; c < 3; ++c) {
        out.at(y, x, c) = m[c][0] * v[0] + m[c][1] * v[1] + m[c][2] * v[2];
      }
    }
  }
  return out;
}

Image luma(const ColorImage& img) {
  if (img.channels == 1) return img.channel(0);
  if (img.channels == 3) return rgb_to_ycbcr(img).y;
  throw std::invalid_argument("luma: unsupported channel count " +
                              std::to_string(img.channels));
}

Image crop(const Image& img, int top, int left, int height, int width) {
  if (top < 0 || left < 0 || height < 1 || width < 1 ||
      top + height > img.height() || left + width > img.width()) {
    throw std::out_of_range("crop: window outside image");
  }
  Image out(height, width);
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < width; ++x) out(y, x) = img(top + y, left + x);
  return out;
}

Image modcrop(const Image& img, int scale) {
  if (scale < 1) throw std::invalid_argument("modcrop: scale must be >= 1");
  const int h = img.height() - img.height() % scale;
  const int w = img.width() - img.width() % scale;
  if (h < 1 || w < 1) {
    throw std::invalid_argument("modcrop: image smaller than scale");
  }
  return crop(img, 0, 0, h, w);
}

ColorImage modcrop(const ColorImage& img, int scale) {
  if (scale < 1) throw std::invalid_argument("modcrop: scale must be >= 1");
  const int h = img.height - img.height % scale;
  const int w = img.width - img.width % scale;
  if (h < 1 || w < 1) {
    throw std::invalid_argument("modcrop: image smaller than scale");
  }
  ColorImage out(h, w, img.channels);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int c = 0; c < img.channels; ++c) out.at(y, x, c) = img.at(y, x, c);
  return out;
}

Image rotate90(const Image& img, int quarter_turns) {
  const int turns = ((quarter_turns % 4) + 4) % 4;
  const int h = img.height();
  const int w = img.width();
  switch (turns) {
    case 0:
      return img;
    case 1: {
      Image out(w, h);
      for (int y = 0; y < w; ++y)
        for (int x = 0; x < h; ++x) out(y, x) = img(x, w - 1 - y);
      return out;
    }
    case 2: {
      Image out(h, w);
      for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) out(y, x) = img(h - 1 - y, w - 1 - x);
      return out;
    }
    default: {
      Image out(w, h);
      for (int y = 0; y < w; ++y)
        for (int x = 0; x < h; ++x) out(y, x) = img(h - 1 - x, y);
      return out;
    }
  }
}

Image quantize(const Image& img) {
  Image out = img;
  for (double& v : out.data()) v = std::round(std::clamp(v, 0.0, 255.0));
  return out;
}

}  // namespace dkrg
