#include "dkrg/resample.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace dkrg {

double keys_cubic(double x) {
  const double ax = std::abs(x);
  const double ax2 = ax * ax;
  const double ax3 = ax2 * ax;
  if (ax <= 1.0) return 1.5 * ax3 - 2.5 * ax2 + 1.0;
  if (ax <= 2.0) return -0.5 * ax3 + 2.5 * ax2 - 4.0 * ax + 2.0;
  return 0.0;
}

std::vector<ResampleTaps> resample_taps(int in_length, int out_length,
                                        double scale) {
  if (in_length < 1 || out_length < 1 || !(scale > 0.0)) {
    throw std::invalid_argument("resample_taps: invalid lengths or scale");
  }
  const bool antialias = scale < 1.0;
  const double kernel_width = antialias ? 4.0 / scale : 4.0;
  const int span = static_cast<int>(std::ceil(kernel_width)) + 2;

  std::vector<ResampleTaps> taps(static_cast<std::size_t>(out_length));
  for (int i = 0; i < out_length; ++i) {
    const double center = (i + 0.5) / scale - 0.5;
    const int left = static_cast<int>(std::floor(center - kernel_width / 2.0));
    ResampleTaps& t = taps[static_cast<std::size_t>(i)];
    double sum = 0.0;
    for (int k = 0; k < span; ++k) {
      const int j = left + k;
      const double d = center - j;
      const double w = antialias ? scale * keys_cubic(d * scale) : keys_cubic(d);
      if (w == 0.0) continue;
      t.index.push_back(std::clamp(j, 0, in_length - 1));
      t.weight.push_back(w);
      sum += w;
    }
    for (double& w : t.weight) w /= sum;
  }
  return taps;
}

namespace {

int scaled_length(int length, double scale) {
  return static_cast<int>(std::lround(length * scale));
}

}  // namespace

Image bicubic_resize(const Image& img, double scale) {
  if (!(scale > 0.0)) {
    throw std::invalid_argument("bicubic_resize: scale must be positive");
  }
  const int out_h = scaled_length(img.height(), scale);
  const int out_w = scaled_length(img.width(), scale);
  if (out_h < 1 || out_w < 1) {
    throw std::invalid_argument("bicubic_resize: degenerate output size");
  }
  if (scale == 1.0) return img;

  const auto col_taps = resample_taps(img.width(), out_w, scale);
  const auto row_taps = resample_taps(img.height(), out_h, scale);

  Image horizontal(img.height(), out_w);
  for (int y = 0; y < img.height(); ++y) {
    for (int x = 0; x < out_w; ++x) {
      const ResampleTaps& t = col_taps[static_cast<std::size_t>(x)];
      double acc = 0.0;
      for (std::size_t k = 0; k < t.index.size(); ++k) {
        acc += t.weight[k] * img(y, t.index[k]);
      }
      horizontal(y, x) = acc;
    }
  }

  Image out(out_h, out_w);
  for (int y = 0; y < out_h; ++y) {
    const ResampleTaps& t = row_taps[static_cast<std::size_t>(y)];
    for (int x = 0; x < out_w; ++x) {
      double acc = 0.0;
      for (std::size_t k = 0; k < t.index.size(); ++k) {
        acc += t.weight[k] * horizontal(t.index[k], x);
      }
      out(y, x) = acc;
    }
  }
  return out;
}

ColorImage bicubic_resize(const ColorImage& img, double scale) {
  std::vector<Image> planes;
  planes.reserve(static_cast<std::size_t>(img.channels));
  for (int c = 0; c < img.channels; ++c) {
    planes.push_back(bicubic_resize(img.channel(c), scale));
  }
  return ColorImage::from_channels(planes);
}

Image downsample(const Image& hr, int scale) {
  if (scale < 1) throw std::invalid_argument("downsample: scale must be >= 1");
  return bicubic_resize(hr, 1.0 / scale);
}

Image degrade(const Image& hr, int scale) {
  const Image cropped = modcrop(hr, scale);
  return bicubic_resize(downsample(cropped, scale), static_cast<double>(scale));
}

}  // namespace dkrg
