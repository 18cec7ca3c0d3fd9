#pragma once

#include <vector>

#include "dkrg/image.hpp"

namespace dkrg {

/// Keys cubic convolution kernel with a = -0.5 (support [-2, 2]).
double keys_cubic(double x);

/// One output sample's contributing input indices and normalized weights.
/// Indices are already clamped into [0, in_length) (edge replication).
struct ResampleTaps {
  std::vector<int> index;
  std::vector<double> weight;
};

/// Per-output-sample taps along one axis for a resize by `scale`.
///
/// Output sample i (0-based) is centered at input coordinate
/// (i + 0.5) / scale - 0.5. When scale < 1 the kernel is stretched by
/// 1 / scale (antialiasing) and its amplitude reduced by `scale`; weights are
/// then renormalized to sum to one.
std::vector<ResampleTaps> resample_taps(int in_length, int out_length,
                                        double scale);

/// Separable bicubic resize. Output dims are round(input dims * scale).
/// Throws std::invalid_argument if scale <= 0 or an output dim would be 0.
Image bicubic_resize(const Image& img, double scale);
ColorImage bicubic_resize(const ColorImage& img, double scale);

/// Bicubic downscale by 1 / scale (antialiased).
Image downsample(const Image& hr, int scale);

/// Simulated low-resolution observation at the high-resolution size:
/// modcrop, bicubic downscale by 1/scale, then bicubic upscale by scale.
Image degrade(const Image& hr, int scale);

}  // namespace dkrg
