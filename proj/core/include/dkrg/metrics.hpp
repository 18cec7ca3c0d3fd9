#pragma once

#include <filesystem>
#include <functional>
#include <iosfwd>
#include <limits>
#include <string>
#include <vector>

#include "dkrg/image.hpp"

namespace dkrg {

/// PSNR of identical images.
inline constexpr double kInfinitePsnr = std::numeric_limits<double>::infinity();

/// 10 log10(255^2 / MSE) over the region left after removing `shave` pixels
/// on every side. Returns kInfinitePsnr when the region is identical.
/// Throws std::invalid_argument on size mismatch or if nothing is left.
double psnr(const Image& a, const Image& b, int shave = 0);

/// Single-scale SSIM with an 11x11 Gaussian window (sigma 1.5),
/// C1 = (0.01 * 255)^2 and C2 = (0.03 * 255)^2, averaged over all window
/// positions fully inside the shaved region.
double ssim(const Image& a, const Image& b, int shave = 0);

struct EvalRecord {
  std::string image;
  std::string method;
  int scale = 0;
  double psnr = 0.0;  // dB
  double ssim = 0.0;
};

/// What an SR method sees for one test image.
struct SrInput {
  const Image& lr;            // bicubic-downsampled luma
  const Image& lr_upsampled;  // lr bicubic-upsampled back to the HR size
  int scale;
  const Image& hr;  // reference; only oracle methods may look at it
};

using SrMethod = std::function<Image(const SrInput&)>;

struct EvalSummary {
  std::vector<EvalRecord> records;
  double mean_psnr = 0.0;
  double mean_ssim = 0.0;
};

/// For every image in `hr_dir`: luma, modcrop, downsample, upsample, run
/// `method`, and score the result against the modcropped reference with
/// shave = scale. Throws std::runtime_error if the directory has no images.
EvalSummary evaluate_set(const std::filesystem::path& hr_dir, const std::string& method_name,
                         const SrMethod& method, int scale);

/// Header `image,method,scale,psnr_db,ssim`, one row per record, then a
/// `mean` row.
void write_eval_csv(std::ostream& out, const EvalSummary& summary);

}  // namespace dkrg
