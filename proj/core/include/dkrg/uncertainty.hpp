#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

#include "dkrg/covariance.hpp"
#include "dkrg/deep_kriging.hpp"
#include "dkrg/image.hpp"

namespace dkrg {

/// Per-pixel estimator variance, intensity^2.
using VarianceMap = Image;

class UnnormalizedWeightsError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Covariance lag used when fitting the model for variance maps.
inline constexpr int kVarianceMaxLag = 20;

/// Gaussian model fitted on the upsampled LR image.
CovarianceModel fit_variance_model(const Image& lr_upsampled, int max_lag = kVarianceMaxLag);

/// V(x) = sum_{k,k'} w_k(x) w_k'(x) C(|x_k - x_k'|) over the window offsets
/// of a (1, (2K+1)^2, H, W) weight field, evaluated as
/// C0 - sum_{k,k'} w_k w_k' (C0 - C(|x_k - x_k'|)), which is the same quantity
/// for weights summing to one. Throws UnnormalizedWeightsError if
/// some pixel's weights do not sum to 1 within `sum_tolerance`. With
/// `clamp_negative`, round-off values below zero are reported as 0.
VarianceMap variance_map(const WeightField& weights, const CovarianceModel& model,
                         bool clamp_negative = true, double sum_tolerance = 1e-5);

/// Runs super_resolve on `trials` constant images (values uniform in
/// [0, 255], `size` x `size`) and returns max |output - input|.
double bias_probe(const NetworkParams<float>& params, int trials, std::uint64_t seed,
                  int size = 16);

/// Same, but each trial also draws fresh parameters: build_network with a
/// per-trial seed, then random batch-norm affine terms and running
/// statistics.
double bias_probe(const NetworkConfig& config, int trials, std::uint64_t seed, int size = 16);

/// Fraction of pixels with |sr - hr| <= k sqrt(V). Pixels with V = 0 count
/// only if sr equals hr exactly.
double coverage_stat(const Image& sr, const Image& hr, const VarianceMap& variance,
                     double k = 3.0);

/// Pearson correlation between block-mean squared error and block-mean
/// variance over non-overlapping `block` x `block` tiles (partial tiles are
/// dropped). Returns 0 with a warning on stderr if either side is constant.
double error_variance_correlation(const Image& sr, const Image& hr, const VarianceMap& variance,
                                  int block = 8);

/// 8-bit PGM, min-max normalized (a constant map renders as 128), plus a
/// sidecar `<path>.txt` holding `min` and `max`.
void render_heatmap(const VarianceMap& variance, const std::filesystem::path& path);

struct HeatmapRange {
  double min = 0.0;
  double max = 0.0;
};

HeatmapRange read_heatmap_sidecar(const std::filesystem::path& heatmap_path);

struct UncertaintyRecord {
  std::string image;
  double psnr = 0.0;
  double ssim = 0.0;
  double coverage = 0.0;
  double corr = 0.0;
};

/// Deep-kriging SR of every image in `hr_dir` with its variance map scored
/// against the reference (shave = scale).
std::vector<UncertaintyRecord> evaluate_uncertainty(const std::filesystem::path& hr_dir,
                                                    const NetworkParams<float>& params,
                                                    int scale);

/// Header `image,psnr,ssim,coverage,corr`.
void write_uncertainty_csv(std::ostream& out, const std::vector<UncertaintyRecord>& records);

}  // namespace dkrg
