#include "dkrg/uncertainty.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <random>

#include "dkrg/image_io.hpp"
#include "dkrg/metrics.hpp"
#include "dkrg/nn/ops.hpp"
#include "dkrg/parallel.hpp"
#include "dkrg/resample.hpp"

namespace dkrg {

namespace {

void check_same(const Image& a, const Image& b, const char* who) {
  if (a.height() != b.height() || a.width() != b.width()) {
    throw std::invalid_argument(std::string(who) + ": dimension mismatch");
  }
}

double pearson(const std::vector<double>& x, const std::vector<double>& y) {
  const double n = static_cast<double>(x.size());
  double mx = 0.0;
  double my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0.0;
  double sxx = 0.0;
  double syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx <= 0.0 || syy <= 0.0) return std::nan("");
  return sxy / std::sqrt(sxx * syy);
}

double max_deviation(const NetworkParams<float>& params, int trials, std::mt19937_64& rng,
                     int size) {
  double worst = 0.0;
  for (int t = 0; t < trials; ++t) {
    const double c = 255.0 * nn::uniform01(rng);
    const Image flat(size, size, c);
    const SuperResolution out = super_resolve(flat, params);
    for (double v : out.sr.data()) worst = std::max(worst, std::abs(v - c));
  }
  return worst;
}

}  // namespace

CovarianceModel fit_variance_model(const Image& lr_upsampled, int max_lag) {
  return fit_gaussian_model(empirical_covariance(lr_upsampled, max_lag));
}

VarianceMap variance_map(const WeightField& weights, const CovarianceModel& model,
                         bool clamp_negative, double sum_tolerance) {
  if (weights.n() != 1) throw std::invalid_argument("variance_map: expected a single image");
  const int taps = weights.c();
  const int side = static_cast<int>(std::lround(std::sqrt(static_cast<double>(taps))));
  if (side * side != taps || side % 2 == 0) {
    throw std::invalid_argument("variance_map: channel count is not (2K+1)^2");
  }

  // Semivariogram form: with sum w = 1, sum w w' C = C0 - sum w w' (C0 - C).
  // The one-hot and constant-covariance limits then come out as C0 exactly.
  std::vector<double> gamma(static_cast<std::size_t>(taps) * taps);
  for (int a = 0; a < taps; ++a) {
    for (int b = 0; b < taps; ++b) {
      const double dy = (a / side) - (b / side);
      const double dx = (a % side) - (b % side);
      gamma[static_cast<std::size_t>(a) * taps + b] =
          model.c0 - model(std::sqrt(dy * dy + dx * dx));
    }
  }

  const int h = weights.h();
  const int w = weights.w();
  const std::size_t plane = weights.plane();
  for (std::size_t i = 0; i < plane; ++i) {
    double s = 0.0;
    for (int k = 0; k < taps; ++k) s += weights[weights.offset(0, k, 0, 0) + i];
    if (!(std::abs(s - 1.0) <= sum_tolerance)) {
      throw UnnormalizedWeightsError("variance_map: weights at pixel " + std::to_string(i) +
                                     " sum to " + std::to_string(s));
    }
  }

  VarianceMap out(h, w);
  parallel_for(static_cast<std::size_t>(h), [&](std::size_t row) {
    std::vector<double> wk(static_cast<std::size_t>(taps));
    for (int x = 0; x < w; ++x) {
      const std::size_t i = row * static_cast<std::size_t>(w) + static_cast<std::size_t>(x);
      for (int k = 0; k < taps; ++k) {
        wk[static_cast<std::size_t>(k)] = weights[weights.offset(0, k, 0, 0) + i];
      }
      double q = 0.0;
      for (int a = 0; a < taps; ++a) {
        const double wa = wk[static_cast<std::size_t>(a)];
        if (wa == 0.0) continue;
        double t = 0.0;
        const double* g = &gamma[static_cast<std::size_t>(a) * taps];
        for (int b = 0; b < taps; ++b) t += g[b] * wk[static_cast<std::size_t>(b)];
        q += wa * t;
      }
      const double v = model.c0 - q;
      out(static_cast<int>(row), x) = clamp_negative ? std::max(0.0, v) : v;
    }
  });
  return out;
}

double bias_probe(const NetworkParams<float>& params, int trials, std::uint64_t seed, int size) {
  if (trials < 0 || size < 1) throw std::invalid_argument("bias_probe: bad trial count or size");
  std::mt19937_64 rng(seed);
  return max_deviation(params, trials, rng, size);
}

double bias_probe(const NetworkConfig& config, int trials, std::uint64_t seed, int size) {
  if (trials < 0 || size < 1) throw std::invalid_argument("bias_probe: bad trial count or size");
  std::mt19937_64 rng(seed);
  double worst = 0.0;
  for (int t = 0; t < trials; ++t) {
    NetworkParams<float> params = build_network<float>(config, rng());
    for (auto& p : params.entries) {
      auto draw = [&](double lo, double hi) {
        return static_cast<float>(lo + (hi - lo) * nn::uniform01(rng));
      };
      if (p.name.ends_with(".running_mean") || p.name.ends_with(".shift")) {
        for (float& v : p.value.storage()) v = draw(-1.0, 1.0);
      } else if (p.name.ends_with(".running_var")) {
        for (float& v : p.value.storage()) v = draw(0.25, 4.0);
      } else if (p.name.ends_with(".scale")) {
        for (float& v : p.value.storage()) v = draw(0.5, 1.5);
      }
    }
    worst = std::max(worst, max_deviation(params, 1, rng, size));
  }
  return worst;
}

double coverage_stat(const Image& sr, const Image& hr, const VarianceMap& variance, double k) {
  check_same(sr, hr, "coverage_stat");
  check_same(sr, variance, "coverage_stat");
  if (sr.empty()) throw std::invalid_argument("coverage_stat: empty image");
  std::size_t covered = 0;
  const auto s = sr.data();
  const auto r = hr.data();
  const auto v = variance.data();
  for (std::size_t i = 0; i < s.size(); ++i) {
    const double err = std::abs(s[i] - r[i]);
    if (v[i] <= 0.0 ? err == 0.0 : err <= k * std::sqrt(v[i])) ++covered;
  }
  return static_cast<double>(covered) / static_cast<double>(s.size());
}

double error_variance_correlation(const Image& sr, const Image& hr, const VarianceMap& variance,
                                  int block) {
  check_same(sr, hr, "error_variance_correlation");
  check_same(sr, variance, "error_variance_correlation");
  if (block < 1) throw std::invalid_argument("error_variance_correlation: block must be >= 1");
  const int by = sr.height() / block;
  const int bx = sr.width() / block;
  if (by * bx < 2) {
    throw std::invalid_argument("error_variance_correlation: fewer than two blocks");
  }
  std::vector<double> err;
  std::vector<double> var;
  const double area = static_cast<double>(block) * block;
  for (int j = 0; j < by; ++j) {
    for (int i = 0; i < bx; ++i) {
      double e = 0.0;
      double v = 0.0;
      for (int y = j * block; y < (j + 1) * block; ++y) {
        for (int x = i * block; x < (i + 1) * block; ++x) {
          const double d = sr(y, x) - hr(y, x);
          e += d * d;
          v += variance(y, x);
        }
      }
      err.push_back(e / area);
      var.push_back(v / area);
    }
  }
  const double r = pearson(err, var);
  if (std::isnan(r)) {
    std::cerr << "warning: error_variance_correlation undefined (constant input); reporting 0\n";
    return 0.0;
  }
  return r;
}

void render_heatmap(const VarianceMap& variance, const std::filesystem::path& path) {
  if (variance.empty()) throw std::invalid_argument("render_heatmap: empty map");
  const auto [lo_it, hi_it] = std::minmax_element(variance.data().begin(), variance.data().end());
  const double lo = *lo_it;
  const double hi = *hi_it;
  Image gray(variance.height(), variance.width());
  const auto src = variance.data();
  auto dst = gray.data();
  for (std::size_t i = 0; i < src.size(); ++i) {
    dst[i] = hi > lo ? std::round(255.0 * (src[i] - lo) / (hi - lo)) : 128.0;
  }
  write_image(gray, path);

  std::filesystem::path sidecar = path;
  sidecar += ".txt";
  std::ofstream out(sidecar);
  if (!out) throw std::runtime_error("render_heatmap: cannot write " + sidecar.string());
  char buf[128];
  std::snprintf(buf, sizeof buf, "min %.17g\nmax %.17g\n", lo, hi);
  out << buf;
}

HeatmapRange read_heatmap_sidecar(const std::filesystem::path& heatmap_path) {
  std::filesystem::path sidecar = heatmap_path;
  sidecar += ".txt";
  std::ifstream in(sidecar);
  std::string key_min;
  std::string key_max;
  HeatmapRange range;
  if (!(in >> key_min >> range.min >> key_max >> range.max) || key_min != "min" ||
      key_max != "max") {
    throw std::runtime_error("read_heatmap_sidecar: malformed " + sidecar.string());
  }
  return range;
}

std::vector<UncertaintyRecord> evaluate_uncertainty(const std::filesystem::path& hr_dir,
                                                    const NetworkParams<float>& params,
                                                    int scale) {
  const std::vector<std::filesystem::path> files = list_images(hr_dir);
  if (files.empty()) {
    throw std::runtime_error("evaluate_uncertainty: no images in " + hr_dir.string());
  }
  std::vector<UncertaintyRecord> records;
  for (const auto& path : files) {
    const Image hr = modcrop(luma(read_image(path)), scale);
    const Image lr_up = degrade(hr, scale);
    const SuperResolution out = super_resolve(lr_up, params);
    const VarianceMap v = variance_map(out.weights, fit_variance_model(lr_up));

    const int h = hr.height() - 2 * scale;
    const int w = hr.width() - 2 * scale;
    const Image sr_c = crop(out.sr, scale, scale, h, w);
    const Image hr_c = crop(hr, scale, scale, h, w);
    const Image v_c = crop(v, scale, scale, h, w);

    UncertaintyRecord rec;
    rec.image = path.stem().string();
    rec.psnr = psnr(out.sr, hr, scale);
    rec.ssim = ssim(out.sr, hr, scale);
    rec.coverage = coverage_stat(sr_c, hr_c, v_c);
    rec.corr = error_variance_correlation(sr_c, hr_c, v_c);
    records.push_back(rec);
  }
  return records;
}

void write_uncertainty_csv(std::ostream& out, const std::vector<UncertaintyRecord>& records) {
  out << "image,psnr,ssim,coverage,corr\n";
  char buf[256];
  for (const auto& r : records) {
    std::snprintf(buf, sizeof buf, "%s,%.6f,%.6f,%.6f,%.6f\n", r.image.c_str(), r.psnr, r.ssim,
                  r.coverage, r.corr);
    out << buf;
  }
}

}  // namespace dkrg
