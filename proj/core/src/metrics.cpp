#include "dkrg/metrics.hpp"

#include <array>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <stdexcept>

#include "dkrg/image_io.hpp"
#include "dkrg/resample.hpp"

namespace dkrg {

namespace {

constexpr int kSsimWindow = 11;
constexpr double kSsimSigma = 1.5;
constexpr double kC1 = (0.01 * 255.0) * (0.01 * 255.0);
constexpr double kC2 = (0.03 * 255.0) * (0.03 * 255.0);

void check_pair(const Image& a, const Image& b, int shave, const char* who) {
  if (a.height() != b.height() || a.width() != b.width()) {
    throw std::invalid_argument(std::string(who) + ": dimension mismatch");
  }
  if (shave < 0 || a.height() <= 2 * shave || a.width() <= 2 * shave) {
    throw std::invalid_argument(std::string(who) + ": image too small for shave");
  }
}

std::array<double, kSsimWindow> gaussian_window() {
  std::array<double, kSsimWindow> g{};
  double total = 0.0;
  for (int i = 0; i < kSsimWindow; ++i) {
    const double d = i - kSsimWindow / 2;
    g[static_cast<std::size_t>(i)] = std::exp(-d * d / (2.0 * kSsimSigma * kSsimSigma));
    total += g[static_cast<std::size_t>(i)];
  }
  for (double& v : g) v /= total;
  return g;
}

// Valid-mode separable Gaussian filter.
std::vector<double> filter_valid(const std::vector<double>& src, int h, int w) {
  static const std::array<double, kSsimWindow> g = gaussian_window();
  const int oh = h - kSsimWindow + 1;
  const int ow = w - kSsimWindow + 1;
  std::vector<double> rows(static_cast<std::size_t>(h) * ow);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < ow; ++x) {
      double acc = 0.0;
      for (int k = 0; k < kSsimWindow; ++k) {
        acc += g[static_cast<std::size_t>(k)] * src[static_cast<std::size_t>(y) * w + x + k];
      }
      rows[static_cast<std::size_t>(y) * ow + x] = acc;
    }
  }
  std::vector<double> out(static_cast<std::size_t>(oh) * ow);
  for (int y = 0; y < oh; ++y) {
    for (int x = 0; x < ow; ++x) {
      double acc = 0.0;
      for (int k = 0; k < kSsimWindow; ++k) {
        acc += g[static_cast<std::size_t>(k)] * rows[static_cast<std::size_t>(y + k) * ow + x];
      }
      out[static_cast<std::size_t>(y) * ow + x] = acc;
    }
  }
  return out;
}

std::string format_double(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

}  // namespace

double psnr(const Image& a, const Image& b, int shave) {
  check_pair(a, b, shave, "psnr");
  double acc = 0.0;
  for (int y = shave; y < a.height() - shave; ++y) {
    for (int x = shave; x < a.width() - shave; ++x) {
      const double d = a(y, x) - b(y, x);
      acc += d * d;
    }
  }
  const double count =
      static_cast<double>(a.height() - 2 * shave) * static_cast<double>(a.width() - 2 * shave);
  const double mse = acc / count;
  if (mse == 0.0) return kInfinitePsnr;
  return 10.0 * std::log10(255.0 * 255.0 / mse);
}

double ssim(const Image& a, const Image& b, int shave) {
  check_pair(a, b, shave, "ssim");
  const int h = a.height() - 2 * shave;
  const int w = a.width() - 2 * shave;
  if (h < kSsimWindow || w < kSsimWindow) {
    throw std::invalid_argument("ssim: image smaller than the 11x11 window");
  }
  const std::size_t n = static_cast<std::size_t>(h) * w;
  std::vector<double> va(n), vb(n), aa(n), bb(n), ab(n);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const std::size_t i = static_cast<std::size_t>(y) * w + x;
      va[i] = a(y + shave, x + shave);
      vb[i] = b(y + shave, x + shave);
      aa[i] = va[i] * va[i];
      bb[i] = vb[i] * vb[i];
      ab[i] = va[i] * vb[i];
    }
  }
  const std::vector<double> mu_a = filter_valid(va, h, w);
  const std::vector<double> mu_b = filter_valid(vb, h, w);
  const std::vector<double> e_aa = filter_valid(aa, h, w);
  const std::vector<double> e_bb = filter_valid(bb, h, w);
  const std::vector<double> e_ab = filter_valid(ab, h, w);

  double total = 0.0;
  for (std::size_t i = 0; i < mu_a.size(); ++i) {
    const double ma = mu_a[i];
    const double mb = mu_b[i];
    const double var_a = e_aa[i] - ma * ma;
    const double var_b = e_bb[i] - mb * mb;
    const double cov = e_ab[i] - ma * mb;
    const double num = (2.0 * ma * mb + kC1) * (2.0 * cov + kC2);
    const double den = (ma * ma + mb * mb + kC1) * (var_a + var_b + kC2);
    total += num / den;
  }
  return total / static_cast<double>(mu_a.size());
}

EvalSummary evaluate_set(const std::filesystem::path& hr_dir, const std::string& method_name,
                         const SrMethod& method, int scale) {
  if (scale < 1) throw std::invalid_argument("evaluate_set: scale must be positive");
  const std::vector<std::filesystem::path> files = list_images(hr_dir);
  if (files.empty()) {
    throw std::runtime_error("evaluate_set: no images in " + hr_dir.string());
  }
  EvalSummary summary;
  for (const auto& path : files) {
    const Image hr = modcrop(luma(read_image(path)), scale);
    const Image lr = downsample(hr, scale);
    const Image lr_up = bicubic_resize(lr, static_cast<double>(scale));
    const Image sr = method(SrInput{lr, lr_up, scale, hr});
    if (sr.height() != hr.height() || sr.width() != hr.width()) {
      throw std::runtime_error("evaluate_set: method " + method_name +
                               " returned the wrong size for " + path.filename().string());
    }
    EvalRecord rec;
    rec.image = path.stem().string();
    rec.method = method_name;
    rec.scale = scale;
    rec.psnr = psnr(sr, hr, scale);
    rec.ssim = ssim(sr, hr, scale);
    summary.records.push_back(rec);
  }
  for (const auto& r : summary.records) {
    summary.mean_psnr += r.psnr;
    summary.mean_ssim += r.ssim;
  }
  summary.mean_psnr /= static_cast<double>(summary.records.size());
  summary.mean_ssim /= static_cast<double>(summary.records.size());
  return summary;
}

void write_eval_csv(std::ostream& out, const EvalSummary& summary) {
  out << "image,method,scale,psnr_db,ssim\n";
  for (const auto& r : summary.records) {
    out << r.image << ',' << r.method << ',' << r.scale << ',' << format_double(r.psnr) << ','
        << format_double(r.ssim) << '\n';
  }
  if (!summary.records.empty()) {
    const EvalRecord& first = summary.records.front();
    out << "mean," << first.method << ',' << first.scale << ','
        << format_double(summary.mean_psnr) << ',' << format_double(summary.mean_ssim) << '\n';
  }
}

}  // namespace dkrg
