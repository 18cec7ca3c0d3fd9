#include "dkrg/local_kriging.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <ostream>
#include <stdexcept>

#include "dkrg/parallel.hpp"
#include "dkrg/resample.hpp"

namespace dkrg {

double lattice_position(int i, int scale, LatticeAlignment alignment) {
  const double offset =
      alignment == LatticeAlignment::kCenter ? (scale - 1) / 2.0 : 0.0;
  return static_cast<double>(scale) * i + offset;
}

std::vector<int> window_offsets(int length, int window, int stride) {
  if (window < 1 || stride < 1) {
    throw std::invalid_argument("window_offsets: window and stride must be >= 1");
  }
  if (length <= window) return {0};
  std::vector<int> offsets;
  int o = 0;
  for (; o + window < length; o += stride) offsets.push_back(o);
  if (offsets.back() + window < length) offsets.push_back(length - window);
  return offsets;
}

namespace {

struct WindowResult {
  Image values;
  WindowFit fit;
};

// LR index range [first, last) whose lattice positions fall in [lo, hi).
std::pair<int, int> lr_range(int lo, int hi, int lr_length, int scale,
                             LatticeAlignment alignment) {
  int first = 0;
  while (first < lr_length && lattice_position(first, scale, alignment) < lo) ++first;
  int last = first;
  while (last < lr_length && lattice_position(last, scale, alignment) < hi) ++last;
  return {first, last};
}

WindowResult krige_window(const Image& lr, const Image& bicubic, int scale,
                          int top, int left, int height, int width,
                          const LocalKrigingOptions& options) {
  WindowResult result{Image(height, width), {}};
  WindowFit& fit = result.fit;
  fit.top = top;
  fit.left = left;
  fit.height = height;
  fit.width = width;

  const auto [r0, r1] = lr_range(top, top + height, lr.height(), scale, options.alignment);
  const auto [c0, c1] = lr_range(left, left + width, lr.width(), scale, options.alignment);
  const int rows = r1 - r0;
  const int cols = c1 - c0;
  fit.sites = std::max(0, rows) * std::max(0, cols);

  auto fallback = [&](std::string why) {
    fit.fallback = true;
    fit.note = std::move(why);
    for (int y = 0; y < height; ++y)
      for (int x = 0; x < width; ++x) result.values(y, x) = bicubic(top + y, left + x);
    return result;
  };

  if (fit.sites < options.min_sites || rows < 1 || cols < 1) {
    return fallback("too few known sites");
  }

  const Image block = crop(lr, r0, c0, rows, cols);
  CovarianceModel model;
  try {
    const int max_lag = std::min(options.max_lag, std::max(rows, cols) - 1);
    model = fit_gaussian_model(empirical_covariance(block, max_lag));
  } catch (const std::exception& e) {
    return fallback(e.what());
  }
  model.sigma *= scale;
  fit.c0 = model.c0;
  fit.sigma = model.sigma;

  std::vector<Site> sites;
  std::vector<double> values;
  sites.reserve(static_cast<std::size_t>(fit.sites));
  values.reserve(static_cast<std::size_t>(fit.sites));
  for (int i = r0; i < r1; ++i) {
    for (int j = c0; j < c1; ++j) {
      sites.push_back({lattice_position(i, scale, options.alignment),
                       lattice_position(j, scale, options.alignment)});
      values.push_back(lr(i, j));
    }
  }

  const KrigingSystem system = build_system(sites, model);
  KrigingSolver solver(system, options.solve);
  fit.condition = solver.condition();
  fit.jitter = solver.jitter();
  const Eigen::VectorXd alpha = solver.dual_coefficients(values);
  const auto n = static_cast<Eigen::Index>(sites.size());

  // Separable Gaussian: C(|dy, dx|) = c0 * exp(-dy^2/s^2) * exp(-dx^2/s^2).
  const double inv_s2 = 1.0 / (model.sigma * model.sigma);
  std::vector<double> gy(static_cast<std::size_t>(rows));
  std::vector<double> gx(static_cast<std::size_t>(cols));
  for (int y = 0; y < height; ++y) {
    const double py = top + y;
    for (int i = 0; i < rows; ++i) {
      const double d = py - lattice_position(r0 + i, scale, options.alignment);
      gy[static_cast<std::size_t>(i)] = std::exp(-d * d * inv_s2);
    }
    for (int x = 0; x < width; ++x) {
      const double px = left + x;
      for (int j = 0; j < cols; ++j) {
        const double d = px - lattice_position(c0 + j, scale, options.alignment);
        gx[static_cast<std::size_t>(j)] = std::exp(-d * d * inv_s2);
      }
      double acc = alpha(n);
      for (int i = 0; i < rows; ++i) {
        double row = 0.0;
        const Eigen::Index base = static_cast<Eigen::Index>(i) * cols;
        for (int j = 0; j < cols; ++j) row += alpha(base + j) * gx[static_cast<std::size_t>(j)];
        acc += model.c0 * gy[static_cast<std::size_t>(i)] * row;
      }
      result.values(y, x) = acc;
    }
  }

  // Exactness at sites that land on HR pixels.
  for (int i = r0; i < r1; ++i) {
    const double py = lattice_position(i, scale, options.alignment);
    if (py != std::floor(py)) break;
    for (int j = c0; j < c1; ++j) {
      const double px = lattice_position(j, scale, options.alignment);
      if (px != std::floor(px)) break;
      result.values(static_cast<int>(py) - top, static_cast<int>(px) - left) = lr(i, j);
    }
  }
  return result;
}

}  // namespace

Image local_krige_sr(const Image& lr, int scale, const LocalKrigingOptions& options,
                     std::vector<WindowFit>* diagnostics) {
  if (scale < 1) throw std::invalid_argument("local_krige_sr: scale must be >= 1");
  const int out_h = lr.height() * scale;
  const int out_w = lr.width() * scale;
  const Image bicubic = bicubic_resize(lr, static_cast<double>(scale));

  const auto tops = window_offsets(out_h, options.window, options.stride);
  const auto lefts = window_offsets(out_w, options.window, options.stride);
  const int win_h = std::min(options.window, out_h);
  const int win_w = std::min(options.window, out_w);

  std::vector<WindowResult> results(tops.size() * lefts.size());
  parallel_for(results.size(), [&](std::size_t k) {
    const int top = tops[k / lefts.size()];
    const int left = lefts[k % lefts.size()];
    results[k] = krige_window(lr, bicubic, scale, top, left, win_h, win_w, options);
  });

  Image sum(out_h, out_w, 0.0);
  Image count(out_h, out_w, 0.0);
  for (const auto& r : results) {
    for (int y = 0; y < r.fit.height; ++y) {
      for (int x = 0; x < r.fit.width; ++x) {
        sum(r.fit.top + y, r.fit.left + x) += r.values(y, x);
        count(r.fit.top + y, r.fit.left + x) += 1.0;
      }
    }
    if (r.fit.fallback) {
      std::clog << "local_krige_sr: window (" << r.fit.top << ", " << r.fit.left
                << ") fell back to bicubic: " << r.fit.note << '\n';
    }
  }
  for (std::size_t i = 0; i < sum.size(); ++i) sum.data()[i] /= count.data()[i];

  if (diagnostics != nullptr) {
    diagnostics->clear();
    for (auto& r : results) diagnostics->push_back(std::move(r.fit));
  }
  return sum;
}

void write_window_fits_csv(std::ostream& out, const std::vector<WindowFit>& fits) {
  out << "top,left,height,width,sites,c0,sigma,condition,jitter,fallback,note\n";
  for (const auto& f : fits) {
    out << f.top << ',' << f.left << ',' << f.height << ',' << f.width << ','
        << f.sites << ',' << f.c0 << ',' << f.sigma << ',' << f.condition << ','
        << f.jitter << ',' << (f.fallback ? 1 : 0) << ",\"" << f.note << "\"\n";
  }
}

}  // namespace dkrg
