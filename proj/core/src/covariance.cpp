#include "dkrg/covariance.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <string>

namespace dkrg {

double CovarianceModel::operator()(double distance) const {
  return eval_covariance(*this, distance);
}

double eval_covariance(const CovarianceModel& model, double distance) {
  if (std::isinf(model.sigma)) return model.c0;
  const double r = distance / model.sigma;
  return model.c0 * std::exp(-r * r);
}

EmpiricalCovariance empirical_covariance(const Image& img, int max_lag) {
  const int h = img.height();
  const int w = img.width();
  if (max_lag < 0) {
    throw std::invalid_argument("empirical_covariance: max_lag must be >= 0");
  }
  if (max_lag >= std::max(h, w)) {
    throw std::invalid_argument(
        "empirical_covariance: image too small for max_lag " +
        std::to_string(max_lag));
  }
  const double mu = img.mean();

  EmpiricalCovariance emp;
  for (int tau = 0; tau <= max_lag; ++tau) {
    double sum = 0.0;
    double count = 0.0;
    if (tau == 0) {
      for (double v : img.data()) sum += v * v;
      count = static_cast<double>(img.size());
    } else {
      for (int y = 0; y < h; ++y) {
        for (int x = 0; x + tau < w; ++x) sum += img(y, x) * img(y, x + tau);
      }
      for (int y = 0; y + tau < h; ++y) {
        for (int x = 0; x < w; ++x) sum += img(y, x) * img(y + tau, x);
      }
      count = static_cast<double>(std::max(0, w - tau)) * h +
              static_cast<double>(std::max(0, h - tau)) * w;
    }
    emp.lags.push_back(tau);
    emp.values.push_back(sum / count - mu * mu);
    emp.counts.push_back(count);
  }
  return emp;
}

double optimal_sill(const EmpiricalCovariance& emp, double sigma) {
  double num = 0.0;
  double den = 0.0;
  for (std::size_t i = 0; i < emp.lags.size(); ++i) {
    const double r = emp.lags[i] / sigma;
    const double g = std::exp(-r * r);
    num += emp.counts[i] * g * emp.values[i];
    den += emp.counts[i] * g * g;
  }
  return den > 0.0 ? std::max(0.0, num / den) : 0.0;
}

double gaussian_fit_objective(const EmpiricalCovariance& emp,
                              const CovarianceModel& model) {
  double total = 0.0;
  for (std::size_t i = 0; i < emp.lags.size(); ++i) {
    const double r = eval_covariance(model, emp.lags[i]) - emp.values[i];
    total += emp.counts[i] * r * r;
  }
  return total;
}

CovarianceModel fit_gaussian_model(const EmpiricalCovariance& emp) {
  const std::size_t n = emp.lags.size();
  if (n != emp.values.size() || n != emp.counts.size()) {
    throw std::invalid_argument("fit_gaussian_model: inconsistent arrays");
  }
  std::size_t usable = 0;
  for (double c : emp.counts) usable += c > 0.0 ? 1 : 0;
  if (usable < 3) {
    throw CovarianceFitError("fit_gaussian_model: need at least 3 lags");
  }
  if (std::none_of(emp.values.begin(), emp.values.end(),
                   [](double v) { return v > 0.0; })) {
    throw CovarianceFitError(
        "fit_gaussian_model: degenerate field, no positive covariance");
  }
  if (!(emp.values.front() > 0.0)) {
    throw CovarianceFitError("fit_gaussian_model: c(0) must be positive");
  }

  const int max_lag = *std::max_element(emp.lags.begin(), emp.lags.end());
  const double lo = 0.1;
  const double hi = 4.0 * std::max(1, max_lag);

  auto objective = [&](double sigma) {
    return gaussian_fit_objective(emp, {optimal_sill(emp, sigma), sigma});
  };

  constexpr int kGrid = 100;
  std::vector<double> grid(kGrid);
  std::size_t best = 0;
  double best_value = std::numeric_limits<double>::infinity();
  for (int i = 0; i < kGrid; ++i) {
    grid[i] = lo * std::pow(hi / lo, static_cast<double>(i) / (kGrid - 1));
    const double v = objective(grid[i]);
    if (v < best_value) {
      best_value = v;
      best = static_cast<std::size_t>(i);
    }
  }

  double a = grid[best == 0 ? 0 : best - 1];
  double b = grid[std::min<std::size_t>(best + 1, kGrid - 1)];
  double best_sigma = grid[best];

  const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double x1 = b - inv_phi * (b - a);
  double x2 = a + inv_phi * (b - a);
  double f1 = objective(x1);
  double f2 = objective(x2);
  while (b - a > 1e-8 * best_sigma) {
    if (f1 <= f2) {
      b = x2;
      x2 = x1;
      f2 = f1;
      x1 = b - inv_phi * (b - a);
      f1 = objective(x1);
    } else {
      a = x1;
      x1 = x2;
      f1 = f2;
      x2 = a + inv_phi * (b - a);
      f2 = objective(x2);
    }
    for (auto [x, f] : {std::pair{x1, f1}, std::pair{x2, f2}}) {
      if (f < best_value) {
        best_value = f;
        best_sigma = x;
      }
    }
  }
  // The bracket end points are valid candidates as well (boundary optimum).
  for (double x : {a, b}) {
    const double f = objective(x);
    if (f < best_value) {
      best_value = f;
      best_sigma = x;
    }
  }

  const CovarianceModel model{optimal_sill(emp, best_sigma), best_sigma};
  if (!(model.c0 > 0.0)) {
    throw CovarianceFitError("fit_gaussian_model: fitted sill is not positive");
  }
  return model;
}

void write_covariance_csv(std::ostream& out, const EmpiricalCovariance& emp,
                          const CovarianceModel& model) {
  out << "tau,c,count,fitted\n";
  for (std::size_t i = 0; i < emp.lags.size(); ++i) {
    out << emp.lags[i] << ',' << emp.values[i] << ',' << emp.counts[i] << ','
        << eval_covariance(model, emp.lags[i]) << '\n';
  }
}

}  // namespace dkrg
