#pragma once

#include <cstddef>
#include <iosfwd>
#include <stdexcept>
#include <vector>

#include "dkrg/image.hpp"

namespace dkrg {

/// Isotropic empirical covariance of one image realization at integer lags.
struct EmpiricalCovariance {
  std::vector<int> lags;       // 0, 1, ..., max_lag
  std::vector<double> values;  // c(tau), intensity^2
  std::vector<double> counts;  // pairs pooled at each lag
};

/// Stationary Gaussian covariance C(d) = c0 * exp(-d^2 / sigma^2).
struct CovarianceModel {
  double c0 = 1.0;     // sill, intensity^2
  double sigma = 1.0;  // range, pixels

  double operator()(double distance) const;
};

class CovarianceFitError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// c(tau) = mean of f(x) f(x + tau) over all horizontal and vertical pairs at
/// distance tau, minus mean(f)^2. Throws std::invalid_argument when some lag
/// in [0, max_lag] has no pair (max_lag >= max(height, width)).
EmpiricalCovariance empirical_covariance(const Image& img, int max_lag);

/// Count-weighted least-squares fit of the Gaussian model.
///
/// For fixed sigma the optimal c0 is closed-form (clamped at zero), so the
/// search is one-dimensional in sigma over [0.1, 4 * max_lag]: a 100-point
/// log-spaced scan brackets the minimum, then golden-section refines it.
/// Throws CovarianceFitError for degenerate input.
CovarianceModel fit_gaussian_model(const EmpiricalCovariance& emp);

/// The weighted residual sum of squares minimized by fit_gaussian_model.
double gaussian_fit_objective(const EmpiricalCovariance& emp,
                              const CovarianceModel& model);

/// Optimal c0 for a fixed sigma (>= 0).
double optimal_sill(const EmpiricalCovariance& emp, double sigma);

double eval_covariance(const CovarianceModel& model, double distance);

/// CSV rows `tau,c,count,fitted`.
void write_covariance_csv(std::ostream& out, const EmpiricalCovariance& emp,
                          const CovarianceModel& model);

}  // namespace dkrg
