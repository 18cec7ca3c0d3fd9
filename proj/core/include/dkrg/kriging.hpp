#pragma once

#include <Eigen/Dense>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "dkrg/covariance.hpp"
#include "dkrg/linalg.hpp"

namespace dkrg {

/// A position in pixel units (row, column); may be fractional.
struct Site {
  double y = 0.0;
  double x = 0.0;
};

double distance(const Site& a, const Site& b);

/// Ordinary kriging system
///
///   [ C  1 ] [  w ]   [ c* ]
///   [ 1' 0 ] [ -l ] = [ 1  ]
///
/// with C_ij = C(|x_i - x_j|). `matrix` is the (n+1) x (n+1) left-hand side.
struct KrigingSystem {
  Eigen::MatrixXd matrix;
  std::vector<Site> sites;
  CovarianceModel model;

  int size() const { return static_cast<int>(sites.size()); }
};

struct KrigingWeights {
  Eigen::VectorXd weights;  // one per known site, summing to one
  double lagrange = 0.0;    // l in the system above
  double condition = 0.0;   // 1-norm condition estimate of the solved matrix
  double jitter = 0.0;      // diagonal regularization actually applied
};

class IllConditionedError : public std::runtime_error {
 public:
  IllConditionedError(const std::string& what, double condition)
      : std::runtime_error(what), condition_(condition) {}
  double condition() const { return condition_; }

 private:
  double condition_;
};

struct SolveOptions {
  double max_condition = 1e12;
  /// Added to the covariance diagonal (times c0) when max_condition is
  /// exceeded. Set `regularize` to false to get IllConditionedError instead.
  double jitter = 1e-8;
  bool regularize = true;
};

/// Throws std::invalid_argument for an empty or duplicated site list.
KrigingSystem build_system(std::span<const Site> sites,
                           const CovarianceModel& model);

/// Right-hand side (C(|x_1 - x*|), ..., C(|x_n - x*|), 1).
Eigen::VectorXd right_hand_side(const KrigingSystem& system, const Site& target);

/// Factorized system that can be reused across many targets.
class KrigingSolver {
 public:
  explicit KrigingSolver(const KrigingSystem& system, SolveOptions options = {});

  KrigingWeights solve(const Site& target) const;

  /// Dual form: coefficients a with estimate(x*) = sum_i a_i C(|x_i - x*|) +
  /// a_{n}. Equivalent to weights . values for every target.
  Eigen::VectorXd dual_coefficients(std::span<const double> values) const;

  double condition() const { return condition_; }
  double jitter() const { return jitter_; }
  const KrigingSystem& system() const { return *system_; }

 private:
  const KrigingSystem* system_;
  Eigen::MatrixXd solved_matrix_;
  std::optional<LuDecomposition> lu_;
  double condition_ = 0.0;
  double jitter_ = 0.0;
};

KrigingWeights solve_weights(const KrigingSystem& system, const Site& target,
                             const SolveOptions& options = {});

double krige_point(std::span<const double> values, const KrigingWeights& w);

/// Ordinary kriging variance C(0) - sum_i w_i C(|x_i - x*|) + l.
double kriging_variance(const KrigingSystem& system, const KrigingWeights& w,
                        const Site& target);

}  // namespace dkrg
