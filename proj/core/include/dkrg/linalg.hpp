#pragma once

#include <Eigen/Dense>
#include <stdexcept>
#include <vector>

namespace dkrg {

class SingularMatrixError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// LU factorization with partial (row) pivoting, PA = LU.
///
/// Suitable for symmetric indefinite systems such as the Lagrange-augmented
/// kriging matrix. Throws SingularMatrixError on an exactly zero pivot.
class LuDecomposition {
 public:
  explicit LuDecomposition(Eigen::MatrixXd a);

  int size() const { return static_cast<int>(lu_.rows()); }

  Eigen::VectorXd solve(const Eigen::VectorXd& b) const;
  Eigen::VectorXd solve_transpose(const Eigen::VectorXd& b) const;

  /// Hager's estimate of ||A^-1||_1 times ||A||_1.
  double condition_estimate() const;

 private:
  Eigen::MatrixXd lu_;
  std::vector<int> perm_;  // row i of PA is row perm_[i] of A
  double norm1_ = 0.0;
};

}  // namespace dkrg
