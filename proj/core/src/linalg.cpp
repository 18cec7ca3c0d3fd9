#include "dkrg/linalg.hpp"

#include <cmath>
#include <numeric>
#include <utility>

namespace dkrg {

LuDecomposition::LuDecomposition(Eigen::MatrixXd a) : lu_(std::move(a)) {
  const Eigen::Index n = lu_.rows();
  if (n == 0 || lu_.cols() != n) {
    throw std::invalid_argument("LuDecomposition: matrix must be square");
  }
  norm1_ = lu_.cwiseAbs().colwise().sum().maxCoeff();
  perm_.resize(static_cast<std::size_t>(n));
  std::iota(perm_.begin(), perm_.end(), 0);

  for (Eigen::Index k = 0; k < n; ++k) {
    Eigen::Index pivot = k;
    double best = std::abs(lu_(k, k));
    for (Eigen::Index i = k + 1; i < n; ++i) {
      const double v = std::abs(lu_(i, k));
      if (v > best) {
        best = v;
        pivot = i;
      }
    }
    if (best == 0.0) {
      throw SingularMatrixError("LuDecomposition: matrix is singular");
    }
    if (pivot != k) {
      lu_.row(k).swap(lu_.row(pivot));
      std::swap(perm_[static_cast<std::size_t>(k)],
                perm_[static_cast<std::size_t>(pivot)]);
    }
    const double inv = 1.0 / lu_(k, k);
    const Eigen::Index rest = n - k - 1;
    if (rest == 0) continue;
    lu_.col(k).tail(rest) *= inv;
    // Column-oriented rank-1 update of the trailing block.
    for (Eigen::Index j = k + 1; j < n; ++j) {
      const double akj = lu_(k, j);
      if (akj == 0.0) continue;
      lu_.col(j).tail(rest).noalias() -= akj * lu_.col(k).tail(rest);
    }
  }
}

Eigen::VectorXd LuDecomposition::solve(const Eigen::VectorXd& b) const {
  const Eigen::Index n = lu_.rows();
  if (b.size() != n) throw std::invalid_argument("LuDecomposition::solve: size");
  Eigen::VectorXd x(n);
  for (Eigen::Index i = 0; i < n; ++i) x(i) = b(perm_[static_cast<std::size_t>(i)]);
  // Forward substitution with unit-diagonal L (column sweep).
  for (Eigen::Index k = 0; k < n; ++k) {
    const double xk = x(k);
    if (xk != 0.0) x.tail(n - k - 1).noalias() -= xk * lu_.col(k).tail(n - k - 1);
  }
  // Back substitution with U (column sweep).
  for (Eigen::Index k = n - 1; k >= 0; --k) {
    x(k) /= lu_(k, k);
    const double xk = x(k);
    if (xk != 0.0) x.head(k).noalias() -= xk * lu_.col(k).head(k);
  }
  return x;
}

Eigen::VectorXd LuDecomposition::solve_transpose(const Eigen::VectorXd& b) const {
  // A^T x = b  <=>  U^T L^T P x = b.
  const Eigen::Index n = lu_.rows();
  if (b.size() != n) {
    throw std::invalid_argument("LuDecomposition::solve_transpose: size");
  }
  Eigen::VectorXd z = b;
  for (Eigen::Index k = 0; k < n; ++k) {
    z(k) = (z(k) - lu_.col(k).head(k).dot(z.head(k))) / lu_(k, k);
  }
  for (Eigen::Index k = n - 1; k >= 0; --k) {
    z(k) -= lu_.col(k).tail(n - k - 1).dot(z.tail(n - k - 1));
  }
  Eigen::VectorXd x(n);
  for (Eigen::Index i = 0; i < n; ++i) x(perm_[static_cast<std::size_t>(i)]) = z(i);
  return x;
}

double LuDecomposition::condition_estimate() const {
  const Eigen::Index n = lu_.rows();
  Eigen::VectorXd x = Eigen::VectorXd::Constant(n, 1.0 / static_cast<double>(n));
  double estimate = 0.0;
  for (int iter = 0; iter < 5; ++iter) {
    const Eigen::VectorXd y = solve(x);
    if (!y.allFinite()) return std::numeric_limits<double>::infinity();
    estimate = y.lpNorm<1>();
    const Eigen::VectorXd xi = y.unaryExpr([](double v) { return v >= 0.0 ? 1.0 : -1.0; });
    const Eigen::VectorXd z = solve_transpose(xi);
    Eigen::Index j = 0;
    const double zmax = z.cwiseAbs().maxCoeff(&j);
    if (zmax <= z.dot(x)) break;
    x.setZero();
    x(j) = 1.0;
  }
  return norm1_ * estimate;
}

}  // namespace dkrg
