#include "dkrg/kriging.hpp"

#include <cmath>
#include <numeric>
#include <string>

namespace dkrg {

double distance(const Site& a, const Site& b) {
  return std::hypot(a.y - b.y, a.x - b.x);
}

KrigingSystem build_system(std::span<const Site> sites,
                           const CovarianceModel& model) {
  if (sites.empty()) throw std::invalid_argument("build_system: no sites");
  const auto n = static_cast<Eigen::Index>(sites.size());
  KrigingSystem system;
  system.sites.assign(sites.begin(), sites.end());
  system.model = model;
  system.matrix.resize(n + 1, n + 1);
  for (Eigen::Index i = 0; i < n; ++i) {
    system.matrix(i, i) = model.c0;
    for (Eigen::Index j = i + 1; j < n; ++j) {
      const Site& a = sites[static_cast<std::size_t>(i)];
      const Site& b = sites[static_cast<std::size_t>(j)];
      if (a.y == b.y && a.x == b.x) {
        throw std::invalid_argument("build_system: duplicate site at (" +
                                    std::to_string(a.y) + ", " +
                                    std::to_string(a.x) + ")");
      }
      const double c = eval_covariance(model, distance(a, b));
      system.matrix(i, j) = c;
      system.matrix(j, i) = c;
    }
    system.matrix(i, n) = 1.0;
    system.matrix(n, i) = 1.0;
  }
  system.matrix(n, n) = 0.0;
  return system;
}

Eigen::VectorXd right_hand_side(const KrigingSystem& system, const Site& target) {
  const auto n = static_cast<Eigen::Index>(system.sites.size());
  Eigen::VectorXd b(n + 1);
  for (Eigen::Index i = 0; i < n; ++i) {
    b(i) = eval_covariance(system.model,
                           distance(system.sites[static_cast<std::size_t>(i)], target));
  }
  b(n) = 1.0;
  return b;
}

namespace {

// Mixed-precision iterative refinement: residuals in long double.
Eigen::VectorXd refine(const Eigen::MatrixXd& a, const LuDecomposition& lu,
                       const Eigen::VectorXd& b, Eigen::VectorXd x) {
  const Eigen::Index n = a.rows();
  for (int iter = 0; iter < 2; ++iter) {
    Eigen::VectorXd r(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      long double acc = b(i);
      for (Eigen::Index j = 0; j < n; ++j) {
        acc -= static_cast<long double>(a(i, j)) * static_cast<long double>(x(j));
      }
      r(i) = static_cast<double>(acc);
    }
    x += lu.solve(r);
  }
  return x;
}

}  // namespace

KrigingSolver::KrigingSolver(const KrigingSystem& system, SolveOptions options)
    : system_(&system), solved_matrix_(system.matrix) {
  lu_.emplace(solved_matrix_);
  condition_ = lu_->condition_estimate();
  if (!(condition_ <= options.max_condition)) {
    if (!options.regularize) {
      throw IllConditionedError(
          "kriging system is ill-conditioned (condition estimate " +
              std::to_string(condition_) + ")",
          condition_);
    }
    jitter_ = options.jitter * system.model.c0;
    const Eigen::Index n = static_cast<Eigen::Index>(system.sites.size());
    solved_matrix_.diagonal().head(n).array() += jitter_;
    lu_.emplace(solved_matrix_);
    condition_ = lu_->condition_estimate();
  }
}

KrigingWeights KrigingSolver::solve(const Site& target) const {
  Eigen::VectorXd b = right_hand_side(*system_, target);
  // The jitter is a nugget of the regularized covariance, so it also applies
  // at zero distance on the right-hand side; known sites stay exact.
  if (jitter_ > 0.0) {
    for (std::size_t i = 0; i < system_->sites.size(); ++i) {
      if (distance(system_->sites[i], target) == 0.0) b(static_cast<Eigen::Index>(i)) += jitter_;
    }
  }
  const Eigen::VectorXd x = refine(solved_matrix_, *lu_, b, lu_->solve(b));
  const Eigen::Index n = x.size() - 1;
  KrigingWeights out;
  out.weights = x.head(n);
  out.lagrange = -x(n);
  out.condition = condition_;
  out.jitter = jitter_;
  return out;
}

Eigen::VectorXd KrigingSolver::dual_coefficients(std::span<const double> values) const {
  const auto n = static_cast<Eigen::Index>(system_->sites.size());
  if (static_cast<Eigen::Index>(values.size()) != n) {
    throw std::invalid_argument("dual_coefficients: value count mismatch");
  }
  Eigen::VectorXd b(n + 1);
  for (Eigen::Index i = 0; i < n; ++i) b(i) = values[static_cast<std::size_t>(i)];
  b(n) = 0.0;
  // The system matrix is symmetric, so b' A^-1 c = (A^-1 b)' c.
  return refine(solved_matrix_, *lu_, b, lu_->solve(b));
}

KrigingWeights solve_weights(const KrigingSystem& system, const Site& target,
                             const SolveOptions& options) {
  return KrigingSolver(system, options).solve(target);
}

double krige_point(std::span<const double> values, const KrigingWeights& w) {
  if (static_cast<Eigen::Index>(values.size()) != w.weights.size()) {
    throw std::invalid_argument("krige_point: value count mismatch");
  }
  double acc = 0.0;
  for (std::size_t i = 0; i < values.size(); ++i) {
    acc += w.weights(static_cast<Eigen::Index>(i)) * values[i];
  }
  return acc;
}

double kriging_variance(const KrigingSystem& system, const KrigingWeights& w,
                        const Site& target) {
  double v = system.model.c0 + w.lagrange;
  for (std::size_t i = 0; i < system.sites.size(); ++i) {
    v -= w.weights(static_cast<Eigen::Index>(i)) *
         eval_covariance(system.model, distance(system.sites[i], target));
  }
  return v;
}

}  // namespace dkrg
