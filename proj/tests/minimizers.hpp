#pragma once

// Generic numerical minimizers used to cross-check the closed-form updates.

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "hetnet/common.hpp"

namespace testing {

using namespace hetnet;

/// Minimizer of a convex scalar function on [lo, hi] from the sign of its
/// (sub)derivative, by bisection.
inline double convex_min(const std::function<double(double)>& df, double lo, double hi) {
  if (df(lo) >= 0.0) return lo;
  if (df(hi) <= 0.0) return hi;
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    if (mid == lo || mid == hi) break;
    (df(mid) > 0.0 ? hi : lo) = mid;
  }
  return 0.5 * (lo + hi);
}

struct NumericCone {
  double direct = 0.0;
  VectorXcd cross;
  double kappa = 0.0;
};

/// Nearest point of {t >= sqrt(tau) ||(kappa, cross)||} to the targets. The
/// objective is isotropic in the (kappa, cross) block, so the minimizer keeps
/// its direction and only the radius r and the direct term t are searched.
inline NumericCone numeric_cone_projection(double tau, double t0, const VectorXcd& x0, double k0) {
  const double c = std::sqrt(tau);
  const double s0 = std::sqrt(k0 * k0 + x0.squaredNorm());
  auto slope = [&](double r) { return 2.0 * c * std::max(0.0, c * r - t0) + 2.0 * (r - s0); };
  const double r = s0 > 0.0 ? convex_min(slope, 0.0, s0) : 0.0;
  NumericCone out;
  out.direct = std::max(t0, c * r);
  const double scale = s0 > 0.0 ? r / s0 : 0.0;
  out.cross = x0 * scale;
  out.kappa = k0 * scale;
  return out;
}

/// Projected proximal gradient for
///   sum_i x_i^H B x_i - 2 Re(r_i^H x_i) + lambda sum_i ||x_i||,  ||X||_F^2 <= budget.
/// The prox of the group penalty plus the ball is group shrinkage followed by
/// a radial projection onto the ball.
inline MatrixXcd numeric_block_minimizer(const MatrixXcd& B, const MatrixXcd& R, double lambda, double budget,
                                         int iters = 20000) {
  Eigen::SelfAdjointEigenSolver<MatrixXcd> eig(B);
  const double L = 2.0 * eig.eigenvalues().maxCoeff();
  const double step = 1.0 / L;
  MatrixXcd X = MatrixXcd::Zero(R.rows(), R.cols());
  MatrixXcd Y = X;
  double t = 1.0;
  for (int it = 0; it < iters; ++it) {
    MatrixXcd Z = Y - step * 2.0 * (B * Y - R);
    for (Eigen::Index i = 0; i < Z.cols(); ++i) {
      const double n = Z.col(i).norm();
      Z.col(i) *= n > step * lambda ? (n - step * lambda) / n : 0.0;
    }
    const double fro = Z.norm();
    if (fro * fro > budget) Z *= std::sqrt(budget) / fro;
    const double tn = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
    Y = Z + ((t - 1.0) / tn) * (Z - X);
    X = Z;
    t = tn;
  }
  return X;
}

inline double block_objective(const MatrixXcd& B, const MatrixXcd& R, double lambda, const MatrixXcd& X) {
  double f = 0.0;
  for (Eigen::Index i = 0; i < X.cols(); ++i)
    f += std::real(X.col(i).dot(B * X.col(i))) - 2.0 * std::real(R.col(i).dot(X.col(i))) + lambda * X.col(i).norm();
  return f;
}

/// Proximal gradient for a^T A a - 2 b^T a + sum mu_q |a_q| over the box |a_q| <= 1.
inline VectorXd numeric_box_lasso(const MatrixXd& A, const VectorXd& b, const std::vector<double>& mu,
                                  int iters = 50000) {
  const double L = 2.0 * std::max(Eigen::SelfAdjointEigenSolver<MatrixXd>(A).eigenvalues().maxCoeff(), 1e-12);
  const double step = 1.0 / L;
  VectorXd x = VectorXd::Zero(b.size());
  VectorXd y = x;
  double t = 1.0;
  for (int it = 0; it < iters; ++it) {
    VectorXd z = y - step * 2.0 * (A * y - b);
    for (Eigen::Index q = 0; q < z.size(); ++q) {
      const double m = step * mu[q];
      z(q) = z(q) > m ? z(q) - m : (z(q) < -m ? z(q) + m : 0.0);
      z(q) = std::clamp(z(q), -1.0, 1.0);
    }
    const double tn = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
    y = z + ((t - 1.0) / tn) * (z - x);
    x = z;
    t = tn;
  }
  return x;
}

inline double box_lasso_objective(const MatrixXd& A, const VectorXd& b, const std::vector<double>& mu,
                                  const VectorXd& x) {
  double f = x.dot(A * x) - 2.0 * b.dot(x);
  for (Eigen::Index q = 0; q < x.size(); ++q) f += mu[q] * std::abs(x(q));
  return f;
}

/// min beta ||w|| + rho/2 ||w - b||^2 over ||w||^2 <= budget: the minimizer is
/// a non-negative multiple of b, found by a scalar search.
inline VectorXcd numeric_shrink(const VectorXcd& b, double beta, double rho, double budget) {
  const double nb = b.norm();
  if (nb == 0.0) return b;
  auto slope = [&](double s) { return beta + rho * (s - nb); };
  const double s = convex_min(slope, 0.0, std::sqrt(budget));
  return b * (s / nb);
}

}  // namespace testing
