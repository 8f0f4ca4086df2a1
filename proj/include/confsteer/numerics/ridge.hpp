#pragma once

#include "confsteer/types.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <limits>
#include <optional>
#include <vector>

namespace confsteer {

template <typename Scalar = double> struct RidgeFit {
  Vector<Scalar> weights;
  Scalar bias = 0;
  Scalar lambda = 0;
  Scalar r2_train = 0;
  std::optional<Scalar> r2_val;
  std::optional<Scalar> r2_test;
};

//! Coefficient of determination of `pred` against `y`. A constant target
//! scores 1 when reproduced exactly and 0 otherwise.
template <typename DerivedY, typename DerivedP>
typename DerivedY::Scalar r_squared(const Eigen::MatrixBase<DerivedY> &y,
                                    const Eigen::MatrixBase<DerivedP> &pred) {
  using Scalar = typename DerivedY::Scalar;
  if (y.size() != pred.size() || y.size() == 0)
    throw ValidationError("r_squared: size mismatch or empty input");
  const Scalar mean = y.mean();
  const Scalar ss_tot = (y.array() - mean).square().sum();
  const Scalar ss_res = (y - pred).squaredNorm();
  if (ss_tot == Scalar(0))
    return ss_res == Scalar(0) ? Scalar(1) : Scalar(0);
  return Scalar(1) - ss_res / ss_tot;
}

template <typename Scalar, typename Derived>
Vector<Scalar> ridge_predict(const RidgeFit<Scalar> &fit,
                             const Eigen::MatrixBase<Derived> &X) {
  if (X.cols() != fit.weights.size())
    throw ValidationError("ridge_predict: feature count " +
                          std::to_string(X.cols()) + " does not match " +
                          std::to_string(fit.weights.size()) + " weights");
  return (X.template cast<Scalar>() * fit.weights).array() + fit.bias;
}

namespace detail {

template <typename Derived>
bool all_finite(const Eigen::DenseBase<Derived> &m) {
  return m.allFinite();
}

} // namespace detail

//! Centered ridge solver. The spectral factorization of the smaller of the
//! covariance (d x d) and Gram (N x N) matrices is computed once, so solving
//! for many lambdas costs one back-substitution each. The bias is never
//! penalized. At lambda = 0 the minimum-norm least-squares solution is
//! returned.
template <typename Scalar = double> class RidgeSolver {
public:
  template <typename DerivedX, typename DerivedY>
  RidgeSolver(const Eigen::MatrixBase<DerivedX> &X,
              const Eigen::MatrixBase<DerivedY> &y) {
    const Eigen::Index n = X.rows();
    if (n < 2)
      throw ValidationError("fit_ridge: need at least 2 rows");
    if (y.size() != n)
      throw ValidationError("fit_ridge: X has " + std::to_string(n) +
                            " rows but y has " + std::to_string(y.size()));
    if (!detail::all_finite(X) || !detail::all_finite(y))
      throw ValidationError("fit_ridge: non-finite input");

    x_mean_ = X.template cast<Scalar>().colwise().mean().transpose();
    y_mean_ = y.template cast<Scalar>().mean();
    Matrix<Scalar> xc =
        X.template cast<Scalar>().rowwise() - x_mean_.transpose();
    Vector<Scalar> yc = y.template cast<Scalar>().array() - y_mean_;
    constant_target_ = (yc.array() == Scalar(0)).all();
    dim_ = X.cols();
    if (constant_target_)
      return;

    dual_ = n < X.cols();
    const Matrix<Scalar> gram = dual_ ? Matrix<Scalar>(xc * xc.transpose())
                                      : Matrix<Scalar>(xc.transpose() * xc);
    Eigen::SelfAdjointEigenSolver<Matrix<Scalar>> eig(gram);
    if (eig.info() != Eigen::Success)
      throw NumericalError("fit_ridge: eigendecomposition failed");
    eigenvalues_ = eig.eigenvalues().cwiseMax(Scalar(0));
    basis_ = eig.eigenvectors();
    const Scalar top = eigenvalues_.size() ? eigenvalues_.maxCoeff() : 0;
    cutoff_ = top * std::numeric_limits<Scalar>::epsilon() *
              Scalar(std::max(X.rows(), X.cols()));
    if (dual_) {
      xc_t_ = xc.transpose();
      rhs_ = basis_.transpose() * yc;
    } else {
      rhs_ = basis_.transpose() * (xc.transpose() * yc);
    }
  }

  RidgeFit<Scalar> solve(Scalar lambda) const {
    if (!(lambda >= 0) || !std::isfinite(lambda))
      throw ValidationError("fit_ridge: lambda must be finite and >= 0");
    RidgeFit<Scalar> fit;
    fit.lambda = lambda;
    if (constant_target_) {
      fit.weights = Vector<Scalar>::Zero(dim_);
      fit.bias = y_mean_;
      return fit;
    }
    Vector<Scalar> coef(rhs_.size());
    for (Eigen::Index i = 0; i < rhs_.size(); ++i) {
      coef(i) = eigenvalues_(i) <= cutoff_
                    ? Scalar(0)
                    : rhs_(i) / (eigenvalues_(i) + lambda);
    }
    fit.weights = dual_ ? Vector<Scalar>(xc_t_ * (basis_ * coef))
                        : Vector<Scalar>(basis_ * coef);
    fit.bias = y_mean_ - x_mean_.dot(fit.weights);
    return fit;
  }

private:
  Vector<Scalar> x_mean_;
  Scalar y_mean_ = 0;
  Eigen::Index dim_ = 0;
  bool constant_target_ = false;
  bool dual_ = false;
  Vector<Scalar> eigenvalues_;
  Matrix<Scalar> basis_;
  Matrix<Scalar> xc_t_;
  Vector<Scalar> rhs_;
  Scalar cutoff_ = 0;
};

/// Minimizes ||y - Xw - b||^2 + lambda ||w||^2 with an unpenalized bias.
template <typename DerivedX, typename DerivedY>
RidgeFit<typename DerivedX::Scalar>
fit_ridge(const Eigen::MatrixBase<DerivedX> &X,
          const Eigen::MatrixBase<DerivedY> &y,
          typename DerivedX::Scalar lambda) {
  using Scalar = typename DerivedX::Scalar;
  RidgeSolver<Scalar> solver(X, y);
  RidgeFit<Scalar> fit = solver.solve(lambda);
  fit.r2_train = r_squared(y.template cast<Scalar>(), ridge_predict(fit, X));
  return fit;
}

/// Fits every lambda on the training rows and keeps the one with the highest
/// validation R^2. Ties (within 1e-12) go to the larger lambda.
template <typename DerivedX, typename DerivedY, typename DerivedXV,
          typename DerivedYV>
RidgeFit<typename DerivedX::Scalar>
sweep_ridge(const Eigen::MatrixBase<DerivedX> &X_train,
            const Eigen::MatrixBase<DerivedY> &y_train,
            const Eigen::MatrixBase<DerivedXV> &X_val,
            const Eigen::MatrixBase<DerivedYV> &y_val,
            const std::vector<typename DerivedX::Scalar> &lambdas) {
  using Scalar = typename DerivedX::Scalar;
  if (lambdas.empty())
    throw ValidationError("sweep_ridge: empty lambda list");
  if (X_val.rows() == 0 || X_val.rows() != y_val.size())
    throw ValidationError("sweep_ridge: validation set empty or misaligned");
  constexpr Scalar kTieTolerance = Scalar(1e-12);

  RidgeSolver<Scalar> solver(X_train, y_train);
  std::optional<RidgeFit<Scalar>> best;
  for (Scalar lambda : lambdas) {
    RidgeFit<Scalar> fit = solver.solve(lambda);
    const Scalar r2 =
        r_squared(y_val.template cast<Scalar>(), ridge_predict(fit, X_val));
    fit.r2_val = r2;
    if (!best) {
      best = std::move(fit);
      continue;
    }
    const Scalar diff = r2 - *best->r2_val;
    if (diff > kTieTolerance ||
        (std::abs(diff) <= kTieTolerance && lambda > best->lambda))
      best = std::move(fit);
  }
  best->r2_train = r_squared(y_train.template cast<Scalar>(),
                             ridge_predict(*best, X_train));
  return *best;
}

/// 13 log-spaced values from 1e-4 to 1e8.
inline std::vector<double> default_lambda_grid() {
  std::vector<double> grid;
  for (int e = -4; e <= 8; ++e)
    grid.push_back(std::pow(10.0, e));
  return grid;
}

} // namespace confsteer
