#pragma once

#include "confsteer/types.hpp"

#include <Eigen/SVD>

namespace confsteer {

/// Principal axes of a centered data matrix. `components` holds one unit
/// axis per row, ordered by decreasing variance.
template <typename Scalar = double> struct PcaModel {
  Vector<Scalar> mean;
  Matrix<Scalar> components;
  Vector<Scalar> variance_ratio;

  template <typename Derived>
  Matrix<Scalar> project(const Eigen::MatrixBase<Derived> &X) const {
    if (X.cols() != mean.size())
      throw ValidationError("pca project: expected " +
                            std::to_string(mean.size()) + " columns, got " +
                            std::to_string(X.cols()));
    return (X.template cast<Scalar>().rowwise() - mean.transpose()) *
           components.transpose();
  }

  Eigen::Index dim() const { return components.rows(); }
};

template <typename Derived>
PcaModel<typename Derived::Scalar> pca_fit(const Eigen::MatrixBase<Derived> &X,
                                           Eigen::Index k) {
  using Scalar = typename Derived::Scalar;
  const Eigen::Index n = X.rows();
  const Eigen::Index d = X.cols();
  if (k < 1 || k > std::min(n, d))
    throw ValidationError("pca: k=" + std::to_string(k) +
                          " must lie in [1, min(N, d)=" +
                          std::to_string(std::min(n, d)) + "]");
  PcaModel<Scalar> model;
  model.mean = X.colwise().mean().transpose();
  const Matrix<Scalar> xc = X.rowwise() - model.mean.transpose();

  Eigen::BDCSVD<Matrix<Scalar>> svd(xc, Eigen::ComputeThinV);
  const Vector<Scalar> sv = svd.singularValues();
  model.components = svd.matrixV().leftCols(k).transpose();
  // Deterministic sign: the largest-magnitude loading of each axis is positive.
  for (Eigen::Index i = 0; i < k; ++i) {
    Eigen::Index arg = 0;
    model.components.row(i).cwiseAbs().maxCoeff(&arg);
    if (model.components(i, arg) < 0)
      model.components.row(i) *= Scalar(-1);
  }
  const Scalar total = sv.squaredNorm();
  model.variance_ratio = Vector<Scalar>::Zero(k);
  if (total > 0)
    model.variance_ratio = sv.head(k).array().square() / total;
  return model;
}

template <typename Scalar = double> struct PcaProjection {
  Matrix<Scalar> components;
  Matrix<Scalar> projected;
  Vector<Scalar> variance_ratio;
};

template <typename Derived>
PcaProjection<typename Derived::Scalar>
pca_fit_project(const Eigen::MatrixBase<Derived> &X, Eigen::Index k) {
  auto model = pca_fit(X, k);
  return {model.components, model.project(X), model.variance_ratio};
}

} // namespace confsteer
