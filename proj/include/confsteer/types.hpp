#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <string>

namespace confsteer {

template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

using MatrixXd = Matrix<double>;
using VectorXd = Vector<double>;

//! Row-major float32 storage, matching the on-disk activation payload.
using ActivationMatrix =
    Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Failure classes map one-to-one onto the CLI exit codes 1/2/3.
class ValidationError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

class IoError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

class NumericalError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

//! Raised when a steering sweep produces no usable confidence gradient.
class FlatTransferError : public NumericalError {
public:
  using NumericalError::NumericalError;
};

} // namespace confsteer
