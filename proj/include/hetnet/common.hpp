#pragma once

#include <cmath>
#include <complex>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace hetnet {

using cdouble = std::complex<double>;
using Eigen::MatrixXcd;
using Eigen::MatrixXd;
using Eigen::VectorXcd;
using Eigen::VectorXd;

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Array shapes do not agree with the network topology.
class DimensionMismatch : public Error {
 public:
  using Error::Error;
};

/// A solver or experiment configuration violates its invariants.
class ConfigInvalid : public Error {
 public:
  using Error::Error;
};

/// A problem-data value is out of its admissible range.
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

inline double db_to_linear(double db) { return std::pow(10.0, db / 10.0); }

}  // namespace hetnet
