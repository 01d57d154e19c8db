#pragma once

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace able {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Feature vectors live in standardized feature space.
using FeatureVector = Vector;

/// Class index in {0..C-1}.
using ClassId = int;

/// Base class for all errors raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A caller violated a documented precondition.
class PreconditionError : public Error {
 public:
  using Error::Error;
};

/// Malformed or unreadable input data (CSV, model files, configs).
class DataError : public Error {
 public:
  using Error::Error;
};

}  // namespace able
