// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <string>

namespace tpflow {

/// Latent state dimension of the desk-scale models.
inline constexpr int kStateDim = 2;

template <class Scalar>
using Point = Eigen::Matrix<Scalar, kStateDim, 1>;

template <class Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

template <class Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

using Point2 = Point<double>;
using VectorXd = Vector<double>;

/// Bad configuration: wrong dimensions, unknown keys, out-of-range settings.
class ConfigError : public std::invalid_argument {
 public:
  explicit ConfigError(const std::string& what) : std::invalid_argument(what) {}
  ConfigError(std::string key, const std::string& what)
      : std::invalid_argument(key + ": " + what), key_(std::move(key)) {}

  /// Offending configuration key, empty when the error is not key-specific.
  const std::string& key() const noexcept { return key_; }

 private:
  std::string key_;
};

/// A computation produced a non-finite value.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A caller broke an operation's precondition.
class ContractError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

}  // namespace tpflow
