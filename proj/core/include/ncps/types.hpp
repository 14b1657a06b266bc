#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <string>

namespace ncps {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Invalid input: malformed parameters, a point outside the Weyl chamber,
/// inconsistent dimensions. `key()` names the offending field when known.
class ValidationError : public Error {
public:
    explicit ValidationError(const std::string& message, std::string key = {})
        : Error(key.empty() ? message : key + ": " + message), message_(message), key_(std::move(key)) {}

    const std::string& key() const noexcept { return key_; }
    /// The description without the key prefix.
    const std::string& message() const noexcept { return message_; }

private:
    std::string message_;
    std::string key_;
};

/// The input is valid but lies outside the structure an operation supports
/// (e.g. a condition checker that is only stated for uniform interactions).
class UnsupportedStructure : public Error {
public:
    using Error::Error;
};

/// An iterative solver failed to reach its tolerance. Never accompanied by a
/// partial result.
class NonConvergence : public Error {
public:
    using Error::Error;
};

/// True iff x is strictly increasing and finite.
bool in_chamber(const Vector& x);

/// Smallest consecutive gap x[i+1]-x[i]; +inf for length < 2.
double min_gap(const Vector& x);

}  // namespace ncps
