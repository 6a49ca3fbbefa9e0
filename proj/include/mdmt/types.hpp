#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>

namespace mdmt {

template <typename T>
using Matrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic>;

template <typename T>
using RowVector = Eigen::Matrix<T, 1, Eigen::Dynamic>;

template <typename T>
using Vector = Eigen::Matrix<T, Eigen::Dynamic, 1>;

using Rng = std::mt19937_64;

/// Controls batch-norm statistics and reparameterization noise.
enum class Mode { training, inference };

/// Thrown on any violated precondition or malformed input.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Thrown when an input shape does not match what an operation expects.
class ShapeError : public Error {
public:
    using Error::Error;
};

/// Thrown when a numeric input or result is NaN or infinite.
class NonFiniteError : public Error {
public:
    using Error::Error;
};

inline void require(bool ok, const std::string& message)
{
    if (!ok) throw Error(message);
}

inline void require_shape(bool ok, const std::string& message)
{
    if (!ok) throw ShapeError(message);
}

} // namespace mdmt
