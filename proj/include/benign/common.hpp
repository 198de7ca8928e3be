#pragma once

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace benign {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;
using Rng = std::mt19937_64;

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Matrix or vector dimensions do not compose.
class ShapeError : public Error {
public:
    using Error::Error;
};

/// An argument lies outside the documented domain (negative scale, index out
/// of range, eps outside (0,1), ...).
class DomainError : public Error {
public:
    using Error::Error;
};

/// XX^T is singular or too ill-conditioned to factor.
class SingularError : public Error {
public:
    using Error::Error;
};

/// Malformed JSON/CSV input or unreadable/unwritable paths.
class IoError : public Error {
public:
    using Error::Error;
};

/// Deterministic child seed from a master seed and a path of indices.
/// Used to give every (grid point, run) its own independent stream.
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t a, std::uint64_t b = 0);

inline void require_shape(bool ok, const std::string& what) {
    if (!ok) throw ShapeError(what);
}

}  // namespace benign
