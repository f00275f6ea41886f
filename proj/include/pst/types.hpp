#pragma once

// Shared numeric aliases and the error hierarchy used across the simulator.

#include <complex>
#include <numbers>
#include <stdexcept>
#include <string>

namespace pst {

using Complex = std::complex<double>;

inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed case document (syntax or schema).
class ParseError : public Error {
public:
    using Error::Error;
};

/// Well-formed input that violates a model invariant.
class ValidationError : public Error {
public:
    using Error::Error;
};

/// Numerical model failure inside a device or branch evaluation.
class ModelError : public Error {
public:
    using Error::Error;
};

/// Power flow, back-solve or equilibrium search failed.
class InitializationError : public Error {
public:
    using Error::Error;
};

/// Time integration failed (step-size floor, post-event re-solve).
class IntegrationError : public Error {
public:
    using Error::Error;
};

/// Linear-algebra failure (singular algebraic Jacobian, eigen-solver).
class LinearAlgebraError : public Error {
public:
    using Error::Error;
};

}  // namespace pst
