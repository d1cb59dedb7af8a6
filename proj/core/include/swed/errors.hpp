#pragma once

#include <stdexcept>
#include <string>

namespace swed {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Operand shapes are incompatible with the requested operation.
class DimensionMismatch : public Error {
public:
    using Error::Error;
};

/// A column/neuron index lies outside the addressed matrix.
class IndexOutOfRange : public Error {
public:
    using Error::Error;
};

/// Cholesky pivot fell below the positive-definiteness threshold.
class NotPositiveDefinite : public Error {
public:
    using Error::Error;
};

/// An iterative kernel exhausted its sweep budget.
class ConvergenceFailure : public Error {
public:
    using Error::Error;
};

/// Activation differences carry no spread; z-scores are undefined.
class DegenerateLayer : public Error {
public:
    using Error::Error;
};

/// A configuration value or input document violates its contract.
class InvalidArgument : public Error {
public:
    using Error::Error;
};

/// File could not be read, written, or parsed.
class IoError : public Error {
public:
    using Error::Error;
};

} // namespace swed
