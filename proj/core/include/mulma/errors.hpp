#pragma once

#include <stdexcept>
#include <string>

namespace mulma {

/// Root of every error thrown by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed configuration, bad argument or shape mismatch supplied by a caller.
class ConfigError : public Error {
public:
    using Error::Error;
};

/// Matrix or vector dimensions that cannot be combined.
class DimensionError : public ConfigError {
public:
    using ConfigError::ConfigError;
};

/// A system dimension constraint (antenna / bit counts) is violated.
class InfeasibleError : public Error {
public:
    using Error::Error;
};

/// Numerical breakdown: non-convergence, degenerate signal, non-finite values.
class NumericalError : public Error {
public:
    using Error::Error;
};

/// Training produced a non-finite loss or gradient.
class TrainingError : public NumericalError {
public:
    TrainingError(const std::string& what, int epoch)
        : NumericalError(what + " (epoch " + std::to_string(epoch) + ")"), epoch_(epoch) {}

    int epoch() const noexcept { return epoch_; }

private:
    int epoch_;
};

}  // namespace mulma
