#pragma once

#include <stdexcept>
#include <string>

namespace aforge {

/// Base class for all errors raised by this library.
struct Error : std::runtime_error {
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

/// Tensor rank/extent disagreement. Messages name both shapes.
struct ShapeError : Error {
    using Error::Error;
};

/// Invalid argument value (non-finite input, empty string, bad range, ...).
struct ValueError : Error {
    using Error::Error;
};

/// Iterative solver failed to reach its tolerance.
struct ConvergenceError : Error {
    ConvergenceError(const std::string& msg, double residual)
        : Error(msg), final_residual(residual) {}
    double final_residual;
};

/// Training produced a non-finite loss.
struct DivergenceError : Error {
    DivergenceError(const std::string& msg, long step)
        : Error(msg), step(step) {}
    long step;
};

/// File-format or schema violation in an on-disk artifact.
struct SchemaError : Error {
    using Error::Error;
};

/// Filesystem-level failure.
struct IoError : Error {
    using Error::Error;
};

/// Metric is undefined for the given input (e.g. single-class AUROC).
struct MetricError : Error {
    using Error::Error;
};

}  // namespace aforge
