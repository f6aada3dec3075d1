#pragma once

#include <stdexcept>
#include <string>

namespace dsr {

// Base class for all library errors.
struct Error : std::runtime_error {
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Bad magic, wrong version, malformed header.
struct FormatError : Error {
    using Error::Error;
};

// Declared sizes do not match the bytes actually present.
struct CorruptionError : FormatError {
    using FormatError::FormatError;
};

// Non-finite payloads, violated invariants, insufficient data.
struct ValidationError : Error {
    using Error::Error;
};

// Dimension / shape mismatch between operands.
struct ShapeError : ValidationError {
    using ValidationError::ValidationError;
};

// Out-of-range parameter (alpha, rho, divisibility, ...).
struct ParamError : ValidationError {
    using ValidationError::ValidationError;
};

// Post-processing applied to a multi-stream token sequence.
struct AlignmentError : ValidationError {
    using ValidationError::ValidationError;
};

struct IoError : Error {
    using Error::Error;
};

} // namespace dsr
