#ifndef VDSH_ERRORS_HPP
#define VDSH_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace vdsh {

/// Base class for all errors thrown by this library.
struct Error : std::runtime_error {
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

/// Shape or size mismatch between operands, or an invalid configuration.
struct DimensionError : Error {
    explicit DimensionError(const std::string& msg) : Error(msg) {}
};

/// Numerical failure: non-finite values, failed factorization, singular system.
struct NumericError : Error {
    explicit NumericError(const std::string& msg) : Error(msg) {}
};

/// File could not be opened, read, or written.
struct IoError : Error {
    explicit IoError(const std::string& msg) : Error(msg) {}
};

/// File exists but its contents violate the expected format.
struct FormatError : IoError {
    explicit FormatError(const std::string& msg) : IoError(msg) {}
};

struct BadMagicError : FormatError {
    explicit BadMagicError(const std::string& msg) : FormatError(msg) {}
};

struct BadVersionError : FormatError {
    explicit BadVersionError(const std::string& msg) : FormatError(msg) {}
};

struct TruncatedFileError : FormatError {
    explicit TruncatedFileError(const std::string& msg) : FormatError(msg) {}
};

/// Recorded dimensions are internally inconsistent or disagree with payload.
struct ShapeError : FormatError {
    explicit ShapeError(const std::string& msg) : FormatError(msg) {}
};

/// Malformed text input (CSV and friends); message names the offending line.
struct ParseError : FormatError {
    explicit ParseError(const std::string& msg) : FormatError(msg) {}
};

}  // namespace vdsh

#endif  // VDSH_ERRORS_HPP
