#pragma once

#include <stdexcept>
#include <string>

namespace mov {

enum class ErrorKind {
    config,
    shape,
    numeric,
    data,
    pairing,
    format,
};

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}

    [[nodiscard]] ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

/// Invalid configuration or precondition on user-facing parameters.
struct ConfigError : Error {
    explicit ConfigError(const std::string& what) : Error(ErrorKind::config, what) {}
};

/// Dimension mismatch between parameters and inputs.
struct ShapeError : Error {
    explicit ShapeError(const std::string& what) : Error(ErrorKind::shape, what) {}
};

/// NaN/Inf encountered, or a degenerate probability.
struct NumericError : Error {
    explicit NumericError(const std::string& what) : Error(ErrorKind::numeric, what) {}
};

/// Malformed or invalid input data (CSV ingestion, empty sets).
struct DataError : Error {
    explicit DataError(const std::string& what) : Error(ErrorKind::data, what) {}
};

/// Two prediction sets that should cover the same samples do not.
struct PairingError : Error {
    explicit PairingError(const std::string& what) : Error(ErrorKind::pairing, what) {}
};

/// Checkpoint file is unreadable, of the wrong version, or does not match the schema.
struct FormatError : Error {
    explicit FormatError(const std::string& what) : Error(ErrorKind::format, what) {}
};

} // namespace mov
