#pragma once
#include <stdexcept>
#include <string>

namespace flcleaner {

/// Base class for all library errors.
struct Error : std::runtime_error {
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

/// Malformed or inconsistent experiment configuration (CLI exit code 2).
struct ConfigError : Error {
    explicit ConfigError(const std::string& msg) : Error("config: " + msg) {}
};

/// Layer shapes do not compose, or a batch does not match the model input.
struct ShapeError : Error {
    explicit ShapeError(const std::string& msg) : Error("shape: " + msg) {}
};

/// IDX file problems, with a distinct kind per failure mode.
struct IdxError : Error {
    enum class Kind { BadMagic, Truncated, CountMismatch, Io };
    Kind kind;
    IdxError(Kind k, const std::string& msg) : Error("idx: " + msg), kind(k) {}
};

/// Non-finite loss or other numeric breakdown during training.
struct NumericError : Error {
    explicit NumericError(const std::string& msg) : Error("numeric: " + msg) {}
};

/// Problems raised while building client partitions.
struct PartitionError : Error {
    explicit PartitionError(const std::string& msg) : Error("partition: " + msg) {}
};

} // namespace flcleaner
