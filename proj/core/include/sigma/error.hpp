#pragma once

#include <stdexcept>
#include <string>

namespace sigma {

enum class ErrorKind {
    MissingRole,
    InvalidBudget,
    InvalidDecoding,
    DimensionMismatch,
    ZeroVector,
    BackendError,
    NoAnswer,
    AllAgentsFailed,
    ParseError,
    DuplicateId,
    EmptyDataset,
    IoError,
};

const char* to_string(ErrorKind kind);

/// Single exception type for the whole library; the kind makes failures
/// testable without a class per error.
class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& message)
        : std::runtime_error(std::string(to_string(kind)) + ": " + message), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

} // namespace sigma
