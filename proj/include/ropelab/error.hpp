#pragma once

#include <stdexcept>
#include <string>

namespace ropelab {

// Error categories surfaced to callers. The CLI maps InvalidArgument and the
// numerical kinds to exit code 3 and Io to exit code 4.
enum class ErrorKind {
    InvalidArgument,
    TooFewPoints,
    DegenerateFit,
    NonPositiveContext,
    MissingTag,
    UnbalancedTag,
    EmptyField,
    BudgetTooSmall,
    InstanceTooLong,
    Io,
};

const char* error_kind_name(ErrorKind kind);

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& message)
        : std::runtime_error(message), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }
    const char* name() const noexcept { return error_kind_name(kind_); }

private:
    ErrorKind kind_;
};

// Raised by the QA extractor; `tag()` is "question" or "answer".
class TagError : public Error {
public:
    TagError(ErrorKind kind, std::string tag)
        : Error(kind, std::string(error_kind_name(kind)) + "(" + tag + ")"), tag_(std::move(tag)) {}

    const std::string& tag() const noexcept { return tag_; }

private:
    std::string tag_;
};

[[noreturn]] inline void fail(const std::string& message) {
    throw Error(ErrorKind::InvalidArgument, message);
}

inline void require(bool condition, const std::string& message) {
    if (!condition) {
        fail(message);
    }
}

} // namespace ropelab
