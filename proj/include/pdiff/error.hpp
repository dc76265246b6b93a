#pragma once

#include <stdexcept>
#include <string>

namespace pdiff {

// Error categories map 1:1 to process exit codes (see README).
enum class ErrorCategory {
    argument = 2,
    config = 3,
    io = 4,
    format = 5,
    consistency = 6,
    parse = 7,
    schema = 8,
    state = 9,
    shape = 10,
    numeric = 11,
    incomplete = 12,
};

constexpr const char* category_name(ErrorCategory c) {
    switch (c) {
        case ErrorCategory::argument: return "argument";
        case ErrorCategory::config: return "config";
        case ErrorCategory::io: return "io";
        case ErrorCategory::format: return "format";
        case ErrorCategory::consistency: return "consistency";
        case ErrorCategory::parse: return "parse";
        case ErrorCategory::schema: return "schema";
        case ErrorCategory::state: return "state";
        case ErrorCategory::shape: return "shape";
        case ErrorCategory::numeric: return "numeric";
        case ErrorCategory::incomplete: return "incomplete";
    }
    return "unknown";
}

class Error : public std::runtime_error {
public:
    Error(ErrorCategory category, const std::string& message)
        : std::runtime_error(std::string(category_name(category)) + " error: " + message),
          category_(category) {}

    ErrorCategory category() const noexcept { return category_; }
    int exit_code() const noexcept { return static_cast<int>(category_); }

private:
    ErrorCategory category_;
};

[[noreturn]] inline void fail(ErrorCategory category, const std::string& message) {
    throw Error(category, message);
}

}  // namespace pdiff
