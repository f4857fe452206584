#pragma once

#include <stdexcept>
#include <string>

namespace bevloop {

// Base for all library errors. Callers that violate a documented
// precondition get InvalidArgument; broken files get ParseError with the
// offending line; IO failures get IoError.
struct Error : std::runtime_error {
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

struct InvalidArgument : Error {
    explicit InvalidArgument(const std::string& what) : Error(what) {}
};

struct IoError : Error {
    explicit IoError(const std::string& what) : Error(what) {}
};

struct ParseError : Error {
    ParseError(const std::string& what, long line)
        : Error(what + " (line " + std::to_string(line) + ")"), line(line) {}
    long line = -1;
};

// Internal invariant violation (e.g. a sentinel value escaping its mask).
// Thrown rather than abort() so tests can observe it.
struct AssertionFailure : Error {
    explicit AssertionFailure(const std::string& what) : Error(what) {}
};

#define BEVLOOP_ASSERT(cond, msg)                                  \
    do {                                                           \
        if (!(cond)) throw ::bevloop::AssertionFailure(msg);       \
    } while (0)

}  // namespace bevloop
