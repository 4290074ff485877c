#pragma once

#include <stdexcept>
#include <string>

namespace ropo {

/// Shapes or settings that do not fit together (policy vs kernel, bad layout, ...).
class ConfigError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Numerical argument outside the domain of an operation (negative radius, zero
/// probability where strict positivity is required, ...).
class DomainError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

/// Requested combination is not implemented, e.g. greedy robust value iteration
/// on an s-rectangular set.
class UnsupportedError : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

/// Malformed structured-text input. Carries the 1-based line when known.
class ParseError : public std::runtime_error {
public:
    ParseError(const std::string& what, std::size_t line = 0)
        : std::runtime_error(line ? "line " + std::to_string(line) + ": " + what : what),
          line_(line) {}
    std::size_t line() const { return line_; }

private:
    std::size_t line_;
};

} // namespace ropo
