#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace decoh {

/// Base of every error thrown by the toolkit.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Argument outside the mathematical domain of an operation.
class DomainError : public Error {
public:
    using Error::Error;
};

/// Configuration that parses but violates a constraint.
class ValidationError : public Error {
public:
    using Error::Error;
};

/// Numerical breakdown: singular couplings, failed fits, purity loss.
class NumericalError : public Error {
public:
    using Error::Error;
};

class ParseError : public Error {
public:
    ParseError(std::size_t line, const std::string& what)
        : Error("line " + std::to_string(line) + ": " + what), line_(line) {}

    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

} // namespace decoh
