#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace metree {

/// Base class for every error raised by the library. `kind()` is a short
/// machine-readable tag used by the CLI when it emits JSON error objects.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
    virtual const char* kind() const noexcept { return "error"; }
};

class GraphError : public Error {
public:
    using Error::Error;
    const char* kind() const noexcept override { return "graph"; }
};

class ParseError : public Error {
public:
    ParseError(const std::string& what, std::size_t position)
        : Error(what + " at position " + std::to_string(position)), position_(position) {}
    const char* kind() const noexcept override { return "parse"; }
    std::size_t position() const noexcept { return position_; }

private:
    std::size_t position_;
};

/// Evaluation outside the domain of an expression (log of a nonpositive
/// number, division by zero, ...) or a coefficient that violates its
/// constraints (sigma not bounded away from zero).
class DomainError : public Error {
public:
    using Error::Error;
    const char* kind() const noexcept override { return "domain"; }
};

class NumericalError : public Error {
public:
    using Error::Error;
    const char* kind() const noexcept override { return "numerical"; }
};

class ConfigError : public Error {
public:
    using Error::Error;
    const char* kind() const noexcept override { return "config"; }
};

/// A method was requested on a model it cannot handle (reversible formula
/// on a non-reversible model, ring closed form on a non-ring graph, ...).
class InapplicableError : public Error {
public:
    using Error::Error;
    const char* kind() const noexcept override { return "inapplicable"; }
};

}  // namespace metree
