#pragma once

#include <stdexcept>
#include <string>

namespace zonerl {

/// Non-finite drift or state produced while stepping a process.
class DynamicsError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Argument outside the admissible set (negative impulse, unknown level, ...).
class DomainError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// A model that violates its construction invariants (row sums, sizes).
class ModelError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// The look-ahead model failed to produce successor states.
class ShieldError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Iterative solver hit its iteration cap; `residual` is the last sup-norm change.
class ConvergenceError : public std::runtime_error {
public:
    ConvergenceError(const std::string& what, double residual)
        : std::runtime_error(what), residual_(residual) {}
    double residual() const { return residual_; }

private:
    double residual_;
};

class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

} // namespace zonerl
