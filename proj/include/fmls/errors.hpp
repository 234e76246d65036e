#pragma once

#include <stdexcept>
#include <string>

namespace fmls {

/// Input outside the mathematical domain of an operation.
class DomainError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

/// A quadrature or truncation could not reach the requested accuracy.
class NumericalAccuracyError : public std::runtime_error {
public:
    NumericalAccuracyError(const std::string& what, double achieved)
        : std::runtime_error(what), achieved_(achieved) {}

    double achieved() const noexcept { return achieved_; }

private:
    double achieved_;
};

/// Invalid configuration (grid window, run config, normalization).
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A caller-supplied contract function cannot be evaluated where needed.
class ContractError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Iterative refinement hit its cap before meeting the tolerance.
class ConvergenceError : public std::runtime_error {
public:
    ConvergenceError(const std::string& what, double last_increment)
        : std::runtime_error(what), last_increment_(last_increment) {}

    double last_increment() const noexcept { return last_increment_; }

private:
    double last_increment_;
};

}  // namespace fmls
