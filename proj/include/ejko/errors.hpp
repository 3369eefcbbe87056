#pragma once

#include <stdexcept>
#include <string>

namespace ejko {

/// Invalid construction parameters or configuration values.
class ConfigError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// A density value left the open domain of the internal energy.
class DomainError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

/// Two objects that must live on the same grid do not.
class GridMismatch : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// An iterative solver stopped before reaching its tolerance, or failed outright.
class SolverError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class ConvergenceError : public SolverError {
public:
    ConvergenceError(const std::string& what, int iterations, double residual)
        : SolverError(what), iterations_(iterations), residual_(residual) {}

    int iterations() const noexcept { return iterations_; }
    double residual() const noexcept { return residual_; }

private:
    int iterations_;
    double residual_;
};

}  // namespace ejko
