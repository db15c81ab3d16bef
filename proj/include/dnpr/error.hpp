#pragma once

#include <stdexcept>
#include <string>

namespace dnpr {

/// Invalid user-supplied parameters (non-positive sizes, out-of-range values,
/// malformed specs or files).
class ValidationError : public std::runtime_error {
public:
    explicit ValidationError(const std::string& what) : std::runtime_error(what) {}
};

/// A per-machine message would exceed its bit budget, or the budget is too
/// small to transmit even one quantized value.
class BudgetError : public std::runtime_error {
public:
    explicit BudgetError(const std::string& what) : std::runtime_error(what) {}
};

/// Numerical solver failed to converge within its iteration cap.
class SolverError : public std::runtime_error {
public:
    SolverError(const std::string& what, double residual)
        : std::runtime_error(what), residual_(residual) {}
    double residual() const noexcept { return residual_; }

private:
    double residual_;
};

/// Rejection sampling exhausted its retry cap.
class SamplingError : public std::runtime_error {
public:
    explicit SamplingError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace dnpr
