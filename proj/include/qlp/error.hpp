#pragma once

#include <stdexcept>
#include <string>

namespace qlp {

/// Rejected precondition or malformed input.
class InvalidArgument : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// A numerical procedure failed to reach its contract (Krylov stall, Newton
/// stall, blow-up).
class SolverError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Krylov iteration that hit its cap; carries the last relative residual.
class KrylovError : public SolverError {
public:
    KrylovError(const std::string& msg, double residual) : SolverError(msg), residual_(residual) {}
    double residual() const { return residual_; }

private:
    double residual_;
};

}  // namespace qlp
