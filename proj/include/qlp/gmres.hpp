#pragma once

// Restarted, right-preconditioned GMRES with modified Gram-Schmidt.

#include <functional>
#include <span>
#include <vector>

namespace qlp {

struct GmresOptions {
    double rtol = 1e-10;
    int max_iterations = 500;
    int restart = 60;
};

struct GmresResult {
    int iterations = 0;
    /// ||b - A x|| / ||b||
    double relative_residual = 0.0;
};

using LinearMap = std::function<void(std::span<const double> in, std::span<double> out)>;

/// Solves A x = b starting from the contents of x. `precondition` applies M^{-1}.
/// Throws KrylovError when the cap is reached above rtol.
GmresResult gmres(const LinearMap& apply, const LinearMap& precondition, std::span<const double> b,
                  std::span<double> x, const GmresOptions& options = {});

}  // namespace qlp
