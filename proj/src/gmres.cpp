#include "qlp/gmres.hpp"

#include <cmath>
#include <string>

#include "qlp/error.hpp"
#include "qlp/kernels.hpp"

namespace qlp {

namespace {

double norm2(std::span<const double> v) { return std::sqrt(kernels::dot(v, v)); }

}  // namespace

GmresResult gmres(const LinearMap& apply, const LinearMap& precondition, std::span<const double> b,
                  std::span<double> x, const GmresOptions& options) {
    const std::size_t n = b.size();
    const double bnorm = norm2(b);
    GmresResult result;
    if (bnorm == 0.0) {
        std::fill(x.begin(), x.end(), 0.0);
        return result;
    }
    const int m = options.restart;
    std::vector<double> r(n), w(n), z(n);
    std::vector<std::vector<double>> V(static_cast<std::size_t>(m + 1), std::vector<double>(n));
    std::vector<std::vector<double>> H(static_cast<std::size_t>(m + 1), std::vector<double>(static_cast<std::size_t>(m), 0.0));
    std::vector<double> cs(static_cast<std::size_t>(m)), sn(static_cast<std::size_t>(m)), g(static_cast<std::size_t>(m + 1));

    auto residual = [&] {
        apply(x, r);
        for (std::size_t i = 0; i < n; ++i) r[i] = b[i] - r[i];
        return norm2(r);
    };

    double rel = residual() / bnorm;
    while (true) {
        if (rel <= options.rtol) break;
        if (result.iterations >= options.max_iterations) {
            throw KrylovError("gmres: no convergence after " + std::to_string(result.iterations) +
                                  " iterations (relative residual " + std::to_string(rel) + ")",
                              rel);
        }
        const double beta = rel * bnorm;
        kernels::scale(1.0 / beta, r, V[0]);
        std::fill(g.begin(), g.end(), 0.0);
        g[0] = beta;
        int k = 0;
        for (; k < m && result.iterations < options.max_iterations; ++k) {
            const auto kk = static_cast<std::size_t>(k);
            precondition(V[kk], z);
            apply(z, w);
            for (int j = 0; j <= k; ++j) {
                const auto jj = static_cast<std::size_t>(j);
                H[jj][kk] = kernels::dot(w, V[jj]);
                kernels::axpy(-H[jj][kk], V[jj], w);
            }
            const double h = norm2(w);
            H[kk + 1][kk] = h;
            if (h > 0.0) kernels::scale(1.0 / h, w, V[kk + 1]);
            for (int j = 0; j < k; ++j) {
                const auto jj = static_cast<std::size_t>(j);
                const double a = H[jj][kk], c = H[jj + 1][kk];
                H[jj][kk] = cs[jj] * a + sn[jj] * c;
                H[jj + 1][kk] = -sn[jj] * a + cs[jj] * c;
            }
            const double a = H[kk][kk], c = H[kk + 1][kk];
            const double d = std::hypot(a, c);
            cs[kk] = d == 0.0 ? 1.0 : a / d;
            sn[kk] = d == 0.0 ? 0.0 : c / d;
            H[kk][kk] = d;
            H[kk + 1][kk] = 0.0;
            g[kk + 1] = -sn[kk] * g[kk];
            g[kk] = cs[kk] * g[kk];
            ++result.iterations;
            if (std::abs(g[kk + 1]) / bnorm <= options.rtol || h == 0.0) {
                ++k;
                break;
            }
        }
        // Back substitution on the k x k triangle, then x += M^{-1} V y.
        std::vector<double> y(static_cast<std::size_t>(k));
        for (int i = k - 1; i >= 0; --i) {
            const auto ii = static_cast<std::size_t>(i);
            double s = g[ii];
            for (int j = i + 1; j < k; ++j) s -= H[ii][static_cast<std::size_t>(j)] * y[static_cast<std::size_t>(j)];
            y[ii] = s / H[ii][ii];
        }
        std::fill(w.begin(), w.end(), 0.0);
        for (int j = 0; j < k; ++j) kernels::axpy(y[static_cast<std::size_t>(j)], V[static_cast<std::size_t>(j)], w);
        precondition(w, z);
        for (std::size_t i = 0; i < n; ++i) x[i] += z[i];
        rel = residual() / bnorm;
    }
    result.relative_residual = rel;
    return result;
}

}  // namespace qlp
