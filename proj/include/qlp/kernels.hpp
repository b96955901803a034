#pragma once

// Array kernels used by the field algebra, the coefficient contractions and
// the Krylov solver. Every kernel has a scalar reference implementation; SIMD
// variants are selected once at startup from the CPU features.

#include <complex>
#include <cstddef>
#include <span>
#include <string_view>

namespace qlp::kernels {

enum class Isa { Scalar, Avx2, Neon };

struct KernelTable {
    Isa isa;
    // y[i] += a * x[i]
    void (*axpy)(double a, const double* x, double* y, std::size_t n);
    // y[i] += a[i] * x[i]
    void (*fma)(const double* a, const double* x, double* y, std::size_t n);
    // y[i] = a[i] * x[i]
    void (*mul)(const double* a, const double* x, double* y, std::size_t n);
    // y[i] = a[i] + x[i]
    void (*add)(const double* a, const double* x, double* y, std::size_t n);
    // y[i] = a * x[i]
    void (*scale)(double a, const double* x, double* y, std::size_t n);
    double (*dot)(const double* x, const double* y, std::size_t n);
    // z[i] *= s[i] for interleaved complex z
    void (*cmul_real)(const double* s, std::complex<double>* z, std::size_t n);
};

const KernelTable& scalar_table();
// nullptr when the build or the CPU lacks the instruction set.
const KernelTable* avx2_table();
const KernelTable* neon_table();

// The active table. Defaults to the best table the CPU supports; the
// environment variable QLP_SIMD=scalar forces the reference path.
const KernelTable& active();
void force(Isa isa);
std::string_view name(Isa isa);

inline void axpy(double a, std::span<const double> x, std::span<double> y) {
    active().axpy(a, x.data(), y.data(), y.size());
}
inline void fma(std::span<const double> a, std::span<const double> x, std::span<double> y) {
    active().fma(a.data(), x.data(), y.data(), y.size());
}
inline void mul(std::span<const double> a, std::span<const double> x, std::span<double> y) {
    active().mul(a.data(), x.data(), y.data(), y.size());
}
inline void add(std::span<const double> a, std::span<const double> x, std::span<double> y) {
    active().add(a.data(), x.data(), y.data(), y.size());
}
inline void scale(double a, std::span<const double> x, std::span<double> y) {
    active().scale(a, x.data(), y.data(), y.size());
}
inline double dot(std::span<const double> x, std::span<const double> y) {
    return active().dot(x.data(), y.data(), x.size());
}
inline void cmul_real(std::span<const double> s, std::span<std::complex<double>> z) {
    active().cmul_real(s.data(), z.data(), z.size());
}

}  // namespace qlp::kernels
