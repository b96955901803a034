#include "qlp/kernels.hpp"

namespace qlp::kernels {
namespace {

void axpy_ref(double a, const double* x, double* y, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) y[i] += a * x[i];
}
void fma_ref(const double* a, const double* x, double* y, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) y[i] += a[i] * x[i];
}
void mul_ref(const double* a, const double* x, double* y, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) y[i] = a[i] * x[i];
}
void add_ref(const double* a, const double* x, double* y, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) y[i] = a[i] + x[i];
}
void scale_ref(double a, const double* x, double* y, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) y[i] = a * x[i];
}
double dot_ref(const double* x, const double* y, std::size_t n) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += x[i] * y[i];
    return s;
}
void cmul_real_ref(const double* s, std::complex<double>* z, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) z[i] *= s[i];
}

}  // namespace

const KernelTable& scalar_table() {
    static const KernelTable table{Isa::Scalar, axpy_ref,  fma_ref, mul_ref,
                                   add_ref,     scale_ref, dot_ref, cmul_real_ref};
    return table;
}

}  // namespace qlp::kernels
