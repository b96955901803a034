#include "qlp/kernels.hpp"

#if defined(__aarch64__)
#include <arm_neon.h>
#endif

namespace qlp::kernels {

#if defined(__aarch64__)
namespace {

void axpy_neon(double a, const double* x, double* y, std::size_t n) {
    const float64x2_t va = vdupq_n_f64(a);
    std::size_t i = 0;
    for (; i + 2 <= n; i += 2) vst1q_f64(y + i, vfmaq_f64(vld1q_f64(y + i), va, vld1q_f64(x + i)));
    for (; i < n; ++i) y[i] += a * x[i];
}
void fma_neon(const double* a, const double* x, double* y, std::size_t n) {
    std::size_t i = 0;
    for (; i + 2 <= n; i += 2)
        vst1q_f64(y + i, vfmaq_f64(vld1q_f64(y + i), vld1q_f64(a + i), vld1q_f64(x + i)));
    for (; i < n; ++i) y[i] += a[i] * x[i];
}
void mul_neon(const double* a, const double* x, double* y, std::size_t n) {
    std::size_t i = 0;
    for (; i + 2 <= n; i += 2) vst1q_f64(y + i, vmulq_f64(vld1q_f64(a + i), vld1q_f64(x + i)));
    for (; i < n; ++i) y[i] = a[i] * x[i];
}
void add_neon(const double* a, const double* x, double* y, std::size_t n) {
    std::size_t i = 0;
    for (; i + 2 <= n; i += 2) vst1q_f64(y + i, vaddq_f64(vld1q_f64(a + i), vld1q_f64(x + i)));
    for (; i < n; ++i) y[i] = a[i] + x[i];
}
void scale_neon(double a, const double* x, double* y, std::size_t n) {
    std::size_t i = 0;
    for (; i + 2 <= n; i += 2) vst1q_f64(y + i, vmulq_n_f64(vld1q_f64(x + i), a));
    for (; i < n; ++i) y[i] = a * x[i];
}
double dot_neon(const double* x, const double* y, std::size_t n) {
    float64x2_t acc = vdupq_n_f64(0.0);
    std::size_t i = 0;
    for (; i + 2 <= n; i += 2) acc = vfmaq_f64(acc, vld1q_f64(x + i), vld1q_f64(y + i));
    double s = vaddvq_f64(acc);
    for (; i < n; ++i) s += x[i] * y[i];
    return s;
}
void cmul_real_neon(const double* s, std::complex<double>* z, std::size_t n) {
    auto* zd = reinterpret_cast<double*>(z);
    for (std::size_t i = 0; i < n; ++i) vst1q_f64(zd + 2 * i, vmulq_n_f64(vld1q_f64(zd + 2 * i), s[i]));
}

}  // namespace

const KernelTable* neon_table() {
    static const KernelTable table{Isa::Neon, axpy_neon,  fma_neon, mul_neon,
                                   add_neon,  scale_neon, dot_neon, cmul_real_neon};
    return &table;
}

#else

const KernelTable* neon_table() { return nullptr; }

#endif

}  // namespace qlp::kernels
