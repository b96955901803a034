#include "qlp/kernels.hpp"

#if defined(__x86_64__) || defined(_M_X64)
#include <immintrin.h>
#define QLP_HAVE_AVX2_BUILD 1
#endif

namespace qlp::kernels {

#ifdef QLP_HAVE_AVX2_BUILD
namespace {

#define QLP_AVX2 __attribute__((target("avx2,fma")))

QLP_AVX2 void axpy_avx2(double a, const double* x, double* y, std::size_t n) {
    const __m256d va = _mm256_set1_pd(a);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        __m256d vy = _mm256_loadu_pd(y + i);
        vy = _mm256_fmadd_pd(va, _mm256_loadu_pd(x + i), vy);
        _mm256_storeu_pd(y + i, vy);
    }
    for (; i < n; ++i) y[i] += a * x[i];
}

QLP_AVX2 void fma_avx2(const double* a, const double* x, double* y, std::size_t n) {
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        __m256d vy = _mm256_loadu_pd(y + i);
        vy = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(x + i), vy);
        _mm256_storeu_pd(y + i, vy);
    }
    for (; i < n; ++i) y[i] += a[i] * x[i];
}

QLP_AVX2 void mul_avx2(const double* a, const double* x, double* y, std::size_t n) {
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4)
        _mm256_storeu_pd(y + i, _mm256_mul_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(x + i)));
    for (; i < n; ++i) y[i] = a[i] * x[i];
}

QLP_AVX2 void add_avx2(const double* a, const double* x, double* y, std::size_t n) {
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4)
        _mm256_storeu_pd(y + i, _mm256_add_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(x + i)));
    for (; i < n; ++i) y[i] = a[i] + x[i];
}

QLP_AVX2 void scale_avx2(double a, const double* x, double* y, std::size_t n) {
    const __m256d va = _mm256_set1_pd(a);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) _mm256_storeu_pd(y + i, _mm256_mul_pd(va, _mm256_loadu_pd(x + i)));
    for (; i < n; ++i) y[i] = a * x[i];
}

QLP_AVX2 double dot_avx2(const double* x, const double* y, std::size_t n) {
    __m256d acc0 = _mm256_setzero_pd();
    __m256d acc1 = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8) {
        acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i), acc0);
        acc1 = _mm256_fmadd_pd(_mm256_loadu_pd(x + i + 4), _mm256_loadu_pd(y + i + 4), acc1);
    }
    for (; i + 4 <= n; i += 4)
        acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i), acc0);
    acc0 = _mm256_add_pd(acc0, acc1);
    alignas(32) double lanes[4];
    _mm256_store_pd(lanes, acc0);
    double s = (lanes[0] + lanes[1]) + (lanes[2] + lanes[3]);
    for (; i < n; ++i) s += x[i] * y[i];
    return s;
}

// z holds (re, im) pairs; each symbol entry scales one pair.
QLP_AVX2 void cmul_real_avx2(const double* s, std::complex<double>* z, std::size_t n) {
    auto* zd = reinterpret_cast<double*>(z);
    std::size_t i = 0;
    for (; i + 2 <= n; i += 2) {
        // [s0 s0 s1 s1]
        const __m128d pair = _mm_loadu_pd(s + i);
        const __m256d sv = _mm256_permute4x64_pd(_mm256_castpd128_pd256(pair), 0b01010000);
        _mm256_storeu_pd(zd + 2 * i, _mm256_mul_pd(sv, _mm256_loadu_pd(zd + 2 * i)));
    }
    for (; i < n; ++i) z[i] *= s[i];
}

#undef QLP_AVX2

}  // namespace

const KernelTable* avx2_table() {
    static const bool supported = [] {
        __builtin_cpu_init();
        return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
    }();
    static const KernelTable table{Isa::Avx2, axpy_avx2,  fma_avx2, mul_avx2,
                                   add_avx2,  scale_avx2, dot_avx2, cmul_real_avx2};
    return supported ? &table : nullptr;
}

#else

const KernelTable* avx2_table() { return nullptr; }

#endif

}  // namespace qlp::kernels
