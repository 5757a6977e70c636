#include "ropaws/simd.hpp"

// Compiled with -mavx2 -mfma (see CMakeLists). Guarded at runtime by a cpuid
// check so the binary stays runnable on older x86 and non-x86 hosts.

#if defined(__x86_64__) || defined(_M_X64)
#define ROPAWS_HAVE_AVX2_TU 1
#include <immintrin.h>
#else
#define ROPAWS_HAVE_AVX2_TU 0
#endif

namespace ropaws::simd {

#if ROPAWS_HAVE_AVX2_TU

namespace {

inline double hsum(__m256d v) {
    __m128d lo = _mm256_castpd256_pd128(v);
    __m128d hi = _mm256_extractf128_pd(v, 1);
    lo = _mm_add_pd(lo, hi);
    __m128d sh = _mm_unpackhi_pd(lo, lo);
    return _mm_cvtsd_f64(_mm_add_sd(lo, sh));
}

double dot_avx2(const double* a, const double* b, std::size_t n) {
    __m256d acc0 = _mm256_setzero_pd();
    __m256d acc1 = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8) {
        acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
        acc1 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i + 4), _mm256_loadu_pd(b + i + 4), acc1);
    }
    for (; i + 4 <= n; i += 4)
        acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
    double acc = hsum(_mm256_add_pd(acc0, acc1));
    for (; i < n; ++i) acc += a[i] * b[i];
    return acc;
}

double reduce_max_avx2(const double* x, std::size_t n) {
    std::size_t i = 0;
    double m = x[0];
    if (n >= 4) {
        __m256d vm = _mm256_loadu_pd(x);
        for (i = 4; i + 4 <= n; i += 4)
            vm = _mm256_max_pd(vm, _mm256_loadu_pd(x + i));
        __m128d lo = _mm256_castpd256_pd128(vm);
        __m128d hi = _mm256_extractf128_pd(vm, 1);
        lo = _mm_max_pd(lo, hi);
        __m128d sh = _mm_unpackhi_pd(lo, lo);
        m = _mm_cvtsd_f64(_mm_max_sd(lo, sh));
    } else {
        i = 1;
    }
    for (; i < n; ++i)
        if (x[i] > m) m = x[i];
    return m;
}

double sum_avx2(const double* x, std::size_t n) {
    __m256d acc = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) acc = _mm256_add_pd(acc, _mm256_loadu_pd(x + i));
    double s = hsum(acc);
    for (; i < n; ++i) s += x[i];
    return s;
}

void axpy_avx2(double alpha, const double* x, double* y, std::size_t n) {
    __m256d va = _mm256_set1_pd(alpha);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        __m256d vy = _mm256_loadu_pd(y + i);
        vy = _mm256_fmadd_pd(va, _mm256_loadu_pd(x + i), vy);
        _mm256_storeu_pd(y + i, vy);
    }
    for (; i < n; ++i) y[i] += alpha * x[i];
}

void scale_avx2(double* x, double alpha, std::size_t n) {
    __m256d va = _mm256_set1_pd(alpha);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4)
        _mm256_storeu_pd(x + i, _mm256_mul_pd(va, _mm256_loadu_pd(x + i)));
    for (; i < n; ++i) x[i] *= alpha;
}

const Kernels kAvx2 = {
    dot_avx2, reduce_max_avx2, sum_avx2, axpy_avx2, scale_avx2, "avx2",
};

bool cpu_has_avx2() {
#if defined(__GNUC__) || defined(__clang__)
    return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
    return false;
#endif
}

}  // namespace

const Kernels* avx2() {
    static const Kernels* k = cpu_has_avx2() ? &kAvx2 : nullptr;
    return k;
}

#else

const Kernels* avx2() { return nullptr; }

#endif  // ROPAWS_HAVE_AVX2_TU

}  // namespace ropaws::simd
