#include "ropaws/simd.hpp"

namespace ropaws::simd {

namespace {

double dot_scalar(const double* a, const double* b, std::size_t n) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) acc += a[i] * b[i];
    return acc;
}

double reduce_max_scalar(const double* x, std::size_t n) {
    double m = x[0];
    for (std::size_t i = 1; i < n; ++i)
        if (x[i] > m) m = x[i];
    return m;
}

double sum_scalar(const double* x, std::size_t n) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) acc += x[i];
    return acc;
}

void axpy_scalar(double alpha, const double* x, double* y, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

void scale_scalar(double* x, double alpha, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) x[i] *= alpha;
}

const Kernels kScalar = {
    dot_scalar, reduce_max_scalar, sum_scalar, axpy_scalar, scale_scalar, "scalar",
};

const Kernels* g_override = nullptr;

}  // namespace

const Kernels& scalar() { return kScalar; }

const Kernels& active() {
    if (g_override) return *g_override;
    static const Kernels* best = avx2() ? avx2() : &kScalar;
    return *best;
}

void set_active(const Kernels* k) { g_override = k; }

}  // namespace ropaws::simd
