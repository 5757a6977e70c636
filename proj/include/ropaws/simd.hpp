#pragma once

#include <cstddef>

// Data-parallel inner loops used by the dense kernels. A scalar reference
// implementation always exists; an AVX2+FMA variant is selected at runtime
// when the CPU supports it. Both variants are equivalence-tested.

namespace ropaws::simd {

struct Kernels {
    // sum_i a[i]*b[i]
    double (*dot)(const double* a, const double* b, std::size_t n);
    // max_i x[i]; n must be > 0
    double (*reduce_max)(const double* x, std::size_t n);
    // sum_i x[i]
    double (*sum)(const double* x, std::size_t n);
    // y[i] += alpha * x[i]
    void (*axpy)(double alpha, const double* x, double* y, std::size_t n);
    // x[i] *= alpha
    void (*scale)(double* x, double alpha, std::size_t n);
    const char* name;
};

// Scalar reference kernels (always available).
const Kernels& scalar();

// AVX2+FMA kernels, or nullptr when not compiled in / not supported.
const Kernels* avx2();

// Best available variant, chosen once at startup.
const Kernels& active();

// Override the active variant (testing / --no-simd). Pass nullptr to restore
// the default selection.
void set_active(const Kernels* k);

}  // namespace ropaws::simd
