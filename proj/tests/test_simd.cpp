#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "doctest.h"
#include "ropaws/simd.hpp"

// The scalar kernels are validated against naive loops written here; the
// AVX2 kernels are then validated against the scalar ones (FMA may change
// the last few bits, hence a small relative tolerance).

namespace {

using ropaws::simd::Kernels;

std::vector<double> random_vec(std::size_t n, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> uni(-2.0, 2.0);
    std::vector<double> v(n);
    for (double& x : v) x = uni(rng);
    return v;
}

void check_kernels(const Kernels& k, double tol) {
    std::mt19937_64 rng(1234);
    for (const std::size_t n : {1u, 2u, 3u, 4u, 5u, 7u, 8u, 9u, 15u, 16u, 17u, 100u, 257u}) {
        const auto a = random_vec(n, rng);
        const auto b = random_vec(n, rng);

        double dot = 0.0, sum = 0.0, mx = a[0];
        for (std::size_t i = 0; i < n; ++i) {
            dot += a[i] * b[i];
            sum += a[i];
            mx = std::max(mx, a[i]);
        }
        CHECK(k.dot(a.data(), b.data(), n) == doctest::Approx(dot).epsilon(tol));
        CHECK(k.sum(a.data(), n) == doctest::Approx(sum).epsilon(tol));
        CHECK(k.reduce_max(a.data(), n) == mx);

        auto y = b;
        k.axpy(0.37, a.data(), y.data(), n);
        for (std::size_t i = 0; i < n; ++i)
            CHECK(y[i] == doctest::Approx(b[i] + 0.37 * a[i]).epsilon(tol));

        auto s = a;
        k.scale(s.data(), -1.5, n);
        for (std::size_t i = 0; i < n; ++i) CHECK(s[i] == doctest::Approx(-1.5 * a[i]));
    }
    // Zero-length reductions.
    CHECK(k.dot(nullptr, nullptr, 0) == 0.0);
    CHECK(k.sum(nullptr, 0) == 0.0);
}

}  // namespace

TEST_CASE("scalar kernels match naive loops") { check_kernels(ropaws::simd::scalar(), 1e-15); }

TEST_CASE("avx2 kernels match naive loops") {
    const auto* k = ropaws::simd::avx2();
    if (k == nullptr) return;  // not supported on this host
    check_kernels(*k, 1e-12);
}

TEST_CASE("avx2 and scalar agree on long vectors") {
    const auto* v = ropaws::simd::avx2();
    if (v == nullptr) return;
    const auto& s = ropaws::simd::scalar();
    std::mt19937_64 rng(99);
    for (int rep = 0; rep < 20; ++rep) {
        const std::size_t n = 1 + static_cast<std::size_t>(rng() % 1000);
        const auto a = random_vec(n, rng);
        const auto b = random_vec(n, rng);
        CHECK(v->dot(a.data(), b.data(), n) ==
              doctest::Approx(s.dot(a.data(), b.data(), n)).epsilon(1e-12));
        CHECK(v->sum(a.data(), n) == doctest::Approx(s.sum(a.data(), n)).epsilon(1e-12));
        CHECK(v->reduce_max(a.data(), n) == s.reduce_max(a.data(), n));
    }
}

TEST_CASE("active kernel selection and override") {
    using ropaws::simd::active;
    using ropaws::simd::set_active;
    const auto* original = &active();
    set_active(&ropaws::simd::scalar());
    CHECK(std::string(active().name) == std::string(ropaws::simd::scalar().name));
    set_active(nullptr);  // restore default selection
    CHECK(&active() == original);
    if (ropaws::simd::avx2() != nullptr) CHECK(&active() == ropaws::simd::avx2());
}
