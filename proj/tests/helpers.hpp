#pragma once

#include <cmath>
#include <random>
#include <vector>

#include "ropaws/kernel_core.hpp"
#include "ropaws/matrix.hpp"

// Shared random-instance builders for the test suites.

namespace testutil {

using ropaws::Matrix;

inline Matrix random_unit_rows(std::size_t n, std::size_t d, std::mt19937_64& rng) {
    std::normal_distribution<double> gauss(0.0, 1.0);
    Matrix m(n, d);
    for (std::size_t i = 0; i < n; ++i) {
        double norm = 0.0;
        for (std::size_t j = 0; j < d; ++j) {
            m(i, j) = gauss(rng);
            norm += m(i, j) * m(i, j);
        }
        norm = std::sqrt(norm);
        for (std::size_t j = 0; j < d; ++j) m(i, j) /= norm;
    }
    return m;
}

inline ropaws::kernel::EmbeddingBatch random_batch(std::size_t n, std::size_t d,
                                                   std::mt19937_64& rng) {
    return ropaws::kernel::EmbeddingBatch::normalized(random_unit_rows(n, d, rng));
}

// Random soft label rows (each summing to 1).
inline ropaws::kernel::LabelMatrix random_soft_labels(std::size_t n, std::size_t c,
                                                      std::mt19937_64& rng) {
    std::uniform_real_distribution<double> uni(0.05, 1.0);
    Matrix rows(n, c);
    for (std::size_t i = 0; i < n; ++i) {
        double sum = 0.0;
        for (std::size_t j = 0; j < c; ++j) {
            rows(i, j) = uni(rng);
            sum += rows(i, j);
        }
        for (std::size_t j = 0; j < c; ++j) rows(i, j) /= sum;
    }
    return ropaws::kernel::LabelMatrix::from_rows(std::move(rows));
}

// One-hot labels cycling through classes (class-balanced when n % c == 0).
inline ropaws::kernel::LabelMatrix cycled_one_hot(std::size_t n, std::size_t c) {
    std::vector<int> classes(n);
    for (std::size_t i = 0; i < n; ++i) classes[i] = static_cast<int>(i % c);
    return ropaws::kernel::LabelMatrix::one_hot(classes, c);
}

inline std::vector<double> random_prior(std::size_t m, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> uni(0.05, 1.0);
    std::vector<double> p(m);
    for (double& v : p) v = uni(rng);
    return p;
}

}  // namespace testutil
