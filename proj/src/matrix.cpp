#include "ropaws/matrix.hpp"

#include <cmath>
#include <cstddef>
#include <numeric>
#include <utility>

#include "ropaws/errors.hpp"
#include "ropaws/simd.hpp"

namespace ropaws {

Matrix matmul(const Matrix& a, const Matrix& b) {
    if (a.cols() != b.rows())
        throw ValidationError("matmul: inner dimensions disagree");
    Matrix c(a.rows(), b.cols());
    const auto& k = simd::active();
    // i-k-j order so the inner loop is an axpy over a row of b.
    for (std::size_t i = 0; i < a.rows(); ++i) {
        double* ci = c.row(i);
        for (std::size_t kk = 0; kk < a.cols(); ++kk) {
            const double aik = a(i, kk);
            if (aik != 0.0) k.axpy(aik, b.row(kk), ci, b.cols());
        }
    }
    return c;
}

Matrix solve_dense(Matrix a, Matrix b) {
    const std::size_t n = a.rows();
    if (a.cols() != n) throw ValidationError("solve_dense: matrix not square");
    if (b.rows() != n) throw ValidationError("solve_dense: rhs row count mismatch");
    if (n == 0) return b;

    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), std::size_t{0});

    for (std::size_t col = 0; col < n; ++col) {
        std::size_t pivot = col;
        double best = std::fabs(a(col, col));
        for (std::size_t r = col + 1; r < n; ++r) {
            const double v = std::fabs(a(r, col));
            if (v > best) {
                best = v;
                pivot = r;
            }
        }
        if (!(best > 0.0) || !std::isfinite(best))
            throw NumericalError("solve_dense: singular pivot at column " + std::to_string(col));
        if (pivot != col) {
            for (std::size_t j = 0; j < n; ++j) std::swap(a(col, j), a(pivot, j));
            for (std::size_t j = 0; j < b.cols(); ++j) std::swap(b(col, j), b(pivot, j));
        }
        const double inv = 1.0 / a(col, col);
        for (std::size_t r = col + 1; r < n; ++r) {
            const double f = a(r, col) * inv;
            if (f == 0.0) continue;
            a(r, col) = 0.0;
            if (col + 1 < n)
                simd::active().axpy(-f, a.row(col) + col + 1, a.row(r) + col + 1, n - col - 1);
            simd::active().axpy(-f, b.row(col), b.row(r), b.cols());
        }
    }

    // Back substitution.
    for (std::size_t ri = n; ri-- > 0;) {
        for (std::size_t r = ri + 1; r < n; ++r)
            simd::active().axpy(-a(ri, r), b.row(r), b.row(ri), b.cols());
        simd::active().scale(b.row(ri), 1.0 / a(ri, ri), b.cols());
    }
    return b;
}

double max_abs_diff(const Matrix& a, const Matrix& b) {
    if (a.rows() != b.rows() || a.cols() != b.cols())
        throw ValidationError("max_abs_diff: shape mismatch");
    double m = 0.0;
    for (std::size_t i = 0; i < a.rows() * a.cols(); ++i) {
        const double d = std::fabs(a.data()[i] - b.data()[i]);
        if (d > m) m = d;
    }
    return m;
}

}  // namespace ropaws
