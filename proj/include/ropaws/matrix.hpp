#pragma once

#include <cstddef>
#include <vector>

namespace ropaws {

// Dense row-major matrix of doubles. All batch quantities (embeddings,
// labels, similarities, posteriors) are instances of this.
class Matrix {
 public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    bool empty() const { return data_.empty(); }

    double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
    double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }

    double* row(std::size_t i) { return data_.data() + i * cols_; }
    const double* row(std::size_t i) const { return data_.data() + i * cols_; }

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }
    const std::vector<double>& values() const { return data_; }

    bool operator==(const Matrix& other) const = default;

 private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

// c = a * b
Matrix matmul(const Matrix& a, const Matrix& b);

// Solves a * x = b for x by LU with partial pivoting; a is square.
// Throws NumericalError on a (numerically) singular pivot.
Matrix solve_dense(Matrix a, Matrix b);

// max_ij |a_ij - b_ij|; matrices must have equal shape.
double max_abs_diff(const Matrix& a, const Matrix& b);

}  // namespace ropaws
