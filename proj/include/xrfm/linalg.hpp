#pragma once

#include <cstddef>
#include <vector>

#include "xrfm/errors.hpp"

namespace xrfm {

// ============================================================================
// Matrix
// ============================================================================

/// Dense row-major matrix of 64-bit floats.
class Matrix {
  public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

    static Matrix identity(std::size_t n) {
        Matrix m(n, n);
        for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
        return m;
    }

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    bool empty() const { return data_.empty(); }

    double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
    double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }

    double* row(std::size_t i) { return data_.data() + i * cols_; }
    const double* row(std::size_t i) const { return data_.data() + i * cols_; }

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }

    bool operator==(const Matrix& other) const {
        return rows_ == other.rows_ && cols_ == other.cols_ && data_ == other.data_;
    }

  private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

/// Symmetric eigendecomposition, eigenvalues sorted descending and the
/// eigenvector columns aligned with them.
struct EigDecomposition {
    std::vector<double> eigenvalues;
    Matrix eigenvectors;
};

// ============================================================================
// Operations
// ============================================================================

/// Solves A X = B for symmetric positive definite A via Cholesky.
/// Throws NotPositiveDefinite when a pivot fails.
Matrix cholesky_solve(const Matrix& a, const Matrix& b);

/// Same, but factors `a` in place (no copy). `a` is consumed.
Matrix cholesky_solve(Matrix&& a, const Matrix& b);

/// Cyclic Jacobi eigensolver for symmetric matrices. Each eigenvector
/// column has its largest-magnitude entry made positive.
EigDecomposition sym_eigh(const Matrix& m);

/// Unit eigenvector of the largest eigenvalue, sign fixed so the
/// largest-magnitude entry is positive.
std::vector<double> top_eigenvector(const Matrix& m);

/// V diag(max(lambda,0)^e) V^T. Negative eigenvalues are clipped to zero
/// before powering, absorbing round-off on nominally PSD inputs.
Matrix psd_power(const Matrix& m, double exponent);

/// n x m matrix of ||x_i - z_j||_q for q in (0, 2]. Throws InvalidNorm
/// outside that range.
Matrix pairwise_norms(const Matrix& x, const Matrix& z, double q);

// ---- dense helpers -----------------------------------------------------

Matrix matmul(const Matrix& a, const Matrix& b);
Matrix transpose(const Matrix& m);
double max_abs(const Matrix& m);
double trace(const Matrix& m);

/// Adds `value` to every diagonal entry.
void add_diagonal(Matrix& m, double value);

/// Largest |a_ij - a_ji|; 0 for non-square input is not defined (asserted).
double symmetry_gap(const Matrix& m);

} // namespace xrfm
