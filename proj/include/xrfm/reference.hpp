#pragma once

#include <optional>

#include "xrfm/kernels.hpp"
#include "xrfm/linalg.hpp"

namespace xrfm::ref {

// ============================================================================
// Serial reference implementations. Plain scalar loops, no OpenMP, no BLAS.
// Tests use them as oracles for the production kernels; the kernel
// benchmark compares against them.
// ============================================================================

Matrix pairwise_norms(const Matrix& x, const Matrix& z, double q);

Matrix kernel_matrix(const KernelSpec& spec, const Matrix& x, const Matrix& z);

Matrix kernel_gradient(const KernelSpec& spec, const double* x, const Matrix& z,
                       const Matrix& weights, std::optional<std::size_t> exclude = std::nullopt);

/// Unblocked textbook Cholesky solve.
Matrix cholesky_solve(const Matrix& a, const Matrix& b);

Matrix matmul(const Matrix& a, const Matrix& b);

} // namespace xrfm::ref
