#pragma once

#include <cstdint>
#include <optional>
#include <utility>
#include <vector>

#include "xrfm/linalg.hpp"

namespace xrfm {

// ============================================================================
// Kernel family  K_{p,q}(x, z) = exp(-||x - z||_q^p / L^p)
// ============================================================================

/// Norm order inside the kernel: q = 2 (generalized Laplace, rotation
/// invariant) or q = p (product of 1-D kernels).
enum class QMode { euclidean, product };

enum class BandwidthMode { constant, adaptive };

struct KernelSpec {
    double p = 1.0;
    QMode q_mode = QMode::euclidean;
    double bandwidth = 10.0; // L
    BandwidthMode bandwidth_mode = BandwidthMode::constant;
    /// Adaptive mode rescales L by the median pairwise distance. The
    /// literal variant divides by the median instead of multiplying.
    bool adaptive_literal = false;

    double q() const { return q_mode == QMode::euclidean ? 2.0 : p; }

    /// Throws InvalidSpec unless 0 < p <= 2 and L > 0 (so p <= q <= 2
    /// always holds, the positive-definiteness condition).
    void validate() const;
};

/// n x m kernel matrix between the rows of x and z. Entries lie in (0, 1].
Matrix kernel_matrix(const KernelSpec& spec, const Matrix& x, const Matrix& z);

/// d x c Jacobian of f(x) = sum_j K(x, z_j) * weights_j at the point x
/// (d entries of x given as a raw pointer). Terms at zero distance, and
/// zero coordinate differences in product mode, contribute 0; `exclude`
/// drops one training row entirely (self-exclusion for AGOP).
Matrix kernel_gradient(const KernelSpec& spec, const double* x, const Matrix& z,
                       const Matrix& weights, std::optional<std::size_t> exclude = std::nullopt);

/// Effective bandwidth for a leaf: L scaled by the median pairwise
/// distance of the leaf sample (L1 for product kernels, L2 otherwise).
/// Points are subsampled to at most 1000; an all-zero median leaves L
/// unchanged.
double adapt_bandwidth(const KernelSpec& spec, const Matrix& x_leaf, std::uint64_t rng_seed);

// ============================================================================
// Categorical fast path (product kernels, p = 1)
// ============================================================================

/// Precomputed transformed distances between the one-hot encodings of a
/// categorical column. Index c (one past the vocabulary) stands for the
/// all-zero row an unknown category encodes to.
struct CategoricalBlock {
    std::size_t begin = 0; // column span [begin, end)
    std::size_t end = 0;
    Matrix table; // (c+1) x (c+1), symmetric, zero diagonal
};

/// Builds lookup tables table[i][j] = ||M_c^{1/2} (e_i - e_j)||_1 from the
/// diagonal blocks of a feature matrix `m` restricted to the given one-hot
/// spans. Throws BlockMismatch when spans overlap or exceed m's dimension.
std::vector<CategoricalBlock>
build_categorical_blocks(const Matrix& m, const std::vector<std::pair<std::size_t, std::size_t>>& groups);

/// Diagonal-feature-matrix variant (M_c = diag over the span).
std::vector<CategoricalBlock>
build_categorical_blocks(const std::vector<double>& m_diag,
                         const std::vector<std::pair<std::size_t, std::size_t>>& groups);

/// Gram matrix of K_{1,1} over raw one-hot rows where every categorical
/// span is resolved through its lookup table and the remaining columns go
/// through the transform `m` directly (m must be block diagonal over the
/// spans; pass the same matrix the blocks were built from).
Matrix kernel_matrix_categorical(const KernelSpec& spec, const Matrix& x, const Matrix& z,
                                 const Matrix& m, const std::vector<CategoricalBlock>& blocks);

} // namespace xrfm
