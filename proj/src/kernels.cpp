#include "xrfm/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>

#include "xrfm/rng.hpp"

namespace xrfm {

void KernelSpec::validate() const {
    if (!(p > 0.0) || p > 2.0) throw InvalidSpec("kernel: exponent p must lie in (0, 2]");
    if (!(bandwidth > 0.0)) throw InvalidSpec("kernel: bandwidth must be positive");
}

namespace {

// ||x - z||_q^p for the two supported q modes, with the cheap p = 1, 2
// cases special-cased (they dominate in practice).
inline double distance_power(const KernelSpec& spec, const double* x, const double* z,
                             std::size_t d) {
    const double p = spec.p;
    if (spec.q_mode == QMode::euclidean) {
        double s2 = 0.0;
        for (std::size_t k = 0; k < d; ++k) {
            const double diff = x[k] - z[k];
            s2 += diff * diff;
        }
        if (p == 2.0) return s2;
        if (p == 1.0) return std::sqrt(s2);
        return std::pow(s2, 0.5 * p);
    }
    // product mode: sum_k |x_k - z_k|^p
    double s = 0.0;
    if (p == 1.0) {
        for (std::size_t k = 0; k < d; ++k) s += std::fabs(x[k] - z[k]);
    } else if (p == 2.0) {
        for (std::size_t k = 0; k < d; ++k) {
            const double diff = x[k] - z[k];
            s += diff * diff;
        }
    } else {
        for (std::size_t k = 0; k < d; ++k) s += std::pow(std::fabs(x[k] - z[k]), p);
    }
    return s;
}

} // namespace

// ============================================================================
// kernel matrix
// ============================================================================

Matrix kernel_matrix(const KernelSpec& spec, const Matrix& x, const Matrix& z) {
    spec.validate();
    if (x.cols() != z.cols()) throw DimensionMismatch("kernel_matrix: column counts differ");
    const std::size_t d = x.cols(), m = z.rows();
    const double inv_lp = 1.0 / std::pow(spec.bandwidth, spec.p);
    const bool gram = &x == &z;
    Matrix out(x.rows(), m);
    const std::int64_t n = static_cast<std::int64_t>(x.rows());
#pragma omp parallel for schedule(dynamic, 16)
    for (std::int64_t i = 0; i < n; ++i) {
        const std::size_t ii = static_cast<std::size_t>(i);
        const double* xi = x.row(ii);
        double* orow = out.row(ii);
        const std::size_t j_hi = gram ? ii + 1 : m;
        for (std::size_t j = 0; j < j_hi; ++j)
            orow[j] = std::exp(-distance_power(spec, xi, z.row(j), d) * inv_lp);
    }
    if (gram) {
        for (std::size_t i = 0; i < x.rows(); ++i)
            for (std::size_t j = i + 1; j < m; ++j) out(i, j) = out(j, i);
    }
    return out;
}

// ============================================================================
// analytic gradient of f(x) = sum_j K(x, z_j) w_j
// ============================================================================

Matrix kernel_gradient(const KernelSpec& spec, const double* x, const Matrix& z,
                       const Matrix& weights, std::optional<std::size_t> exclude) {
    spec.validate();
    if (weights.rows() != z.rows())
        throw DimensionMismatch("kernel_gradient: weights rows must match z rows");
    const std::size_t d = z.cols(), m = z.rows(), c = weights.cols();
    const double p = spec.p;
    const double inv_lp = 1.0 / std::pow(spec.bandwidth, p);
    const double coef_base = -p * inv_lp;

    Matrix jac(d, c);
    std::vector<double> diff(d);
    std::vector<double> u(d); // per-row gradient factor along each coordinate

    for (std::size_t j = 0; j < m; ++j) {
        if (exclude && *exclude == j) continue;
        const double* zj = z.row(j);

        if (spec.q_mode == QMode::euclidean) {
            // grad = K * (-p/L^p) * r^{p-2} * (x - z); the whole term is 0
            // at r = 0 (self term / non-differentiable point).
            double s2 = 0.0;
            for (std::size_t k = 0; k < d; ++k) {
                diff[k] = x[k] - zj[k];
                s2 += diff[k] * diff[k];
            }
            if (s2 == 0.0) continue;
            const double r = std::sqrt(s2);
            const double rp = p == 1.0 ? r : p == 2.0 ? s2 : std::pow(s2, 0.5 * p);
            const double kval = std::exp(-rp * inv_lp);
            const double rpm2 = p == 1.0 ? 1.0 / r : p == 2.0 ? 1.0 : std::pow(r, p - 2.0);
            const double scale = coef_base * kval * rpm2;
            for (std::size_t k = 0; k < d; ++k) u[k] = scale * diff[k];
        } else {
            // coordinate k: K * (-p/L^p) * |x_k - z_k|^{p-1} * sign(x_k - z_k),
            // zero where the coordinates coincide.
            double sp = 0.0;
            if (p == 1.0) {
                for (std::size_t k = 0; k < d; ++k) {
                    diff[k] = x[k] - zj[k];
                    sp += std::fabs(diff[k]);
                }
            } else {
                for (std::size_t k = 0; k < d; ++k) {
                    diff[k] = x[k] - zj[k];
                    sp += std::pow(std::fabs(diff[k]), p);
                }
            }
            const double scale = coef_base * std::exp(-sp * inv_lp);
            for (std::size_t k = 0; k < d; ++k) {
                if (diff[k] == 0.0) {
                    u[k] = 0.0;
                    continue;
                }
                const double mag = p == 1.0 ? 1.0 : std::pow(std::fabs(diff[k]), p - 1.0);
                u[k] = scale * mag * (diff[k] > 0.0 ? 1.0 : -1.0);
            }
        }

        const double* wj = weights.row(j);
        if (c == 1) {
            const double w0 = wj[0];
            for (std::size_t k = 0; k < d; ++k) jac(k, 0) += u[k] * w0;
        } else {
            for (std::size_t k = 0; k < d; ++k) {
                const double uk = u[k];
                if (uk == 0.0) continue;
                double* jrow = jac.row(k);
                for (std::size_t l = 0; l < c; ++l) jrow[l] += uk * wj[l];
            }
        }
    }
    return jac;
}

// ============================================================================
// adaptive bandwidth
// ============================================================================

double adapt_bandwidth(const KernelSpec& spec, const Matrix& x_leaf, std::uint64_t rng_seed) {
    const std::size_t n = x_leaf.rows();
    if (n < 2) return spec.bandwidth;

    // Subsample to keep the pair set quadratic in at most 1000 points.
    std::vector<std::size_t> rows;
    if (n > 1000) {
        Rng rng(rng_seed);
        rows = rng.sample_indices(n, 1000);
    } else {
        rows.resize(n);
        for (std::size_t i = 0; i < n; ++i) rows[i] = i;
    }

    const double q = spec.q_mode == QMode::product ? 1.0 : 2.0;
    const std::size_t d = x_leaf.cols();
    const std::size_t m = rows.size();
    std::vector<double> dists;
    dists.reserve(m * (m - 1) / 2);
    for (std::size_t a = 0; a < m; ++a) {
        const double* xa = x_leaf.row(rows[a]);
        for (std::size_t b = a + 1; b < m; ++b) {
            const double* xb = x_leaf.row(rows[b]);
            double acc = 0.0;
            if (q == 2.0) {
                for (std::size_t k = 0; k < d; ++k) {
                    const double diff = xa[k] - xb[k];
                    acc += diff * diff;
                }
                acc = std::sqrt(acc);
            } else {
                for (std::size_t k = 0; k < d; ++k) acc += std::fabs(xa[k] - xb[k]);
            }
            dists.push_back(acc);
        }
    }

    std::sort(dists.begin(), dists.end());
    const std::size_t cnt = dists.size();
    const double median = cnt % 2 == 1 ? dists[cnt / 2]
                                       : 0.5 * (dists[cnt / 2 - 1] + dists[cnt / 2]);
    if (median == 0.0) return spec.bandwidth;
    return spec.adaptive_literal ? spec.bandwidth / median : spec.bandwidth * median;
}

// ============================================================================
// categorical fast path
// ============================================================================

namespace {

void check_groups(std::size_t dim, const std::vector<std::pair<std::size_t, std::size_t>>& groups) {
    std::vector<std::pair<std::size_t, std::size_t>> sorted = groups;
    std::sort(sorted.begin(), sorted.end());
    std::size_t prev_end = 0;
    for (const auto& [begin, end] : sorted) {
        if (begin >= end || end > dim)
            throw BlockMismatch("categorical block span out of range");
        if (begin < prev_end) throw BlockMismatch("categorical block spans overlap");
        prev_end = end;
    }
}

// table[i][j] = || T (rep_i - rep_j) ||_1 where T is the transform block
// over the span and rep_c (one past the vocabulary) is the all-zero row.
Matrix lookup_table_dense(const Matrix& sqrt_block) {
    const std::size_t c = sqrt_block.rows();
    Matrix table(c + 1, c + 1);
    for (std::size_t i = 0; i <= c; ++i) {
        for (std::size_t j = i + 1; j <= c; ++j) {
            double acc = 0.0;
            for (std::size_t r = 0; r < c; ++r) {
                double v = 0.0;
                if (i < c) v += sqrt_block(r, i);
                if (j < c) v -= sqrt_block(r, j);
                acc += std::fabs(v);
            }
            table(i, j) = acc;
            table(j, i) = acc;
        }
    }
    return table;
}

} // namespace

std::vector<CategoricalBlock>
build_categorical_blocks(const Matrix& m, const std::vector<std::pair<std::size_t, std::size_t>>& groups) {
    if (m.rows() != m.cols()) throw DimensionMismatch("build_categorical_blocks: m must be square");
    check_groups(m.rows(), groups);
    std::vector<CategoricalBlock> blocks;
    blocks.reserve(groups.size());
    for (const auto& [begin, end] : groups) {
        const std::size_t c = end - begin;
        Matrix sub(c, c);
        for (std::size_t i = 0; i < c; ++i)
            for (std::size_t j = 0; j < c; ++j) sub(i, j) = m(begin + i, begin + j);
        Matrix root = psd_power(sub, 0.5);
        blocks.push_back({begin, end, lookup_table_dense(root)});
    }
    return blocks;
}

std::vector<CategoricalBlock>
build_categorical_blocks(const std::vector<double>& m_diag,
                         const std::vector<std::pair<std::size_t, std::size_t>>& groups) {
    check_groups(m_diag.size(), groups);
    std::vector<CategoricalBlock> blocks;
    blocks.reserve(groups.size());
    for (const auto& [begin, end] : groups) {
        const std::size_t c = end - begin;
        Matrix root(c, c);
        for (std::size_t i = 0; i < c; ++i)
            root(i, i) = std::sqrt(std::max(m_diag[begin + i], 0.0));
        blocks.push_back({begin, end, lookup_table_dense(root)});
    }
    return blocks;
}

Matrix kernel_matrix_categorical(const KernelSpec& spec, const Matrix& x, const Matrix& z,
                                 const Matrix& m, const std::vector<CategoricalBlock>& blocks) {
    spec.validate();
    if (spec.q_mode != QMode::product || spec.p != 1.0)
        throw InvalidSpec("categorical fast path requires the product kernel with p = 1");
    if (x.cols() != z.cols() || x.cols() != m.rows())
        throw DimensionMismatch("kernel_matrix_categorical: dimension mismatch");

    const std::size_t d = x.cols();
    std::vector<bool> in_block(d, false);
    for (const auto& blk : blocks)
        for (std::size_t k = blk.begin; k < blk.end; ++k) in_block[k] = true;
    std::vector<std::size_t> plain_cols;
    for (std::size_t k = 0; k < d; ++k)
        if (!in_block[k]) plain_cols.push_back(k);

    // Transform the non-categorical columns directly (m is block diagonal,
    // so only the plain-by-plain block contributes).
    Matrix root = psd_power(m, 0.5);
    auto transform_plain = [&](const Matrix& src) {
        Matrix out(src.rows(), plain_cols.size());
        for (std::size_t i = 0; i < src.rows(); ++i)
            for (std::size_t a = 0; a < plain_cols.size(); ++a) {
                double acc = 0.0;
                for (std::size_t b = 0; b < plain_cols.size(); ++b)
                    acc += root(plain_cols[a], plain_cols[b]) * src(i, plain_cols[b]);
                out(i, a) = acc;
            }
        return out;
    };
    const Matrix xp = transform_plain(x);
    const Matrix zp = transform_plain(z);

    // One-hot rows reduce to a code per block: the position of the 1, or
    // the all-zero code when no column fires.
    auto codes_for = [&](const Matrix& src, const CategoricalBlock& blk) {
        std::vector<std::size_t> codes(src.rows());
        const std::size_t c = blk.end - blk.begin;
        for (std::size_t i = 0; i < src.rows(); ++i) {
            std::size_t code = c;
            for (std::size_t k = 0; k < c; ++k)
                if (src(i, blk.begin + k) != 0.0) {
                    code = k;
                    break;
                }
            codes[i] = code;
        }
        return codes;
    };
    std::vector<std::vector<std::size_t>> x_codes, z_codes;
    for (const auto& blk : blocks) {
        x_codes.push_back(codes_for(x, blk));
        z_codes.push_back(codes_for(z, blk));
    }

    const double inv_lp = 1.0 / spec.bandwidth;
    Matrix out(x.rows(), z.rows());
    const std::int64_t n = static_cast<std::int64_t>(x.rows());
#pragma omp parallel for schedule(static)
    for (std::int64_t i = 0; i < n; ++i) {
        const std::size_t ii = static_cast<std::size_t>(i);
        for (std::size_t j = 0; j < z.rows(); ++j) {
            double dist = 0.0;
            for (std::size_t a = 0; a < plain_cols.size(); ++a)
                dist += std::fabs(xp(ii, a) - zp(j, a));
            for (std::size_t g = 0; g < blocks.size(); ++g)
                dist += blocks[g].table(x_codes[g][ii], z_codes[g][j]);
            out(ii, j) = std::exp(-dist * inv_lp);
        }
    }
    return out;
}

} // namespace xrfm
