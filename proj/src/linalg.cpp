#include "xrfm/linalg.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>
#include <cstdint>
#include <numeric>

extern "C" {
void dpotrf_(const char* uplo, const int* n, double* a, const int* lda, int* info);
void dpotrs_(const char* uplo, const int* n, const int* nrhs, const double* a, const int* lda,
             double* b, const int* ldb, int* info);
}

#ifdef XRFM_HAVE_OPENBLAS
extern "C" void openblas_set_num_threads(int);
namespace {
// Threaded BLAS reorders its reductions with the thread count; factorization
// results here must not depend on it.
const bool blas_pinned = [] {
    openblas_set_num_threads(1);
    return true;
}();
} // namespace
#endif

namespace xrfm {

namespace {

void require_square(const Matrix& m, const char* op) {
    if (m.rows() != m.cols() || m.rows() == 0)
        throw DimensionMismatch(std::string(op) + ": matrix must be square and non-empty");
}

void require_symmetric(const Matrix& m, const char* op) {
    double tol = 1e-10 * std::max(1e-300, max_abs(m));
    // NaN entries fail the comparison too.
    if (!(symmetry_gap(m) <= tol))
        throw DimensionMismatch(std::string(op) + ": matrix is not symmetric");
}

} // namespace

// ============================================================================
// helpers
// ============================================================================

Matrix matmul(const Matrix& a, const Matrix& b) {
    if (a.cols() != b.rows()) throw DimensionMismatch("matmul: inner dimensions differ");
    Matrix c(a.rows(), b.cols());
    const std::int64_t n = static_cast<std::int64_t>(a.rows());
    const std::size_t k_dim = a.cols(), m = b.cols();
#pragma omp parallel for schedule(static)
    for (std::int64_t i = 0; i < n; ++i) {
        const double* arow = a.row(static_cast<std::size_t>(i));
        double* crow = c.row(static_cast<std::size_t>(i));
        for (std::size_t k = 0; k < k_dim; ++k) {
            const double aik = arow[k];
            if (aik == 0.0) continue;
            const double* brow = b.row(k);
            for (std::size_t j = 0; j < m; ++j) crow[j] += aik * brow[j];
        }
    }
    return c;
}

Matrix transpose(const Matrix& m) {
    Matrix t(m.cols(), m.rows());
    for (std::size_t i = 0; i < m.rows(); ++i)
        for (std::size_t j = 0; j < m.cols(); ++j) t(j, i) = m(i, j);
    return t;
}

double max_abs(const Matrix& m) {
    double v = 0.0;
    const double* p = m.data();
    const std::size_t len = m.rows() * m.cols();
    for (std::size_t i = 0; i < len; ++i) v = std::max(v, std::fabs(p[i]));
    return v;
}

double trace(const Matrix& m) {
    double t = 0.0;
    for (std::size_t i = 0; i < std::min(m.rows(), m.cols()); ++i) t += m(i, i);
    return t;
}

void add_diagonal(Matrix& m, double value) {
    for (std::size_t i = 0; i < std::min(m.rows(), m.cols()); ++i) m(i, i) += value;
}

double symmetry_gap(const Matrix& m) {
    assert(m.rows() == m.cols());
    double gap = 0.0;
    for (std::size_t i = 0; i < m.rows(); ++i)
        for (std::size_t j = i + 1; j < m.cols(); ++j)
            gap = std::max(gap, std::fabs(m(i, j) - m(j, i)));
    return gap;
}

// ============================================================================
// Cholesky solve (LAPACK dpotrf/dpotrs)
// ============================================================================

Matrix cholesky_solve(Matrix&& a, const Matrix& b) {
    require_square(a, "cholesky_solve");
    require_symmetric(a, "cholesky_solve");
    if (b.rows() != a.rows() || b.cols() == 0)
        throw DimensionMismatch("cholesky_solve: right-hand side shape mismatch");

    const int n = static_cast<int>(a.rows());
    const int c = static_cast<int>(b.cols());
    int info = 0;
    // Row-major symmetric input doubles as its own column-major transpose,
    // so LAPACK can factor the buffer directly.
    dpotrf_("L", &n, a.data(), &n, &info);
    if (info > 0)
        throw NotPositiveDefinite("cholesky_solve: pivot " + std::to_string(info) +
                                  " is not positive (matrix not SPD; consider a larger ridge)");
    if (info < 0) throw Error("cholesky_solve: bad argument to dpotrf");

    // dpotrs wants column-major right-hand sides.
    std::vector<double> rhs(static_cast<std::size_t>(n) * c);
    for (std::size_t i = 0; i < b.rows(); ++i)
        for (std::size_t j = 0; j < b.cols(); ++j)
            rhs[j * static_cast<std::size_t>(n) + i] = b(i, j);
    dpotrs_("L", &n, &c, a.data(), &n, rhs.data(), &n, &info);
    if (info != 0) throw Error("cholesky_solve: dpotrs failed");

    Matrix x(b.rows(), b.cols());
    for (std::size_t i = 0; i < b.rows(); ++i)
        for (std::size_t j = 0; j < b.cols(); ++j)
            x(i, j) = rhs[j * static_cast<std::size_t>(n) + i];
    return x;
}

Matrix cholesky_solve(const Matrix& a, const Matrix& b) {
    Matrix work = a;
    return cholesky_solve(std::move(work), b);
}

// ============================================================================
// Jacobi eigensolver
// ============================================================================

EigDecomposition sym_eigh(const Matrix& m) {
    require_square(m, "sym_eigh");
    require_symmetric(m, "sym_eigh");

    const std::size_t n = m.rows();
    Matrix a = m;
    Matrix v = Matrix::identity(n);
    const double scale = std::max(max_abs(m), 1e-300);
    const double stop = 1e-15 * scale;
    const int max_sweeps = 128;

    bool converged = false;
    for (int sweep = 0; sweep < max_sweeps && !converged; ++sweep) {
        double off = 0.0;
        for (std::size_t p = 0; p < n; ++p)
            for (std::size_t q = p + 1; q < n; ++q) off = std::max(off, std::fabs(a(p, q)));
        if (off <= stop || n == 1) {
            converged = true;
            break;
        }
        for (std::size_t p = 0; p < n; ++p) {
            for (std::size_t q = p + 1; q < n; ++q) {
                const double apq = a(p, q);
                if (std::fabs(apq) <= stop * 1e-2) continue;
                const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
                const double t = (theta >= 0.0 ? 1.0 : -1.0) /
                                 (std::fabs(theta) + std::sqrt(theta * theta + 1.0));
                const double cos_r = 1.0 / std::sqrt(t * t + 1.0);
                const double sin_r = t * cos_r;

                for (std::size_t k = 0; k < n; ++k) {
                    const double akp = a(k, p), akq = a(k, q);
                    a(k, p) = cos_r * akp - sin_r * akq;
                    a(k, q) = sin_r * akp + cos_r * akq;
                }
                for (std::size_t k = 0; k < n; ++k) {
                    const double apk = a(p, k), aqk = a(q, k);
                    a(p, k) = cos_r * apk - sin_r * aqk;
                    a(q, k) = sin_r * apk + cos_r * aqk;
                }
                for (std::size_t k = 0; k < n; ++k) {
                    const double vkp = v(k, p), vkq = v(k, q);
                    v(k, p) = cos_r * vkp - sin_r * vkq;
                    v(k, q) = sin_r * vkp + cos_r * vkq;
                }
            }
        }
    }
    if (!converged) throw NoConvergence("sym_eigh: Jacobi sweeps exhausted");

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t i, std::size_t j) { return a(i, i) > a(j, j); });

    EigDecomposition out;
    out.eigenvalues.resize(n);
    out.eigenvectors = Matrix(n, n);
    for (std::size_t col = 0; col < n; ++col) {
        const std::size_t src = order[col];
        out.eigenvalues[col] = a(src, src);
        // Sign convention: largest-magnitude entry positive.
        std::size_t arg = 0;
        double best = -1.0;
        for (std::size_t k = 0; k < n; ++k) {
            const double mag = std::fabs(v(k, src));
            if (mag > best) {
                best = mag;
                arg = k;
            }
        }
        const double sign = v(arg, src) < 0.0 ? -1.0 : 1.0;
        for (std::size_t k = 0; k < n; ++k) out.eigenvectors(k, col) = sign * v(k, src);
    }
    return out;
}

std::vector<double> top_eigenvector(const Matrix& m) {
    EigDecomposition eig = sym_eigh(m);
    std::vector<double> v(m.rows());
    for (std::size_t k = 0; k < m.rows(); ++k) v[k] = eig.eigenvectors(k, 0);
    return v;
}

Matrix psd_power(const Matrix& m, double exponent) {
    EigDecomposition eig = sym_eigh(m);
    const std::size_t n = m.rows();
    std::vector<double> powered(n);
    for (std::size_t k = 0; k < n; ++k) {
        const double lam = std::max(eig.eigenvalues[k], 0.0);
        powered[k] = lam == 0.0 ? 0.0 : std::pow(lam, exponent);
    }
    Matrix out(n, n);
    const std::int64_t ni = static_cast<std::int64_t>(n);
#pragma omp parallel for schedule(static)
    for (std::int64_t i = 0; i < ni; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            double s = 0.0;
            for (std::size_t k = 0; k < n; ++k)
                s += eig.eigenvectors(static_cast<std::size_t>(i), k) * powered[k] *
                     eig.eigenvectors(j, k);
            out(static_cast<std::size_t>(i), j) = s;
        }
    }
    // Exact symmetry despite round-off.
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) out(j, i) = out(i, j);
    return out;
}

// ============================================================================
// Pairwise norms
// ============================================================================

Matrix pairwise_norms(const Matrix& x, const Matrix& z, double q) {
    if (q <= 0.0 || q > 2.0) throw InvalidNorm("pairwise_norms: q must lie in (0, 2]");
    if (x.cols() != z.cols()) throw DimensionMismatch("pairwise_norms: column counts differ");
    const std::size_t d = x.cols(), m = z.rows();
    Matrix out(x.rows(), m);
    const std::int64_t n = static_cast<std::int64_t>(x.rows());
#pragma omp parallel for schedule(static)
    for (std::int64_t i = 0; i < n; ++i) {
        const double* xi = x.row(static_cast<std::size_t>(i));
        double* orow = out.row(static_cast<std::size_t>(i));
        for (std::size_t j = 0; j < m; ++j) {
            const double* zj = z.row(j);
            double acc = 0.0;
            if (q == 2.0) {
                for (std::size_t k = 0; k < d; ++k) {
                    const double diff = xi[k] - zj[k];
                    acc += diff * diff;
                }
                orow[j] = std::sqrt(acc);
            } else if (q == 1.0) {
                for (std::size_t k = 0; k < d; ++k) acc += std::fabs(xi[k] - zj[k]);
                orow[j] = acc;
            } else {
                for (std::size_t k = 0; k < d; ++k) acc += std::pow(std::fabs(xi[k] - zj[k]), q);
                orow[j] = std::pow(acc, 1.0 / q);
            }
        }
    }
    return out;
}

} // namespace xrfm
