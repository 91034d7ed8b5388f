#include "xrfm/reference.hpp"

#include <cmath>

namespace xrfm::ref {

Matrix pairwise_norms(const Matrix& x, const Matrix& z, double q) {
    if (q <= 0.0 || q > 2.0) throw InvalidNorm("ref::pairwise_norms: q must lie in (0, 2]");
    Matrix out(x.rows(), z.rows());
    for (std::size_t i = 0; i < x.rows(); ++i) {
        for (std::size_t j = 0; j < z.rows(); ++j) {
            double acc = 0.0;
            for (std::size_t k = 0; k < x.cols(); ++k)
                acc += std::pow(std::fabs(x(i, k) - z(j, k)), q);
            out(i, j) = std::pow(acc, 1.0 / q);
        }
    }
    return out;
}

namespace {

double kernel_value(const KernelSpec& spec, const Matrix& x, std::size_t i, const Matrix& z,
                    std::size_t j) {
    const double q = spec.q();
    double acc = 0.0;
    for (std::size_t k = 0; k < x.cols(); ++k)
        acc += std::pow(std::fabs(x(i, k) - z(j, k)), q);
    const double dist = std::pow(acc, 1.0 / q);
    return std::exp(-std::pow(dist, spec.p) / std::pow(spec.bandwidth, spec.p));
}

} // namespace

Matrix kernel_matrix(const KernelSpec& spec, const Matrix& x, const Matrix& z) {
    spec.validate();
    Matrix out(x.rows(), z.rows());
    for (std::size_t i = 0; i < x.rows(); ++i)
        for (std::size_t j = 0; j < z.rows(); ++j) out(i, j) = kernel_value(spec, x, i, z, j);
    return out;
}

Matrix kernel_gradient(const KernelSpec& spec, const double* x, const Matrix& z,
                       const Matrix& weights, std::optional<std::size_t> exclude) {
    const std::size_t d = z.cols(), c = weights.cols();
    Matrix jac(d, c);
    for (std::size_t j = 0; j < z.rows(); ++j) {
        if (exclude && *exclude == j) continue;
        double acc = 0.0;
        for (std::size_t k = 0; k < d; ++k)
            acc += std::pow(std::fabs(x[k] - z(j, k)), spec.q());
        const double dist = std::pow(acc, 1.0 / spec.q());
        const double kval = std::exp(-std::pow(dist, spec.p) / std::pow(spec.bandwidth, spec.p));
        const double coef = -spec.p / std::pow(spec.bandwidth, spec.p);
        for (std::size_t k = 0; k < d; ++k) {
            const double diff = x[k] - z(j, k);
            double u;
            if (spec.q_mode == QMode::euclidean) {
                u = dist == 0.0 ? 0.0 : coef * kval * std::pow(dist, spec.p - 2.0) * diff;
            } else {
                u = diff == 0.0 ? 0.0
                                : coef * kval * std::pow(std::fabs(diff), spec.p - 1.0) *
                                      (diff > 0.0 ? 1.0 : -1.0);
            }
            for (std::size_t l = 0; l < c; ++l) jac(k, l) += u * weights(j, l);
        }
    }
    return jac;
}

Matrix cholesky_solve(const Matrix& a, const Matrix& b) {
    const std::size_t n = a.rows();
    if (a.cols() != n || b.rows() != n) throw DimensionMismatch("ref::cholesky_solve: shapes");
    Matrix l(n, n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j <= i; ++j) {
            double s = a(i, j);
            for (std::size_t k = 0; k < j; ++k) s -= l(i, k) * l(j, k);
            if (i == j) {
                if (s <= 0.0) throw NotPositiveDefinite("ref::cholesky_solve: pivot <= 0");
                l(i, i) = std::sqrt(s);
            } else {
                l(i, j) = s / l(j, j);
            }
        }
    }
    Matrix x(n, b.cols());
    for (std::size_t col = 0; col < b.cols(); ++col) {
        // forward then backward substitution
        std::vector<double> w(n);
        for (std::size_t i = 0; i < n; ++i) {
            double s = b(i, col);
            for (std::size_t k = 0; k < i; ++k) s -= l(i, k) * w[k];
            w[i] = s / l(i, i);
        }
        for (std::size_t ri = n; ri-- > 0;) {
            double s = w[ri];
            for (std::size_t k = ri + 1; k < n; ++k) s -= l(k, ri) * x(k, col);
            x(ri, col) = s / l(ri, ri);
        }
    }
    return x;
}

Matrix matmul(const Matrix& a, const Matrix& b) {
    if (a.cols() != b.rows()) throw DimensionMismatch("ref::matmul: inner dimensions differ");
    Matrix c(a.rows(), b.cols());
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < b.cols(); ++j) {
            double s = 0.0;
            for (std::size_t k = 0; k < a.cols(); ++k) s += a(i, k) * b(k, j);
            c(i, j) = s;
        }
    return c;
}

} // namespace xrfm::ref
