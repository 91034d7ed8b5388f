#include "xrfm/leaf_rfm.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>

#include "xrfm/rng.hpp"

namespace xrfm {

void LeafHyperparams::validate() const {
    kernel.validate();
    if (ridge < 0.0) throw InvalidSpec("leaf: ridge must be >= 0");
    if (iterations < 1) throw InvalidSpec("leaf: iteration count must be >= 1");
    if (!(stability_eps > 0.0)) throw InvalidSpec("leaf: stability eps must be > 0");
    if (early_stop_multiplier < 1.0) throw InvalidSpec("leaf: early stop multiplier must be >= 1");
    if (!(transform_exponent > 0.0)) throw InvalidSpec("leaf: transform exponent must be > 0");
}

namespace {

Matrix scale_columns(const Matrix& x, const std::vector<double>& w) {
    Matrix out(x.rows(), x.cols());
    const std::int64_t n = static_cast<std::int64_t>(x.rows());
#pragma omp parallel for schedule(static)
    for (std::int64_t i = 0; i < n; ++i) {
        const double* src = x.row(static_cast<std::size_t>(i));
        double* dst = out.row(static_cast<std::size_t>(i));
        for (std::size_t k = 0; k < x.cols(); ++k) dst[k] = src[k] * w[k];
    }
    return out;
}

int argmax_row(const double* row, std::size_t c) {
    int best = 0;
    for (std::size_t l = 1; l < c; ++l)
        if (row[l] > row[best]) best = static_cast<int>(l);
    return best;
}

} // namespace

Matrix LeafModel::transform_rows(const Matrix& x) const {
    if (diagonal) return scale_columns(x, diag_transform);
    return matmul(x, transform);
}

// ============================================================================
// validation error
// ============================================================================

double validation_error(TaskKind task, const Matrix& y_true, const Matrix& y_pred) {
    if (y_true.rows() != y_pred.rows() || y_true.cols() != y_pred.cols())
        throw DimensionMismatch("validation_error: shape mismatch");
    const std::size_t n = y_true.rows(), c = y_true.cols();
    if (task == TaskKind::classification) {
        std::size_t wrong = 0;
        for (std::size_t i = 0; i < n; ++i)
            if (argmax_row(y_true.row(i), c) != argmax_row(y_pred.row(i), c)) ++wrong;
        return static_cast<double>(wrong) / static_cast<double>(n);
    }
    double sq = 0.0, sum = 0.0;
    const std::size_t len = n * c;
    for (std::size_t i = 0; i < len; ++i) {
        const double diff = y_true.data()[i] - y_pred.data()[i];
        sq += diff * diff;
        sum += y_true.data()[i];
    }
    const double rmse = std::sqrt(sq / static_cast<double>(len));
    const double mean = sum / static_cast<double>(len);
    double var = 0.0;
    for (std::size_t i = 0; i < len; ++i) {
        const double dev = y_true.data()[i] - mean;
        var += dev * dev;
    }
    const double sigma = std::sqrt(var / static_cast<double>(len));
    return sigma > 0.0 ? rmse / sigma : rmse;
}

// ============================================================================
// gradients and AGOP assembly
// ============================================================================

namespace detail {

Matrix predictor_gradients(const KernelSpec& spec, const Matrix& xm_query, const Matrix& xm_train,
                           const Matrix& alpha, bool self_exclude, const Matrix* transform,
                           const std::vector<double>* diag_transform) {
    const std::size_t nq = xm_query.rows(), d = xm_query.cols(), c = alpha.cols();
    Matrix g(nq * c, d);
    const std::int64_t n = static_cast<std::int64_t>(nq);
#pragma omp parallel for schedule(dynamic, 8)
    for (std::int64_t i = 0; i < n; ++i) {
        const std::size_t ii = static_cast<std::size_t>(i);
        std::optional<std::size_t> exclude;
        if (self_exclude) exclude = ii;
        Matrix jac = kernel_gradient(spec, xm_query.row(ii), xm_train, alpha, exclude);
        // Back through the feature map: the transform is symmetric, so the
        // input-space Jacobian is T * J (or a per-coordinate scaling).
        if (transform != nullptr) {
            Matrix mapped(d, c);
            for (std::size_t a = 0; a < d; ++a)
                for (std::size_t b = 0; b < d; ++b) {
                    const double t = (*transform)(a, b);
                    if (t == 0.0) continue;
                    for (std::size_t l = 0; l < c; ++l) mapped(a, l) += t * jac(b, l);
                }
            jac = std::move(mapped);
        } else if (diag_transform != nullptr) {
            for (std::size_t a = 0; a < d; ++a)
                for (std::size_t l = 0; l < c; ++l) jac(a, l) *= (*diag_transform)[a];
        }
        for (std::size_t l = 0; l < c; ++l)
            for (std::size_t a = 0; a < d; ++a) g(ii * c + l, a) = jac(a, l);
    }
    return g;
}

Matrix gradient_outer_mean(const Matrix& g, std::size_t n_points) {
    const std::size_t d = g.cols(), r = g.rows();
    const double inv_n = 1.0 / static_cast<double>(n_points);
    Matrix m(d, d);
    const std::int64_t di = static_cast<std::int64_t>(d);
#pragma omp parallel for schedule(dynamic)
    for (std::int64_t a = 0; a < di; ++a) {
        const std::size_t aa = static_cast<std::size_t>(a);
        for (std::size_t b = aa; b < d; ++b) {
            double s = 0.0;
            for (std::size_t row = 0; row < r; ++row) s += g(row, aa) * g(row, b);
            m(aa, b) = s * inv_n;
        }
    }
    for (std::size_t a = 0; a < d; ++a)
        for (std::size_t b = 0; b < a; ++b) m(a, b) = m(b, a);
    return m;
}

std::vector<double> gradient_outer_mean_diag(const Matrix& g, std::size_t n_points) {
    const std::size_t d = g.cols(), r = g.rows();
    const double inv_n = 1.0 / static_cast<double>(n_points);
    std::vector<double> diag(d, 0.0);
    for (std::size_t row = 0; row < r; ++row) {
        const double* grow = g.row(row);
        for (std::size_t a = 0; a < d; ++a) diag[a] += grow[a] * grow[a];
    }
    for (std::size_t a = 0; a < d; ++a) diag[a] *= inv_n;
    return diag;
}

} // namespace detail

// ============================================================================
// fit
// ============================================================================

LeafModel fit_leaf_rfm(const Matrix& x, const Matrix& y, const Matrix& x_val, const Matrix& y_val,
                       const LeafHyperparams& hyper, TaskKind task, std::uint64_t seed) {
    hyper.validate();
    if (x.rows() < 2) throw LeafTooSmall("fit_leaf_rfm: need at least 2 training rows");
    if (y.rows() != x.rows() || y.cols() == 0)
        throw DimensionMismatch("fit_leaf_rfm: target shape mismatch");
    if (x_val.rows() == 0) throw EmptyValidation("fit_leaf_rfm: validation set is empty");
    if (x_val.cols() != x.cols() || y_val.rows() != x_val.rows() || y_val.cols() != y.cols())
        throw DimensionMismatch("fit_leaf_rfm: validation shape mismatch");

    KernelSpec spec = hyper.kernel;
    spec.validate();
    if (spec.bandwidth_mode == BandwidthMode::adaptive)
        spec.bandwidth = adapt_bandwidth(spec, x, mix_seed(seed, 0xadb5));

    const std::size_t d = x.cols(), n = x.rows();
    const double exponent = hyper.transform_exponent;

    // Feature matrix state, M_0 = I.
    Matrix m_full;
    std::vector<double> m_diag;
    if (hyper.diagonal)
        m_diag.assign(d, 1.0);
    else
        m_full = Matrix::identity(d);

    BestIterationTracker tracker(hyper.early_stop_multiplier);
    Matrix best_transform, best_alpha, best_m;
    std::vector<double> best_diag_t, best_m_diag;

    for (int t = 0; t < hyper.iterations; ++t) {
        Matrix trans;
        std::vector<double> wdiag;
        Matrix xm;
        if (hyper.diagonal) {
            wdiag.resize(d);
            for (std::size_t k = 0; k < d; ++k)
                wdiag[k] = m_diag[k] <= 0.0 ? 0.0 : std::pow(m_diag[k], exponent);
            xm = scale_columns(x, wdiag);
        } else {
            trans = t == 0 ? Matrix::identity(d) : psd_power(m_full, exponent);
            xm = matmul(x, trans);
        }

        Matrix gram = kernel_matrix(spec, xm, xm);
        add_diagonal(gram, hyper.ridge);
        Matrix alpha;
        try {
            alpha = cholesky_solve(std::move(gram), y);
        } catch (const NotPositiveDefinite& e) {
            throw SolveFailed(std::string("leaf ridge solve failed (try a larger ridge): ") +
                              e.what());
        }
        gram = Matrix(); // the factored gram can be a multi-GB buffer

        Matrix xvm = hyper.diagonal ? scale_columns(x_val, wdiag) : matmul(x_val, trans);
        Matrix y_hat = matmul(kernel_matrix(spec, xvm, xm), alpha);
        const double err = validation_error(task, y_val, y_hat);

        const auto step = tracker.observe(err);
        if (step == BestIterationTracker::Step::improved) {
            best_alpha = alpha;
            if (hyper.diagonal) {
                best_diag_t = wdiag;
                best_m_diag = m_diag;
            } else {
                best_transform = trans;
                best_m = m_full;
            }
        }
        if (step == BestIterationTracker::Step::stop) break;
        if (t + 1 == hyper.iterations) break; // the last AGOP would go unused

        if (hyper.diagonal) {
            Matrix g = detail::predictor_gradients(spec, xm, xm, alpha, true, nullptr, &wdiag);
            m_diag = detail::gradient_outer_mean_diag(g, n);
            double top = 0.0;
            for (double v : m_diag) top = std::max(top, v);
            const double denom = hyper.stability_eps + top;
            for (double& v : m_diag) v /= denom;
        } else {
            Matrix g = detail::predictor_gradients(spec, xm, xm, alpha, true, &trans, nullptr);
            m_full = detail::gradient_outer_mean(g, n);
            // Max entry of a PSD matrix sits on the diagonal, but take the
            // plain matrix max as written.
            double top = m_full(0, 0);
            for (std::size_t i = 0; i < d; ++i)
                for (std::size_t j = 0; j < d; ++j) top = std::max(top, m_full(i, j));
            const double denom = hyper.stability_eps + top;
            for (std::size_t i = 0; i < d; ++i)
                for (std::size_t j = 0; j < d; ++j) m_full(i, j) /= denom;
        }
    }

    LeafModel model;
    model.diagonal = hyper.diagonal;
    model.alpha = std::move(best_alpha);
    model.transform = std::move(best_transform);
    model.diag_transform = std::move(best_diag_t);
    model.feature_matrix = std::move(best_m);
    model.feature_diag = std::move(best_m_diag);
    model.kernel = spec;
    model.x_train = x;
    model.best_iteration = tracker.best_iteration();
    model.best_val_error = tracker.best_error();
    return model;
}

// ============================================================================
// AGOP of a fitted predictor
// ============================================================================

Matrix compute_agop(const LeafModel& model, const Matrix& x) {
    if (x.cols() != model.dim()) throw DimensionMismatch("compute_agop: column count mismatch");
    const Matrix xm_train = model.transform_rows(model.x_train);
    const Matrix xm_query = model.transform_rows(x);
    const bool self_exclude = x.rows() == model.x_train.rows();
    Matrix g = detail::predictor_gradients(model.kernel, xm_query, xm_train, model.alpha,
                                           self_exclude,
                                           model.diagonal ? nullptr : &model.transform,
                                           model.diagonal ? &model.diag_transform : nullptr);
    return detail::gradient_outer_mean(g, x.rows());
}

// ============================================================================
// predict
// ============================================================================

Matrix predict_leaf(const LeafModel& model, const Matrix& xq) {
    if (xq.cols() != model.dim()) throw DimensionMismatch("predict_leaf: column count mismatch");
    const Matrix xm_train = model.transform_rows(model.x_train);
    const std::size_t n = xm_train.rows(), c = model.alpha.cols(), d = model.dim();
    Matrix out(xq.rows(), c);

    // Bound the kernel block to ~64 MB regardless of query size.
    const std::size_t chunk = std::max<std::size_t>(1, 8'000'000 / std::max<std::size_t>(1, n));
    for (std::size_t start = 0; start < xq.rows(); start += chunk) {
        const std::size_t stop = std::min(xq.rows(), start + chunk);
        Matrix block(stop - start, d);
        for (std::size_t i = start; i < stop; ++i)
            for (std::size_t k = 0; k < d; ++k) block(i - start, k) = xq(i, k);
        Matrix scores = matmul(kernel_matrix(model.kernel, model.transform_rows(block), xm_train),
                               model.alpha);
        for (std::size_t i = start; i < stop; ++i)
            for (std::size_t l = 0; l < c; ++l) out(i, l) = scores(i - start, l);
    }
    return out;
}

} // namespace xrfm
