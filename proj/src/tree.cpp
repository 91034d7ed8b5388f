#include "xrfm/tree.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "xrfm/rng.hpp"

namespace xrfm {

namespace {

constexpr std::uint64_t kRefillSalt = 0x5eed'0f11;
constexpr std::uint64_t kFitSalt = 0x5eed'0f17;

double dot(const std::vector<double>& v, const double* row) {
    double s = 0.0;
    for (std::size_t k = 0; k < v.size(); ++k) s += v[k] * row[k];
    return s;
}

double median_of(std::vector<double> values) {
    std::sort(values.begin(), values.end());
    const std::size_t n = values.size();
    return n % 2 == 1 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

Matrix gather_rows(const Matrix& src, const std::vector<std::size_t>& rows) {
    Matrix out(rows.size(), src.cols());
    for (std::size_t i = 0; i < rows.size(); ++i)
        for (std::size_t k = 0; k < src.cols(); ++k) out(i, k) = src(rows[i], k);
    return out;
}

struct TreeBuilder {
    const Matrix& x;
    const Matrix& y;
    const TreeParams& params;
    const KernelSpec& kernel;

    // Split model: one ridge solve on a node-seeded subsample, then the top
    // eigenvector of its AGOP gives the split direction. Kept out of the
    // recursion so its buffers are released before descending.
    std::vector<double> split_direction(const std::vector<std::size_t>& idx, std::uint64_t path) {
        Rng rng(mix_seed(params.seed, path));
        const std::size_t n_s = std::min(params.split_sample, idx.size());
        std::vector<std::size_t> picks = rng.sample_indices(idx.size(), n_s);
        std::vector<std::size_t> sample_rows(n_s);
        for (std::size_t a = 0; a < n_s; ++a) sample_rows[a] = idx[picks[a]];
        Matrix xs = gather_rows(x, sample_rows);
        Matrix ys = gather_rows(y, sample_rows);

        Matrix gram = kernel_matrix(kernel, xs, xs);
        add_diagonal(gram, params.split_ridge);
        Matrix alpha;
        try {
            alpha = cholesky_solve(std::move(gram), ys);
        } catch (const NotPositiveDefinite& e) {
            throw SolveFailed(std::string("split model solve failed: ") + e.what());
        }
        gram = Matrix();
        Matrix grads = detail::predictor_gradients(kernel, xs, xs, alpha, true, nullptr, nullptr);
        return top_eigenvector(detail::gradient_outer_mean(grads, n_s));
    }

    std::unique_ptr<TreeNode> build(std::vector<std::size_t> idx, std::uint64_t path) {
        auto node = std::make_unique<TreeNode>();
        node->path = path;
        if (idx.size() <= params.max_leaf_size) {
            node->train_indices = std::move(idx);
            return node;
        }

        node->split_vector = split_direction(idx, path);

        std::vector<std::size_t> left_idx, right_idx;
        {
            // Median projection over the whole node, <= goes left.
            std::vector<double> proj(idx.size());
            for (std::size_t r = 0; r < idx.size(); ++r)
                proj[r] = dot(node->split_vector, x.row(idx[r]));
            node->threshold = median_of(proj);

            left_idx.reserve(idx.size() / 2 + 1);
            right_idx.reserve(idx.size() / 2 + 1);
            for (std::size_t r = 0; r < idx.size(); ++r)
                (proj[r] <= node->threshold ? left_idx : right_idx).push_back(idx[r]);
        }

        if (left_idx.empty() || right_idx.empty()) {
            // Degenerate split (all projections equal): stable index-order
            // halves keep the recursion making progress.
            left_idx.assign(idx.begin(), idx.begin() + (idx.size() + 1) / 2);
            right_idx.assign(idx.begin() + (idx.size() + 1) / 2, idx.end());
        }
        idx.clear();
        idx.shrink_to_fit();

        node->left = build(std::move(left_idx), path * 2);
        node->right = build(std::move(right_idx), path * 2 + 1);
        return node;
    }
};

void collect_leaves(const TreeNode* node, std::vector<const TreeNode*>& out) {
    if (node == nullptr) return;
    if (node->is_leaf()) {
        out.push_back(node);
        return;
    }
    collect_leaves(node->left.get(), out);
    collect_leaves(node->right.get(), out);
}

void collect_leaves_mut(TreeNode* node, std::vector<TreeNode*>& out) {
    if (node == nullptr) return;
    if (node->is_leaf()) {
        out.push_back(node);
        return;
    }
    collect_leaves_mut(node->left.get(), out);
    collect_leaves_mut(node->right.get(), out);
}

std::size_t depth_of(const TreeNode* node) {
    if (node == nullptr || node->is_leaf()) return 0;
    return 1 + std::max(depth_of(node->left.get()), depth_of(node->right.get()));
}

} // namespace

void TreeParams::validate() const {
    if (split_sample < 2) throw InvalidSpec("tree: split sample size must be >= 2");
    if (max_leaf_size < 2) throw InvalidSpec("tree: max leaf size must be >= 2");
    if (refill_size < 1) throw InvalidSpec("tree: refill size must be >= 1");
}

std::unique_ptr<TreeNode> tree_partition(const Matrix& x, const Matrix& y,
                                         const TreeParams& params, const KernelSpec& kernel) {
    params.validate();
    kernel.validate();
    if (x.rows() == 0) throw DimensionMismatch("tree_partition: empty dataset");
    if (y.rows() != x.rows()) throw DimensionMismatch("tree_partition: target shape mismatch");
    std::vector<std::size_t> idx(x.rows());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    TreeBuilder builder{x, y, params, kernel};
    return builder.build(std::move(idx), 1);
}

const TreeNode& route(const double* x, const TreeNode& root) {
    const TreeNode* cur = &root;
    while (!cur->is_leaf())
        cur = dot(cur->split_vector, x) <= cur->threshold ? cur->left.get() : cur->right.get();
    return *cur;
}

// ============================================================================
// XRFMModel accessors
// ============================================================================

std::size_t XRFMModel::leaf_count() const { return leaves().size(); }

std::size_t XRFMModel::depth() const { return depth_of(root.get()); }

std::vector<const TreeNode*> XRFMModel::leaves() const {
    std::vector<const TreeNode*> out;
    collect_leaves(root.get(), out);
    return out;
}

std::vector<TreeNode*> XRFMModel::leaves() {
    std::vector<TreeNode*> out;
    collect_leaves_mut(root.get(), out);
    return out;
}

// ============================================================================
// partition plan: routing + validation refill
// ============================================================================

namespace detail {

std::uint64_t leaf_fit_seed(std::uint64_t seed, std::uint64_t path, std::uint64_t trial) {
    return mix_seed(mix_seed(seed, path, kFitSalt), trial);
}

PartitionPlan prepare_partition(const Dataset& train, const Dataset& val,
                                const TreeParams& params, const KernelSpec& kernel) {
    PartitionPlan plan;
    plan.root = tree_partition(train.x, train.y, params, kernel);

    std::vector<TreeNode*> leaf_nodes;
    collect_leaves_mut(plan.root.get(), leaf_nodes);
    plan.leaves.resize(leaf_nodes.size());
    for (std::size_t l = 0; l < leaf_nodes.size(); ++l) {
        plan.leaves[l].node = leaf_nodes[l];
        plan.leaves[l].train_rows = leaf_nodes[l]->train_indices;
    }

    // Route validation rows to their leaves.
    for (std::size_t r = 0; r < val.size(); ++r) {
        const TreeNode& leaf = route(val.x.row(r), *plan.root);
        for (auto& lp : plan.leaves)
            if (lp.node == &leaf) {
                lp.val_from_val.push_back(r);
                break;
            }
    }

    // Refill: leaves short of validation rows hold out some of their own
    // training rows instead of validating on nothing.
    for (auto& lp : plan.leaves) {
        const std::size_t train_count = lp.train_rows.size();
        const std::size_t target = std::min(params.refill_size, train_count / 5);
        if (lp.val_from_val.size() < target) {
            const std::size_t need = target - lp.val_from_val.size();
            Rng rng(mix_seed(params.seed, lp.node->path, kRefillSalt));
            std::vector<std::size_t> picks = rng.sample_indices(train_count, need);
            std::vector<bool> moved(train_count, false);
            for (std::size_t p : picks) moved[p] = true;
            std::vector<std::size_t> kept;
            kept.reserve(train_count - need);
            for (std::size_t p = 0; p < train_count; ++p)
                (moved[p] ? lp.val_from_train : kept).push_back(lp.train_rows[p]);
            lp.train_rows = std::move(kept);
        }
        if (lp.train_rows.size() < 2)
            throw LeafTooSmall("leaf has fewer than 2 training rows after refill");
        lp.node->train_indices = lp.train_rows;
        lp.node->val_indices = lp.val_from_val;
    }
    return plan;
}

} // namespace detail

// ============================================================================
// fit / predict
// ============================================================================

XRFMModel xrfm_fit(const Dataset& train, const Dataset& val, const TreeParams& params,
                   const LeafHyperparams& hyper, TaskKind task) {
    hyper.validate();
    detail::PartitionPlan plan = detail::prepare_partition(train, val, params, hyper.kernel);

    for (auto& lp : plan.leaves) {
        Matrix xl = gather_rows(train.x, lp.train_rows);
        Matrix yl = gather_rows(train.y, lp.train_rows);

        std::vector<std::size_t> all_val = lp.val_from_val;
        Matrix xv(all_val.size() + lp.val_from_train.size(), train.x.cols());
        Matrix yv(xv.rows(), train.y.cols());
        for (std::size_t i = 0; i < lp.val_from_val.size(); ++i) {
            for (std::size_t k = 0; k < val.x.cols(); ++k) xv(i, k) = val.x(lp.val_from_val[i], k);
            for (std::size_t k = 0; k < val.y.cols(); ++k) yv(i, k) = val.y(lp.val_from_val[i], k);
        }
        const std::size_t off = lp.val_from_val.size();
        for (std::size_t i = 0; i < lp.val_from_train.size(); ++i) {
            for (std::size_t k = 0; k < train.x.cols(); ++k)
                xv(off + i, k) = train.x(lp.val_from_train[i], k);
            for (std::size_t k = 0; k < train.y.cols(); ++k)
                yv(off + i, k) = train.y(lp.val_from_train[i], k);
        }

        lp.node->model = fit_leaf_rfm(xl, yl, xv, yv, hyper, task,
                                      detail::leaf_fit_seed(params.seed, lp.node->path, 0));
    }

    XRFMModel model;
    model.root = std::move(plan.root);
    model.task = task;
    model.dim = train.x.cols();
    return model;
}

Predictions xrfm_predict(const XRFMModel& model, const Matrix& xq) {
    if (xq.cols() != model.dim)
        throw SchemaMismatch("predict: query has " + std::to_string(xq.cols()) +
                             " columns, model expects " + std::to_string(model.dim));
    std::vector<const TreeNode*> leaf_nodes = model.leaves();
    std::vector<std::vector<std::size_t>> rows_per_leaf(leaf_nodes.size());
    for (std::size_t r = 0; r < xq.rows(); ++r) {
        const TreeNode& leaf = route(xq.row(r), *model.root);
        for (std::size_t l = 0; l < leaf_nodes.size(); ++l)
            if (leaf_nodes[l] == &leaf) {
                rows_per_leaf[l].push_back(r);
                break;
            }
    }

    std::size_t c = 0;
    for (const TreeNode* leaf : leaf_nodes)
        if (leaf->model) c = std::max(c, leaf->model->outputs());
    if (c == 0) throw Error("predict: model has no fitted leaves");

    Predictions out;
    out.scores = Matrix(xq.rows(), c);
    for (std::size_t l = 0; l < leaf_nodes.size(); ++l) {
        if (rows_per_leaf[l].empty()) continue;
        if (!leaf_nodes[l]->model) throw Error("predict: unfitted leaf");
        Matrix block = gather_rows(xq, rows_per_leaf[l]);
        Matrix scores = predict_leaf(*leaf_nodes[l]->model, block);
        for (std::size_t i = 0; i < rows_per_leaf[l].size(); ++i)
            for (std::size_t k = 0; k < c; ++k) out.scores(rows_per_leaf[l][i], k) = scores(i, k);
    }

    if (model.task == TaskKind::classification) {
        out.labels.resize(xq.rows());
        for (std::size_t r = 0; r < xq.rows(); ++r) {
            const double* row = out.scores.row(r);
            int best = 0;
            for (std::size_t k = 1; k < c; ++k)
                if (row[k] > row[best]) best = static_cast<int>(k);
            out.labels[r] = best;
        }
    }
    return out;
}

// ============================================================================
// interpretability export
// ============================================================================

std::vector<LeafAgopSummary> export_leaf_agops(const XRFMModel& model) {
    std::vector<LeafAgopSummary> out;
    const auto leaf_nodes = model.leaves();
    for (std::size_t l = 0; l < leaf_nodes.size(); ++l) {
        const TreeNode* leaf = leaf_nodes[l];
        if (!leaf->model) continue;
        const LeafModel& lm = *leaf->model;
        LeafAgopSummary s;
        s.leaf = l;

        std::vector<double> diag;
        if (lm.diagonal) {
            diag = lm.feature_diag;
        } else {
            diag.resize(lm.feature_matrix.rows());
            for (std::size_t k = 0; k < diag.size(); ++k) diag[k] = lm.feature_matrix(k, k);
        }
        std::vector<std::size_t> order(diag.size());
        std::iota(order.begin(), order.end(), std::size_t{0});
        std::stable_sort(order.begin(), order.end(),
                         [&](std::size_t a, std::size_t b) { return diag[a] > diag[b]; });
        s.diag_ranking = order;
        s.diag_values.reserve(order.size());
        for (std::size_t k : order) s.diag_values.push_back(diag[k]);

        if (lm.diagonal) {
            s.eigenvalues = diag;
            std::stable_sort(s.eigenvalues.begin(), s.eigenvalues.end(), std::greater<>());
            s.top_eigenvector.assign(diag.size(), 0.0);
            s.top_eigenvector[order.front()] = 1.0;
        } else {
            EigDecomposition eig = sym_eigh(lm.feature_matrix);
            s.eigenvalues = eig.eigenvalues;
            s.top_eigenvector.resize(diag.size());
            for (std::size_t k = 0; k < diag.size(); ++k)
                s.top_eigenvector[k] = eig.eigenvectors(k, 0);
        }
        out.push_back(std::move(s));
    }
    return out;
}

} // namespace xrfm
