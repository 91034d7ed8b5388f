#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "xrfm/data.hpp"
#include "xrfm/leaf_rfm.hpp"

namespace xrfm {

// ============================================================================
// AGOP-eigenvector median partition tree
// ============================================================================

struct TreeParams {
    std::size_t split_sample = 5000; // N: points used to fit a split model
    std::size_t max_leaf_size = 2000; // C
    double split_ridge = 1e-3;       // lambda for split models
    std::uint64_t seed = 0;
    std::size_t refill_size = 1500;  // N_val

    void validate() const;
};

/// Internal nodes carry a unit split vector and a median threshold; leaves
/// carry the training rows routed to them and, once fitted, a LeafModel.
struct TreeNode {
    // internal
    std::vector<double> split_vector;
    double threshold = 0.0;
    std::unique_ptr<TreeNode> left;
    std::unique_ptr<TreeNode> right;
    // leaf
    std::vector<std::size_t> train_indices;
    std::vector<std::size_t> val_indices; // rows of the validation set routed here
    std::optional<LeafModel> model;

    std::uint64_t path = 1; // heap path id (root = 1), seeds per-node rngs

    bool is_leaf() const { return left == nullptr; }
};

/// Builds the partition skeleton: datasets at the leaves, no leaf models.
/// Split models are single ridge solves on a node-seeded subsample; the
/// split direction is the top eigenvector of their AGOP and rows with
/// projection <= median go left. A node whose projections are all equal
/// falls back to a stable index-order split into two halves.
std::unique_ptr<TreeNode> tree_partition(const Matrix& x, const Matrix& y,
                                         const TreeParams& params, const KernelSpec& kernel);

/// Descends to the unique leaf for x (<= threshold goes left).
const TreeNode& route(const double* x, const TreeNode& root);

struct XRFMModel {
    std::unique_ptr<TreeNode> root;
    TaskKind task = TaskKind::regression;
    Preprocess prep;                      // identity when fit on raw matrices
    std::size_t dim = 0;

    std::size_t leaf_count() const;
    std::size_t depth() const;
    /// Leaves in stable left-to-right order.
    std::vector<const TreeNode*> leaves() const;
    std::vector<TreeNode*> leaves();
};

/// Builds the partition, routes validation rows to leaves, refills leaf
/// validation sets below the refill target by moving held-out training
/// rows, and fits one leaf RFM per leaf.
XRFMModel xrfm_fit(const Dataset& train, const Dataset& val, const TreeParams& params,
                   const LeafHyperparams& hyper, TaskKind task);

struct Predictions {
    Matrix scores;           // m x c
    std::vector<int> labels; // classification argmax (lowest index wins ties)
};

/// Routes every query row and applies the leaf predictor. Throws
/// SchemaMismatch when the query width differs from the training schema.
Predictions xrfm_predict(const XRFMModel& model, const Matrix& xq);

// ---- interpretability ------------------------------------------------------

struct LeafAgopSummary {
    std::size_t leaf = 0;
    std::vector<std::size_t> diag_ranking; // feature indices, diag(M) descending
    std::vector<double> diag_values;       // aligned with diag_ranking
    std::vector<double> eigenvalues;       // descending
    std::vector<double> top_eigenvector;   // signed
};

/// Per-leaf feature matrix summaries in stable leaf order.
std::vector<LeafAgopSummary> export_leaf_agops(const XRFMModel& model);

// ---- shared partition plumbing (also used by per-leaf tuning) --------------

namespace detail {

struct LeafPlan {
    TreeNode* node = nullptr;
    std::vector<std::size_t> train_rows; // rows of the train dataset
    std::vector<std::size_t> val_from_val;   // rows of the val dataset
    std::vector<std::size_t> val_from_train; // train rows moved into validation
};

struct PartitionPlan {
    std::unique_ptr<TreeNode> root;
    std::vector<LeafPlan> leaves;
};

/// tree_partition + validation routing + refill, without fitting leaves.
PartitionPlan prepare_partition(const Dataset& train, const Dataset& val,
                                const TreeParams& params, const KernelSpec& kernel);

/// Deterministic per-leaf fit seed shared by xrfm_fit and tuning.
std::uint64_t leaf_fit_seed(std::uint64_t seed, std::uint64_t path, std::uint64_t trial);

} // namespace detail

} // namespace xrfm
