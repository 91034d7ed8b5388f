#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "xrfm/rng.hpp"
#include "xrfm/tree.hpp"

namespace xrfm {

// ============================================================================
// Random search over leaf hyperparameters
// ============================================================================

/// Scalar distribution: fixed value, uniform, or log-uniform.
struct NumericDist {
    enum class Kind { fixed, uniform, log_uniform };
    Kind kind = Kind::fixed;
    double lo = 0.0;
    double hi = 0.0; // fixed value lives in lo

    static NumericDist fixed(double v) { return {Kind::fixed, v, v}; }
    static NumericDist uniform(double lo, double hi);
    static NumericDist log_uniform(double lo, double hi);

    bool is_fixed() const { return kind == Kind::fixed; }
    double sample(Rng& rng) const;
    bool contains(double v) const;
};

/// Categorical distribution over string-valued options.
struct ChoiceDist {
    std::vector<std::string> choices;

    bool is_fixed() const { return choices.size() == 1; }
    const std::string& sample(Rng& rng) const;
    bool contains(const std::string& v) const;
};

struct SearchSpace {
    NumericDist bandwidth = NumericDist::fixed(10.0);
    ChoiceDist bandwidth_mode{{"constant"}};
    ChoiceDist categorical_transform{{"one_hot"}}; // dataset-level
    ChoiceDist diagonal{{"false"}};
    NumericDist early_stop_multiplier = NumericDist::fixed(1.06);
    NumericDist exponent_p = NumericDist::fixed(1.0);
    ChoiceDist kernel_type{{"K_p2"}}; // K_pp | K_p2
    ChoiceDist normalization{{"standard"}}; // dataset-level
    NumericDist regularization = NumericDist::fixed(1e-3);
    std::size_t refill_size = 1500; // tree-level

    // Pinned leaf settings not part of the searched table.
    int iterations = 8;
    double stability_eps = 1e-12;
    double transform_exponent = 0.5;

    static SearchSpace talent();
    static SearchSpace metatest();
    /// Parses a config file; scalars are fixed values, {"uniform": [lo,hi]},
    /// {"log_uniform": [lo,hi]} and {"choices": [...]} are distributions.
    static SearchSpace load(const std::string& path);
    static SearchSpace parse(const std::string& json_text);

    /// True when every searched field is pinned to a single value.
    bool all_fixed() const;
};

/// Draws one leaf configuration. Dataset-level fields (categorical
/// transform, normalization, refill size) are resolved by the caller
/// before data is encoded and are not drawn here.
LeafHyperparams sample_config(const SearchSpace& space, Rng& rng);

// ---- per-leaf random search -------------------------------------------

struct TrialRecord {
    std::size_t leaf = 0;
    std::size_t trial = 0;
    LeafHyperparams config;
    double score = 0.0; // +inf for failed fits
    bool ok = true;
    std::string error;
};

struct TuneResult {
    XRFMModel model;
    std::vector<TrialRecord> log;              // (leaf-major, trial) order
    std::vector<std::size_t> best_trial;       // per leaf
    std::vector<double> best_score;            // per leaf
};

/// Builds the partition once, then evaluates `trials` sampled configs on
/// every leaf and keeps the best per leaf. Config j is shared across
/// leaves and drawn from a per-trial stream, so a larger trial budget
/// replays the smaller one's draws. Failed fits score +inf and stay in
/// the log.
TuneResult tune_per_leaf(const Dataset& train, const Dataset& val, const SearchSpace& space,
                         std::size_t trials, const TreeParams& params, TaskKind task);

} // namespace xrfm
