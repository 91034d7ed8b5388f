#include "xrfm/tuning.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "json.hpp"

namespace xrfm {

namespace {
constexpr std::uint64_t kTrialSalt = 0x7e57'c0f6;
}

// ============================================================================
// distributions
// ============================================================================

NumericDist NumericDist::uniform(double lo, double hi) {
    if (!(lo < hi)) throw InvalidSpec("uniform distribution needs lo < hi");
    return {Kind::uniform, lo, hi};
}

NumericDist NumericDist::log_uniform(double lo, double hi) {
    if (!(lo < hi) || !(lo > 0.0)) throw InvalidSpec("log-uniform needs 0 < lo < hi");
    return {Kind::log_uniform, lo, hi};
}

double NumericDist::sample(Rng& rng) const {
    switch (kind) {
    case Kind::fixed: return lo;
    case Kind::uniform: return rng.uniform(lo, hi);
    case Kind::log_uniform: return rng.log_uniform(lo, hi);
    }
    return lo;
}

bool NumericDist::contains(double v) const {
    return kind == Kind::fixed ? v == lo : v >= lo && v <= hi;
}

const std::string& ChoiceDist::sample(Rng& rng) const {
    if (choices.empty()) throw InvalidSpec("choice distribution is empty");
    if (choices.size() == 1) return choices.front();
    return choices[rng.next_below(choices.size())];
}

bool ChoiceDist::contains(const std::string& v) const {
    return std::find(choices.begin(), choices.end(), v) != choices.end();
}

// ============================================================================
// built-in spaces
// ============================================================================

SearchSpace SearchSpace::talent() {
    SearchSpace s;
    s.bandwidth = NumericDist::log_uniform(1.0, 200.0);
    s.bandwidth_mode = ChoiceDist{{"constant"}};
    s.categorical_transform = ChoiceDist{{"one_hot"}};
    s.diagonal = ChoiceDist{{"false", "true"}};
    s.early_stop_multiplier = NumericDist::fixed(1.06);
    s.exponent_p = NumericDist::uniform(0.7, 1.4);
    s.kernel_type = ChoiceDist{{"K_pp", "K_p2"}};
    s.normalization = ChoiceDist{{"standard"}};
    s.regularization = NumericDist::log_uniform(1e-6, 1.0);
    s.refill_size = 1500;
    return s;
}

SearchSpace SearchSpace::metatest() {
    SearchSpace s;
    s.bandwidth = NumericDist::log_uniform(0.4, 80.0);
    s.bandwidth_mode = ChoiceDist{{"constant", "adaptive"}};
    s.categorical_transform = ChoiceDist{{"ordinal_encoding", "one_hot"}};
    s.diagonal = ChoiceDist{{"false", "true"}};
    s.early_stop_multiplier = NumericDist::fixed(1.05);
    s.exponent_p = NumericDist::uniform(0.7, 1.3);
    s.kernel_type = ChoiceDist{{"K_pp", "K_p2"}};
    s.normalization = ChoiceDist{{"standard"}};
    s.regularization = NumericDist::log_uniform(1e-5, 50.0);
    s.refill_size = 1500;
    return s;
}

// ============================================================================
// config parsing
// ============================================================================

namespace {

using nlohmann::json;

std::string choice_to_string(const json& v) {
    if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
    if (v.is_string()) return v.get<std::string>();
    throw FormatError("config: expected a string or boolean choice");
}

NumericDist parse_numeric(const json& v, const std::string& field) {
    if (v.is_number()) return NumericDist::fixed(v.get<double>());
    if (v.is_object()) {
        if (v.contains("uniform")) {
            auto arr = v.at("uniform");
            return NumericDist::uniform(arr.at(0).get<double>(), arr.at(1).get<double>());
        }
        if (v.contains("log_uniform")) {
            auto arr = v.at("log_uniform");
            return NumericDist::log_uniform(arr.at(0).get<double>(), arr.at(1).get<double>());
        }
    }
    throw FormatError("config: field '" + field +
                      "' must be a number, {\"uniform\": [lo, hi]}, or {\"log_uniform\": [lo, hi]}");
}

ChoiceDist parse_choice(const json& v, const std::string& field) {
    ChoiceDist dist;
    if (v.is_object() && v.contains("choices")) {
        for (const auto& c : v.at("choices")) dist.choices.push_back(choice_to_string(c));
    } else {
        dist.choices.push_back(choice_to_string(v));
    }
    if (dist.choices.empty()) throw FormatError("config: field '" + field + "' has no choices");
    return dist;
}

} // namespace

SearchSpace SearchSpace::parse(const std::string& json_text) {
    json doc;
    try {
        doc = json::parse(json_text);
    } catch (const json::exception& e) {
        throw FormatError(std::string("config: invalid JSON: ") + e.what());
    }
    if (!doc.is_object()) throw FormatError("config: top level must be an object");

    SearchSpace s;
    for (const auto& [key, value] : doc.items()) {
        if (key == "bandwidth") s.bandwidth = parse_numeric(value, key);
        else if (key == "bandwidth_mode") s.bandwidth_mode = parse_choice(value, key);
        else if (key == "categorical_transformations") s.categorical_transform = parse_choice(value, key);
        else if (key == "diagonal") s.diagonal = parse_choice(value, key);
        else if (key == "early_stop_multiplier") s.early_stop_multiplier = parse_numeric(value, key);
        else if (key == "exponent_p") s.exponent_p = parse_numeric(value, key);
        else if (key == "kernel_type") s.kernel_type = parse_choice(value, key);
        else if (key == "normalization") s.normalization = parse_choice(value, key);
        else if (key == "regularization") s.regularization = parse_numeric(value, key);
        else if (key == "refill_size") s.refill_size = value.get<std::size_t>();
        else if (key == "iterations") s.iterations = value.get<int>();
        else if (key == "stability_eps") s.stability_eps = value.get<double>();
        else if (key == "transform_exponent") s.transform_exponent = value.get<double>();
        else throw FormatError("config: unknown field '" + key + "'");
    }
    return s;
}

SearchSpace SearchSpace::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("config: cannot open " + path);
    std::stringstream buf;
    buf << in.rdbuf();
    return parse(buf.str());
}

bool SearchSpace::all_fixed() const {
    return bandwidth.is_fixed() && bandwidth_mode.is_fixed() && categorical_transform.is_fixed() &&
           diagonal.is_fixed() && early_stop_multiplier.is_fixed() && exponent_p.is_fixed() &&
           kernel_type.is_fixed() && normalization.is_fixed() && regularization.is_fixed();
}

// ============================================================================
// sampling
// ============================================================================

LeafHyperparams sample_config(const SearchSpace& space, Rng& rng) {
    LeafHyperparams h;
    h.kernel.bandwidth = space.bandwidth.sample(rng);

    const std::string mode = space.bandwidth_mode.sample(rng);
    if (mode == "constant") {
        h.kernel.bandwidth_mode = BandwidthMode::constant;
    } else if (mode == "adaptive") {
        h.kernel.bandwidth_mode = BandwidthMode::adaptive;
    } else if (mode == "adaptive_literal") {
        h.kernel.bandwidth_mode = BandwidthMode::adaptive;
        h.kernel.adaptive_literal = true;
    } else {
        throw FormatError("config: unknown bandwidth_mode '" + mode + "'");
    }

    const std::string diag = space.diagonal.sample(rng);
    if (diag != "true" && diag != "false")
        throw FormatError("config: diagonal must be true or false");
    h.diagonal = diag == "true";

    h.early_stop_multiplier = space.early_stop_multiplier.sample(rng);
    h.kernel.p = space.exponent_p.sample(rng);

    const std::string kt = space.kernel_type.sample(rng);
    if (kt == "K_pp") h.kernel.q_mode = QMode::product;
    else if (kt == "K_p2") h.kernel.q_mode = QMode::euclidean;
    else throw FormatError("config: unknown kernel_type '" + kt + "'");

    h.ridge = space.regularization.sample(rng);
    h.iterations = space.iterations;
    h.stability_eps = space.stability_eps;
    h.transform_exponent = space.transform_exponent;
    return h;
}

// ============================================================================
// per-leaf random search
// ============================================================================

TuneResult tune_per_leaf(const Dataset& train, const Dataset& val, const SearchSpace& space,
                         std::size_t trials, const TreeParams& params, TaskKind task) {
    if (trials < 1) throw InvalidSpec("tune: trial budget must be >= 1");

    // One config per trial, shared across leaves; per-trial streams keep a
    // larger budget a superset of a smaller one.
    std::vector<LeafHyperparams> configs;
    configs.reserve(trials);
    for (std::size_t j = 0; j < trials; ++j) {
        Rng rng(mix_seed(params.seed, kTrialSalt, j));
        configs.push_back(sample_config(space, rng));
    }

    // The tree is built once, with the first config's kernel, and reused
    // for every trial.
    detail::PartitionPlan plan = detail::prepare_partition(train, val, params, configs[0].kernel);

    TuneResult result;
    result.best_trial.assign(plan.leaves.size(), 0);
    result.best_score.assign(plan.leaves.size(), std::numeric_limits<double>::infinity());

    for (std::size_t l = 0; l < plan.leaves.size(); ++l) {
        auto& lp = plan.leaves[l];
        Matrix xl(lp.train_rows.size(), train.x.cols());
        Matrix yl(lp.train_rows.size(), train.y.cols());
        for (std::size_t i = 0; i < lp.train_rows.size(); ++i) {
            for (std::size_t k = 0; k < train.x.cols(); ++k) xl(i, k) = train.x(lp.train_rows[i], k);
            for (std::size_t k = 0; k < train.y.cols(); ++k) yl(i, k) = train.y(lp.train_rows[i], k);
        }
        Matrix xv(lp.val_from_val.size() + lp.val_from_train.size(), train.x.cols());
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

        std::optional<LeafModel> best;
        for (std::size_t j = 0; j < trials; ++j) {
            TrialRecord rec;
            rec.leaf = l;
            rec.trial = j;
            rec.config = configs[j];
            try {
                LeafModel m = fit_leaf_rfm(xl, yl, xv, yv, configs[j], task,
                                           detail::leaf_fit_seed(params.seed, lp.node->path, j));
                rec.score = m.best_val_error;
                if (rec.score < result.best_score[l]) {
                    result.best_score[l] = rec.score;
                    result.best_trial[l] = j;
                    best = std::move(m);
                }
            } catch (const Error& e) {
                rec.score = std::numeric_limits<double>::infinity();
                rec.ok = false;
                rec.error = e.what();
            }
            result.log.push_back(std::move(rec));
        }
        if (!best)
            throw SolveFailed("tune: every trial failed for leaf " + std::to_string(l));
        lp.node->model = std::move(*best);
    }

    result.model.root = std::move(plan.root);
    result.model.task = task;
    result.model.dim = train.x.cols();
    return result;
}

} // namespace xrfm
