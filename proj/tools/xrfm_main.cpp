// xrfm command line: fit / predict / tune / explain / synth / bench.

#include <chrono>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include "CLI11.hpp"

#include "xrfm/bench.hpp"
#include "xrfm/data.hpp"
#include "xrfm/metrics.hpp"
#include "xrfm/model_io.hpp"
#include "xrfm/threads.hpp"
#include "xrfm/tree.hpp"
#include "xrfm/tuning.hpp"

namespace {

using namespace xrfm;

constexpr int kExitOk = 0;
constexpr int kExitUsage = 2;
constexpr int kExitNumerical = 3;

bool is_usage_error(const Error& e) {
    return dynamic_cast<const SchemaMismatch*>(&e) != nullptr ||
           dynamic_cast<const MissingTarget*>(&e) != nullptr ||
           dynamic_cast<const EmptyFile*>(&e) != nullptr ||
           dynamic_cast<const RaggedRow*>(&e) != nullptr ||
           dynamic_cast<const FormatError*>(&e) != nullptr ||
           dynamic_cast<const InvalidSpec*>(&e) != nullptr ||
           dynamic_cast<const InvalidNorm*>(&e) != nullptr ||
           dynamic_cast<const FractionOverflow*>(&e) != nullptr ||
           dynamic_cast<const LengthMismatch*>(&e) != nullptr ||
           dynamic_cast<const BlockMismatch*>(&e) != nullptr ||
           dynamic_cast<const EmptyValidation*>(&e) != nullptr ||
           dynamic_cast<const DimensionMismatch*>(&e) != nullptr;
}

template <typename Fn>
int run_guarded(Fn&& fn) {
    try {
        fn();
        return kExitOk;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return is_usage_error(e) ? kExitUsage : kExitNumerical;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitNumerical;
    }
}

TaskKind parse_task(const std::string& task) {
    if (task == "regression") return TaskKind::regression;
    if (task == "classification") return TaskKind::classification;
    throw FormatError("task must be 'regression' or 'classification'");
}

std::string format_g17(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

// ---- shared fit/tune plumbing -------------------------------------------

struct DataOptions {
    std::string train_path;
    std::string val_path;
    double val_frac = -1.0;
    std::string target;
    std::string task = "regression";
};

struct TreeOptions {
    std::size_t leaf_size = 2000;
    std::size_t split_sample = 5000;
    double split_ridge = 1e-3;
    std::uint64_t seed = 0;
    std::optional<std::size_t> refill_size; // set -> overrides the config value
    std::optional<int> iterations;
};

void add_data_options(CLI::App* cmd, DataOptions& opts, bool need_val) {
    cmd->add_option("--train", opts.train_path, "training CSV")->required();
    cmd->add_option("--target", opts.target, "target column name")->required();
    cmd->add_option("--task", opts.task, "regression|classification");
    if (need_val) {
        cmd->add_option("--val", opts.val_path, "validation CSV");
        cmd->add_option("--val-frac", opts.val_frac,
                        "fraction of --train held out for validation");
    }
}

void add_tree_options(CLI::App* cmd, TreeOptions& opts) {
    cmd->add_option("--leaf-size", opts.leaf_size, "maximum training rows per leaf");
    cmd->add_option("--split-sample", opts.split_sample, "points used to fit a split model");
    cmd->add_option("--split-ridge", opts.split_ridge, "ridge for split models");
    cmd->add_option("--seed", opts.seed, "rng seed");
    cmd->add_option("--refill-size", opts.refill_size,
                    "validation refill target per leaf (overrides the config)");
    cmd->add_option("--iterations", opts.iterations, "leaf RFM iterations (overrides the config)");
}

struct LoadedData {
    Table train_table;
    Table val_table;
    Preprocess prep;
    Dataset train;
    Dataset val;
    TaskKind task = TaskKind::regression;
};

LoadedData load_train_val(const DataOptions& opts, CatTransform transform, bool standardize_inputs,
                          std::uint64_t seed) {
    LoadedData out;
    out.task = parse_task(opts.task);
    Table full = load_csv(opts.train_path, opts.target);

    if (!opts.val_path.empty() && opts.val_frac >= 0.0)
        throw FormatError("pass either --val or --val-frac, not both");
    if (!opts.val_path.empty()) {
        SchemaHints hints;
        for (const auto& col : full.columns) hints.kinds[col.name] = col.kind;
        out.train_table = std::move(full);
        out.val_table = load_csv(opts.val_path, opts.target, hints);
    } else {
        const double frac = opts.val_frac >= 0.0 ? opts.val_frac : 0.1;
        if (frac <= 0.0 || frac >= 1.0) throw FormatError("--val-frac must lie in (0, 1)");
        auto parts = split_train_val_test(full, 1.0 - frac, frac, 0.0, seed,
                                          out.task == TaskKind::classification);
        out.train_table = std::move(parts[0]);
        out.val_table = std::move(parts[1]);
    }

    out.prep = fit_preprocess(out.train_table, transform, standardize_inputs, out.task);
    out.train = apply_preprocess(out.prep, out.train_table, out.task);
    out.val = apply_preprocess(out.prep, out.val_table, out.task);
    return out;
}

void describe_config(std::ostream& os, const LeafHyperparams& h, const TreeParams& tp,
                     CatTransform transform, bool standardized) {
    os << "config: bandwidth=" << h.kernel.bandwidth << " bandwidth_mode="
       << (h.kernel.bandwidth_mode == BandwidthMode::constant ? "constant"
           : h.kernel.adaptive_literal                        ? "adaptive_literal"
                                                              : "adaptive")
       << " kernel_type=" << (h.kernel.q_mode == QMode::product ? "K_pp" : "K_p2")
       << " exponent_p=" << h.kernel.p << " regularization=" << h.ridge
       << " diagonal=" << (h.diagonal ? "true" : "false")
       << " early_stop_multiplier=" << h.early_stop_multiplier
       << " iterations=" << h.iterations << " refill_size=" << tp.refill_size
       << " categorical=" << (transform == CatTransform::one_hot ? "one_hot" : "ordinal_encoding")
       << " normalization=" << (standardized ? "standard" : "none") << "\n";
}

void describe_fit(std::ostream& os, const XRFMModel& model, double seconds) {
    const auto leaves = model.leaves();
    os << "leaves: " << leaves.size() << "  depth: " << model.depth() << "\n";
    for (std::size_t l = 0; l < leaves.size(); ++l) {
        const auto& m = *leaves[l]->model;
        os << "leaf " << l << ": train=" << m.x_train.rows()
           << " best_iteration=" << m.best_iteration
           << " val_score=" << format_g17(m.best_val_error) << "\n";
    }
    os << "total fit time: " << seconds << " s\n";
}

// Resolve dataset-level choices from a (possibly fixed) space.
struct ResolvedGlobals {
    CatTransform transform = CatTransform::one_hot;
    bool standardize = true;
};

ResolvedGlobals resolve_globals(const SearchSpace& space, std::uint64_t seed) {
    ResolvedGlobals g;
    Rng rng(mix_seed(seed, 0x91eb'a175));
    const std::string cat = space.categorical_transform.sample(rng);
    if (cat == "one_hot") g.transform = CatTransform::one_hot;
    else if (cat == "ordinal_encoding" || cat == "ordinal") g.transform = CatTransform::ordinal;
    else throw FormatError("config: unknown categorical transformation '" + cat + "'");
    const std::string norm = space.normalization.sample(rng);
    if (norm == "standard") g.standardize = true;
    else if (norm == "none") g.standardize = false;
    else throw FormatError("config: unknown normalization '" + norm + "'");
    return g;
}

// ---- fit ------------------------------------------------------------------

struct FitOptions {
    DataOptions data;
    TreeOptions tree;
    std::string config_path;
    std::string out_path;
};

void run_fit(const FitOptions& opts) {
    SearchSpace space; // built-in defaults
    if (!opts.config_path.empty()) space = SearchSpace::load(opts.config_path);
    if (!space.all_fixed())
        throw FormatError("fit: the config file must pin every field to a single value "
                          "(distributions belong to 'tune')");
    if (opts.tree.iterations) space.iterations = *opts.tree.iterations;

    Rng rng(opts.tree.seed);
    LeafHyperparams hyper = sample_config(space, rng);

    TreeParams params;
    params.max_leaf_size = opts.tree.leaf_size;
    params.split_sample = opts.tree.split_sample;
    params.split_ridge = opts.tree.split_ridge;
    params.seed = opts.tree.seed;
    params.refill_size = opts.tree.refill_size.value_or(space.refill_size);

    ResolvedGlobals globals = resolve_globals(space, opts.tree.seed);
    LoadedData data = load_train_val(opts.data, globals.transform, globals.standardize,
                                     opts.tree.seed);

    describe_config(std::cout, hyper, params, globals.transform, globals.standardize);
    const auto t0 = std::chrono::steady_clock::now();
    XRFMModel model = xrfm_fit(data.train, data.val, params, hyper, data.task);
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    model.prep = data.prep;
    model.prep.target_name = opts.data.target;

    describe_fit(std::cout, model, seconds);
    if (!opts.out_path.empty()) {
        save_model(model, opts.out_path);
        std::cout << "model written to " << opts.out_path << "\n";
    }
}

// ---- predict -----------------------------------------------------------

struct PredictOptions {
    std::string model_path;
    std::string input_path;
    std::string out_path;
};

void write_predictions(const XRFMModel& model, const Predictions& preds, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw Error("predict: cannot open " + path);
    if (model.task == TaskKind::regression) {
        out << "prediction\n";
        for (std::size_t i = 0; i < preds.scores.rows(); ++i)
            out << format_g17(preds.scores(i, 0)) << "\n";
        return;
    }
    out << "label";
    for (const auto& name : model.prep.class_names) out << ",score_" << name;
    out << "\n";
    for (std::size_t i = 0; i < preds.scores.rows(); ++i) {
        out << model.prep.class_names[static_cast<std::size_t>(preds.labels[i])];
        for (std::size_t k = 0; k < preds.scores.cols(); ++k)
            out << ',' << format_g17(preds.scores(i, k));
        out << "\n";
    }
}

void run_predict(const PredictOptions& opts) {
    XRFMModel model = load_model(opts.model_path);
    SchemaHints hints;
    for (const auto& col : model.prep.schema) hints.kinds[col.name] = col.kind;

    Table table;
    try {
        table = load_csv(opts.input_path, model.prep.target_name, hints);
    } catch (const MissingTarget&) {
        table = load_csv(opts.input_path, "", hints); // inputs without labels are fine
    }
    Dataset ds = apply_preprocess(model.prep, table, model.task, /*require_target=*/false);
    Predictions preds = xrfm_predict(model, ds.x);
    write_predictions(model, preds, opts.out_path);
    std::cout << "wrote " << ds.x.rows() << " predictions to " << opts.out_path << "\n";
}

// ---- tune ----------------------------------------------------------------

struct TuneOptions {
    DataOptions data;
    TreeOptions tree;
    std::string space_name = "talent";
    std::size_t trials = 50;
    std::string out_path;
    std::string log_path;
};

void run_tune(const TuneOptions& opts) {
    SearchSpace space;
    if (opts.space_name == "talent") space = SearchSpace::talent();
    else if (opts.space_name == "metatest") space = SearchSpace::metatest();
    else space = SearchSpace::load(opts.space_name);
    if (opts.tree.iterations) space.iterations = *opts.tree.iterations;

    TreeParams params;
    params.max_leaf_size = opts.tree.leaf_size;
    params.split_sample = opts.tree.split_sample;
    params.split_ridge = opts.tree.split_ridge;
    params.seed = opts.tree.seed;
    params.refill_size = opts.tree.refill_size.value_or(space.refill_size);

    ResolvedGlobals globals = resolve_globals(space, opts.tree.seed);
    LoadedData data = load_train_val(opts.data, globals.transform, globals.standardize,
                                     opts.tree.seed);

    const auto t0 = std::chrono::steady_clock::now();
    TuneResult result = tune_per_leaf(data.train, data.val, space, opts.trials, params, data.task);
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    result.model.prep = data.prep;
    result.model.prep.target_name = opts.data.target;

    describe_fit(std::cout, result.model, seconds);
    for (std::size_t l = 0; l < result.best_trial.size(); ++l)
        std::cout << "leaf " << l << ": best_trial=" << result.best_trial[l]
                  << " best_score=" << format_g17(result.best_score[l]) << "\n";

    if (!opts.out_path.empty()) {
        save_model(result.model, opts.out_path);
        std::cout << "model written to " << opts.out_path << "\n";
    }
    if (!opts.log_path.empty()) {
        std::ofstream log(opts.log_path);
        if (!log) throw Error("tune: cannot open " + opts.log_path);
        log << "leaf,trial,ok,score,bandwidth,bandwidth_mode,kernel_type,exponent_p,"
               "regularization,diagonal,early_stop_multiplier,error\n";
        for (const auto& rec : result.log) {
            const auto& h = rec.config;
            log << rec.leaf << ',' << rec.trial << ',' << (rec.ok ? 1 : 0) << ','
                << format_g17(rec.score) << ',' << format_g17(h.kernel.bandwidth) << ','
                << (h.kernel.bandwidth_mode == BandwidthMode::constant ? "constant"
                    : h.kernel.adaptive_literal                        ? "adaptive_literal"
                                                                       : "adaptive")
                << ',' << (h.kernel.q_mode == QMode::product ? "K_pp" : "K_p2") << ','
                << format_g17(h.kernel.p) << ',' << format_g17(h.ridge) << ','
                << (h.diagonal ? "true" : "false") << ',' << format_g17(h.early_stop_multiplier)
                << ',' << rec.error << "\n";
        }
        std::cout << "trial log written to " << opts.log_path << "\n";
    }
}

// ---- explain ----------------------------------------------------------

struct ExplainOptions {
    std::string model_path;
    std::string leaf = "all";
    std::size_t top_k = 10;
    std::string format = "json";
    std::string out_path;
};

// Aggregate the encoded-space diagonal onto original columns (one-hot
// groups sum their block).
std::vector<std::pair<std::string, double>>
aggregate_importance(const Preprocess& prep, const std::vector<std::size_t>& ranking,
                     const std::vector<double>& values) {
    std::vector<double> diag(values.size());
    for (std::size_t r = 0; r < ranking.size(); ++r) diag[ranking[r]] = values[r];

    std::vector<std::string> names;
    std::vector<double> scores;
    if (prep.schema.empty() || prep.encoded_dim != diag.size()) {
        // Model fit on raw matrices: report encoded indices directly.
        for (std::size_t k = 0; k < diag.size(); ++k) {
            names.push_back("f" + std::to_string(k));
            scores.push_back(diag[k]);
        }
    } else {
        std::size_t at = 0;
        for (const auto& col : prep.schema) {
            const std::size_t width =
                col.kind == ColumnKind::categorical && prep.transform == CatTransform::one_hot
                    ? col.vocabulary.size()
                    : 1;
            double sum = 0.0;
            for (std::size_t k = 0; k < width; ++k) sum += diag[at + k];
            names.push_back(col.name);
            scores.push_back(sum);
            at += width;
        }
    }

    std::vector<std::size_t> order(names.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
    std::vector<std::pair<std::string, double>> out;
    for (std::size_t i : order) out.emplace_back(names[i], scores[i]);
    return out;
}

void run_explain(const ExplainOptions& opts) {
    XRFMModel model = load_model(opts.model_path);
    std::vector<LeafAgopSummary> summaries = export_leaf_agops(model);

    std::vector<std::size_t> wanted;
    if (opts.leaf == "all") {
        for (std::size_t l = 0; l < summaries.size(); ++l) wanted.push_back(l);
    } else {
        std::size_t idx = 0;
        try {
            idx = static_cast<std::size_t>(std::stoul(opts.leaf));
        } catch (const std::exception&) {
            throw FormatError("explain: --leaf must be 'all' or a leaf index");
        }
        if (idx >= summaries.size())
            throw FormatError("explain: leaf index " + opts.leaf + " out of range (0.." +
                              std::to_string(summaries.size() - 1) + ")");
        wanted.push_back(idx);
    }

    std::ostringstream out;
    if (opts.format == "json") {
        out << "[";
        bool first_leaf = true;
        for (std::size_t l : wanted) {
            const auto& s = summaries[l];
            auto agg = aggregate_importance(model.prep, s.diag_ranking, s.diag_values);
            if (!first_leaf) out << ",";
            first_leaf = false;
            out << "\n  {\"leaf\": " << l << ", \"top_features\": [";
            const std::size_t k_max = std::min(opts.top_k, agg.size());
            for (std::size_t k = 0; k < k_max; ++k) {
                if (k > 0) out << ", ";
                out << "{\"name\": \"" << agg[k].first << "\", \"importance\": "
                    << format_g17(agg[k].second) << "}";
            }
            out << "], \"eigenvalues\": [";
            for (std::size_t k = 0; k < s.eigenvalues.size(); ++k)
                out << (k ? ", " : "") << format_g17(s.eigenvalues[k]);
            out << "], \"top_eigenvector\": [";
            for (std::size_t k = 0; k < s.top_eigenvector.size(); ++k)
                out << (k ? ", " : "") << format_g17(s.top_eigenvector[k]);
            out << "]}";
        }
        out << "\n]\n";
    } else if (opts.format == "csv") {
        out << "leaf,kind,rank,name,value\n";
        for (std::size_t l : wanted) {
            const auto& s = summaries[l];
            auto agg = aggregate_importance(model.prep, s.diag_ranking, s.diag_values);
            const std::size_t k_max = std::min(opts.top_k, agg.size());
            for (std::size_t k = 0; k < k_max; ++k)
                out << l << ",feature," << k << ',' << agg[k].first << ','
                    << format_g17(agg[k].second) << "\n";
            for (std::size_t k = 0; k < s.eigenvalues.size(); ++k)
                out << l << ",eigenvalue," << k << ",," << format_g17(s.eigenvalues[k]) << "\n";
            for (std::size_t k = 0; k < s.top_eigenvector.size(); ++k)
                out << l << ",eigvec," << k << ",," << format_g17(s.top_eigenvector[k]) << "\n";
        }
    } else {
        throw FormatError("explain: --format must be json or csv");
    }

    if (opts.out_path.empty()) {
        std::cout << out.str();
    } else {
        std::ofstream f(opts.out_path);
        if (!f) throw Error("explain: cannot open " + opts.out_path);
        f << out.str();
        std::cout << "explanation written to " << opts.out_path << "\n";
    }
}

// ---- synth / bench ----------------------------------------------------

struct SynthOptions {
    std::string generator = "local-features";
    std::size_t n = 1000;
    std::size_t d = 16;
    std::uint64_t seed = 0;
    std::string out_path;
};

void run_synth(const SynthOptions& opts) {
    Table table;
    if (opts.generator == "local-features")
        table = synth_local_features(opts.n, opts.seed);
    else if (opts.generator == "single-index")
        table = synth_single_index(opts.n, opts.d, opts.seed);
    else
        throw FormatError("synth: --generator must be local-features or single-index");
    write_csv(table, opts.out_path);
    std::cout << "wrote " << table.rows << " rows to " << opts.out_path << "\n";
}

struct BenchOptions {
    std::string sizes = "25000,50000,100000";
    std::size_t leaf_size = 5000;
    std::uint64_t seed = 0;
    std::string out_path;
};

void run_bench(const BenchOptions& opts) {
    std::vector<std::size_t> sizes;
    std::stringstream ss(opts.sizes);
    std::string tok;
    while (std::getline(ss, tok, ','))
        if (!tok.empty()) sizes.push_back(static_cast<std::size_t>(std::stoull(tok)));
    if (sizes.empty()) throw FormatError("bench: --sizes is empty");

    std::vector<BenchRow> rows = run_scaling_bench(sizes, opts.leaf_size, opts.seed);
    const std::string csv = bench_to_csv(rows);
    std::cout << csv;
    if (!opts.out_path.empty()) {
        std::ofstream out(opts.out_path);
        if (!out) throw Error("bench: cannot open " + opts.out_path);
        out << csv;
    }
}

} // namespace

int main(int argc, char** argv) {
    xrfm::init_threads_from_env();

    CLI::App app{"xRFM: feature-learning kernel machines on an AGOP partition tree"};
    app.require_subcommand(1);

    FitOptions fit_opts;
    auto* fit = app.add_subcommand("fit", "fit a model");
    add_data_options(fit, fit_opts.data, true);
    add_tree_options(fit, fit_opts.tree);
    fit->add_option("--config", fit_opts.config_path, "fixed hyperparameter config (JSON)");
    fit->add_option("--out", fit_opts.out_path, "model output path");

    PredictOptions predict_opts;
    auto* predict = app.add_subcommand("predict", "predict with a saved model");
    predict->add_option("--model", predict_opts.model_path, "model file")->required();
    predict->add_option("--input", predict_opts.input_path, "input CSV")->required();
    predict->add_option("--out", predict_opts.out_path, "prediction CSV")->required();

    TuneOptions tune_opts;
    auto* tune = app.add_subcommand("tune", "per-leaf random search");
    add_data_options(tune, tune_opts.data, true);
    add_tree_options(tune, tune_opts.tree);
    tune->add_option("--space", tune_opts.space_name, "talent|metatest|PATH");
    tune->add_option("--trials", tune_opts.trials, "random search trials per leaf");
    tune->add_option("--out", tune_opts.out_path, "model output path");
    tune->add_option("--log", tune_opts.log_path, "trial log CSV path");

    ExplainOptions explain_opts;
    auto* explain = app.add_subcommand("explain", "per-leaf feature importances");
    explain->add_option("--model", explain_opts.model_path, "model file")->required();
    explain->add_option("--leaf", explain_opts.leaf, "leaf index or 'all'");
    explain->add_option("--top-k", explain_opts.top_k, "features to report per leaf");
    explain->add_option("--format", explain_opts.format, "json|csv");
    explain->add_option("--out", explain_opts.out_path, "output path (stdout when omitted)");

    SynthOptions synth_opts;
    auto* synth = app.add_subcommand("synth", "write a synthetic dataset");
    synth->add_option("--generator", synth_opts.generator, "local-features|single-index");
    synth->add_option("--n", synth_opts.n, "rows");
    synth->add_option("--d", synth_opts.d, "dimensions (single-index only)");
    synth->add_option("--seed", synth_opts.seed, "rng seed");
    synth->add_option("--out", synth_opts.out_path, "output CSV")->required();

    BenchOptions bench_opts;
    auto* bench = app.add_subcommand("bench", "fit-time scaling benchmark");
    bench->add_option("--sizes", bench_opts.sizes, "comma-separated training sizes");
    bench->add_option("--leaf-size", bench_opts.leaf_size, "maximum leaf size");
    bench->add_option("--seed", bench_opts.seed, "rng seed");
    bench->add_option("--out", bench_opts.out_path, "output CSV");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitUsage;
    }

    if (fit->parsed()) return run_guarded([&] { run_fit(fit_opts); });
    if (predict->parsed()) return run_guarded([&] { run_predict(predict_opts); });
    if (tune->parsed()) return run_guarded([&] { run_tune(tune_opts); });
    if (explain->parsed()) return run_guarded([&] { run_explain(explain_opts); });
    if (synth->parsed()) return run_guarded([&] { run_synth(synth_opts); });
    if (bench->parsed()) return run_guarded([&] { run_bench(bench_opts); });
    return kExitUsage;
}
