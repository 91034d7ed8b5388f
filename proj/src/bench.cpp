#include "xrfm/bench.hpp"

#include <chrono>
#include <sstream>

#include "xrfm/data.hpp"
#include "xrfm/rng.hpp"
#include "xrfm/tree.hpp"

namespace xrfm {

namespace {

double seconds_since(std::chrono::steady_clock::time_point start) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

} // namespace

std::vector<BenchRow> run_scaling_bench(const std::vector<std::size_t>& sizes,
                                        std::size_t leaf_size, std::uint64_t seed) {
    std::vector<BenchRow> rows;
    for (std::size_t n : sizes) {
        Table train_t = synth_local_features(n, mix_seed(seed, n));
        Table val_t = synth_local_features(std::max<std::size_t>(1000, n / 20), mix_seed(seed, n, 1));
        Table query_t = synth_local_features(2000, mix_seed(seed, n, 2));

        Preprocess prep = fit_preprocess(train_t, CatTransform::one_hot, true,
                                         TaskKind::regression);
        Dataset train = apply_preprocess(prep, train_t, TaskKind::regression);
        Dataset val = apply_preprocess(prep, val_t, TaskKind::regression);
        Dataset query = apply_preprocess(prep, query_t, TaskKind::regression);

        TreeParams params;
        params.max_leaf_size = leaf_size;
        params.seed = mix_seed(seed, n, 3);

        // Lean leaf configuration: the benchmark measures scaling, not
        // accuracy, so two iterations in diagonal mode keep the runs short.
        LeafHyperparams hyper;
        hyper.kernel.p = 1.0;
        hyper.kernel.q_mode = QMode::euclidean;
        hyper.kernel.bandwidth = 10.0;
        hyper.ridge = 1e-3;
        hyper.iterations = 2;
        hyper.diagonal = true;

        BenchRow row;
        row.n = n;

        auto t0 = std::chrono::steady_clock::now();
        XRFMModel model = xrfm_fit(train, val, params, hyper, TaskKind::regression);
        row.fit_seconds = seconds_since(t0);
        row.leaf_count = model.leaf_count();

        t0 = std::chrono::steady_clock::now();
        Predictions preds = xrfm_predict(model, query.x);
        (void)preds;
        row.predict_seconds_per_1000 =
            seconds_since(t0) * 1000.0 / static_cast<double>(query.x.rows());

        rows.push_back(row);
    }
    return rows;
}

std::string bench_to_csv(const std::vector<BenchRow>& rows) {
    std::ostringstream out;
    out.precision(6);
    out << "n,fit_seconds,predict_seconds_per_1000,leaves\n";
    for (const auto& row : rows)
        out << row.n << ',' << std::fixed << row.fit_seconds << ','
            << row.predict_seconds_per_1000 << ',' << row.leaf_count << '\n';
    return out.str();
}

} // namespace xrfm
