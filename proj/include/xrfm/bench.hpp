#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace xrfm {

// ============================================================================
// Scaling benchmark: fit on synthetic data at several sizes
// ============================================================================

struct BenchRow {
    std::size_t n = 0;
    double fit_seconds = 0.0;
    double predict_seconds_per_1000 = 0.0;
    std::size_t leaf_count = 0;
};

/// Fits an xRFM on synth_local_features data at each size with a fixed
/// lean configuration (two RFM iterations, diagonal mode) and measures
/// wall time. Used by the CLI bench command and the scaling checks.
std::vector<BenchRow> run_scaling_bench(const std::vector<std::size_t>& sizes,
                                        std::size_t leaf_size, std::uint64_t seed);

std::string bench_to_csv(const std::vector<BenchRow>& rows);

} // namespace xrfm
