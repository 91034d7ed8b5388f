#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "xrfm/leaf_rfm.hpp"
#include "xrfm/linalg.hpp"

namespace xrfm {

// ============================================================================
// Tabular data: parsing, encoding, standardization, synthetic generators
// ============================================================================

enum class ColumnKind { numeric, categorical };
enum class CatTransform { one_hot, ordinal };

struct ColumnSchema {
    std::string name;
    ColumnKind kind = ColumnKind::numeric;
    std::vector<std::string> vocabulary; // categorical only, dense codes 0..c-1
};

/// Parsed CSV before encoding. Numeric cells are imputed with the column
/// median; missing categorical cells become a dedicated "" category.
struct Table {
    std::vector<ColumnSchema> columns;
    std::vector<std::vector<double>> numeric_data;   // per numeric column
    std::vector<std::vector<int>> categorical_data;  // per categorical column, codes
    std::vector<std::size_t> storage_index;          // column -> index in its kind store
    std::size_t rows = 0;

    std::string target_name;
    bool target_is_numeric = false;
    std::vector<double> target_numeric;
    std::vector<std::string> target_raw;

    bool has_target() const { return !target_name.empty(); }
};

struct SchemaHints {
    std::map<std::string, ColumnKind> kinds;
};

/// Loads a headered CSV. Columns are numeric unless a non-numeric token
/// appears (hints override). Pass an empty target name to load feature
/// columns only.
Table load_csv(const std::string& path, const std::string& target_column,
               const SchemaHints& hints = {});

/// Writes the same dialect load_csv reads (comma separated, header row,
/// '.' decimals, empty cell = missing).
void write_csv(const Table& table, const std::string& path);

// ---- encoding ----------------------------------------------------------

/// One-hot column group [begin, end) produced by feature column `source`.
struct ColumnSpan {
    std::size_t begin = 0;
    std::size_t end = 0;
    std::size_t source = 0;
};

/// Encodes a table into a design matrix. one_hot expands categorical
/// columns into indicator groups (recorded as spans); ordinal emits the
/// code as a single numeric column. Codes below zero (unknown categories)
/// become an all-zero one-hot row or a -1 ordinal value.
std::pair<Matrix, std::vector<ColumnSpan>> encode(const Table& table, CatTransform transform);

struct StandardizeStats {
    std::vector<double> mean;
    std::vector<double> std; // population convention (divide by n)
};

/// Z-scores every column of a training matrix; zero-variance columns map
/// to all zeros.
std::pair<Matrix, StandardizeStats> standardize(const Matrix& train);

/// Applies stored stats to another matrix (idempotent on the training
/// matrix it came from).
Matrix apply_standardize(const StandardizeStats& stats, const Matrix& m);

// ---- fitted preprocessing pipeline -------------------------------------

/// Everything needed to map a raw table into model inputs: the training
/// schema, categorical transform, scaler stats, and the label vocabulary.
struct Preprocess {
    std::vector<ColumnSchema> schema;
    CatTransform transform = CatTransform::one_hot;
    bool standardized = true;
    StandardizeStats stats;
    std::vector<ColumnSpan> spans;
    std::size_t encoded_dim = 0;
    std::vector<std::string> class_names; // classification label vocabulary
    std::string target_name;
};

/// Encoded dataset ready for fitting.
struct Dataset {
    Matrix x;
    Matrix y;                     // n x 1 regression, n x k one-hot classification
    std::vector<int> labels;      // classification codes (-1 for unseen)
    std::vector<ColumnSpan> cat_spans;

    std::size_t size() const { return x.rows(); }
};

Preprocess fit_preprocess(const Table& train, CatTransform transform, bool standardize_inputs,
                          TaskKind task);

/// Encodes a table under a fitted preprocess. Unknown categories map to a
/// zero one-hot row / -1 ordinal. Throws SchemaMismatch when the columns
/// differ from the training schema. `require_target` controls whether the
/// table must carry labels.
Dataset apply_preprocess(const Preprocess& prep, const Table& table, TaskKind task,
                         bool require_target = true);

// ---- splits -------------------------------------------------------------

/// Disjoint shuffled split; classification splits are stratified by label
/// (per-class counts within one row of the global proportions). Fractions
/// must be positive-or-zero and sum to at most 1 (FractionOverflow).
/// `stratify` defaults to "the target is non-numeric"; classification
/// callers with numeric label tokens can force it.
std::array<Table, 3> split_train_val_test(const Table& table, double f_train, double f_val,
                                          double f_test, std::uint64_t seed,
                                          std::optional<bool> stratify = std::nullopt);

// ---- synthetic generators ------------------------------------------------

/// d = 16 standard normal inputs; y = x1*x3 + x5 when x0 > 0, else
/// x9*x11 + x13. Two disjoint groups of relevant coordinates gated by x0.
Table synth_local_features(std::size_t n, std::uint64_t seed);

/// y = (u . x)^2 for a fixed random unit vector u drawn from the seed.
Table synth_single_index(std::size_t n, std::size_t d, std::uint64_t seed);

} // namespace xrfm
