#include "xrfm/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <numeric>
#include <sstream>

#include "xrfm/rng.hpp"

namespace xrfm {

namespace {

std::vector<std::string> split_fields(const std::string& line) {
    std::vector<std::string> out;
    std::string field;
    for (char ch : line) {
        if (ch == ',') {
            out.push_back(field);
            field.clear();
        } else if (ch != '\r') {
            field.push_back(ch);
        }
    }
    out.push_back(field);
    return out;
}

bool parse_double(const std::string& tok, double& out) {
    if (tok.empty()) return false;
    const char* begin = tok.c_str();
    char* end = nullptr;
    out = std::strtod(begin, &end);
    return end == begin + tok.size() && std::isfinite(out);
}

double median_value(std::vector<double> values) {
    if (values.empty()) return 0.0;
    std::sort(values.begin(), values.end());
    const std::size_t n = values.size();
    return n % 2 == 1 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

std::string format_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

} // namespace

// ============================================================================
// CSV loading / writing
// ============================================================================

Table load_csv(const std::string& path, const std::string& target_column,
               const SchemaHints& hints) {
    std::ifstream in(path);
    if (!in) throw Error("load_csv: cannot open " + path);

    std::string line;
    if (!std::getline(in, line)) throw EmptyFile("load_csv: " + path + " is empty");
    const std::vector<std::string> header = split_fields(line);
    const std::size_t width = header.size();

    std::vector<std::vector<std::string>> cells;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line == "\r") continue;
        std::vector<std::string> fields = split_fields(line);
        if (fields.size() != width)
            throw RaggedRow("load_csv: line " + std::to_string(line_no) + " has " +
                            std::to_string(fields.size()) + " fields, expected " +
                            std::to_string(width));
        cells.push_back(std::move(fields));
    }
    if (cells.empty()) throw EmptyFile("load_csv: " + path + " has no data rows");

    std::size_t target_idx = width;
    if (!target_column.empty()) {
        for (std::size_t j = 0; j < width; ++j)
            if (header[j] == target_column) target_idx = j;
        if (target_idx == width)
            throw MissingTarget("load_csv: no column named '" + target_column + "'");
    }

    Table table;
    table.rows = cells.size();
    table.target_name = target_idx < width ? target_column : "";

    for (std::size_t j = 0; j < width; ++j) {
        if (j == target_idx) continue;

        ColumnKind kind;
        auto hint = hints.kinds.find(header[j]);
        if (hint != hints.kinds.end()) {
            kind = hint->second;
        } else {
            kind = ColumnKind::numeric;
            for (const auto& row : cells) {
                double v;
                if (!row[j].empty() && !parse_double(row[j], v)) {
                    kind = ColumnKind::categorical;
                    break;
                }
            }
        }

        ColumnSchema schema;
        schema.name = header[j];
        schema.kind = kind;

        if (kind == ColumnKind::numeric) {
            std::vector<double> col(table.rows);
            std::vector<double> present;
            std::vector<std::size_t> missing;
            for (std::size_t i = 0; i < table.rows; ++i) {
                double v;
                if (parse_double(cells[i][j], v)) {
                    col[i] = v;
                    present.push_back(v);
                } else {
                    missing.push_back(i);
                }
            }
            const double fill = median_value(present);
            for (std::size_t i : missing) col[i] = fill;
            table.storage_index.push_back(table.numeric_data.size());
            table.numeric_data.push_back(std::move(col));
        } else {
            std::vector<int> codes(table.rows);
            for (std::size_t i = 0; i < table.rows; ++i) {
                const std::string& tok = cells[i][j]; // "" is the missing category
                auto it = std::find(schema.vocabulary.begin(), schema.vocabulary.end(), tok);
                if (it == schema.vocabulary.end()) {
                    schema.vocabulary.push_back(tok);
                    codes[i] = static_cast<int>(schema.vocabulary.size() - 1);
                } else {
                    codes[i] = static_cast<int>(it - schema.vocabulary.begin());
                }
            }
            table.storage_index.push_back(table.categorical_data.size());
            table.categorical_data.push_back(std::move(codes));
        }
        table.columns.push_back(std::move(schema));
    }

    if (target_idx < width) {
        table.target_raw.resize(table.rows);
        table.target_numeric.assign(table.rows, 0.0);
        table.target_is_numeric = true;
        for (std::size_t i = 0; i < table.rows; ++i) {
            table.target_raw[i] = cells[i][target_idx];
            double v;
            if (parse_double(cells[i][target_idx], v))
                table.target_numeric[i] = v;
            else
                table.target_is_numeric = false;
        }
    }
    return table;
}

void write_csv(const Table& table, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw Error("write_csv: cannot open " + path);

    for (std::size_t j = 0; j < table.columns.size(); ++j) {
        if (j > 0) out << ',';
        out << table.columns[j].name;
    }
    if (table.has_target()) {
        if (!table.columns.empty()) out << ',';
        out << table.target_name;
    }
    out << '\n';

    for (std::size_t i = 0; i < table.rows; ++i) {
        for (std::size_t j = 0; j < table.columns.size(); ++j) {
            if (j > 0) out << ',';
            const auto& col = table.columns[j];
            if (col.kind == ColumnKind::numeric)
                out << format_double(table.numeric_data[table.storage_index[j]][i]);
            else
                out << col.vocabulary[table.categorical_data[table.storage_index[j]][i]];
        }
        if (table.has_target()) {
            if (!table.columns.empty()) out << ',';
            if (table.target_is_numeric)
                out << format_double(table.target_numeric[i]);
            else
                out << table.target_raw[i];
        }
        out << '\n';
    }
}

// ============================================================================
// encoding
// ============================================================================

std::pair<Matrix, std::vector<ColumnSpan>> encode(const Table& table, CatTransform transform) {
    std::size_t width = 0;
    for (const auto& col : table.columns)
        width += col.kind == ColumnKind::numeric ? 1
                 : transform == CatTransform::one_hot ? col.vocabulary.size()
                                                      : 1;

    Matrix x(table.rows, width);
    std::vector<ColumnSpan> spans;
    std::size_t at = 0;
    for (std::size_t j = 0; j < table.columns.size(); ++j) {
        const auto& col = table.columns[j];
        if (col.kind == ColumnKind::numeric) {
            const auto& values = table.numeric_data[table.storage_index[j]];
            for (std::size_t i = 0; i < table.rows; ++i) x(i, at) = values[i];
            ++at;
        } else if (transform == CatTransform::one_hot) {
            const auto& codes = table.categorical_data[table.storage_index[j]];
            const std::size_t c = col.vocabulary.size();
            for (std::size_t i = 0; i < table.rows; ++i)
                if (codes[i] >= 0) x(i, at + static_cast<std::size_t>(codes[i])) = 1.0;
            spans.push_back({at, at + c, j});
            at += c;
        } else {
            const auto& codes = table.categorical_data[table.storage_index[j]];
            for (std::size_t i = 0; i < table.rows; ++i)
                x(i, at) = static_cast<double>(codes[i]);
            ++at;
        }
    }
    return {std::move(x), std::move(spans)};
}

std::pair<Matrix, StandardizeStats> standardize(const Matrix& train) {
    StandardizeStats stats;
    const std::size_t n = train.rows(), d = train.cols();
    stats.mean.assign(d, 0.0);
    stats.std.assign(d, 0.0);
    for (std::size_t j = 0; j < d; ++j) {
        double sum = 0.0;
        for (std::size_t i = 0; i < n; ++i) sum += train(i, j);
        const double mean = sum / static_cast<double>(n);
        double var = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double dev = train(i, j) - mean;
            var += dev * dev;
        }
        stats.mean[j] = mean;
        stats.std[j] = std::sqrt(var / static_cast<double>(n)); // population convention
    }
    return {apply_standardize(stats, train), std::move(stats)};
}

Matrix apply_standardize(const StandardizeStats& stats, const Matrix& m) {
    if (m.cols() != stats.mean.size())
        throw DimensionMismatch("apply_standardize: column count mismatch");
    Matrix out(m.rows(), m.cols());
    for (std::size_t j = 0; j < m.cols(); ++j) {
        const double mean = stats.mean[j], sd = stats.std[j];
        for (std::size_t i = 0; i < m.rows(); ++i)
            out(i, j) = sd > 0.0 ? (m(i, j) - mean) / sd : 0.0;
    }
    return out;
}

// ============================================================================
// fitted pipeline
// ============================================================================

Preprocess fit_preprocess(const Table& train, CatTransform transform, bool standardize_inputs,
                          TaskKind task) {
    Preprocess prep;
    prep.schema = train.columns;
    prep.transform = transform;
    prep.standardized = standardize_inputs;

    auto [x, spans] = encode(train, transform);
    prep.spans = std::move(spans);
    prep.encoded_dim = x.cols();
    if (standardize_inputs) {
        auto [ignored, stats] = standardize(x);
        (void)ignored;
        prep.stats = std::move(stats);
    }

    if (task == TaskKind::classification) {
        if (!train.has_target()) throw MissingTarget("fit_preprocess: table has no target");
        for (const auto& label : train.target_raw)
            if (std::find(prep.class_names.begin(), prep.class_names.end(), label) ==
                prep.class_names.end())
                prep.class_names.push_back(label);
    }
    return prep;
}

namespace {

// Re-encode a table against a fitted schema; handles vocabulary re-mapping
// and unknown categories.
Matrix encode_with_schema(const Preprocess& prep, const Table& table) {
    if (table.columns.size() != prep.schema.size())
        throw SchemaMismatch("apply_preprocess: expected " + std::to_string(prep.schema.size()) +
                             " feature columns, got " + std::to_string(table.columns.size()));
    for (std::size_t j = 0; j < prep.schema.size(); ++j) {
        if (table.columns[j].name != prep.schema[j].name)
            throw SchemaMismatch("apply_preprocess: column '" + table.columns[j].name +
                                 "' does not match schema column '" + prep.schema[j].name + "'");
        if (table.columns[j].kind != prep.schema[j].kind)
            throw SchemaMismatch("apply_preprocess: column '" + table.columns[j].name +
                                 "' has a different kind than the training schema");
    }

    Matrix x(table.rows, prep.encoded_dim);
    std::size_t at = 0;
    for (std::size_t j = 0; j < prep.schema.size(); ++j) {
        const auto& schema_col = prep.schema[j];
        if (schema_col.kind == ColumnKind::numeric) {
            const auto& values = table.numeric_data[table.storage_index[j]];
            for (std::size_t i = 0; i < table.rows; ++i) x(i, at) = values[i];
            ++at;
            continue;
        }
        // Map the table's local codes into the training vocabulary.
        const auto& local_vocab = table.columns[j].vocabulary;
        std::vector<int> remap(local_vocab.size(), -1);
        for (std::size_t v = 0; v < local_vocab.size(); ++v) {
            auto it = std::find(schema_col.vocabulary.begin(), schema_col.vocabulary.end(),
                                local_vocab[v]);
            if (it != schema_col.vocabulary.end())
                remap[v] = static_cast<int>(it - schema_col.vocabulary.begin());
        }
        const auto& codes = table.categorical_data[table.storage_index[j]];
        if (prep.transform == CatTransform::one_hot) {
            const std::size_t c = schema_col.vocabulary.size();
            for (std::size_t i = 0; i < table.rows; ++i) {
                const int code = codes[i] >= 0 ? remap[codes[i]] : -1;
                if (code >= 0) x(i, at + static_cast<std::size_t>(code)) = 1.0;
                // unknown category: all-zero row
            }
            at += c;
        } else {
            for (std::size_t i = 0; i < table.rows; ++i) {
                const int code = codes[i] >= 0 ? remap[codes[i]] : -1;
                x(i, at) = static_cast<double>(code); // unknown -> -1
            }
            ++at;
        }
    }
    return x;
}

} // namespace

Dataset apply_preprocess(const Preprocess& prep, const Table& table, TaskKind task,
                         bool require_target) {
    Dataset ds;
    Matrix x = encode_with_schema(prep, table);
    ds.x = prep.standardized ? apply_standardize(prep.stats, x) : std::move(x);
    ds.cat_spans = prep.spans;

    if (!table.has_target()) {
        if (require_target) throw MissingTarget("apply_preprocess: table has no target column");
        return ds;
    }

    if (task == TaskKind::regression) {
        if (!table.target_is_numeric)
            throw Error("apply_preprocess: regression target must be numeric");
        ds.y = Matrix(table.rows, 1);
        for (std::size_t i = 0; i < table.rows; ++i) ds.y(i, 0) = table.target_numeric[i];
    } else {
        const std::size_t k = prep.class_names.size();
        if (k == 0) throw Error("apply_preprocess: preprocess has no class names");
        ds.y = Matrix(table.rows, k);
        ds.labels.resize(table.rows);
        for (std::size_t i = 0; i < table.rows; ++i) {
            auto it = std::find(prep.class_names.begin(), prep.class_names.end(),
                                table.target_raw[i]);
            if (it == prep.class_names.end()) {
                ds.labels[i] = -1; // unseen label: all-zero target row
            } else {
                ds.labels[i] = static_cast<int>(it - prep.class_names.begin());
                ds.y(i, static_cast<std::size_t>(ds.labels[i])) = 1.0;
            }
        }
    }
    return ds;
}

// ============================================================================
// splits
// ============================================================================

namespace {

Table table_subset(const Table& table, const std::vector<std::size_t>& rows) {
    Table out;
    out.columns = table.columns;
    out.storage_index = table.storage_index;
    out.rows = rows.size();
    out.numeric_data.resize(table.numeric_data.size());
    for (std::size_t s = 0; s < table.numeric_data.size(); ++s) {
        out.numeric_data[s].resize(rows.size());
        for (std::size_t i = 0; i < rows.size(); ++i)
            out.numeric_data[s][i] = table.numeric_data[s][rows[i]];
    }
    out.categorical_data.resize(table.categorical_data.size());
    for (std::size_t s = 0; s < table.categorical_data.size(); ++s) {
        out.categorical_data[s].resize(rows.size());
        for (std::size_t i = 0; i < rows.size(); ++i)
            out.categorical_data[s][i] = table.categorical_data[s][rows[i]];
    }
    out.target_name = table.target_name;
    out.target_is_numeric = table.target_is_numeric;
    if (table.has_target()) {
        out.target_raw.resize(rows.size());
        out.target_numeric.resize(rows.size());
        for (std::size_t i = 0; i < rows.size(); ++i) {
            out.target_raw[i] = table.target_raw[rows[i]];
            out.target_numeric[i] = table.target_numeric[rows[i]];
        }
    }
    return out;
}

} // namespace

std::array<Table, 3> split_train_val_test(const Table& table, double f_train, double f_val,
                                          double f_test, std::uint64_t seed,
                                          std::optional<bool> stratify) {
    if (f_train < 0.0 || f_val < 0.0 || f_test < 0.0 || f_train + f_val + f_test > 1.0 + 1e-12)
        throw FractionOverflow("split: fractions must be non-negative and sum to at most 1");

    // Stratify by label for non-numeric targets; otherwise one plain group.
    const bool by_label =
        stratify.value_or(table.has_target() && !table.target_is_numeric) && table.has_target();
    std::vector<std::vector<std::size_t>> groups;
    if (by_label) {
        std::vector<std::string> seen;
        for (std::size_t i = 0; i < table.rows; ++i) {
            auto it = std::find(seen.begin(), seen.end(), table.target_raw[i]);
            std::size_t g;
            if (it == seen.end()) {
                seen.push_back(table.target_raw[i]);
                groups.emplace_back();
                g = groups.size() - 1;
            } else {
                g = static_cast<std::size_t>(it - seen.begin());
            }
            groups[g].push_back(i);
        }
    } else {
        groups.emplace_back(table.rows);
        std::iota(groups[0].begin(), groups[0].end(), std::size_t{0});
    }

    std::vector<std::size_t> train_rows, val_rows, test_rows;
    for (std::size_t g = 0; g < groups.size(); ++g) {
        Rng rng(mix_seed(seed, g));
        rng.shuffle(groups[g]);
        const double n = static_cast<double>(groups[g].size());
        const std::size_t b1 = static_cast<std::size_t>(std::llround(n * f_train));
        const std::size_t b2 = static_cast<std::size_t>(std::llround(n * (f_train + f_val)));
        const std::size_t b3 = static_cast<std::size_t>(std::llround(n * (f_train + f_val + f_test)));
        for (std::size_t i = 0; i < groups[g].size(); ++i) {
            if (i < b1)
                train_rows.push_back(groups[g][i]);
            else if (i < b2)
                val_rows.push_back(groups[g][i]);
            else if (i < b3)
                test_rows.push_back(groups[g][i]);
        }
    }
    return {table_subset(table, train_rows), table_subset(table, val_rows),
            table_subset(table, test_rows)};
}

// ============================================================================
// synthetic generators
// ============================================================================

namespace {

Table numeric_table(const Matrix& x, const std::vector<double>& y) {
    Table t;
    t.rows = x.rows();
    for (std::size_t j = 0; j < x.cols(); ++j) {
        ColumnSchema col;
        col.name = "x" + std::to_string(j);
        col.kind = ColumnKind::numeric;
        t.columns.push_back(col);
        t.storage_index.push_back(j);
        std::vector<double> values(x.rows());
        for (std::size_t i = 0; i < x.rows(); ++i) values[i] = x(i, j);
        t.numeric_data.push_back(std::move(values));
    }
    t.target_name = "y";
    t.target_is_numeric = true;
    t.target_numeric = y;
    t.target_raw.resize(y.size());
    for (std::size_t i = 0; i < y.size(); ++i) t.target_raw[i] = format_double(y[i]);
    return t;
}

} // namespace

Table synth_local_features(std::size_t n, std::uint64_t seed) {
    const std::size_t d = 16;
    Rng rng(seed);
    Matrix x(n, d);
    std::vector<double> y(n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < d; ++j) x(i, j) = rng.normal();
        y[i] = x(i, 0) > 0.0 ? x(i, 1) * x(i, 3) + x(i, 5) : x(i, 9) * x(i, 11) + x(i, 13);
    }
    return numeric_table(x, y);
}

Table synth_single_index(std::size_t n, std::size_t d, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<double> u(d);
    double norm = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
        u[j] = rng.normal();
        norm += u[j] * u[j];
    }
    norm = std::sqrt(norm);
    for (std::size_t j = 0; j < d; ++j) u[j] /= norm;

    Matrix x(n, d);
    std::vector<double> y(n);
    for (std::size_t i = 0; i < n; ++i) {
        double proj = 0.0;
        for (std::size_t j = 0; j < d; ++j) {
            x(i, j) = rng.normal();
            proj += u[j] * x(i, j);
        }
        y[i] = proj * proj;
    }
    return numeric_table(x, y);
}

} // namespace xrfm
