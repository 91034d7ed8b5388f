#include "doctest.h"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>

#include "test_support.hpp"
#include "xrfm/data.hpp"

using namespace xrfm;

namespace {

std::string temp_csv(const std::string& name, const std::string& content) {
    const std::string path =
        (std::filesystem::temp_directory_path() / ("xrfm_data_" + name)).string();
    std::ofstream out(path);
    out << content;
    return path;
}

} // namespace

TEST_CASE("numeric CSVs load with inferred schema") {
    const std::string path = temp_csv("numeric.csv", "a,b,y\n1,2.5,0\n3,4.5,1\n");
    Table t = load_csv(path, "y");
    CHECK(t.rows == 2);
    REQUIRE(t.columns.size() == 2);
    CHECK(t.columns[0].kind == ColumnKind::numeric);
    CHECK(t.columns[1].kind == ColumnKind::numeric);
    CHECK(t.numeric_data[0][1] == 3.0);
    CHECK(t.target_is_numeric);
    CHECK(t.target_numeric[1] == 1.0);
    std::remove(path.c_str());
}

TEST_CASE("non-numeric tokens flip a column to categorical") {
    const std::string path = temp_csv("cat.csv", "c,y\na,0\nb,1\na,0\n");
    Table t = load_csv(path, "y");
    REQUIRE(t.columns.size() == 1);
    CHECK(t.columns[0].kind == ColumnKind::categorical);
    CHECK(t.columns[0].vocabulary.size() == 2);
    CHECK(t.categorical_data[0] == std::vector<int>{0, 1, 0});
    std::remove(path.c_str());
}

TEST_CASE("missing cells impute medians and make a dedicated category") {
    const std::string path = temp_csv("missing.csv", "a,c,y\n1,,0\n,x,1\n5,x,0\n9,z,1\n");
    Table t = load_csv(path, "y");
    // numeric median of {1, 5, 9} fills the gap
    CHECK(t.numeric_data[0][1] == 5.0);
    // "" becomes its own category
    const auto& vocab = t.columns[1].vocabulary;
    CHECK(std::find(vocab.begin(), vocab.end(), "") != vocab.end());
    std::remove(path.c_str());
}

TEST_CASE("loader errors carry their conditions") {
    const std::string empty = temp_csv("empty.csv", "");
    CHECK_THROWS_AS(load_csv(empty, "y"), EmptyFile);
    std::remove(empty.c_str());

    const std::string header_only = temp_csv("header.csv", "a,y\n");
    CHECK_THROWS_AS(load_csv(header_only, "y"), EmptyFile);
    std::remove(header_only.c_str());

    const std::string no_target = temp_csv("tgt.csv", "a,b\n1,2\n");
    CHECK_THROWS_AS(load_csv(no_target, "y"), MissingTarget);
    std::remove(no_target.c_str());

    const std::string ragged = temp_csv("ragged.csv", "a,b,y\n1,2,0\n1,2\n");
    CHECK_THROWS_AS(load_csv(ragged, "y"), RaggedRow);
    std::remove(ragged.c_str());
}

TEST_CASE("schema hints force a column kind") {
    const std::string path = temp_csv("hint.csv", "a,y\n1,0\n2,1\n");
    SchemaHints hints;
    hints.kinds["a"] = ColumnKind::categorical;
    Table t = load_csv(path, "y", hints);
    CHECK(t.columns[0].kind == ColumnKind::categorical);
    CHECK(t.columns[0].vocabulary.size() == 2);
    std::remove(path.c_str());
}

TEST_CASE("written tables reload with identical schema and values") {
    const std::string path = temp_csv("rt_src.csv", "a,c,y\n1.25,u,0.5\n-3.5,v,1.5\n2,u,2.5\n");
    Table t = load_csv(path, "y");
    const std::string out = temp_csv("rt_dst.csv", "");
    write_csv(t, out);
    Table back = load_csv(out, "y");
    REQUIRE(back.columns.size() == t.columns.size());
    for (std::size_t j = 0; j < t.columns.size(); ++j) {
        CHECK(back.columns[j].name == t.columns[j].name);
        CHECK(back.columns[j].kind == t.columns[j].kind);
        CHECK(back.columns[j].vocabulary == t.columns[j].vocabulary);
    }
    CHECK(back.numeric_data == t.numeric_data);
    CHECK(back.categorical_data == t.categorical_data);
    CHECK(back.target_numeric == t.target_numeric);
    std::remove(path.c_str());
    std::remove(out.c_str());
}

TEST_CASE("one-hot encoding expands to indicator groups") {
    const std::string path = temp_csv("enc.csv", "c,y\nred,0\ngreen,1\nblue,0\nred,1\n");
    Table t = load_csv(path, "y");
    auto [x, spans] = encode(t, CatTransform::one_hot);
    CHECK(x.cols() == 3);
    REQUIRE(spans.size() == 1);
    CHECK(spans[0].begin == 0);
    CHECK(spans[0].end == 3);
    for (std::size_t i = 0; i < 4; ++i) {
        double sum = 0.0;
        for (std::size_t j = 0; j < 3; ++j) sum += x(i, j);
        CHECK(sum == 1.0);
    }
    auto [xo, spans_o] = encode(t, CatTransform::ordinal);
    CHECK(xo.cols() == 1);
    CHECK(spans_o.empty());
    CHECK(xo(0, 0) == 0.0);
    CHECK(xo(1, 0) == 1.0);
    CHECK(xo(2, 0) == 2.0);
    std::remove(path.c_str());
}

TEST_CASE("mixed tables encode to the accounted width") {
    const std::string path = temp_csv(
        "mixed.csv", "n1,c1,n2,c2,n3,y\n1,a,2,u,3,0\n4,b,5,v,6,1\n7,c,8,u,9,0\n");
    Table t = load_csv(path, "y");
    auto [x, spans] = encode(t, CatTransform::one_hot);
    // widths: 1 + 3 + 1 + 2 + 1
    CHECK(x.cols() == 8);
    CHECK(spans.size() == 2);
    std::size_t total = 0;
    for (const auto& col : t.columns)
        total += col.kind == ColumnKind::numeric ? 1 : col.vocabulary.size();
    CHECK(x.cols() == total);
    std::remove(path.c_str());
}

TEST_CASE("standardization hits zero mean unit variance and zero-variance columns vanish") {
    Matrix m(2, 2);
    m(0, 0) = 1.0;
    m(1, 0) = 3.0;
    m(0, 1) = 7.0;
    m(1, 1) = 7.0; // constant column
    auto [z, stats] = standardize(m);
    CHECK(z(0, 0) == doctest::Approx(-1.0));
    CHECK(z(1, 0) == doctest::Approx(1.0));
    CHECK(z(0, 1) == 0.0);
    CHECK(z(1, 1) == 0.0);
    CHECK(stats.mean[0] == doctest::Approx(2.0));
    CHECK(stats.std[0] == doctest::Approx(1.0)); // population convention

    // re-applying the stored stats reproduces the output bit-exactly
    Matrix again = apply_standardize(stats, m);
    CHECK(test::max_diff(again, z) == 0.0);
    CHECK(again == z);
}

TEST_CASE("standardized random matrices have unit population variance") {
    Rng rng(71);
    Matrix m = test::random_matrix(200, 4, rng, 3.0);
    auto [z, stats] = standardize(m);
    for (std::size_t j = 0; j < 4; ++j) {
        double mean = 0.0;
        for (std::size_t i = 0; i < 200; ++i) mean += z(i, j);
        mean /= 200.0;
        double var = 0.0;
        for (std::size_t i = 0; i < 200; ++i) var += (z(i, j) - mean) * (z(i, j) - mean);
        var /= 200.0;
        CHECK(std::fabs(mean) < 1e-10);
        CHECK(var == doctest::Approx(1.0).epsilon(1e-10));
    }
}

TEST_CASE("unknown categories encode to zero rows or -1 ordinals") {
    const std::string train_path = temp_csv("tr.csv", "c,y\na,0\nb,1\n");
    const std::string query_path = temp_csv("qy.csv", "c,y\nc,0\na,1\n");
    Table train = load_csv(train_path, "y");
    Table query = load_csv(query_path, "y");

    Preprocess prep = fit_preprocess(train, CatTransform::one_hot, false, TaskKind::regression);
    Dataset ds = apply_preprocess(prep, query, TaskKind::regression);
    CHECK(ds.x(0, 0) == 0.0); // unseen category: all-zero row
    CHECK(ds.x(0, 1) == 0.0);
    CHECK(ds.x(1, 0) == 1.0);

    Preprocess prep_ord = fit_preprocess(train, CatTransform::ordinal, false, TaskKind::regression);
    Dataset ds_ord = apply_preprocess(prep_ord, query, TaskKind::regression);
    CHECK(ds_ord.x(0, 0) == -1.0);
    CHECK(ds_ord.x(1, 0) == 0.0);
    std::remove(train_path.c_str());
    std::remove(query_path.c_str());
}

TEST_CASE("schema mismatches are rejected at apply time") {
    const std::string train_path = temp_csv("sm1.csv", "a,b,y\n1,2,0\n3,4,1\n");
    const std::string other_path = temp_csv("sm2.csv", "a,z,y\n1,2,0\n3,4,1\n");
    Table train = load_csv(train_path, "y");
    Table other = load_csv(other_path, "y");
    Preprocess prep = fit_preprocess(train, CatTransform::one_hot, true, TaskKind::regression);
    CHECK_THROWS_AS(apply_preprocess(prep, other, TaskKind::regression), SchemaMismatch);
    std::remove(train_path.c_str());
    std::remove(other_path.c_str());
}

TEST_CASE("plain splits hit the requested sizes") {
    Table t = synth_local_features(100, 3);
    auto all = split_train_val_test(t, 1.0, 0.0, 0.0, 1);
    CHECK(all[0].rows == 100);
    CHECK(all[1].rows == 0);
    CHECK(all[2].rows == 0);

    auto parts = split_train_val_test(t, 0.8, 0.1, 0.1, 1);
    CHECK(parts[0].rows == 80);
    CHECK(parts[1].rows == 10);
    CHECK(parts[2].rows == 10);

    CHECK_THROWS_AS(split_train_val_test(t, 0.8, 0.3, 0.0, 1), FractionOverflow);
}

TEST_CASE("splits are disjoint and exhaustive") {
    Table t = synth_local_features(83, 5);
    auto parts = split_train_val_test(t, 0.6, 0.2, 0.2, 3);
    CHECK(parts[0].rows + parts[1].rows + parts[2].rows == 83);
    // row identity via the target value (distinct almost surely)
    std::set<double> seen;
    for (const auto& part : {parts[0], parts[1], parts[2]})
        for (double y : part.target_numeric) CHECK(seen.insert(y).second);
}

TEST_CASE("label splits stratify per class within one row") {
    const std::string path = temp_csv("strat.csv", [] {
        std::string s = "a,y\n";
        for (int i = 0; i < 60; ++i) s += std::to_string(i) + ",pos\n";
        for (int i = 0; i < 40; ++i) s += std::to_string(100 + i) + ",neg\n";
        return s;
    }());
    Table t = load_csv(path, "y");
    auto parts = split_train_val_test(t, 0.5, 0.25, 0.25, 9);
    auto count = [](const Table& part, const std::string& label) {
        std::size_t c = 0;
        for (const auto& raw : part.target_raw)
            if (raw == label) ++c;
        return c;
    };
    CHECK(count(parts[0], "pos") == 30);
    CHECK(count(parts[0], "neg") == 20);
    CHECK(count(parts[1], "pos") == 15);
    CHECK(count(parts[1], "neg") == 10);
    CHECK(count(parts[2], "pos") == 15);
    CHECK(count(parts[2], "neg") == 10);
    std::remove(path.c_str());
}

TEST_CASE("the local-feature generator replays its own formula") {
    Table t = synth_local_features(500, 17);
    CHECK(t.rows == 500);
    REQUIRE(t.columns.size() == 16);
    for (std::size_t i = 0; i < t.rows; ++i) {
        const double x0 = t.numeric_data[0][i];
        const double want = x0 > 0.0
                                ? t.numeric_data[1][i] * t.numeric_data[3][i] + t.numeric_data[5][i]
                                : t.numeric_data[9][i] * t.numeric_data[11][i] +
                                      t.numeric_data[13][i];
        CHECK(t.target_numeric[i] == want);
    }
    // the gate fires both ways on this seed
    std::size_t positive = 0;
    for (std::size_t i = 0; i < t.rows; ++i)
        if (t.numeric_data[0][i] > 0.0) ++positive;
    CHECK(positive > 100);
    CHECK(positive < 400);
}

TEST_CASE("the single-index generator replays its formula against the seeded direction") {
    const std::size_t d = 7;
    Table t = synth_single_index(200, d, 23);
    // replicate the documented construction: d seeded normals, normalized
    Rng rng(23);
    std::vector<double> u(d);
    double norm = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
        u[j] = rng.normal();
        norm += u[j] * u[j];
    }
    norm = std::sqrt(norm);
    for (auto& v : u) v /= norm;
    for (std::size_t i = 0; i < t.rows; ++i) {
        double proj = 0.0;
        for (std::size_t j = 0; j < d; ++j) proj += u[j] * t.numeric_data[j][i];
        CHECK(t.target_numeric[i] == doctest::Approx(proj * proj).epsilon(1e-12));
        CHECK(t.target_numeric[i] >= 0.0);
    }
}

TEST_CASE("generators are deterministic per seed") {
    Table a = synth_local_features(50, 5);
    Table b = synth_local_features(50, 5);
    CHECK(a.numeric_data == b.numeric_data);
    CHECK(a.target_numeric == b.target_numeric);
    Table c = synth_local_features(50, 6);
    CHECK(a.numeric_data != c.numeric_data);
}

TEST_CASE("classification targets one-hot encode against the training vocabulary") {
    const std::string path = temp_csv("cls.csv", "a,y\n1,cat\n2,dog\n3,cat\n");
    Table t = load_csv(path, "y");
    Preprocess prep = fit_preprocess(t, CatTransform::one_hot, true, TaskKind::classification);
    CHECK(prep.class_names == std::vector<std::string>{"cat", "dog"});
    Dataset ds = apply_preprocess(prep, t, TaskKind::classification);
    CHECK(ds.y.cols() == 2);
    CHECK(ds.y(0, 0) == 1.0);
    CHECK(ds.y(1, 1) == 1.0);
    CHECK(ds.labels == std::vector<int>{0, 1, 0});
    std::remove(path.c_str());
}
