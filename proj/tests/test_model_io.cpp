#include "doctest.h"

#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>

#include "test_support.hpp"
#include "xrfm/data.hpp"
#include "xrfm/model_io.hpp"
#include "xrfm/tree.hpp"

using namespace xrfm;
using test::max_diff;
using test::random_matrix;

namespace {

std::string temp_path(const std::string& name) {
    return (std::filesystem::temp_directory_path() / ("xrfm_io_" + name)).string();
}

XRFMModel small_regression_model(Rng& rng, bool diagonal) {
    Dataset train;
    train.x = random_matrix(120, 4, rng);
    train.y = Matrix(120, 1);
    for (std::size_t i = 0; i < 120; ++i)
        train.y(i, 0) = std::sin(train.x(i, 0)) + train.x(i, 1) * train.x(i, 2);
    Dataset val;
    val.x = random_matrix(40, 4, rng);
    val.y = Matrix(40, 1);
    for (std::size_t i = 0; i < 40; ++i)
        val.y(i, 0) = std::sin(val.x(i, 0)) + val.x(i, 1) * val.x(i, 2);

    TreeParams params;
    params.max_leaf_size = 50;
    params.seed = 7;
    params.refill_size = 8;
    LeafHyperparams hyper;
    hyper.kernel.p = 1.0;
    hyper.kernel.q_mode = QMode::euclidean;
    hyper.kernel.bandwidth = 3.0;
    hyper.iterations = 2;
    hyper.diagonal = diagonal;
    return xrfm_fit(train, val, params, hyper, TaskKind::regression);
}

} // namespace

TEST_CASE("base64 round-trips bytes and doubles") {
    const unsigned char bytes[] = {0x00, 0x01, 0xfe, 0x7f, 0x80, 0xff, 0x42};
    for (std::size_t len = 0; len <= sizeof(bytes); ++len) {
        const std::string text = detail::base64_encode(bytes, len);
        const std::vector<unsigned char> back = detail::base64_decode(text);
        REQUIRE(back.size() == len);
        for (std::size_t i = 0; i < len; ++i) CHECK(back[i] == bytes[i]);
    }

    Rng rng(91);
    std::vector<double> values(37);
    for (auto& v : values) v = rng.normal() * std::pow(10.0, rng.uniform(-300.0, 300.0));
    values.push_back(0.0);
    values.push_back(-0.0);
    const std::vector<double> back =
        detail::base64_to_doubles(detail::doubles_to_base64(values.data(), values.size()));
    REQUIRE(back.size() == values.size());
    for (std::size_t i = 0; i < values.size(); ++i) {
        // bit-exact round trip, including signed zeros
        CHECK(std::memcmp(&back[i], &values[i], sizeof(double)) == 0);
    }
}

TEST_CASE("base64 rejects malformed text") {
    CHECK_THROWS_AS(detail::base64_decode("abc"), FormatError);
    CHECK_THROWS_AS(detail::base64_decode("ab!="), FormatError);
}

TEST_CASE("models survive a save/load round trip bit-exactly") {
    Rng rng(92);
    for (bool diagonal : {false, true}) {
        XRFMModel model = small_regression_model(rng, diagonal);
        const std::string path = temp_path(diagonal ? "diag.json" : "full.json");
        save_model(model, path);
        XRFMModel loaded = load_model(path);

        CHECK(loaded.leaf_count() == model.leaf_count());
        Matrix q = random_matrix(200, 4, rng);
        Matrix a = xrfm_predict(model, q).scores;
        Matrix b = xrfm_predict(loaded, q).scores;
        CHECK(max_diff(a, b) <= 1e-15);
        std::remove(path.c_str());
    }
}

TEST_CASE("classification models keep class names and labels") {
    Rng rng(93);
    Dataset train;
    train.x = random_matrix(100, 3, rng);
    train.y = Matrix(100, 2);
    for (std::size_t i = 0; i < 100; ++i) train.y(i, train.x(i, 0) > 0.0 ? 1 : 0) = 1.0;
    Dataset val;
    val.x = random_matrix(30, 3, rng);
    val.y = Matrix(30, 2);
    for (std::size_t i = 0; i < 30; ++i) val.y(i, val.x(i, 0) > 0.0 ? 1 : 0) = 1.0;

    TreeParams params;
    params.max_leaf_size = 200;
    LeafHyperparams hyper;
    hyper.kernel.bandwidth = 3.0;
    hyper.iterations = 2;
    XRFMModel model = xrfm_fit(train, val, params, hyper, TaskKind::classification);
    model.prep.class_names = {"no", "yes"};
    model.prep.target_name = "label";

    const std::string path = temp_path("cls.json");
    save_model(model, path);
    XRFMModel loaded = load_model(path);
    CHECK(loaded.task == TaskKind::classification);
    CHECK(loaded.prep.class_names == std::vector<std::string>{"no", "yes"});
    CHECK(loaded.prep.target_name == "label");

    Matrix q = random_matrix(25, 3, rng);
    Predictions a = xrfm_predict(model, q);
    Predictions b = xrfm_predict(loaded, q);
    CHECK(a.labels == b.labels);
    CHECK(max_diff(a.scores, b.scores) <= 1e-15);
    std::remove(path.c_str());
}

TEST_CASE("unknown format tags are rejected") {
    Rng rng(94);
    XRFMModel model = small_regression_model(rng, false);
    std::string text = model_to_string(model);
    const auto at = text.find("xrfm/1");
    REQUIRE(at != std::string::npos);
    text.replace(at, 6, "xrfm/2");
    CHECK_THROWS_AS(model_from_string(text), FormatError);
    CHECK_THROWS_AS(model_from_string("{\"format\": 3}"), FormatError);
    CHECK_THROWS_AS(model_from_string("garbage"), FormatError);
}

TEST_CASE("the preprocess block survives persistence") {
    const std::string csv_path = temp_path("prep.csv");
    {
        std::ofstream out(csv_path);
        out << "num,color,y\n1.5,red,0.0\n2.5,blue,1.0\n3.5,red,2.0\n4.5,green,3.0\n"
               "5.5,blue,4.0\n6.5,red,5.0\n7.5,green,6.0\n8.5,blue,7.0\n";
    }
    Table t = load_csv(csv_path, "y");
    Preprocess prep = fit_preprocess(t, CatTransform::one_hot, true, TaskKind::regression);
    prep.target_name = "y";
    Dataset ds = apply_preprocess(prep, t, TaskKind::regression);

    TreeParams params;
    params.max_leaf_size = 16;
    params.refill_size = 1;
    LeafHyperparams hyper;
    hyper.kernel.bandwidth = 3.0;
    hyper.iterations = 1;
    XRFMModel model = xrfm_fit(ds, ds, params, hyper, TaskKind::regression);
    model.prep = prep;

    const std::string path = temp_path("prep.json");
    save_model(model, path);
    XRFMModel loaded = load_model(path);
    REQUIRE(loaded.prep.schema.size() == 2);
    CHECK(loaded.prep.schema[1].vocabulary == prep.schema[1].vocabulary);
    CHECK(loaded.prep.stats.mean == prep.stats.mean);
    CHECK(loaded.prep.stats.std == prep.stats.std);
    CHECK(loaded.prep.spans.size() == 1);
    std::remove(path.c_str());
    std::remove(csv_path.c_str());
}
