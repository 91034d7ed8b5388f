// End-to-end checks of the installed command line. Each test drives the
// real binary (path injected at build time) inside a scratch directory.

#include "doctest.h"

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <unistd.h>

#include "xrfm/metrics.hpp"
#include "xrfm/rng.hpp"

#ifndef XRFM_CLI_BIN
#error "XRFM_CLI_BIN must point at the built binary"
#endif

namespace {

namespace fs = std::filesystem;

struct Scratch {
    fs::path dir;
    Scratch() {
        dir = fs::temp_directory_path() / ("xrfm_cli_" + std::to_string(::getpid()) + "_" +
                                           std::to_string(counter()++));
        fs::create_directories(dir);
    }
    ~Scratch() { fs::remove_all(dir); }
    std::string operator/(const std::string& name) const { return (dir / name).string(); }
    static int& counter() {
        static int c = 0;
        return c;
    }
};

int run(const std::string& args, std::string* output = nullptr, const std::string& env = "") {
    const std::string cmd = env + (env.empty() ? "" : " ") + std::string(XRFM_CLI_BIN) + " " +
                            args + " 2>&1";
    FILE* pipe = popen(cmd.c_str(), "r");
    REQUIRE(pipe != nullptr);
    std::string text;
    char buf[512];
    while (fgets(buf, sizeof(buf), pipe) != nullptr) text += buf;
    const int status = pclose(pipe);
    if (output != nullptr) *output = text;
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const std::string& path) {
    std::ifstream in(path);
    std::stringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

std::size_t line_count(const std::string& text) {
    std::size_t n = 0;
    for (char c : text)
        if (c == '\n') ++n;
    return n;
}

std::vector<double> prediction_column(const std::string& csv) {
    std::stringstream ss(csv);
    std::string line;
    std::getline(ss, line); // header
    std::vector<double> out;
    while (std::getline(ss, line))
        if (!line.empty()) out.push_back(std::stod(line.substr(0, line.find(','))));
    return out;
}

} // namespace

TEST_CASE("synth output is deterministic and row-exact") {
    Scratch tmp;
    const std::string a = tmp / "a.csv";
    const std::string b = tmp / "b.csv";
    CHECK(run("synth --generator local-features --n 500 --seed 3 --out " + a) == 0);
    CHECK(run("synth --generator local-features --n 500 --seed 3 --out " + b) == 0);
    CHECK(line_count(slurp(a)) == 501); // header + rows
    CHECK(slurp(a) == slurp(b));

    const std::string c = tmp / "c.csv";
    CHECK(run("synth --generator single-index --n 100 --d 9 --seed 1 --out " + c) == 0);
    CHECK(line_count(slurp(c)) == 101);
}

TEST_CASE("fit, predict, and explain run end to end on synthetic data") {
    Scratch tmp;
    const std::string train = tmp / "train.csv";
    const std::string val = tmp / "val.csv";
    REQUIRE(run("synth --generator local-features --n 2000 --seed 11 --out " + train) == 0);
    REQUIRE(run("synth --generator local-features --n 600 --seed 12 --out " + val) == 0);

    const std::string config = tmp / "config.json";
    std::ofstream(config) << R"({"exponent_p": 1.0, "bandwidth": 3.0, "regularization": 1e-6})";

    const std::string model = tmp / "model.json";
    std::string fit_out;
    const int code = run("fit --train " + train + " --val " + val +
                         " --target y --task regression --config " + config +
                         " --leaf-size 1100 --iterations 2 --seed 4 --out " + model, &fit_out);
    CHECK(code == 0);
    CHECK(fit_out.find("leaves: 2") != std::string::npos);
    CHECK(fit_out.find("val_score=") != std::string::npos);

    // prediction on the training file reaches a small normalized error
    const std::string preds = tmp / "preds.csv";
    REQUIRE(run("predict --model " + model + " --input " + train + " --out " + preds) == 0);
    std::vector<double> got = prediction_column(slurp(preds));
    REQUIRE(got.size() == 2000);

    std::vector<double> want;
    {
        std::stringstream ss(slurp(train));
        std::string line;
        std::getline(ss, line);
        while (std::getline(ss, line))
            if (!line.empty()) want.push_back(std::stod(line.substr(line.rfind(',') + 1)));
    }
    CHECK(xrfm::nrmse(want, got) < 0.05);

    // explain reports aggregated per-column importances
    std::string explain_out;
    CHECK(run("explain --model " + model + " --leaf all --top-k 3 --format json", &explain_out) ==
          0);
    CHECK(explain_out.find("\"top_features\"") != std::string::npos);
    CHECK(explain_out.find("\"eigenvalues\"") != std::string::npos);

    std::string csv_out;
    CHECK(run("explain --model " + model + " --leaf 0 --top-k 99 --format csv", &csv_out) == 0);
    // top-k beyond the width clamps to every feature
    CHECK(csv_out.find("0,feature,15,") != std::string::npos);
    CHECK(csv_out.find("0,feature,16,") == std::string::npos);

    CHECK(run("explain --model " + model + " --leaf 7 --format csv") == 2);
}

TEST_CASE("fits with one seed write byte-identical predictions") {
    Scratch tmp;
    const std::string train = tmp / "train.csv";
    REQUIRE(run("synth --generator single-index --n 600 --d 6 --seed 2 --out " + train) == 0);

    auto fit_once = [&](const std::string& tag) {
        const std::string model = tmp / ("m" + tag + ".json");
        const std::string preds = tmp / ("p" + tag + ".csv");
        REQUIRE(run("fit --train " + train + " --target y --val-frac 0.2 --leaf-size 250"
                    " --iterations 2 --seed 99 --out " + model) == 0);
        REQUIRE(run("predict --model " + model + " --input " + train + " --out " + preds) == 0);
        return slurp(preds);
    };
    CHECK(fit_once("1") == fit_once("2"));
}

TEST_CASE("single leaf when the leaf bound swallows the data") {
    Scratch tmp;
    const std::string train = tmp / "train.csv";
    REQUIRE(run("synth --generator single-index --n 300 --d 5 --seed 8 --out " + train) == 0);
    std::string out;
    CHECK(run("fit --train " + train + " --target y --val-frac 0.2 --leaf-size 5000 --iterations 1"
              " --out " + (tmp / "m.json"), &out) == 0);
    CHECK(out.find("leaves: 1") != std::string::npos);
    CHECK(out.find("depth: 0") != std::string::npos);
}

TEST_CASE("prediction output length tracks the input") {
    Scratch tmp;
    const std::string train = tmp / "train.csv";
    REQUIRE(run("synth --generator single-index --n 400 --d 4 --seed 5 --out " + train) == 0);
    const std::string model = tmp / "m.json";
    REQUIRE(run("fit --train " + train + " --target y --val-frac 0.2 --leaf-size 200"
                " --iterations 1 --out " + model) == 0);

    // single row
    const std::string full = slurp(train);
    const std::string header = full.substr(0, full.find('\n') + 1);
    std::stringstream rest(full.substr(full.find('\n') + 1));
    std::string r1, r2, r3;
    std::getline(rest, r1);
    std::getline(rest, r2);
    std::getline(rest, r3);

    const std::string one = tmp / "one.csv";
    std::ofstream(one) << header << r1 << "\n";
    const std::string one_out = tmp / "one_out.csv";
    REQUIRE(run("predict --model " + model + " --input " + one + " --out " + one_out) == 0);
    CHECK(prediction_column(slurp(one_out)).size() == 1);

    // concatenated rows predict to concatenated outputs
    const std::string three = tmp / "three.csv";
    std::ofstream(three) << header << r1 << "\n" << r2 << "\n" << r3 << "\n";
    const std::string three_out = tmp / "three_out.csv";
    REQUIRE(run("predict --model " + model + " --input " + three + " --out " + three_out) == 0);
    auto singles = prediction_column(slurp(one_out));
    auto triples = prediction_column(slurp(three_out));
    REQUIRE(triples.size() == 3);
    CHECK(triples[0] == singles[0]);
}

TEST_CASE("exit codes distinguish usage from numerical failures") {
    Scratch tmp;
    const std::string train = tmp / "train.csv";
    REQUIRE(run("synth --generator single-index --n 200 --d 4 --seed 6 --out " + train) == 0);

    // unknown flag and missing target column are usage errors
    CHECK(run("fit --no-such-flag") == 2);
    std::string msg;
    CHECK(run("fit --train " + train + " --target missing_col --val-frac 0.2", &msg) == 2);
    CHECK(msg.find("missing_col") != std::string::npos);

    // duplicate rows with a zero ridge cannot be solved
    const std::string dup = tmp / "dup.csv";
    {
        std::ofstream out(dup);
        out << "a,b,y\n";
        for (int i = 0; i < 30; ++i)
            out << (i / 2) << "," << (i / 2 + 1) << "," << i << "\n";
    }
    const std::string config = tmp / "config.json";
    std::ofstream(config) << R"({"regularization": 0.0, "bandwidth": 3.0})";
    CHECK(run("fit --train " + dup + " --target y --val-frac 0.2 --config " + config +
              " --iterations 1") == 3);

    // distributions are rejected in a fit config
    const std::string bad = tmp / "bad.json";
    std::ofstream(bad) << R"({"bandwidth": {"log_uniform": [1, 10]}})";
    CHECK(run("fit --train " + train + " --target y --val-frac 0.2 --config " + bad) == 2);

    // malformed model files are schema errors
    const std::string junk = tmp / "junk.json";
    std::ofstream(junk) << "{}";
    CHECK(run("predict --model " + junk + " --input " + train + " --out " + (tmp / "x.csv")) == 2);
}

TEST_CASE("config values sit between defaults and flags") {
    Scratch tmp;
    const std::string train = tmp / "train.csv";
    REQUIRE(run("synth --generator single-index --n 300 --d 4 --seed 9 --out " + train) == 0);
    const std::string base =
        "fit --train " + train + " --target y --val-frac 0.2 --leaf-size 300 --iterations 1 ";

    std::string out;
    REQUIRE(run(base, &out) == 0);
    CHECK(out.find("refill_size=1500") != std::string::npos); // built-in default

    const std::string config = tmp / "c.json";
    std::ofstream(config) << R"({"refill_size": 300})";
    REQUIRE(run(base + "--config " + config, &out) == 0);
    CHECK(out.find("refill_size=300") != std::string::npos); // config beats default

    REQUIRE(run(base + "--config " + config + " --refill-size 77", &out) == 0);
    CHECK(out.find("refill_size=77") != std::string::npos); // flag beats config
}

TEST_CASE("tune with one trial of a pinned space matches fit") {
    Scratch tmp;
    const std::string train = tmp / "train.csv";
    REQUIRE(run("synth --generator single-index --n 500 --d 5 --seed 12 --out " + train) == 0);

    const std::string space = tmp / "space.json";
    std::ofstream(space) << R"({"bandwidth": 4.0, "regularization": 0.001, "exponent_p": 1.0,
                               "iterations": 2})";

    const std::string tuned = tmp / "tuned.json";
    const std::string log = tmp / "log.csv";
    std::string tune_out;
    REQUIRE(run("tune --train " + train + " --target y --val-frac 0.2 --leaf-size 200"
                " --space " + space + " --trials 1 --seed 31 --out " + tuned + " --log " + log,
                &tune_out) == 0);

    const std::string fitted = tmp / "fitted.json";
    REQUIRE(run("fit --train " + train + " --target y --val-frac 0.2 --leaf-size 200"
                " --config " + space + " --seed 31 --out " + fitted) == 0);
    CHECK(slurp(tuned) == slurp(fitted));

    // log rows = trials x leaves (plus header)
    std::string leaves_line = tune_out.substr(tune_out.find("leaves: ") + 8);
    const std::size_t leaves = std::stoul(leaves_line);
    CHECK(line_count(slurp(log)) == 1 + leaves);
}

TEST_CASE("tune logs every trial and reports the per-leaf best") {
    Scratch tmp;
    const std::string train = tmp / "train.csv";
    REQUIRE(run("synth --generator single-index --n 400 --d 4 --seed 21 --out " + train) == 0);
    const std::string log = tmp / "log.csv";
    std::string out;
    REQUIRE(run("tune --train " + train + " --target y --val-frac 0.25 --leaf-size 200"
                " --space talent --trials 3 --iterations 2 --seed 5 --log " + log, &out) == 0);

    const std::string log_text = slurp(log);
    std::string leaves_line = out.substr(out.find("leaves: ") + 8);
    const std::size_t leaves = std::stoul(leaves_line);
    CHECK(line_count(log_text) == 1 + 3 * leaves);

    // the best logged score per leaf matches the reported one
    std::stringstream ss(log_text);
    std::string line;
    std::getline(ss, line);
    std::vector<double> best(leaves, 1e300);
    while (std::getline(ss, line)) {
        std::stringstream fields(line);
        std::string leaf_s, trial_s, ok_s, score_s;
        std::getline(fields, leaf_s, ',');
        std::getline(fields, trial_s, ',');
        std::getline(fields, ok_s, ',');
        std::getline(fields, score_s, ',');
        const std::size_t leaf = std::stoul(leaf_s);
        best[leaf] = std::min(best[leaf], std::stod(score_s));
    }
    for (std::size_t l = 0; l < leaves; ++l) {
        const std::string want = "leaf " + std::to_string(l) + ": best_trial=";
        const auto at = out.find(want);
        REQUIRE(at != std::string::npos);
        const auto score_at = out.find("best_score=", at) + 11;
        const double reported = std::stod(out.substr(score_at));
        CHECK(reported == doctest::Approx(best[l]).epsilon(1e-12));
    }
}

TEST_CASE("the thread cap leaves results unchanged") {
    Scratch tmp;
    const std::string train = tmp / "train.csv";
    REQUIRE(run("synth --generator single-index --n 300 --d 4 --seed 14 --out " + train) == 0);
    auto fit_with = [&](const std::string& env, const std::string& tag) {
        const std::string model = tmp / ("m" + tag + ".json");
        REQUIRE(run("fit --train " + train + " --target y --val-frac 0.2 --leaf-size 120"
                    " --iterations 2 --seed 6 --out " + model, nullptr, env) == 0);
        return slurp(model);
    };
    CHECK(fit_with("XRFM_THREADS=1", "1") == fit_with("XRFM_THREADS=4", "4"));
}

TEST_CASE("bench emits one row per size") {
    Scratch tmp;
    const std::string out_csv = tmp / "bench.csv";
    std::string out;
    REQUIRE(run("bench --sizes 400,800 --leaf-size 200 --seed 2 --out " + out_csv, &out) == 0);
    const std::string text = slurp(out_csv);
    CHECK(line_count(text) == 3); // header + 2 rows
    CHECK(text.find("n,fit_seconds") == 0);
    CHECK(text.find("400,") != std::string::npos);
    CHECK(text.find("800,") != std::string::npos);
}

TEST_CASE("classification round trip through the CLI") {
    Scratch tmp;
    const std::string train = tmp / "train.csv";
    {
        std::ofstream out(train);
        out << "x0,x1,color,label\n";
        xrfm::Rng rng(17);
        for (int i = 0; i < 300; ++i) {
            const double a = rng.normal(), b = rng.normal();
            const char* color = i % 3 == 0 ? "red" : i % 3 == 1 ? "green" : "blue";
            out << a << ',' << b << ',' << color << ',' << (a + b > 0 ? "pos" : "neg") << "\n";
        }
    }
    const std::string model = tmp / "m.json";
    REQUIRE(run("fit --train " + train + " --target label --task classification --val-frac 0.2"
                " --leaf-size 400 --iterations 2 --out " + model) == 0);
    const std::string preds = tmp / "p.csv";
    REQUIRE(run("predict --model " + model + " --input " + train + " --out " + preds) == 0);
    const std::string text = slurp(preds);
    CHECK(text.rfind("label,score_", 0) == 0);
    CHECK(text.find("score_pos") != std::string::npos);
    CHECK(text.find("score_neg") != std::string::npos);
    CHECK(line_count(text) == 301);

    // labels agree with the sign rule for most rows
    std::stringstream ss(text);
    std::string line;
    std::getline(ss, line);
    std::size_t row = 0, hits = 0;
    xrfm::Rng rng(17);
    while (std::getline(ss, line)) {
        const double a = rng.normal(), b = rng.normal();
        const std::string want = a + b > 0 ? "pos" : "neg";
        if (line.substr(0, line.find(',')) == want) ++hits;
        ++row;
    }
    CHECK(row == 300);
    CHECK(hits >= 270);
}
