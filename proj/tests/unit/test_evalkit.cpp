#include "doctest.h"

#include <algorithm>
#include <fstream>
#include <random>

#include "aicl/error.hpp"
#include "aicl/evalkit.hpp"
#include "oracles.hpp"
#include "tempdir.hpp"

using namespace aicl;
using aicl::testing::slurp;
using aicl::testing::TempDir;

namespace {

RunRecord rec(std::string id, int gold, int pred, std::size_t k = 0, std::size_t tokens = 10) {
    RunRecord r;
    r.instance_id = std::move(id);
    r.gold_label = gold;
    r.predicted_label = pred;
    r.k_used = k;
    r.k_requested = k;
    r.prompt_tokens = tokens;
    return r;
}

MetricsReport metrics(double p, double r, double f, double k, long long ais) {
    MetricsReport m;
    m.macro_precision = p;
    m.macro_recall = r;
    m.macro_f1 = f;
    m.avg_k = k;
    m.ais = ais;
    m.n = 10;
    m.per_class = {{p, r, f}, {p, r, f}};
    return m;
}

std::vector<RunRecord> random_run(std::mt19937_64& rng, std::size_t n, int p) {
    std::uniform_int_distribution<int> label(0, p - 1);
    std::uniform_int_distribution<std::size_t> k(0, 5);
    std::uniform_int_distribution<std::size_t> tok(5, 400);
    std::vector<RunRecord> out;
    for (std::size_t i = 0; i < n; ++i) {
        out.push_back(rec("r" + std::to_string(i), label(rng), label(rng), k(rng), tok(rng)));
    }
    return out;
}

}  // namespace

TEST_CASE("all-correct run scores 1") {
    const std::vector<RunRecord> r = {rec("a", 0, 0, 1, 10), rec("b", 1, 1, 3, 21), rec("c", 2, 2, 2, 30)};
    const auto m = score(r, 3);
    CHECK(m.macro_precision == 1.0);
    CHECK(m.macro_recall == 1.0);
    CHECK(m.macro_f1 == 1.0);
    CHECK(m.avg_k == 2.0);
    CHECK(m.ais == 20);
    CHECK(m.n == 3);
}

TEST_CASE("always predicting class 0 on a balanced binary set") {
    const std::vector<RunRecord> r = {rec("a", 0, 0), rec("b", 0, 0), rec("c", 1, 0), rec("d", 1, 0)};
    const auto m = score(r, 2);
    CHECK(m.per_class[0].precision == doctest::Approx(0.5));
    CHECK(m.per_class[0].recall == 1.0);
    CHECK(m.per_class[0].f1 == doctest::Approx(2.0 / 3.0));
    CHECK(m.per_class[1].precision == 0.0);
    CHECK(m.per_class[1].f1 == 0.0);
    CHECK(m.macro_f1 == doctest::Approx(1.0 / 3.0));
    CHECK(m.macro_precision == doctest::Approx(0.25));
    CHECK(m.macro_recall == doctest::Approx(0.5));
}

TEST_CASE("AIS rounds the mean token count") {
    CHECK(score(std::vector<RunRecord>{rec("a", 0, 0, 0, 10), rec("b", 0, 0, 0, 11)}, 1).ais == 11);
    CHECK(score(std::vector<RunRecord>{rec("a", 0, 0, 0, 10), rec("b", 0, 0, 0, 10), rec("c", 0, 0, 0, 11)}, 1).ais ==
          10);
}

TEST_CASE("metrics match confusion-matrix counting on random runs") {
    std::mt19937_64 rng(99);
    for (int trial = 0; trial < 50; ++trial) {
        const int p = std::uniform_int_distribution<int>(1, 5)(rng);
        const auto n = std::uniform_int_distribution<std::size_t>(1, 200)(rng);
        const auto run = random_run(rng, n, p);
        const auto got = score(run, p);
        const auto want = oracle::confusion_metrics(run, p);
        CHECK(got == want);
    }
}

TEST_CASE("metrics do not depend on record order") {
    std::mt19937_64 rng(5);
    auto run = random_run(rng, 120, 4);
    const auto before = score(run, 4);
    std::shuffle(run.begin(), run.end(), rng);
    const auto after = score(run, 4);
    CHECK(after.macro_f1 == doctest::Approx(before.macro_f1));
    CHECK(after.ais == before.ais);
    CHECK(after.avg_k == doctest::Approx(before.avg_k));
}

TEST_CASE("scoring errors") {
    CHECK_THROWS_AS(score(std::vector<RunRecord>{}, 2), EvalError);
    CHECK_THROWS_AS(score(std::vector<RunRecord>{rec("a", 2, 0)}, 2), EvalError);
    CHECK_THROWS_AS(score(std::vector<RunRecord>{rec("a", 0, -1)}, 2), EvalError);
}

TEST_CASE("format_k") {
    CHECK(format_k(0.0) == "0");
    CHECK(format_k(3.0) == "3");
    CHECK(format_k(1.6) == "1.60");
    CHECK(format_k(1.875) == "1.88");
}

TEST_CASE("compare bolds the best F per dataset") {
    const std::vector<NamedReport> one = {{"d", "SICL", metrics(0.9, 0.9, 0.9, 1, 100)}};
    const auto c1 = compare(one);
    CHECK(c1.text.find("**0.9000**") != std::string::npos);

    const std::vector<NamedReport> two = {{"d", "SICL", metrics(0.9, 0.9, 0.90, 1, 100)},
                                          {"d", "SAICL", metrics(0.9, 0.9, 0.91, 1.5, 120)},
                                          {"e", "SICL", metrics(0.5, 0.5, 0.50, 2, 90)}};
    const auto c2 = compare(two);
    CHECK(c2.text.find("**0.9100**") != std::string::npos);
    CHECK(c2.text.find("**0.9000**") == std::string::npos);
    CHECK(c2.text.find("**0.5000**") != std::string::npos);
    CHECK(c2.csv.rfind("dataset,method,k,precision,recall,f_score,ais\n", 0) == 0);
    CHECK(c2.csv.find("d,SAICL,1.50,0.9000,0.9000,0.9100,120\n") != std::string::npos);
    CHECK(c2.json.find("\"best\": true") != std::string::npos);
}

TEST_CASE("compare table matches the golden file") {
    const std::vector<NamedReport> rows = {{"mock", "0-shot", metrics(0.5, 0.5, 0.5, 0, 16)},
                                           {"mock", "SICL", metrics(0.7, 0.7, 0.7, 1, 28)},
                                           {"mock", "SAICL", metrics(1, 1, 1, 1.6, 35)}};
    CHECK(compare(rows).text == slurp(std::filesystem::path(AICL_GOLDEN_DIR) / "compare_three.txt"));
}

TEST_CASE("report files round trip") {
    TempDir tmp;
    std::mt19937_64 rng(3);
    const NamedReport r{"agnews", "SAICL", score(random_run(rng, 77, 4), 4)};
    save_report(r, tmp / "r.json");
    const auto back = load_report(tmp / "r.json");
    CHECK(back.dataset == r.dataset);
    CHECK(back.method == r.method);
    CHECK(back.report == r.report);

    tmp.write("bad.json", "{\"format\":\"other\"}");
    CHECK_THROWS_AS(load_report(tmp / "bad.json"), EvalError);
}
