#include "doctest.h"

#include <set>

#include "aicl/error.hpp"
#include "aicl/pipeline.hpp"
#include "mock_corpus.hpp"
#include "tempdir.hpp"

using namespace aicl;
using aicl::testing::slurp;
using aicl::testing::TempDir;

namespace {

const char* kMinimal = R"({"dataset": {"preset": "sst2"}, "source": {"format": "sst2_tsv", "dir": "data"}})";

}  // namespace

TEST_CASE("config defaults and relative paths") {
    const auto cfg = PipelineConfig::from_json(kMinimal, "/base");
    CHECK(cfg.M == 5);
    CHECK(cfg.seed == 13);
    CHECK(cfg.manifest_preset == std::optional<std::string>("sst2"));
    REQUIRE(cfg.source.has_value());
    CHECK(cfg.source->dir == std::optional<std::filesystem::path>("/base/data"));
    CHECK(cfg.paths.work_dir == std::filesystem::path("/base/work"));
    CHECK(cfg.cache_dir() == std::filesystem::path("/base/work/cache"));
    CHECK(cfg.effective_llm().seed == 13);

    const auto abs = PipelineConfig::from_json(
        R"({"dataset": {"preset": "sst2"}, "seed": 4, "paths": {"work_dir": "/w", "cache_dir": "c"}})", "/base");
    CHECK(abs.paths.work_dir == std::filesystem::path("/w"));
    CHECK(abs.cache_dir() == std::filesystem::path("/base/c"));
    CHECK(abs.effective_llm().seed == 4);
    CHECK(abs.kpredictor.seed == 4);
}

TEST_CASE("config load resolves against the file's directory") {
    TempDir tmp;
    const auto path = tmp.write("sub/cfg.json", kMinimal);
    const auto cfg = PipelineConfig::load(path);
    CHECK(cfg.paths.work_dir == tmp.path() / "sub" / "work");
    CHECK_THROWS_AS(PipelineConfig::load(tmp / "missing.json"), Error);
}

TEST_CASE("config rejects bad input") {
    CHECK_THROWS_AS(PipelineConfig::from_json(R"({"dataset": {"preset": "sst2"}, "extra": 1})", "/"), Error);
    CHECK_THROWS_AS(PipelineConfig::from_json(R"({"dataset": {"preset": "sst2"}, "llm": {"temp": 1}})", "/"), Error);
    CHECK_THROWS_AS(PipelineConfig::from_json(R"({"dataset": {"preset": "sst2"}, "M": 0})", "/"), Error);
    CHECK_THROWS_AS(PipelineConfig::from_json(R"({"M": 3})", "/"), Error);
    CHECK_THROWS_AS(PipelineConfig::from_json(R"({"dataset": {"preset": "a", "manifest": "b"}})", "/"), Error);
    CHECK_THROWS_AS(PipelineConfig::from_json(R"({"dataset": {"preset": "sst2"}, "kpredictor": {"dims": 100}})", "/"),
                    Error);
    CHECK_THROWS_AS(PipelineConfig::from_json(R"({"dataset": {"preset": "sst2"}, "source": {"format": "jsonl"}})", "/"),
                    Error);
    CHECK_THROWS_AS(
        PipelineConfig::from_json(R"({"dataset": {"preset": "sst2"}, "llm": {"decoding": "sample"}})", "/"), Error);
    CHECK_THROWS_AS(PipelineConfig::from_json("{not json", "/"), Error);
    try {
        PipelineConfig::from_json(R"({"dataset": {"preset": "sst2"}, "llm": {"temp": 1}})", "/");
    } catch (const Error& e) {
        CHECK(std::string(e.what()).find("llm.temp") != std::string::npos);
    }
}

TEST_CASE("config hash changes with every field") {
    const std::string base_hash = PipelineConfig::from_json(kMinimal, "/b").hash();
    CHECK(base_hash.size() == 64);
    CHECK(PipelineConfig::from_json(kMinimal, "/b").hash() == base_hash);
    const std::vector<std::string> variants = {
        R"({"dataset": {"preset": "agnews"}, "source": {"format": "sst2_tsv", "dir": "data"}})",
        R"({"dataset": {"preset": "sst2"}, "source": {"format": "jsonl", "dir": "data"}})",
        R"({"dataset": {"preset": "sst2"}, "source": {"format": "sst2_tsv", "dir": "data2"}})",
        R"({"dataset": {"preset": "sst2"}, "source": {"format": "sst2_tsv", "dir": "data"}, "M": 4})",
        R"({"dataset": {"preset": "sst2"}, "source": {"format": "sst2_tsv", "dir": "data"}, "seed": 1})",
        R"({"dataset": {"preset": "sst2"}, "source": {"format": "sst2_tsv", "dir": "data"}, "llm": {"model_id": "x"}})",
        R"({"dataset": {"preset": "sst2"}, "source": {"format": "sst2_tsv", "dir": "data"}, "llm": {"max_context_tokens": 1024}})",
        R"({"dataset": {"preset": "sst2"}, "source": {"format": "sst2_tsv", "dir": "data"}, "qpp": {"sample_size": 10}})",
        R"({"dataset": {"preset": "sst2"}, "source": {"format": "sst2_tsv", "dir": "data"}, "kpredictor": {"lr": 0.2}})",
        R"({"dataset": {"preset": "sst2"}, "source": {"format": "sst2_tsv", "dir": "data"}, "kpredictor": {"dims": 1024}})",
        R"({"dataset": {"preset": "sst2"}, "source": {"format": "sst2_tsv", "dir": "data"}, "bm25": {"k1": 1.5}})",
        R"({"dataset": {"preset": "sst2"}, "source": {"format": "sst2_tsv", "dir": "data"}, "paths": {"work_dir": "w2"}})",
    };
    std::set<std::string> seen = {base_hash};
    for (const auto& v : variants) {
        CHECK(seen.insert(PipelineConfig::from_json(v, "/b").hash()).second);
    }
    // Key order and whitespace do not matter.
    CHECK(PipelineConfig::from_json(R"({"source":{"dir":"data","format":"sst2_tsv"},"dataset":{"preset":"sst2"}})", "/b")
              .hash() == base_hash);
}

TEST_CASE("stages name the stage that must run first") {
    TempDir tmp;
    const auto corpus = aicl::testing::make_adaptive_corpus();
    aicl::testing::write_adaptive_corpus(corpus, tmp / "corpus");
    Pipeline p(PipelineConfig::from_json(aicl::testing::adaptive_config_json(tmp / "corpus", tmp / "work"), tmp.path()));

    auto message = [](auto&& fn) -> std::string {
        try {
            fn();
        } catch (const MissingStageError& e) {
            return e.what();
        }
        return "";
    };
    CHECK(message([&] { p.build_index(); }).find("ingest required") != std::string::npos);
    p.ingest();
    CHECK(message([&] { p.calibrate(); }).find("index required") != std::string::npos);
    p.build_index();
    CHECK(message([&] { p.train_k(); }).find("build-gt required") != std::string::npos);
    CHECK(message([&] { p.run("saicl"); }).find("train-k required") != std::string::npos);
    CHECK(message([&] { p.run("qpp"); }).find("calibrate required") != std::string::npos);
    CHECK(message([&] { p.eval("zero"); }).find("run required") != std::string::npos);
    CHECK(message([&] { p.compare(); }).find("eval required") != std::string::npos);
}

TEST_CASE("full pipeline on the adaptive corpus") {
    TempDir tmp;
    const auto corpus = aicl::testing::make_adaptive_corpus();
    aicl::testing::write_adaptive_corpus(corpus, tmp / "corpus");
    Pipeline p(PipelineConfig::from_json(aicl::testing::adaptive_config_json(tmp / "corpus", tmp / "work"), tmp.path()));
    CHECK(p.banner().find("model mock seed 13") != std::string::npos);

    const auto ing = p.ingest();
    CHECK(ing.train.size() == corpus.train.size());
    CHECK(ing.test.size() == corpus.test.size());
    p.build_index();
    const auto cal = p.calibrate();
    CHECK(cal.M == 5);
    const auto gt = p.build_ground_truth();
    CHECK(gt.labels.size() == corpus.train.size());
    p.train_k();
    for (const auto* spec : {"zero", "static:1", "static:3", "static:5", "qpp", "saicl"}) {
        const auto r = p.run(spec);
        CHECK(r.header.valid);
        CHECK(r.header.config_hash == p.config().hash());
        CHECK(std::filesystem::exists(p.run_path(r.header.strategy)));
    }
    const auto reports = p.eval();
    CHECK(reports.size() == 6);
    const auto table = p.compare();
    std::size_t rows = 0;
    for (char c : table.text) {
        rows += c == '\n';
    }
    CHECK(rows == 8);
    // Rows come in method order.
    const auto zero = table.text.find("0-shot");
    const auto sicl = table.text.find("SICL");
    const auto qpp = table.text.find("QPP-AICL");
    const auto saicl = table.text.find("SAICL");
    CHECK(zero < sicl);
    CHECK(sicl < qpp);
    CHECK(qpp < saicl);
    CHECK(std::filesystem::exists(p.work_dir() / "compare.csv"));

    const auto static3 = slurp(p.run_path("static-3"));
    CHECK(static3.find("\"k_used\":5") == std::string::npos);
}
