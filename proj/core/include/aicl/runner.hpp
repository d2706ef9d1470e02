#pragma once

#include <cstddef>
#include <filesystem>
#include <memory>
#include <string>
#include <variant>
#include <vector>

#include "aicl/corpus.hpp"
#include "aicl/kpredictor.hpp"
#include "aicl/llm_gateway.hpp"
#include "aicl/prompting.hpp"
#include "aicl/qpp.hpp"
#include "aicl/text_index.hpp"

namespace aicl {

struct ZeroShot {};
struct StaticK {
    std::size_t k = 1;
};
struct QppAicl {
    std::shared_ptr<const QppCalibration> calibration;
};
struct Saicl {
    std::shared_ptr<const KModel> model;
    std::shared_ptr<const Featurizer> featurizer;
};

/// How many demonstrations each test instance gets.
struct Strategy {
    std::variant<ZeroShot, StaticK, QppAicl, Saicl> kind;
    std::size_t M = 5;

    /// Short file-safe name: "zero", "static-3", "qpp", "saicl".
    std::string name() const;
    /// Row label used in reports: "0-shot", "SICL", "QPP-AICL", "SAICL".
    std::string method() const;
    /// Throws Error on static k outside {1..M} or a missing calibration/model.
    void validate() const;
};

/// Parses "zero", "static:<k>", "qpp" or "saicl" (dependencies left empty).
Strategy parse_strategy(std::string_view spec, std::size_t M);

struct RunRecord {
    std::string instance_id;
    int gold_label = 0;
    int predicted_label = 0;
    /// Shots the strategy asked for, before clamping to the candidate count or the context.
    std::size_t k_requested = 0;
    std::size_t k_used = 0;
    /// True when k_used < k_requested.
    bool context_fallback = false;
    ClassPosterior posterior;
    std::size_t prompt_tokens = 0;
    std::string strategy;

    friend bool operator==(const RunRecord&, const RunRecord&) = default;
};

struct SkippedInstance {
    std::string instance_id;
    std::string reason;
    friend bool operator==(const SkippedInstance&, const SkippedInstance&) = default;
};

struct RunHeader {
    std::string strategy;
    std::string method;
    std::size_t M = 0;
    std::string dataset;
    std::string model_id;
    std::string config_hash;
    std::size_t records = 0;
    std::size_t skipped = 0;
    bool valid = true;
    friend bool operator==(const RunHeader&, const RunHeader&) = default;
};

struct RunResult {
    RunHeader header;
    /// Sorted by instance id.
    std::vector<RunRecord> records;
    std::vector<SkippedInstance> skipped;
    /// Number of retrieve() calls made; at most one per test instance.
    std::size_t retrievals = 0;
};

struct RunOptions {
    std::size_t workers = 1;
    std::string config_hash;
    /// A run with more skipped instances than this fraction is marked invalid.
    double max_skipped_fraction = 0.05;
};

/// Executes `strategy` over the test store. Each instance retrieves its top-M once; k comes
/// from the strategy, is clamped to the number of candidates, and is lowered further (to 0 at
/// worst) until the prompt fits the context. Gateway failures skip the instance.
RunResult run(const Strategy& strategy, LlmGateway& gateway, const DatasetManifest& manifest, const Bm25Index& index,
              const InstanceStore& test, const RunOptions& options = {});

/// The shot count `strategy` asks for, before any clamping.
std::size_t requested_k(const Strategy& strategy, const Bm25Index& index, const LabeledInstance& x,
                        const RankedCandidates& candidates);

std::string run_to_jsonl(const RunResult& result);
void write_run(const RunResult& result, const std::filesystem::path& path);
RunResult read_run(const std::filesystem::path& path);

}  // namespace aicl
