#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "aicl/corpus.hpp"
#include "aicl/evalkit.hpp"
#include "aicl/groundtruth.hpp"
#include "aicl/kpredictor.hpp"
#include "aicl/llm_gateway.hpp"
#include "aicl/qpp.hpp"
#include "aicl/runner.hpp"
#include "aicl/text_index.hpp"

namespace aicl {

/// Where `ingest` reads raw data from. Either a directory holding the official split files, or
/// one file split by id hash into train/test.
struct SourceConfig {
    SourceFormat format = SourceFormat::jsonl;
    std::optional<std::filesystem::path> dir;
    std::optional<std::filesystem::path> file;
    double test_fraction = 0.2;
};

struct PathsConfig {
    std::filesystem::path work_dir = "work";
    /// Defaults to work_dir/cache.
    std::optional<std::filesystem::path> cache_dir;
};

struct PipelineConfig {
    /// Exactly one of manifest_preset / manifest_path is set.
    std::optional<std::string> manifest_preset;
    std::optional<std::filesystem::path> manifest_path;
    std::optional<SourceConfig> source;
    std::size_t M = 5;
    LlmConfig llm;
    std::size_t qpp_sample_size = 1000;
    std::size_t feature_dims = std::size_t{1} << 15;
    KHyperParams kpredictor;
    Bm25Params bm25;
    PathsConfig paths;
    std::uint64_t seed = 13;

    /// Relative paths resolve against `base_dir`. Unknown keys are rejected.
    static PipelineConfig from_json(const std::string& json_text, const std::filesystem::path& base_dir);
    static PipelineConfig load(const std::filesystem::path& path);

    /// Throws Error on M = 0 or an inconsistent section.
    void validate() const;
    /// Every field, fully resolved, as sorted-key JSON.
    std::string canonical_json() const;
    /// SHA-256 of canonical_json().
    std::string hash() const;

    std::filesystem::path cache_dir() const;
    /// The LLM section with the cache directory and seed filled in.
    LlmConfig effective_llm() const;
};

/// Stage driver over the artifact files in work_dir. Each stage loads what it needs from disk
/// and throws MissingStageError naming the stage that has to run first.
class Pipeline {
public:
    explicit Pipeline(PipelineConfig config);
    ~Pipeline();
    Pipeline(const Pipeline&) = delete;
    Pipeline& operator=(const Pipeline&) = delete;

    const PipelineConfig& config() const noexcept { return config_; }
    /// "config <hash> model <id> seed <n>".
    std::string banner() const;

    IngestResult ingest();
    Bm25Index build_index();
    QppCalibration calibrate();
    GroundTruth build_ground_truth();
    KModel train_k();
    /// `spec` as accepted by parse_strategy; writes runs/<strategy name>.jsonl.
    RunResult run(std::string_view spec);
    /// Scores one run file (by strategy name) or, with no name, every run present.
    std::vector<NamedReport> eval(const std::optional<std::string>& strategy_name = std::nullopt);
    /// Table over every report in reports/, in the order 0-shot, SICL by k, QPP-AICL, SAICL.
    Comparison compare();

    std::filesystem::path work_dir() const { return config_.paths.work_dir; }
    std::filesystem::path train_path() const { return work_dir() / "train.jsonl"; }
    std::filesystem::path test_path() const { return work_dir() / "test.jsonl"; }
    std::filesystem::path manifest_path() const { return work_dir() / "manifest.json"; }
    std::filesystem::path index_path() const { return work_dir() / "index.json"; }
    std::filesystem::path calibration_path() const { return work_dir() / "qpp_calibration.json"; }
    std::filesystem::path klabels_path() const { return work_dir() / "klabels.jsonl"; }
    std::filesystem::path kmodel_path() const { return work_dir() / "kmodel.json"; }
    std::filesystem::path run_path(const std::string& name) const { return work_dir() / "runs" / (name + ".jsonl"); }
    std::filesystem::path report_path(const std::string& name) const {
        return work_dir() / "reports" / (name + ".json");
    }

private:
    DatasetManifest config_manifest() const;
    DatasetManifest load_manifest_artifact() const;
    std::shared_ptr<const InstanceStore> load_train() const;
    InstanceStore load_test() const;
    Bm25Index load_index(std::shared_ptr<const InstanceStore> train) const;
    LlmGateway& gateway();

    PipelineConfig config_;
    std::unique_ptr<LlmGateway> gateway_;
};

}  // namespace aicl
