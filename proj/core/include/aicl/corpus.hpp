#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace aicl {

struct LabeledInstance {
    std::string id;
    std::string text;
    int label = 0;

    friend bool operator==(const LabeledInstance&, const LabeledInstance&) = default;
};

/// Ordered, id-addressable collection of instances. Immutable once constructed.
class InstanceStore {
public:
    InstanceStore() = default;
    /// Throws DuplicateIdError when two instances share an id.
    explicit InstanceStore(std::vector<LabeledInstance> instances);

    std::size_t size() const noexcept { return items_.size(); }
    bool empty() const noexcept { return items_.empty(); }
    const LabeledInstance& operator[](std::size_t i) const { return items_[i]; }
    std::span<const LabeledInstance> instances() const noexcept { return items_; }
    auto begin() const noexcept { return items_.begin(); }
    auto end() const noexcept { return items_.end(); }

    const LabeledInstance* find(std::string_view id) const;
    std::optional<std::size_t> position(std::string_view id) const;

    /// Count of instances per label; labels >= num_classes are ignored.
    std::vector<std::size_t> label_histogram(int num_classes) const;

    /// SHA-256 of the canonical JSONL serialization.
    std::string content_hash() const;

    friend bool operator==(const InstanceStore& a, const InstanceStore& b) { return a.items_ == b.items_; }

private:
    std::vector<LabeledInstance> items_;
    std::unordered_map<std::string, std::size_t> by_id_;
};

struct SplitCounts {
    std::size_t train = 0;
    std::size_t test = 0;
    friend bool operator==(const SplitCounts&, const SplitCounts&) = default;
};

/// Class inventory of a dataset plus the verbaliser words that identify each class in model
/// output.
struct DatasetManifest {
    std::string name;
    int num_classes = 0;
    std::vector<std::string> class_names;
    std::vector<std::vector<std::string>> verbaliser_sets;
    SplitCounts splits;

    /// Throws ManifestError on inconsistent sizes, empty or overlapping verbaliser sets, or
    /// class names the prompt template cannot carry (`,` `{` `}` or line breaks).
    void validate() const;

    friend bool operator==(const DatasetManifest&, const DatasetManifest&) = default;
};

/// Built-in manifests: "sst2", "agnews", "jigsaw".
DatasetManifest manifest_preset(std::string_view name);
DatasetManifest load_manifest(const std::filesystem::path& path);
void save_manifest(const DatasetManifest& manifest, const std::filesystem::path& path);

enum class SourceFormat { agnews_csv, sst2_tsv, jigsaw_csv, jsonl };

SourceFormat parse_source_format(std::string_view name);
std::string_view to_string(SourceFormat format) noexcept;

/// Parses one raw file with the named adapter. Generated ids are `<id_prefix><row>` with the
/// row ordinal zero-padded to six digits; JSONL and Jigsaw keep the ids present in the file.
/// Errors name the offending `path:line`.
InstanceStore ingest_file(const std::filesystem::path& path, SourceFormat format,
                          const DatasetManifest& manifest, std::string_view id_prefix = "");

struct IngestResult {
    InstanceStore train;
    InstanceStore test;
};

/// Reads the official split files found in `source_dir`:
///   agnews_csv  train.csv, test.csv
///   sst2_tsv    train.tsv, dev.tsv (the public test split is unlabeled)
///   jigsaw_csv  train.csv, test.csv + test_labels.csv (rows labeled -1 are dropped)
///   jsonl       train.jsonl, test.jsonl
IngestResult ingest(const std::filesystem::path& source_dir, SourceFormat format,
                    const DatasetManifest& manifest);

/// Deterministic id-hash split of a single store; an instance goes to test when
/// fnv1a64(id) mod 10000 < test_fraction * 10000.
IngestResult split_by_id_hash(const InstanceStore& all, double test_fraction);

std::string to_jsonl(const InstanceStore& store);
void write_store(const InstanceStore& store, const std::filesystem::path& path);

/// Loads a canonical JSONL split in file order. Throws DuplicateIdError on repeated ids.
InstanceStore load_store(const std::filesystem::path& path);

}  // namespace aicl
