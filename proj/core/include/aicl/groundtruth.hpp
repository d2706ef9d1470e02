#pragma once

#include <cstddef>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "aicl/corpus.hpp"
#include "aicl/llm_gateway.hpp"
#include "aicl/text_index.hpp"

namespace aicl {

struct Probe {
    std::size_t k = 0;
    /// -1 when the probe could not run (prompt over context, or fewer than k candidates).
    int predicted_label = -1;
    double confidence = 0.0;

    friend bool operator==(const Probe&, const Probe&) = default;
};

/// Optimal shot count for one training instance.
struct KLabel {
    std::string instance_id;
    std::size_t k_star = 1;
    double confidence = 0.0;
    std::vector<Probe> probed;

    friend bool operator==(const KLabel&, const KLabel&) = default;
};

/// Scans probes in order and keeps the first one whose confidence strictly exceeds everything
/// before it (starting from 0). Returns {1, 0} when no probe is confidently correct.
std::pair<std::size_t, double> select_k_star(std::span<const Probe> probes);

struct GroundTruthOptions {
    std::size_t M = 5;
    std::size_t workers = 1;
    /// Abort once incomplete instances exceed this fraction of the training set.
    double max_incomplete_fraction = 0.10;
    /// Called after each completed instance with (done, total).
    std::function<void(std::size_t, std::size_t)> progress;
};

struct GroundTruth {
    /// Sorted by instance id.
    std::vector<KLabel> labels;
    /// Instances dropped after a gateway failure, sorted, each "id: reason".
    std::vector<std::string> incomplete;
};

/// For every training instance: retrieve its top-M neighbours (itself excluded), predict with
/// j = 0..M shots, and label it with the j giving the most confident correct prediction.
/// Issues (M + 1) gateway calls per instance unless a prompt overflows the context, in which
/// case the remaining larger j are recorded as not run. Throws GroundTruthError when too many
/// instances fail.
GroundTruth build_ground_truth(LlmGateway& gateway, const DatasetManifest& manifest, const Bm25Index& index,
                               const InstanceStore& train, const GroundTruthOptions& options);

void export_klabels(std::span<const KLabel> labels, const std::filesystem::path& path);
std::vector<KLabel> import_klabels(const std::filesystem::path& path);

/// Count of labels per k_star value, indexed 0..M.
std::vector<std::size_t> k_star_histogram(std::span<const KLabel> labels, std::size_t M);

}  // namespace aicl
