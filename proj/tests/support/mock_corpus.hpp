#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "aicl/corpus.hpp"

namespace aicl::testing {

/// Synthetic binary corpus for the adaptive-k check. Test instances holding the token "marker"
/// retrieve a wrong-label decoy at rank 1 and same-label support at ranks 2..5, so the mock
/// oracle needs k >= 3. Every other test instance retrieves a same-label partner at rank 1 and
/// a wrong-label hub at ranks 2..5, so it is right at k = 1 and wrong from k = 3 on.
struct AdaptiveCorpus {
    DatasetManifest manifest;
    std::vector<LabeledInstance> train;
    std::vector<LabeledInstance> test;
};

AdaptiveCorpus make_adaptive_corpus(std::uint64_t seed = 7);

/// Writes train.jsonl, test.jsonl and manifest.json under `dir`.
void write_adaptive_corpus(const AdaptiveCorpus& corpus, const std::filesystem::path& dir);

/// A mock-mode pipeline config reading `corpus_dir` and writing to `work_dir`.
std::string adaptive_config_json(const std::filesystem::path& corpus_dir, const std::filesystem::path& work_dir);

bool has_marker(const LabeledInstance& x);

}  // namespace aicl::testing
