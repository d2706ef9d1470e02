#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "aicl/corpus.hpp"

namespace aicl::testing {

/// Random short texts over a small vocabulary mixed with stopwords, labels in 0..p-1, ids
/// "s000".."sNNN" in shuffled order.
inline std::vector<LabeledInstance> small_corpus(std::size_t n, int p, std::uint64_t seed, int vocab = 30) {
    static const char* stop[] = {"the", "a", "of", "and", "is"};
    std::mt19937_64 rng(seed);
    std::vector<LabeledInstance> out;
    for (std::size_t i = 0; i < n; ++i) {
        std::string text;
        const int len = 2 + static_cast<int>(rng() % 6);
        for (int w = 0; w < len; ++w) {
            if (!text.empty()) {
                text += ' ';
            }
            text += rng() % 4 == 0 ? std::string(stop[rng() % 5]) : "v" + std::to_string(rng() % vocab);
        }
        char id[16];
        std::snprintf(id, sizeof id, "s%03zu", i);
        out.push_back({id, text, static_cast<int>(rng() % static_cast<std::uint64_t>(p))});
    }
    std::shuffle(out.begin(), out.end(), rng);
    return out;
}

inline DatasetManifest binary_manifest() {
    DatasetManifest m;
    m.name = "bin";
    m.num_classes = 2;
    m.class_names = {"negative", "positive"};
    m.verbaliser_sets = {{"negative"}, {"positive"}};
    return m;
}

}  // namespace aicl::testing
