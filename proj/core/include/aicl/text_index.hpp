#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "aicl/corpus.hpp"

namespace aicl {

/// Lowercases (Unicode-aware for Latin, Greek and Cyrillic) and splits on runs of
/// non-alphanumeric characters. Empty tokens are dropped.
std::vector<std::string> tokenize(std::string_view text);

/// Lowercased copy of `text` with the same case mapping as tokenize().
std::string casefold(std::string_view text);

struct Bm25Params {
    double k1 = 1.2;
    double b = 0.75;
};

struct Posting {
    std::uint32_t doc = 0;
    std::uint32_t tf = 0;
};

struct Hit {
    std::string instance_id;
    double score = 0.0;
    /// Position of the instance in the indexed store.
    std::size_t doc = 0;
};

/// Top-M retrieval result: scores non-increasing, equal scores ordered by ascending id.
struct RankedCandidates {
    std::string query_id;
    std::size_t M = 0;
    std::vector<Hit> hits;
};

enum class SelfMatch { exclude, keep };

/// Okapi BM25 inverted index over a training store. Write-once; every const member is safe to
/// call concurrently.
class Bm25Index {
public:
    /// Throws IndexError when `train` is empty.
    static Bm25Index build(std::shared_ptr<const InstanceStore> train, Bm25Params params = {});

    /// Loads a postings dump written by save(). `train` must be the store it was built from.
    static Bm25Index load(const std::filesystem::path& path, std::shared_ptr<const InstanceStore> train);
    void save(const std::filesystem::path& path) const;
    std::string dump() const;

    /// BM25 top-M. Only the query's distinct terms contribute, each once, summed in
    /// lexicographic term order. With SelfMatch::exclude the document whose id equals the
    /// query id is skipped.
    RankedCandidates retrieve(const LabeledInstance& query, std::size_t M,
                              SelfMatch self = SelfMatch::exclude) const;

    /// BM25 score of the query against the whole collection treated as one document.
    double collection_score(const LabeledInstance& query) const;

    /// IDF = ln((N - df + 0.5) / (df + 0.5) + 1).
    double idf(std::size_t df) const noexcept;

    std::size_t num_docs() const noexcept { return doc_len_.size(); }
    double avgdl() const noexcept { return avgdl_; }
    std::uint64_t total_terms() const noexcept { return total_terms_; }
    std::size_t vocabulary_size() const noexcept { return postings_.size(); }
    std::size_t doc_length(std::size_t doc) const { return doc_len_[doc]; }
    std::size_t df(std::string_view term) const;
    std::uint64_t collection_frequency(std::string_view term) const;
    std::span<const Posting> postings(std::string_view term) const;
    /// Vocabulary in lexicographic order, indexed by term id.
    const std::vector<std::string>& terms() const noexcept { return terms_; }
    std::size_t df_of(std::size_t term_id) const { return postings_[term_id].size(); }
    const Bm25Params& params() const noexcept { return params_; }

    const InstanceStore& store() const noexcept { return *store_; }
    std::shared_ptr<const InstanceStore> store_ptr() const noexcept { return store_; }
    const LabeledInstance& instance(std::size_t doc) const { return (*store_)[doc]; }
    const std::string& corpus_hash() const noexcept { return corpus_hash_; }

private:
    Bm25Index() = default;
    void finalize();
    std::vector<std::uint32_t> distinct_query_terms(std::string_view text) const;

    std::shared_ptr<const InstanceStore> store_;
    Bm25Params params_;
    std::unordered_map<std::string, std::uint32_t> term_ids_;
    std::vector<std::string> terms_;
    std::vector<std::vector<Posting>> postings_;
    std::vector<std::uint64_t> ctf_;
    std::vector<std::uint32_t> doc_len_;
    std::uint64_t total_terms_ = 0;
    double avgdl_ = 0.0;
    std::string corpus_hash_;
};

}  // namespace aicl
