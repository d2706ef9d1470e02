#include "aicl/text_index.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "aicl/error.hpp"
#include "json_io.hpp"
#include "unicode.hpp"

namespace aicl {

namespace {

constexpr int kIndexFormatVersion = 1;

bool better(const Hit& a, const Hit& b) {
    if (a.score != b.score) {
        return a.score > b.score;
    }
    return a.instance_id < b.instance_id;
}

}  // namespace

std::vector<std::string> tokenize(std::string_view text) {
    std::vector<std::string> tokens;
    std::string current;
    std::size_t pos = 0;
    while (pos < text.size()) {
        const char32_t cp = unicode::decode(text, pos);
        if (unicode::is_word_char(cp)) {
            unicode::append_utf8(current, unicode::to_lower(cp));
        } else if (!current.empty()) {
            tokens.push_back(std::move(current));
            current.clear();
        }
    }
    if (!current.empty()) {
        tokens.push_back(std::move(current));
    }
    return tokens;
}

std::string casefold(std::string_view text) {
    std::string out;
    out.reserve(text.size());
    std::size_t pos = 0;
    while (pos < text.size()) {
        unicode::append_utf8(out, unicode::to_lower(unicode::decode(text, pos)));
    }
    return out;
}

Bm25Index Bm25Index::build(std::shared_ptr<const InstanceStore> train, Bm25Params params) {
    if (!train || train->empty()) {
        throw IndexError("cannot build an index over an empty store");
    }
    Bm25Index index;
    index.store_ = std::move(train);
    index.params_ = params;
    const auto& store = *index.store_;
    index.doc_len_.resize(store.size());

    std::map<std::string, std::vector<Posting>> sorted;
    for (std::size_t d = 0; d < store.size(); ++d) {
        auto tokens = tokenize(store[d].text);
        index.doc_len_[d] = static_cast<std::uint32_t>(tokens.size());
        std::sort(tokens.begin(), tokens.end());
        for (std::size_t i = 0; i < tokens.size();) {
            std::size_t j = i;
            while (j < tokens.size() && tokens[j] == tokens[i]) {
                ++j;
            }
            sorted[tokens[i]].push_back({static_cast<std::uint32_t>(d), static_cast<std::uint32_t>(j - i)});
            i = j;
        }
    }
    for (auto& [term, list] : sorted) {
        index.term_ids_.emplace(term, static_cast<std::uint32_t>(index.terms_.size()));
        index.terms_.push_back(term);
        index.postings_.push_back(std::move(list));
    }
    index.finalize();
    return index;
}

void Bm25Index::finalize() {
    ctf_.assign(postings_.size(), 0);
    for (std::size_t t = 0; t < postings_.size(); ++t) {
        for (const auto& p : postings_[t]) {
            ctf_[t] += p.tf;
        }
    }
    total_terms_ = 0;
    for (auto len : doc_len_) {
        total_terms_ += len;
    }
    avgdl_ = doc_len_.empty() ? 0.0 : static_cast<double>(total_terms_) / static_cast<double>(doc_len_.size());
    corpus_hash_ = store_->content_hash();
}

double Bm25Index::idf(std::size_t df) const noexcept {
    const auto n = static_cast<double>(num_docs());
    const auto d = static_cast<double>(df);
    return std::log((n - d + 0.5) / (d + 0.5) + 1.0);
}

std::size_t Bm25Index::df(std::string_view term) const {
    const auto it = term_ids_.find(std::string(term));
    return it == term_ids_.end() ? 0 : postings_[it->second].size();
}

std::uint64_t Bm25Index::collection_frequency(std::string_view term) const {
    const auto it = term_ids_.find(std::string(term));
    return it == term_ids_.end() ? 0 : ctf_[it->second];
}

std::span<const Posting> Bm25Index::postings(std::string_view term) const {
    const auto it = term_ids_.find(std::string(term));
    if (it == term_ids_.end()) {
        return {};
    }
    return postings_[it->second];
}

std::vector<std::uint32_t> Bm25Index::distinct_query_terms(std::string_view text) const {
    auto tokens = tokenize(text);
    std::sort(tokens.begin(), tokens.end());
    tokens.erase(std::unique(tokens.begin(), tokens.end()), tokens.end());
    std::vector<std::uint32_t> ids;
    for (const auto& t : tokens) {
        const auto it = term_ids_.find(t);
        if (it != term_ids_.end()) {
            ids.push_back(it->second);
        }
    }
    return ids;
}

RankedCandidates Bm25Index::retrieve(const LabeledInstance& query, std::size_t M, SelfMatch self) const {
    RankedCandidates out;
    out.query_id = query.id;
    out.M = M;
    if (M == 0) {
        return out;
    }
    const auto term_ids = distinct_query_terms(query.text);
    if (term_ids.empty()) {
        return out;
    }

    std::size_t excluded = SIZE_MAX;
    if (self == SelfMatch::exclude) {
        if (auto pos = store_->position(query.id)) {
            excluded = *pos;
        }
    }

    const double k1 = params_.k1;
    const double b = params_.b;
    std::vector<double> acc(num_docs(), 0.0);
    std::vector<std::uint32_t> touched;
    for (const auto t : term_ids) {
        const double w = idf(postings_[t].size());
        for (const auto& p : postings_[t]) {
            const double tf = p.tf;
            const double norm = k1 * (1.0 - b + b * static_cast<double>(doc_len_[p.doc]) / avgdl_);
            if (acc[p.doc] == 0.0) {
                touched.push_back(p.doc);
            }
            acc[p.doc] += w * tf * (k1 + 1.0) / (tf + norm);
        }
    }

    std::vector<Hit> hits;
    hits.reserve(touched.size());
    for (const auto d : touched) {
        if (d == excluded) {
            continue;
        }
        hits.push_back({(*store_)[d].id, acc[d], d});
    }
    const std::size_t keep = std::min(M, hits.size());
    std::partial_sort(hits.begin(), hits.begin() + static_cast<std::ptrdiff_t>(keep), hits.end(), better);
    hits.resize(keep);
    out.hits = std::move(hits);
    return out;
}

double Bm25Index::collection_score(const LabeledInstance& query) const {
    if (avgdl_ == 0.0) {
        return 0.0;
    }
    const double k1 = params_.k1;
    const double b = params_.b;
    const double norm = k1 * (1.0 - b + b * static_cast<double>(total_terms_) / avgdl_);
    double score = 0.0;
    for (const auto t : distinct_query_terms(query.text)) {
        const double tf = static_cast<double>(ctf_[t]);
        score += idf(postings_[t].size()) * tf * (k1 + 1.0) / (tf + norm);
    }
    return score;
}

std::string Bm25Index::dump() const {
    io::ordered_json j;
    j["format"] = "aicl-bm25";
    j["version"] = kIndexFormatVersion;
    j["k1"] = params_.k1;
    j["b"] = params_.b;
    j["corpus_hash"] = corpus_hash_;
    auto ids = io::json::array();
    for (const auto& x : *store_) {
        ids.push_back(x.id);
    }
    j["doc_ids"] = std::move(ids);
    j["doc_lengths"] = doc_len_;
    io::ordered_json terms = io::ordered_json::object();
    for (std::size_t t = 0; t < terms_.size(); ++t) {
        auto list = io::json::array();
        for (const auto& p : postings_[t]) {
            list.push_back({p.doc, p.tf});
        }
        terms[terms_[t]] = std::move(list);
    }
    j["postings"] = std::move(terms);
    return j.dump() + "\n";
}

void Bm25Index::save(const std::filesystem::path& path) const { io::write_file_atomic(path, dump()); }

Bm25Index Bm25Index::load(const std::filesystem::path& path, std::shared_ptr<const InstanceStore> train) {
    if (!train) {
        throw IndexError("index load requires the training store");
    }
    const auto j = io::parse_json_file(path);
    if (j.value("format", "") != "aicl-bm25" || j.value("version", 0) != kIndexFormatVersion) {
        throw IndexError(path.string() + ": not an aicl-bm25 v" + std::to_string(kIndexFormatVersion) + " file");
    }
    Bm25Index index;
    index.store_ = std::move(train);
    index.params_.k1 = j.at("k1").get<double>();
    index.params_.b = j.at("b").get<double>();
    const auto ids = j.at("doc_ids").get<std::vector<std::string>>();
    if (ids.size() != index.store_->size()) {
        throw IndexError(path.string() + ": index covers " + std::to_string(ids.size()) +
                         " documents, store has " + std::to_string(index.store_->size()));
    }
    for (std::size_t d = 0; d < ids.size(); ++d) {
        if (ids[d] != (*index.store_)[d].id) {
            throw IndexError(path.string() + ": document " + std::to_string(d) + " is \"" + ids[d] +
                             "\" but store has \"" + (*index.store_)[d].id + "\"");
        }
    }
    index.doc_len_ = j.at("doc_lengths").get<std::vector<std::uint32_t>>();
    if (index.doc_len_.size() != ids.size()) {
        throw IndexError(path.string() + ": doc_lengths size mismatch");
    }
    for (const auto& [term, list] : j.at("postings").items()) {
        std::vector<Posting> postings;
        postings.reserve(list.size());
        for (const auto& pair : list) {
            const auto doc = pair.at(0).get<std::uint32_t>();
            if (doc >= ids.size()) {
                throw IndexError(path.string() + ": posting for \"" + term + "\" points past the store");
            }
            postings.push_back({doc, pair.at(1).get<std::uint32_t>()});
        }
        index.term_ids_.emplace(term, static_cast<std::uint32_t>(index.terms_.size()));
        index.terms_.push_back(term);
        index.postings_.push_back(std::move(postings));
    }
    index.finalize();
    if (index.corpus_hash_ != j.at("corpus_hash").get<std::string>()) {
        throw IndexError(path.string() + ": corpus hash does not match the training store");
    }
    return index;
}

}  // namespace aicl
