#include <algorithm>
#include <cctype>
#include <cmath>
#include <string_view>
#include <unordered_set>

#include "aicl/hashing.hpp"
#include "aicl/llm_gateway.hpp"
#include "aicl/prompting.hpp"
#include "aicl/text_index.hpp"

namespace aicl {

namespace {

constexpr double kEvidenceProbability = 0.7;

// Function words ignored when deciding whether an example overlaps the test text.
const std::unordered_set<std::string_view>& stopwords() {
    static const std::unordered_set<std::string_view> words = {
        "a", "about", "above", "after", "again", "against", "all", "am", "an", "and", "any", "are",
        "as", "at", "be", "because", "been", "before", "being", "below", "between", "both", "but",
        "by", "can", "could", "did", "do", "does", "doing", "down", "during", "each", "few", "for",
        "from", "further", "had", "has", "have", "having", "he", "her", "here", "hers", "herself",
        "him", "himself", "his", "how", "i", "if", "in", "into", "is", "it", "its", "itself", "just",
        "me", "more", "most", "my", "myself", "no", "nor", "not", "now", "of", "off", "on", "once",
        "only", "or", "other", "our", "ours", "ourselves", "out", "over", "own", "s", "same", "she",
        "should", "so", "some", "such", "t", "than", "that", "the", "their", "theirs", "them",
        "themselves", "then", "there", "these", "they", "this", "those", "through", "to", "too",
        "under", "until", "up", "very", "was", "we", "were", "what", "when", "where", "which",
        "while", "who", "whom", "why", "will", "with", "would", "you", "your", "yours", "yourself",
        "yourselves"};
    return words;
}

std::unordered_set<std::string> content_terms(std::string_view text) {
    std::unordered_set<std::string> out;
    for (auto& t : tokenize(text)) {
        if (!stopwords().contains(t)) {
            out.insert(std::move(t));
        }
    }
    return out;
}

std::string first_alnum_run(std::string_view name) {
    const auto tokens = [&] {
        std::vector<std::string> runs;
        std::string cur;
        for (char c : name) {
            const auto u = static_cast<unsigned char>(c);
            if (std::isalnum(u) || u >= 0x80) {
                cur.push_back(c);
            } else if (!cur.empty()) {
                runs.push_back(cur);
                cur.clear();
            }
        }
        if (!cur.empty()) {
            runs.push_back(cur);
        }
        return runs;
    }();
    return tokens.empty() ? std::string(name) : tokens.front();
}

}  // namespace

std::vector<std::string> mock_class_tokens(const std::vector<std::string>& class_names) {
    std::vector<std::string> tokens;
    tokens.reserve(class_names.size());
    for (const auto& name : class_names) {
        tokens.push_back(first_alnum_run(name));
    }
    auto sorted = tokens;
    std::sort(sorted.begin(), sorted.end());
    if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) {
        return class_names;
    }
    return tokens;
}

Completion mock_oracle(std::string_view prompt, std::uint64_t seed) {
    const auto parsed = parse_prompt(prompt);
    const auto p = parsed.class_names.size();
    const auto test_terms = content_terms(parsed.test_text);

    std::vector<std::size_t> votes(p, 0);
    std::vector<std::size_t> first_vote(p, SIZE_MAX);
    for (std::size_t i = 0; i < parsed.examples.size(); ++i) {
        const auto& [text, name] = parsed.examples[i];
        const auto terms = content_terms(text);
        const bool overlaps = std::any_of(terms.begin(), terms.end(),
                                          [&](const std::string& t) { return test_terms.contains(t); });
        if (!overlaps) {
            continue;
        }
        const auto label = static_cast<std::size_t>(
            std::find(parsed.class_names.begin(), parsed.class_names.end(), name) - parsed.class_names.begin());
        ++votes[label];
        first_vote[label] = std::min(first_vote[label], i);
    }

    std::size_t winner = p;
    for (std::size_t c = 0; c < p; ++c) {
        if (votes[c] == 0) {
            continue;
        }
        if (winner == p || votes[c] > votes[winner] ||
            (votes[c] == votes[winner] && first_vote[c] < first_vote[winner])) {
            winner = c;
        }
    }
    double top = kEvidenceProbability;
    if (winner == p) {
        winner = splitmix64(fnv1a64(parsed.test_text) ^ splitmix64(seed)) % p;
        top = (kEvidenceProbability + 1.0 / static_cast<double>(p)) / 2.0;
    }

    const auto tokens = mock_class_tokens(parsed.class_names);
    const double rest = (1.0 - top) / static_cast<double>(p - 1);
    Completion c;
    for (std::size_t k = 0; k < p; ++k) {
        c.first_token_logprobs[tokens[k]] = std::log(k == winner ? top : rest);
    }
    c.text = parsed.class_names[winner];
    c.prompt_token_count = whitespace_token_count(prompt);
    return c;
}

}  // namespace aicl
