#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace aicl {

enum class Decoding { greedy };

struct LlmConfig {
    /// Base URL of an OpenAI-compatible server, or "mock:" for the deterministic oracle.
    std::string endpoint_url = "mock:";
    std::string model_id = "mock";
    std::size_t max_context_tokens = 2048;
    Decoding decoding = Decoding::greedy;
    int top_logprobs = 5;
    int timeout_ms = 30000;
    std::optional<std::filesystem::path> cache_dir;
    /// Upper bound on concurrent backend requests; also sizes the runner's worker pool.
    std::size_t max_in_flight = 4;
    /// Seed of the mock oracle's fallback branch. Ignored by HTTP endpoints.
    std::uint64_t seed = 13;
    int max_attempts = 3;
    int backoff_ms = 200;

    bool is_mock() const noexcept { return endpoint_url.rfind("mock:", 0) == 0; }
    /// Throws Error on non-positive limits or a top_logprobs below 1.
    void validate() const;
};

struct Completion {
    std::string text;
    /// Alternatives at the first generated position, token -> natural-log probability.
    std::map<std::string, double> first_token_logprobs;
    std::size_t prompt_token_count = 0;

    friend bool operator==(const Completion&, const Completion&) = default;
};

/// Number of maximal runs of non-whitespace characters.
std::size_t whitespace_token_count(std::string_view text) noexcept;

/// Deterministic stand-in for the LLM. Parses the k-shot instruction template, votes among
/// the embedded examples that share a non-stopword token with the test text (ties go to the
/// label voted first, i.e. the higher-ranked example) and puts probability 0.7 on the winner.
/// Without such evidence the label is fnv1a64(test text) mixed with `seed`, mod p, and the
/// winner gets (0.7 + 1/p) / 2. Remaining mass is spread uniformly. Throws TemplateError on an
/// unparseable prompt.
Completion mock_oracle(std::string_view prompt, std::uint64_t seed);

/// First-token string the mock oracle emits for each class: the first alphanumeric run of the
/// class name, or the full name when two classes would collide.
std::vector<std::string> mock_class_tokens(const std::vector<std::string>& class_names);

struct GatewayStats {
    std::size_t calls = 0;
    std::size_t cache_hits = 0;
    std::size_t backend_requests = 0;
    std::size_t retries = 0;
};

/// Replaces the mock/HTTP backend; used by tests and custom oracles.
using CompletionBackend = std::function<Completion(const std::string& prompt)>;

/// Front door to the frozen LLM. complete() is thread-safe; results are memoised in memory
/// and, when cache_dir is set, on disk keyed by SHA-256 of (model id, prompt).
class LlmGateway {
public:
    explicit LlmGateway(LlmConfig config);
    LlmGateway(LlmConfig config, CompletionBackend backend);
    ~LlmGateway();
    LlmGateway(const LlmGateway&) = delete;
    LlmGateway& operator=(const LlmGateway&) = delete;

    /// Throws ContextOverflowError (before any request) when count_tokens(prompt) is not below
    /// max_context_tokens. Retriable GatewayErrors are retried up to max_attempts times with
    /// exponential backoff before being rethrown.
    Completion complete(const std::string& prompt);

    /// Provider tokenizer count when the endpoint exposes POST /tokenize, otherwise (and always
    /// in mock mode) whitespace_token_count.
    std::size_t count_tokens(std::string_view text);

    const LlmConfig& config() const noexcept;
    GatewayStats stats() const;
    std::string cache_key(std::string_view prompt) const;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

}  // namespace aicl
