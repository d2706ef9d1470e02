#include "aicl/llm_gateway.hpp"

#include <chrono>
#include <cmath>
#include <condition_variable>
#include <cstdlib>
#include <mutex>
#include <shared_mutex>
#include <thread>
#include <unordered_map>

#include "aicl/error.hpp"
#include "aicl/hashing.hpp"
#include "httplib.h"
#include "json_io.hpp"

namespace aicl {

namespace {

using io::json;

constexpr int kMaxGeneratedTokens = 8;

struct Endpoint {
    std::string origin;     // scheme://host[:port]
    std::string base_path;  // "" or "/prefix", never a trailing slash
};

Endpoint split_endpoint(const std::string& url) {
    const auto scheme_end = url.find("://");
    if (scheme_end == std::string::npos) {
        throw Error("endpoint_url \"" + url + "\" has no scheme (expected http://, https:// or mock:)");
    }
    const auto path_start = url.find('/', scheme_end + 3);
    Endpoint e;
    e.origin = url.substr(0, path_start);
    if (path_start != std::string::npos) {
        e.base_path = url.substr(path_start);
        while (!e.base_path.empty() && e.base_path.back() == '/') {
            e.base_path.pop_back();
        }
    }
    return e;
}

json completion_to_json(const Completion& c) {
    json j;
    j["text"] = c.text;
    j["first_token_logprobs"] = c.first_token_logprobs;
    j["prompt_token_count"] = c.prompt_token_count;
    return j;
}

Completion completion_from_json(const json& j) {
    Completion c;
    c.text = j.at("text").get<std::string>();
    c.first_token_logprobs = j.at("first_token_logprobs").get<std::map<std::string, double>>();
    c.prompt_token_count = j.at("prompt_token_count").get<std::size_t>();
    return c;
}

/// Accepts both the legacy `top_logprobs: [{token: lp}]` shape and the list-of-objects shape
/// some servers emit (`[{token, logprob}]` or `{top_logprobs: [...]}` per position).
std::map<std::string, double> first_position_logprobs(const json& logprobs) {
    std::map<std::string, double> out;
    if (!logprobs.is_object()) {
        return out;
    }
    const auto it = logprobs.find("top_logprobs");
    if (it == logprobs.end() || !it->is_array() || it->empty()) {
        return out;
    }
    const auto& first = (*it)[0];
    if (first.is_object()) {
        for (const auto& [token, lp] : first.items()) {
            if (lp.is_number()) {
                out[token] = lp.get<double>();
            }
        }
    } else if (first.is_array()) {
        for (const auto& entry : first) {
            if (entry.is_object() && entry.contains("token") && entry.contains("logprob")) {
                out[entry["token"].get<std::string>()] = entry["logprob"].get<double>();
            }
        }
    }
    return out;
}

class Semaphore {
public:
    explicit Semaphore(std::size_t permits) : permits_(permits) {}
    void acquire() {
        std::unique_lock lock(mu_);
        cv_.wait(lock, [&] { return permits_ > 0; });
        --permits_;
    }
    void release() {
        {
            std::lock_guard lock(mu_);
            ++permits_;
        }
        cv_.notify_one();
    }

private:
    std::mutex mu_;
    std::condition_variable cv_;
    std::size_t permits_;
};

}  // namespace

void LlmConfig::validate() const {
    if (max_context_tokens == 0) {
        throw Error("llm.max_context_tokens must be > 0");
    }
    if (top_logprobs < 1) {
        throw Error("llm.top_logprobs must be >= 1");
    }
    if (max_in_flight == 0) {
        throw Error("llm.max_in_flight must be > 0");
    }
    if (max_attempts < 1) {
        throw Error("llm.max_attempts must be >= 1");
    }
    if (timeout_ms <= 0) {
        throw Error("llm.timeout_ms must be > 0");
    }
}

std::size_t whitespace_token_count(std::string_view text) noexcept {
    std::size_t n = 0;
    bool in_token = false;
    for (char c : text) {
        const bool space = c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\v' || c == '\f';
        if (!space && !in_token) {
            ++n;
        }
        in_token = !space;
    }
    return n;
}

struct LlmGateway::Impl {
    explicit Impl(LlmConfig c) : cfg(std::move(c)), in_flight(cfg.max_in_flight) {}

    LlmConfig cfg;
    CompletionBackend backend;
    Semaphore in_flight;

    mutable std::shared_mutex cache_mu;
    std::unordered_map<std::string, Completion> memory_cache;

    std::mutex tokenizer_mu;
    std::optional<bool> remote_tokenizer;  // unknown until first probe

    mutable std::mutex stats_mu;
    GatewayStats stats;

    void bump(std::size_t GatewayStats::*field) {
        std::lock_guard lock(stats_mu);
        ++(stats.*field);
    }

    std::filesystem::path cache_path(const std::string& key) const {
        return *cfg.cache_dir / key.substr(0, 2) / (key + ".json");
    }

    std::optional<Completion> cache_lookup(const std::string& key) {
        {
            std::shared_lock lock(cache_mu);
            const auto it = memory_cache.find(key);
            if (it != memory_cache.end()) {
                return it->second;
            }
        }
        if (!cfg.cache_dir) {
            return std::nullopt;
        }
        const auto path = cache_path(key);
        std::error_code ec;
        if (!std::filesystem::exists(path, ec)) {
            return std::nullopt;
        }
        try {
            auto c = completion_from_json(io::parse_json_file(path));
            std::unique_lock lock(cache_mu);
            memory_cache.emplace(key, c);
            return c;
        } catch (const std::exception&) {
            // A corrupt entry is treated as a miss and overwritten.
            return std::nullopt;
        }
    }

    void cache_store(const std::string& key, const Completion& c) {
        {
            std::unique_lock lock(cache_mu);
            memory_cache.insert_or_assign(key, c);
        }
        if (cfg.cache_dir) {
            io::write_file_atomic(cache_path(key), completion_to_json(c).dump() + "\n");
        }
    }

    std::unique_ptr<httplib::Client> client(const Endpoint& ep) const {
        auto cli = std::make_unique<httplib::Client>(ep.origin);
        const auto ms = std::chrono::milliseconds(cfg.timeout_ms);
        cli->set_connection_timeout(std::chrono::duration_cast<std::chrono::seconds>(ms).count(),
                                    static_cast<time_t>((ms.count() % 1000) * 1000));
        cli->set_read_timeout(std::chrono::duration_cast<std::chrono::seconds>(ms).count(),
                              static_cast<time_t>((ms.count() % 1000) * 1000));
        cli->set_write_timeout(std::chrono::duration_cast<std::chrono::seconds>(ms).count(),
                               static_cast<time_t>((ms.count() % 1000) * 1000));
        if (const char* key = std::getenv("AICL_API_KEY"); key != nullptr && *key != '\0') {
            cli->set_bearer_token_auth(key);
        }
        return cli;
    }

    Completion http_complete(const std::string& prompt, std::size_t prompt_tokens) const {
        const auto ep = split_endpoint(cfg.endpoint_url);
        json body;
        body["model"] = cfg.model_id;
        body["prompt"] = prompt;
        body["max_tokens"] = kMaxGeneratedTokens;
        body["temperature"] = 0;
        body["logprobs"] = cfg.top_logprobs;
        auto cli = client(ep);
        const auto res = cli->Post(ep.base_path + "/v1/completions", body.dump(), "application/json");
        if (!res) {
            throw GatewayError("POST " + cfg.endpoint_url + "/v1/completions failed: " +
                                   httplib::to_string(res.error()),
                               true);
        }
        if (res->status != 200) {
            const bool retriable = res->status >= 500 || res->status == 429 || res->status == 408;
            throw GatewayError("POST " + cfg.endpoint_url + "/v1/completions returned HTTP " +
                                   std::to_string(res->status) + ": " + res->body.substr(0, 200),
                               retriable);
        }
        json reply;
        try {
            reply = json::parse(res->body);
        } catch (const json::parse_error& e) {
            throw GatewayError(std::string("completion response is not JSON: ") + e.what(), false);
        }
        if (!reply.contains("choices") || !reply["choices"].is_array() || reply["choices"].empty()) {
            throw GatewayError("completion response has no choices", false);
        }
        const auto& choice = reply["choices"][0];
        Completion c;
        c.text = choice.value("text", "");
        if (choice.contains("logprobs")) {
            c.first_token_logprobs = first_position_logprobs(choice["logprobs"]);
        }
        c.prompt_token_count = prompt_tokens;
        if (reply.contains("usage") && reply["usage"].is_object() &&
            reply["usage"].contains("prompt_tokens") && reply["usage"]["prompt_tokens"].is_number_unsigned()) {
            c.prompt_token_count = reply["usage"]["prompt_tokens"].get<std::size_t>();
        }
        return c;
    }

    std::optional<std::size_t> remote_count(std::string_view text) {
        {
            std::lock_guard lock(tokenizer_mu);
            if (remote_tokenizer.has_value() && !*remote_tokenizer) {
                return std::nullopt;
            }
        }
        std::optional<std::size_t> count;
        try {
            const auto ep = split_endpoint(cfg.endpoint_url);
            json body;
            body["model"] = cfg.model_id;
            body["prompt"] = std::string(text);
            auto cli = client(ep);
            const auto res = cli->Post(ep.base_path + "/tokenize", body.dump(), "application/json");
            if (res && res->status == 200) {
                const auto reply = json::parse(res->body);
                if (reply.contains("count") && reply["count"].is_number_unsigned()) {
                    count = reply["count"].get<std::size_t>();
                } else if (reply.contains("tokens") && reply["tokens"].is_array()) {
                    count = reply["tokens"].size();
                }
            }
        } catch (const std::exception&) {
            count.reset();
        }
        std::lock_guard lock(tokenizer_mu);
        if (!remote_tokenizer.has_value()) {
            remote_tokenizer = count.has_value();
        }
        return count;
    }
};

LlmGateway::LlmGateway(LlmConfig config) : impl_(std::make_unique<Impl>(std::move(config))) {
    impl_->cfg.validate();
    if (impl_->cfg.is_mock()) {
        const auto seed = impl_->cfg.seed;
        impl_->backend = [seed](const std::string& prompt) { return mock_oracle(prompt, seed); };
    } else {
        split_endpoint(impl_->cfg.endpoint_url);
    }
}

LlmGateway::LlmGateway(LlmConfig config, CompletionBackend backend)
    : impl_(std::make_unique<Impl>(std::move(config))) {
    impl_->cfg.validate();
    impl_->backend = std::move(backend);
}

LlmGateway::~LlmGateway() = default;

const LlmConfig& LlmGateway::config() const noexcept { return impl_->cfg; }

GatewayStats LlmGateway::stats() const {
    std::lock_guard lock(impl_->stats_mu);
    return impl_->stats;
}

std::string LlmGateway::cache_key(std::string_view prompt) const {
    std::string material = impl_->cfg.model_id;
    material.push_back('\0');
    if (impl_->cfg.is_mock()) {
        material += "seed=" + std::to_string(impl_->cfg.seed);
        material.push_back('\0');
    }
    material.append(prompt);
    return sha256_hex(material);
}

std::size_t LlmGateway::count_tokens(std::string_view text) {
    if (text.empty()) {
        return 0;
    }
    if (!impl_->cfg.is_mock() && !impl_->backend) {
        if (auto n = impl_->remote_count(text)) {
            return *n;
        }
    }
    return whitespace_token_count(text);
}

Completion LlmGateway::complete(const std::string& prompt) {
    impl_->bump(&GatewayStats::calls);
    const std::size_t tokens = count_tokens(prompt);
    if (tokens >= impl_->cfg.max_context_tokens) {
        throw ContextOverflowError(tokens, impl_->cfg.max_context_tokens);
    }
    const auto key = cache_key(prompt);
    if (auto hit = impl_->cache_lookup(key)) {
        impl_->bump(&GatewayStats::cache_hits);
        return *hit;
    }

    Completion result;
    for (int attempt = 1;; ++attempt) {
        impl_->in_flight.acquire();
        try {
            impl_->bump(&GatewayStats::backend_requests);
            result = impl_->backend ? impl_->backend(prompt) : impl_->http_complete(prompt, tokens);
            impl_->in_flight.release();
            break;
        } catch (const GatewayError& e) {
            impl_->in_flight.release();
            if (!e.retriable() || attempt >= impl_->cfg.max_attempts) {
                throw;
            }
        } catch (...) {
            impl_->in_flight.release();
            throw;
        }
        impl_->bump(&GatewayStats::retries);
        std::this_thread::sleep_for(std::chrono::milliseconds(impl_->cfg.backoff_ms) * (1 << (attempt - 1)));
    }
    impl_->cache_store(key, result);
    return result;
}

}  // namespace aicl
