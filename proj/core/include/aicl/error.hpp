#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace aicl {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Raised by dataset adapters; the message carries `path:line:`.
class IngestError : public Error {
public:
    using Error::Error;
};

class DuplicateIdError : public Error {
public:
    explicit DuplicateIdError(std::string id)
        : Error("duplicate instance id: \"" + id + "\""), id_(std::move(id)) {}
    const std::string& id() const noexcept { return id_; }

private:
    std::string id_;
};

class ManifestError : public Error {
public:
    using Error::Error;
};

class IndexError : public Error {
public:
    using Error::Error;
};

/// Transport, HTTP status, or response-shape failure from the LLM endpoint.
class GatewayError : public Error {
public:
    GatewayError(const std::string& what, bool retriable) : Error(what), retriable_(retriable) {}
    bool retriable() const noexcept { return retriable_; }

private:
    bool retriable_;
};

/// The rendered prompt does not fit the model context. Never retried.
class ContextOverflowError : public GatewayError {
public:
    ContextOverflowError(std::size_t prompt_tokens, std::size_t max_tokens, int largest_fitting_k = -1)
        : GatewayError("prompt of " + std::to_string(prompt_tokens) +
                           " tokens does not fit context of " + std::to_string(max_tokens) +
                           " tokens",
                       false),
          prompt_tokens_(prompt_tokens),
          max_tokens_(max_tokens),
          largest_fitting_k_(largest_fitting_k) {}

    std::size_t prompt_tokens() const noexcept { return prompt_tokens_; }
    std::size_t max_tokens() const noexcept { return max_tokens_; }
    /// Largest shot count below the requested one whose prompt fits, or -1 if none does.
    int largest_fitting_k() const noexcept { return largest_fitting_k_; }

private:
    std::size_t prompt_tokens_;
    std::size_t max_tokens_;
    int largest_fitting_k_;
};

class TemplateError : public Error {
public:
    using Error::Error;
};

class CalibrationError : public Error {
public:
    using Error::Error;
};

class GroundTruthError : public Error {
public:
    using Error::Error;
};

class TrainingError : public Error {
public:
    using Error::Error;
};

class DimensionError : public Error {
public:
    using Error::Error;
};

class EvalError : public Error {
public:
    using Error::Error;
};

/// A pipeline stage was invoked before the stage producing its input.
class MissingStageError : public Error {
public:
    MissingStageError(std::string stage, const std::string& detail)
        : Error(stage + " required: " + detail), stage_(std::move(stage)) {}
    const std::string& stage() const noexcept { return stage_; }

private:
    std::string stage_;
};

}  // namespace aicl
