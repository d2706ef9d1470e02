#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "aicl/corpus.hpp"
#include "aicl/llm_gateway.hpp"
#include "aicl/text_index.hpp"

namespace aicl {

struct PromptExample {
    std::string text;
    int label = 0;
};

struct PromptSpec {
    std::string test_text;
    /// Demonstrations in retrieval rank order.
    std::vector<PromptExample> examples;
    std::vector<std::string> class_names;
};

/// Renders the k-shot instruction:
///
///     Predict the type of <x> as one of {<C0>, ..., <Cp-1>} given the following example
///     Example: <z1> is a representative of class <y(z1)>
///     ...
///
/// Lines are joined by '\n' with no trailing newline. Whitespace runs inside texts are
/// collapsed to a single space so the output always has k + 1 lines.
std::string render(const PromptSpec& spec);

/// Inverse of render(), used by the mock oracle. Example labels come back as class names.
struct ParsedPrompt {
    std::string test_text;
    std::vector<std::string> class_names;
    std::vector<std::pair<std::string, std::string>> examples;  // (text, class name)
};

/// Throws TemplateError when `prompt` does not follow the template.
ParsedPrompt parse_prompt(std::string_view prompt);

enum class PosteriorSource { logprobs, text_fallback, uniform };

std::string_view to_string(PosteriorSource source) noexcept;
PosteriorSource parse_posterior_source(std::string_view name);

struct ClassPosterior {
    std::vector<double> probs;
    PosteriorSource source = PosteriorSource::uniform;

    /// Index of the largest probability; the lowest class index wins ties.
    int argmax() const noexcept;

    friend bool operator==(const ClassPosterior&, const ClassPosterior&) = default;
};

/// Maps a completion to a distribution over classes. Each first-token alternative whose
/// case-folded, trimmed text is a prefix of some verbaliser word of class c adds exp(logprob)
/// to c. With no mass anywhere, the verbaliser word occurring earliest in the completion text
/// wins outright; failing that the posterior is uniform.
ClassPosterior to_posterior(const Completion& completion, const DatasetManifest& manifest);

struct Prediction {
    ClassPosterior posterior;
    std::size_t prompt_tokens = 0;
};

/// Builds the prompt from the first k candidates, calls the gateway and maps the result.
/// If the prompt does not fit the context, throws ContextOverflowError whose
/// largest_fitting_k() is the largest k' < k that fits (or -1).
Prediction predict(LlmGateway& gateway, const DatasetManifest& manifest, const Bm25Index& index,
                   const LabeledInstance& x, const RankedCandidates& candidates, std::size_t k);

/// The PromptSpec predict() renders for k shots.
PromptSpec make_prompt_spec(const DatasetManifest& manifest, const Bm25Index& index,
                            const LabeledInstance& x, const RankedCandidates& candidates, std::size_t k);

}  // namespace aicl
