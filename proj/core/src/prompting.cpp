#include "aicl/prompting.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "aicl/error.hpp"
#include "unicode.hpp"

namespace aicl {

namespace {

constexpr std::string_view kInstructionHead = "Predict the type of ";
constexpr std::string_view kInstructionClasses = " as one of {";
constexpr std::string_view kInstructionTail = "} given the following example";
constexpr std::string_view kExampleHead = "Example: ";
constexpr std::string_view kExampleClass = " is a representative of class ";
constexpr std::string_view kClassSeparator = ", ";

std::string inline_text(std::string_view text) {
    std::string out;
    out.reserve(text.size());
    bool pending_space = false;
    std::size_t pos = 0;
    while (pos < text.size()) {
        const std::size_t start = pos;
        const char32_t cp = unicode::decode(text, pos);
        if (unicode::is_space(cp)) {
            pending_space = !out.empty();
            continue;
        }
        if (pending_space) {
            out.push_back(' ');
            pending_space = false;
        }
        out.append(text.substr(start, pos - start));
    }
    return out;
}

std::string strip(std::string_view s) {
    std::size_t pos = 0;
    std::string out;
    // Trim Unicode whitespace plus the U+0120/U+010A markers byte-level BPE vocabularies use.
    std::vector<char32_t> cps;
    while (pos < s.size()) {
        cps.push_back(unicode::decode(s, pos));
    }
    auto blank = [](char32_t c) { return unicode::is_space(c) || c == 0x120 || c == 0x10A; };
    std::size_t first = 0;
    std::size_t last = cps.size();
    while (first < last && blank(cps[first])) ++first;
    while (last > first && blank(cps[last - 1])) --last;
    for (std::size_t i = first; i < last; ++i) {
        unicode::append_utf8(out, cps[i]);
    }
    return out;
}

}  // namespace

std::string render(const PromptSpec& spec) {
    std::string out;
    out += kInstructionHead;
    out += inline_text(spec.test_text);
    out += kInstructionClasses;
    for (std::size_t c = 0; c < spec.class_names.size(); ++c) {
        if (c > 0) {
            out += kClassSeparator;
        }
        out += spec.class_names[c];
    }
    out += kInstructionTail;
    for (const auto& ex : spec.examples) {
        out.push_back('\n');
        out += kExampleHead;
        out += inline_text(ex.text);
        out += kExampleClass;
        out += spec.class_names.at(static_cast<std::size_t>(ex.label));
    }
    return out;
}

ParsedPrompt parse_prompt(std::string_view prompt) {
    std::vector<std::string_view> lines;
    for (std::size_t start = 0;;) {
        const auto nl = prompt.find('\n', start);
        lines.push_back(prompt.substr(start, nl == std::string_view::npos ? std::string_view::npos : nl - start));
        if (nl == std::string_view::npos) {
            break;
        }
        start = nl + 1;
    }
    const auto head = lines.front();
    if (head.substr(0, kInstructionHead.size()) != kInstructionHead ||
        head.size() < kInstructionHead.size() + kInstructionTail.size() ||
        head.substr(head.size() - kInstructionTail.size()) != kInstructionTail) {
        throw TemplateError("prompt does not start with the k-shot instruction");
    }
    const auto body = head.substr(kInstructionHead.size(),
                                  head.size() - kInstructionHead.size() - kInstructionTail.size());
    const auto split = body.rfind(kInstructionClasses);
    if (split == std::string_view::npos) {
        throw TemplateError("instruction has no class list");
    }
    ParsedPrompt parsed;
    parsed.test_text = std::string(body.substr(0, split));
    auto classes = body.substr(split + kInstructionClasses.size());
    for (std::size_t start = 0;;) {
        const auto sep = classes.find(kClassSeparator, start);
        parsed.class_names.emplace_back(classes.substr(start, sep == std::string_view::npos ? sep : sep - start));
        if (sep == std::string_view::npos) {
            break;
        }
        start = sep + kClassSeparator.size();
    }
    if (parsed.class_names.size() < 2 ||
        std::any_of(parsed.class_names.begin(), parsed.class_names.end(), [](const auto& c) { return c.empty(); })) {
        throw TemplateError("instruction class list is malformed");
    }
    for (std::size_t i = 1; i < lines.size(); ++i) {
        const auto line = lines[i];
        const auto cls = line.rfind(kExampleClass);
        if (line.substr(0, kExampleHead.size()) != kExampleHead || cls == std::string_view::npos ||
            cls < kExampleHead.size()) {
            throw TemplateError("line " + std::to_string(i + 1) + " is not an example line");
        }
        std::string name(line.substr(cls + kExampleClass.size()));
        if (std::find(parsed.class_names.begin(), parsed.class_names.end(), name) == parsed.class_names.end()) {
            throw TemplateError("example on line " + std::to_string(i + 1) + " has unknown class \"" + name + "\"");
        }
        parsed.examples.emplace_back(std::string(line.substr(kExampleHead.size(), cls - kExampleHead.size())),
                                     std::move(name));
    }
    return parsed;
}

std::string_view to_string(PosteriorSource source) noexcept {
    switch (source) {
        case PosteriorSource::logprobs: return "logprobs";
        case PosteriorSource::text_fallback: return "text_fallback";
        case PosteriorSource::uniform: return "uniform";
    }
    return "uniform";
}

PosteriorSource parse_posterior_source(std::string_view name) {
    if (name == "logprobs") return PosteriorSource::logprobs;
    if (name == "text_fallback") return PosteriorSource::text_fallback;
    if (name == "uniform") return PosteriorSource::uniform;
    throw Error("unknown posterior source \"" + std::string(name) + "\"");
}

int ClassPosterior::argmax() const noexcept {
    if (probs.empty()) {
        return -1;
    }
    return static_cast<int>(std::max_element(probs.begin(), probs.end()) - probs.begin());
}

ClassPosterior to_posterior(const Completion& completion, const DatasetManifest& manifest) {
    const auto p = static_cast<std::size_t>(manifest.num_classes);
    std::vector<std::vector<std::string>> words(p);
    for (std::size_t c = 0; c < p; ++c) {
        for (const auto& w : manifest.verbaliser_sets[c]) {
            words[c].push_back(casefold(strip(w)));
        }
    }

    ClassPosterior post;
    post.probs.assign(p, 0.0);
    for (const auto& [token, logprob] : completion.first_token_logprobs) {
        const auto t = casefold(strip(token));
        if (t.empty()) {
            continue;
        }
        const double mass = std::exp(logprob);
        for (std::size_t c = 0; c < p; ++c) {
            const bool hit = std::any_of(words[c].begin(), words[c].end(),
                                         [&](const std::string& w) { return w.compare(0, t.size(), t) == 0; });
            if (hit) {
                post.probs[c] += mass;
            }
        }
    }
    double total = 0.0;
    for (double m : post.probs) {
        total += m;
    }
    if (total > 0.0 && std::isfinite(total)) {
        for (double& m : post.probs) {
            m /= total;
        }
        post.source = PosteriorSource::logprobs;
        return post;
    }

    const auto text = casefold(completion.text);
    std::size_t best_pos = std::string::npos;
    std::size_t best_len = 0;
    std::size_t winner = p;
    for (std::size_t c = 0; c < p; ++c) {
        for (const auto& w : words[c]) {
            const auto pos = text.find(w);
            if (pos == std::string::npos) {
                continue;
            }
            if (pos < best_pos || (pos == best_pos && w.size() > best_len)) {
                best_pos = pos;
                best_len = w.size();
                winner = c;
            }
        }
    }
    post.probs.assign(p, 0.0);
    if (winner < p) {
        post.probs[winner] = 1.0;
        post.source = PosteriorSource::text_fallback;
    } else {
        post.probs.assign(p, 1.0 / static_cast<double>(p));
        post.source = PosteriorSource::uniform;
    }
    return post;
}

PromptSpec make_prompt_spec(const DatasetManifest& manifest, const Bm25Index& index, const LabeledInstance& x,
                            const RankedCandidates& candidates, std::size_t k) {
    if (k > candidates.hits.size()) {
        throw Error("requested " + std::to_string(k) + " examples but only " +
                    std::to_string(candidates.hits.size()) + " candidates were retrieved for \"" + x.id + "\"");
    }
    PromptSpec spec;
    spec.test_text = x.text;
    spec.class_names = manifest.class_names;
    spec.examples.reserve(k);
    for (std::size_t i = 0; i < k; ++i) {
        const auto& z = index.instance(candidates.hits[i].doc);
        spec.examples.push_back({z.text, z.label});
    }
    return spec;
}

Prediction predict(LlmGateway& gateway, const DatasetManifest& manifest, const Bm25Index& index,
                   const LabeledInstance& x, const RankedCandidates& candidates, std::size_t k) {
    auto spec = make_prompt_spec(manifest, index, x, candidates, k);
    const auto prompt = render(spec);
    const auto limit = gateway.config().max_context_tokens;
    const auto tokens = gateway.count_tokens(prompt);
    if (tokens >= limit) {
        int fits = -1;
        for (std::size_t j = k; j-- > 0;) {
            spec.examples.resize(j);
            if (gateway.count_tokens(render(spec)) < limit) {
                fits = static_cast<int>(j);
                break;
            }
        }
        throw ContextOverflowError(tokens, limit, fits);
    }
    const auto completion = gateway.complete(prompt);
    return {to_posterior(completion, manifest),
            completion.prompt_token_count > 0 ? completion.prompt_token_count : tokens};
}

}  // namespace aicl
