#include "aicl/runner.hpp"

#include <algorithm>
#include <atomic>
#include <fstream>
#include <optional>

#include "aicl/error.hpp"
#include "json_io.hpp"
#include "parallel.hpp"

namespace aicl {

namespace {

template <class... Ts>
struct overloaded : Ts... {
    using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

io::ordered_json record_to_json(const RunRecord& r) {
    io::ordered_json j;
    j["type"] = "record";
    j["instance_id"] = r.instance_id;
    j["strategy"] = r.strategy;
    j["gold_label"] = r.gold_label;
    j["predicted_label"] = r.predicted_label;
    j["k_requested"] = r.k_requested;
    j["k_used"] = r.k_used;
    j["context_fallback"] = r.context_fallback;
    j["prompt_tokens"] = r.prompt_tokens;
    j["posterior"] = r.posterior.probs;
    j["posterior_source"] = to_string(r.posterior.source);
    return j;
}

}  // namespace

std::string Strategy::name() const {
    return std::visit(overloaded{
                          [](const ZeroShot&) { return std::string("zero"); },
                          [](const StaticK& s) { return "static-" + std::to_string(s.k); },
                          [](const QppAicl&) { return std::string("qpp"); },
                          [](const Saicl&) { return std::string("saicl"); },
                      },
                      kind);
}

std::string Strategy::method() const {
    return std::visit(overloaded{
                          [](const ZeroShot&) { return std::string("0-shot"); },
                          [](const StaticK&) { return std::string("SICL"); },
                          [](const QppAicl&) { return std::string("QPP-AICL"); },
                          [](const Saicl&) { return std::string("SAICL"); },
                      },
                      kind);
}

void Strategy::validate() const {
    if (M == 0) {
        throw Error("strategy M must be >= 1");
    }
    std::visit(overloaded{
                   [](const ZeroShot&) {},
                   [&](const StaticK& s) {
                       if (s.k < 1 || s.k > M) {
                           throw Error("static k must be in 1.." + std::to_string(M) + ", got " + std::to_string(s.k));
                       }
                   },
                   [&](const QppAicl& q) {
                       if (!q.calibration) {
                           throw MissingStageError("calibrate", "the qpp strategy needs a QPP calibration");
                       }
                       if (q.calibration->M != M) {
                           throw Error("calibration was made for M = " + std::to_string(q.calibration->M) +
                                       ", run uses M = " + std::to_string(M));
                       }
                   },
                   [&](const Saicl& s) {
                       if (!s.model || !s.featurizer) {
                           throw MissingStageError("train-k", "the saicl strategy needs a trained k-model");
                       }
                       if (s.model->M != M) {
                           throw Error("k-model was trained for M = " + std::to_string(s.model->M) +
                                       ", run uses M = " + std::to_string(M));
                       }
                   },
               },
               kind);
}

Strategy parse_strategy(std::string_view spec, std::size_t M) {
    Strategy s;
    s.M = M;
    if (spec == "zero") {
        s.kind = ZeroShot{};
    } else if (spec == "qpp") {
        s.kind = QppAicl{};
    } else if (spec == "saicl") {
        s.kind = Saicl{};
    } else if (spec.rfind("static:", 0) == 0) {
        const auto digits = std::string(spec.substr(7));
        std::size_t used = 0;
        unsigned long k = 0;
        try {
            k = std::stoul(digits, &used);
        } catch (const std::exception&) {
            used = 0;
        }
        if (digits.empty() || used != digits.size()) {
            throw Error("bad static strategy \"" + std::string(spec) + "\" (expected static:<k>)");
        }
        s.kind = StaticK{k};
    } else {
        throw Error("unknown strategy \"" + std::string(spec) + "\" (expected zero, static:<k>, qpp or saicl)");
    }
    return s;
}

std::size_t requested_k(const Strategy& strategy, const Bm25Index& index, const LabeledInstance& x,
                        const RankedCandidates& candidates) {
    return std::visit(overloaded{
                          [](const ZeroShot&) -> std::size_t { return 0; },
                          [](const StaticK& s) -> std::size_t { return s.k; },
                          [&](const QppAicl& q) -> std::size_t {
                              return choose_k(estimate(index, x, candidates, *q.calibration), *q.calibration);
                          },
                          [&](const Saicl& s) -> std::size_t { return predict_k(*s.model, *s.featurizer, x); },
                      },
                      strategy.kind);
}

RunResult run(const Strategy& strategy, LlmGateway& gateway, const DatasetManifest& manifest, const Bm25Index& index,
              const InstanceStore& test, const RunOptions& options) {
    strategy.validate();
    const std::string name = strategy.name();
    const std::size_t n = test.size();
    std::vector<std::optional<RunRecord>> records(n);
    std::vector<std::optional<SkippedInstance>> skipped(n);
    std::atomic<std::size_t> retrievals{0};

    detail::parallel_for(n, options.workers, [&](std::size_t i) {
        const auto& x = test[i];
        const auto candidates = index.retrieve(x, strategy.M, SelfMatch::keep);
        ++retrievals;

        RunRecord rec;
        rec.instance_id = x.id;
        rec.gold_label = x.label;
        rec.strategy = name;
        rec.k_requested = requested_k(strategy, index, x, candidates);
        std::size_t k = std::min(rec.k_requested, candidates.hits.size());
        try {
            std::optional<Prediction> pred;
            while (!pred) {
                try {
                    pred = predict(gateway, manifest, index, x, candidates, k);
                } catch (const ContextOverflowError& e) {
                    if (e.largest_fitting_k() < 0 || static_cast<std::size_t>(e.largest_fitting_k()) >= k) {
                        throw;
                    }
                    k = static_cast<std::size_t>(e.largest_fitting_k());
                }
            }
            rec.k_used = k;
            rec.context_fallback = k < rec.k_requested;
            rec.posterior = std::move(pred->posterior);
            rec.predicted_label = rec.posterior.argmax();
            rec.prompt_tokens = pred->prompt_tokens;
            records[i] = std::move(rec);
        } catch (const GatewayError& e) {
            skipped[i] = SkippedInstance{x.id, e.what()};
        }
    });

    RunResult result;
    for (std::size_t i = 0; i < n; ++i) {
        if (records[i]) {
            result.records.push_back(std::move(*records[i]));
        } else if (skipped[i]) {
            result.skipped.push_back(std::move(*skipped[i]));
        }
    }
    std::sort(result.records.begin(), result.records.end(),
              [](const RunRecord& a, const RunRecord& b) { return a.instance_id < b.instance_id; });
    std::sort(result.skipped.begin(), result.skipped.end(),
              [](const SkippedInstance& a, const SkippedInstance& b) { return a.instance_id < b.instance_id; });
    result.retrievals = retrievals.load();

    auto& h = result.header;
    h.strategy = name;
    h.method = strategy.method();
    h.M = strategy.M;
    h.dataset = manifest.name;
    h.model_id = gateway.config().model_id;
    h.config_hash = options.config_hash;
    h.records = result.records.size();
    h.skipped = result.skipped.size();
    h.valid = n == 0 || static_cast<double>(h.skipped) <= options.max_skipped_fraction * static_cast<double>(n);
    return result;
}

std::string run_to_jsonl(const RunResult& result) {
    const auto& h = result.header;
    io::ordered_json head;
    head["type"] = "header";
    head["strategy"] = h.strategy;
    head["method"] = h.method;
    head["M"] = h.M;
    head["dataset"] = h.dataset;
    head["model_id"] = h.model_id;
    head["config_hash"] = h.config_hash;
    head["records"] = result.records.size();
    head["skipped"] = result.skipped.size();
    head["valid"] = h.valid;
    std::string out = head.dump() + "\n";

    std::vector<const RunRecord*> order;
    for (const auto& r : result.records) {
        order.push_back(&r);
    }
    std::sort(order.begin(), order.end(), [](const RunRecord* a, const RunRecord* b) { return a->instance_id < b->instance_id; });
    for (const auto* r : order) {
        out += record_to_json(*r).dump();
        out.push_back('\n');
    }
    for (const auto& s : result.skipped) {
        io::ordered_json j;
        j["type"] = "skipped";
        j["instance_id"] = s.instance_id;
        j["reason"] = s.reason;
        out += j.dump(-1, ' ', false, io::json::error_handler_t::replace);
        out.push_back('\n');
    }
    return out;
}

void write_run(const RunResult& result, const std::filesystem::path& path) {
    io::write_file_atomic(path, run_to_jsonl(result));
}

RunResult read_run(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw Error("cannot open run file " + path.string());
    }
    RunResult result;
    bool have_header = false;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) {
            continue;
        }
        try {
            const auto j = io::json::parse(line);
            const auto type = j.at("type").get<std::string>();
            if (type == "header") {
                auto& h = result.header;
                h.strategy = j.at("strategy").get<std::string>();
                h.method = j.at("method").get<std::string>();
                h.M = j.at("M").get<std::size_t>();
                h.dataset = j.at("dataset").get<std::string>();
                h.model_id = j.at("model_id").get<std::string>();
                h.config_hash = j.at("config_hash").get<std::string>();
                h.records = j.at("records").get<std::size_t>();
                h.skipped = j.at("skipped").get<std::size_t>();
                h.valid = j.at("valid").get<bool>();
                have_header = true;
            } else if (type == "record") {
                RunRecord r;
                r.instance_id = j.at("instance_id").get<std::string>();
                r.strategy = j.at("strategy").get<std::string>();
                r.gold_label = j.at("gold_label").get<int>();
                r.predicted_label = j.at("predicted_label").get<int>();
                r.k_requested = j.at("k_requested").get<std::size_t>();
                r.k_used = j.at("k_used").get<std::size_t>();
                r.context_fallback = j.at("context_fallback").get<bool>();
                r.prompt_tokens = j.at("prompt_tokens").get<std::size_t>();
                r.posterior.probs = j.at("posterior").get<std::vector<double>>();
                r.posterior.source = parse_posterior_source(j.at("posterior_source").get<std::string>());
                result.records.push_back(std::move(r));
            } else if (type == "skipped") {
                result.skipped.push_back({j.at("instance_id").get<std::string>(), j.at("reason").get<std::string>()});
            } else {
                throw Error("unknown record type \"" + type + "\"");
            }
        } catch (const io::json::exception& e) {
            throw Error(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
        }
    }
    if (!have_header) {
        throw Error(path.string() + ": run file has no header record");
    }
    return result;
}

}  // namespace aicl
