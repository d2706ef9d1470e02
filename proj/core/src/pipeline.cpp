#include "aicl/pipeline.hpp"

#include <algorithm>
#include <set>
#include <tuple>

#include "aicl/error.hpp"
#include "aicl/hashing.hpp"
#include "json_io.hpp"

namespace aicl {

namespace fs = std::filesystem;

namespace {

using io::json;

void check_keys(const json& obj, const std::set<std::string>& allowed, const std::string& section) {
    if (!obj.is_object()) {
        throw Error("config: " + section + " must be an object");
    }
    for (const auto& item : obj.items()) {
        if (!allowed.count(item.key())) {
            throw Error("config: unknown key \"" + (section.empty() ? "" : section + ".") + item.key() + "\"");
        }
    }
}

template <class T>
void read_opt(const json& obj, const char* key, T& out) {
    if (obj.contains(key)) {
        out = obj.at(key).get<T>();
    }
}

fs::path resolve(const fs::path& base, const std::string& p) {
    fs::path path(p);
    return (path.is_absolute() ? path : base / path).lexically_normal();
}

void require(const fs::path& path, const std::string& stage, const std::string& what) {
    if (!fs::exists(path)) {
        throw MissingStageError(stage, what + " not found at " + path.string());
    }
}

// Sort key for comparison rows.
std::tuple<std::string, int, double, std::string> row_rank(const NamedReport& r) {
    static const std::vector<std::string> order = {"0-shot", "SICL", "QPP-AICL", "SAICL"};
    const auto it = std::find(order.begin(), order.end(), r.method);
    const int pos = it == order.end() ? static_cast<int>(order.size()) : static_cast<int>(it - order.begin());
    return {r.dataset, pos, r.report.avg_k, r.method};
}

}  // namespace

PipelineConfig PipelineConfig::from_json(const std::string& json_text, const fs::path& base_dir) {
    PipelineConfig cfg;
    json j;
    try {
        j = json::parse(json_text);
    } catch (const json::exception& e) {
        throw Error(std::string("config: ") + e.what());
    }
    try {
        check_keys(j, {"dataset", "source", "M", "seed", "llm", "qpp", "kpredictor", "bm25", "paths"}, "");
        read_opt(j, "M", cfg.M);
        read_opt(j, "seed", cfg.seed);
        cfg.llm.seed = cfg.seed;
        cfg.kpredictor.seed = cfg.seed;

        if (!j.contains("dataset")) {
            throw Error("config: missing \"dataset\" section");
        }
        const auto& d = j.at("dataset");
        check_keys(d, {"preset", "manifest"}, "dataset");
        if (d.contains("preset") == d.contains("manifest")) {
            throw Error("config: dataset needs exactly one of \"preset\" or \"manifest\"");
        }
        if (d.contains("preset")) {
            cfg.manifest_preset = d.at("preset").get<std::string>();
        } else {
            cfg.manifest_path = resolve(base_dir, d.at("manifest").get<std::string>());
        }

        if (j.contains("source")) {
            const auto& s = j.at("source");
            check_keys(s, {"format", "dir", "file", "test_fraction"}, "source");
            SourceConfig src;
            if (s.contains("format")) {
                src.format = parse_source_format(s.at("format").get<std::string>());
            }
            if (s.contains("dir")) {
                src.dir = resolve(base_dir, s.at("dir").get<std::string>());
            }
            if (s.contains("file")) {
                src.file = resolve(base_dir, s.at("file").get<std::string>());
            }
            read_opt(s, "test_fraction", src.test_fraction);
            cfg.source = src;
        }

        if (j.contains("llm")) {
            const auto& l = j.at("llm");
            check_keys(l,
                       {"endpoint_url", "model_id", "max_context_tokens", "top_logprobs", "timeout_ms",
                        "max_in_flight", "seed", "max_attempts", "backoff_ms", "decoding"},
                       "llm");
            read_opt(l, "endpoint_url", cfg.llm.endpoint_url);
            read_opt(l, "model_id", cfg.llm.model_id);
            read_opt(l, "max_context_tokens", cfg.llm.max_context_tokens);
            read_opt(l, "top_logprobs", cfg.llm.top_logprobs);
            read_opt(l, "timeout_ms", cfg.llm.timeout_ms);
            read_opt(l, "max_in_flight", cfg.llm.max_in_flight);
            read_opt(l, "seed", cfg.llm.seed);
            read_opt(l, "max_attempts", cfg.llm.max_attempts);
            read_opt(l, "backoff_ms", cfg.llm.backoff_ms);
            if (l.contains("decoding") && l.at("decoding").get<std::string>() != "greedy") {
                throw Error("config: llm.decoding must be \"greedy\"");
            }
        }
        if (j.contains("qpp")) {
            check_keys(j.at("qpp"), {"sample_size"}, "qpp");
            read_opt(j.at("qpp"), "sample_size", cfg.qpp_sample_size);
        }
        if (j.contains("kpredictor")) {
            const auto& k = j.at("kpredictor");
            check_keys(k, {"dims", "lr", "epochs", "batch", "l2", "seed", "class_weighting", "drop_never_correct"},
                       "kpredictor");
            read_opt(k, "dims", cfg.feature_dims);
            read_opt(k, "lr", cfg.kpredictor.lr);
            read_opt(k, "epochs", cfg.kpredictor.epochs);
            read_opt(k, "batch", cfg.kpredictor.batch);
            read_opt(k, "l2", cfg.kpredictor.l2);
            read_opt(k, "seed", cfg.kpredictor.seed);
            read_opt(k, "class_weighting", cfg.kpredictor.class_weighting);
            read_opt(k, "drop_never_correct", cfg.kpredictor.drop_never_correct);
        }
        if (j.contains("bm25")) {
            check_keys(j.at("bm25"), {"k1", "b"}, "bm25");
            read_opt(j.at("bm25"), "k1", cfg.bm25.k1);
            read_opt(j.at("bm25"), "b", cfg.bm25.b);
        }
        if (j.contains("paths")) {
            const auto& p = j.at("paths");
            check_keys(p, {"work_dir", "cache_dir"}, "paths");
            if (p.contains("work_dir")) {
                cfg.paths.work_dir = p.at("work_dir").get<std::string>();
            }
            if (p.contains("cache_dir")) {
                cfg.paths.cache_dir = resolve(base_dir, p.at("cache_dir").get<std::string>());
            }
        }
        cfg.paths.work_dir = resolve(base_dir, cfg.paths.work_dir.string());
    } catch (const json::exception& e) {
        throw Error(std::string("config: ") + e.what());
    }
    cfg.validate();
    return cfg;
}

PipelineConfig PipelineConfig::load(const fs::path& path) {
    if (!fs::exists(path)) {
        throw Error("config file not found: " + path.string());
    }
    const auto base = fs::absolute(path).parent_path();
    return from_json(io::read_file(path), base);
}

void PipelineConfig::validate() const {
    if (M == 0) {
        throw Error("config: M must be >= 1");
    }
    if (manifest_preset.has_value() == manifest_path.has_value()) {
        throw Error("config: dataset needs exactly one of preset or manifest");
    }
    if (source) {
        if (source->dir.has_value() == source->file.has_value()) {
            throw Error("config: source needs exactly one of \"dir\" or \"file\"");
        }
        if (!(source->test_fraction > 0.0 && source->test_fraction < 1.0)) {
            throw Error("config: source.test_fraction must be in (0, 1)");
        }
    }
    if (qpp_sample_size == 0) {
        throw Error("config: qpp.sample_size must be >= 1");
    }
    if (feature_dims == 0 || (feature_dims & (feature_dims - 1)) != 0) {
        throw Error("config: kpredictor.dims must be a power of two");
    }
    if (kpredictor.epochs == 0 || kpredictor.batch == 0 || !(kpredictor.lr > 0.0) || kpredictor.l2 < 0.0) {
        throw Error("config: kpredictor needs epochs >= 1, batch >= 1, lr > 0 and l2 >= 0");
    }
    llm.validate();
}

std::string PipelineConfig::canonical_json() const {
    json j;
    j["M"] = M;
    j["seed"] = seed;
    j["dataset"] = manifest_preset ? json{{"preset", *manifest_preset}} : json{{"manifest", manifest_path->string()}};
    if (source) {
        json s{{"format", std::string(to_string(source->format))}, {"test_fraction", source->test_fraction}};
        s["dir"] = source->dir ? json(source->dir->string()) : json(nullptr);
        s["file"] = source->file ? json(source->file->string()) : json(nullptr);
        j["source"] = s;
    } else {
        j["source"] = nullptr;
    }
    j["llm"] = {{"endpoint_url", llm.endpoint_url},
                {"model_id", llm.model_id},
                {"max_context_tokens", llm.max_context_tokens},
                {"decoding", "greedy"},
                {"top_logprobs", llm.top_logprobs},
                {"timeout_ms", llm.timeout_ms},
                {"max_in_flight", llm.max_in_flight},
                {"seed", llm.seed},
                {"max_attempts", llm.max_attempts},
                {"backoff_ms", llm.backoff_ms}};
    j["qpp"] = {{"sample_size", qpp_sample_size}};
    j["kpredictor"] = {{"dims", feature_dims},
                       {"lr", kpredictor.lr},
                       {"epochs", kpredictor.epochs},
                       {"batch", kpredictor.batch},
                       {"l2", kpredictor.l2},
                       {"seed", kpredictor.seed},
                       {"class_weighting", kpredictor.class_weighting},
                       {"drop_never_correct", kpredictor.drop_never_correct}};
    j["bm25"] = {{"k1", bm25.k1}, {"b", bm25.b}};
    j["paths"] = {{"work_dir", paths.work_dir.string()}, {"cache_dir", cache_dir().string()}};
    return j.dump();
}

std::string PipelineConfig::hash() const {
    return sha256_hex(canonical_json());
}

fs::path PipelineConfig::cache_dir() const {
    return paths.cache_dir ? *paths.cache_dir : paths.work_dir / "cache";
}

LlmConfig PipelineConfig::effective_llm() const {
    LlmConfig out = llm;
    out.cache_dir = cache_dir();
    return out;
}

Pipeline::Pipeline(PipelineConfig config) : config_(std::move(config)) {
    config_.validate();
}

Pipeline::~Pipeline() = default;

std::string Pipeline::banner() const {
    return "config " + config_.hash() + " model " + config_.llm.model_id + " seed " + std::to_string(config_.seed);
}

LlmGateway& Pipeline::gateway() {
    if (!gateway_) {
        gateway_ = std::make_unique<LlmGateway>(config_.effective_llm());
    }
    return *gateway_;
}

DatasetManifest Pipeline::config_manifest() const {
    auto m = config_.manifest_preset ? manifest_preset(*config_.manifest_preset)
                                     : aicl::load_manifest(*config_.manifest_path);
    m.validate();
    return m;
}

DatasetManifest Pipeline::load_manifest_artifact() const {
    require(manifest_path(), "ingest", "dataset manifest");
    return aicl::load_manifest(manifest_path());
}

std::shared_ptr<const InstanceStore> Pipeline::load_train() const {
    require(train_path(), "ingest", "training split");
    return std::make_shared<const InstanceStore>(load_store(train_path()));
}

InstanceStore Pipeline::load_test() const {
    require(test_path(), "ingest", "test split");
    return load_store(test_path());
}

Bm25Index Pipeline::load_index(std::shared_ptr<const InstanceStore> train) const {
    require(index_path(), "index", "BM25 index");
    return Bm25Index::load(index_path(), std::move(train));
}

IngestResult Pipeline::ingest() {
    if (!config_.source) {
        throw Error("config has no \"source\" section to ingest from");
    }
    const auto& src = *config_.source;
    const auto manifest = config_manifest();
    IngestResult result = src.dir ? aicl::ingest(*src.dir, src.format, manifest)
                                  : split_by_id_hash(ingest_file(*src.file, src.format, manifest), src.test_fraction);
    if (result.train.size() == 0) {
        throw IngestError("ingest produced an empty training split");
    }
    fs::create_directories(work_dir());
    write_store(result.train, train_path());
    write_store(result.test, test_path());
    save_manifest(manifest, manifest_path());
    return result;
}

Bm25Index Pipeline::build_index() {
    auto index = Bm25Index::build(load_train(), config_.bm25);
    index.save(index_path());
    return index;
}

QppCalibration Pipeline::calibrate() {
    auto train = load_train();
    const auto index = load_index(train);
    auto cal = aicl::calibrate(index, *train, config_.M, config_.qpp_sample_size, config_.llm.max_in_flight);
    save_calibration(cal, calibration_path());
    return cal;
}

GroundTruth Pipeline::build_ground_truth() {
    const auto manifest = load_manifest_artifact();
    auto train = load_train();
    const auto index = load_index(train);
    GroundTruthOptions opts;
    opts.M = config_.M;
    opts.workers = config_.llm.max_in_flight;
    auto gt = aicl::build_ground_truth(gateway(), manifest, index, *train, opts);
    export_klabels(gt.labels, klabels_path());
    return gt;
}

KModel Pipeline::train_k() {
    require(klabels_path(), "build-gt", "k* labels");
    const auto labels = import_klabels(klabels_path());
    auto train = load_train();
    const auto index = load_index(train);
    const Featurizer featurizer(index, config_.feature_dims);
    auto model = aicl::train(labels, *train, featurizer, config_.M, config_.kpredictor);
    save_model(model, kmodel_path());
    return model;
}

RunResult Pipeline::run(std::string_view spec) {
    auto strategy = parse_strategy(spec, config_.M);
    const auto manifest = load_manifest_artifact();
    auto train = load_train();
    const auto test = load_test();
    const auto index = load_index(train);

    if (auto* q = std::get_if<QppAicl>(&strategy.kind)) {
        require(calibration_path(), "calibrate", "QPP calibration");
        q->calibration = std::make_shared<const QppCalibration>(load_calibration(calibration_path()));
        if (q->calibration->corpus_hash != index.corpus_hash()) {
            throw MissingStageError("calibrate", "calibration was made on a different training split");
        }
    } else if (auto* s = std::get_if<Saicl>(&strategy.kind)) {
        require(kmodel_path(), "train-k", "k-model");
        s->model = std::make_shared<const KModel>(load_model(kmodel_path()));
        s->featurizer = std::make_shared<const Featurizer>(index, s->model->D);
    }

    RunOptions opts;
    opts.workers = config_.llm.max_in_flight;
    opts.config_hash = config_.hash();
    auto result = aicl::run(strategy, gateway(), manifest, index, test, opts);
    write_run(result, run_path(strategy.name()));
    return result;
}

std::vector<NamedReport> Pipeline::eval(const std::optional<std::string>& strategy_name) {
    std::vector<std::string> names;
    if (strategy_name) {
        require(run_path(*strategy_name), "run", "run file for " + *strategy_name);
        names.push_back(*strategy_name);
    } else {
        const auto dir = work_dir() / "runs";
        if (fs::is_directory(dir)) {
            for (const auto& entry : fs::directory_iterator(dir)) {
                if (entry.path().extension() == ".jsonl") {
                    names.push_back(entry.path().stem().string());
                }
            }
        }
        if (names.empty()) {
            throw MissingStageError("run", "no run files in " + dir.string());
        }
        std::sort(names.begin(), names.end());
    }

    const auto manifest = load_manifest_artifact();
    std::vector<NamedReport> out;
    for (const auto& name : names) {
        const auto result = read_run(run_path(name));
        NamedReport report{manifest.name, result.header.method, score(result.records, manifest.num_classes)};
        save_report(report, report_path(name));
        out.push_back(std::move(report));
    }
    return out;
}

Comparison Pipeline::compare() {
    const auto dir = work_dir() / "reports";
    std::vector<NamedReport> reports;
    if (fs::is_directory(dir)) {
        std::vector<fs::path> files;
        for (const auto& entry : fs::directory_iterator(dir)) {
            if (entry.path().extension() == ".json") {
                files.push_back(entry.path());
            }
        }
        std::sort(files.begin(), files.end());
        for (const auto& f : files) {
            reports.push_back(load_report(f));
        }
    }
    if (reports.empty()) {
        throw MissingStageError("eval", "no reports in " + dir.string());
    }
    std::stable_sort(reports.begin(), reports.end(),
                     [](const NamedReport& a, const NamedReport& b) { return row_rank(a) < row_rank(b); });
    auto cmp = aicl::compare(reports);
    io::write_file_atomic(work_dir() / "compare.txt", cmp.text);
    io::write_file_atomic(work_dir() / "compare.json", cmp.json);
    io::write_file_atomic(work_dir() / "compare.csv", cmp.csv);
    return cmp;
}

}  // namespace aicl
