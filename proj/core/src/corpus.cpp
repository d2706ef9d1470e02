#include "aicl/corpus.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include "aicl/error.hpp"
#include "aicl/hashing.hpp"
#include "aicl/text_index.hpp"
#include "csv.hpp"
#include "json_io.hpp"

namespace aicl {

namespace {

using io::json;
using io::ordered_json;

std::string trim(std::string_view s) {
    const auto* ws = " \t\r\n\v\f";
    const auto first = s.find_first_not_of(ws);
    if (first == std::string_view::npos) {
        return {};
    }
    const auto last = s.find_last_not_of(ws);
    return std::string(s.substr(first, last - first + 1));
}

std::string row_id(std::string_view prefix, std::size_t row) {
    std::string digits = std::to_string(row);
    if (digits.size() < 6) {
        digits.insert(0, 6 - digits.size(), '0');
    }
    return std::string(prefix) + digits;
}

[[noreturn]] void fail(const std::filesystem::path& path, std::size_t line, const std::string& what) {
    throw IngestError(path.string() + ":" + std::to_string(line) + ": " + what);
}

std::ifstream open_input(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IngestError("cannot open " + path.string());
    }
    return in;
}

int parse_int(std::string_view s, bool& ok) {
    const std::string t = trim(s);
    ok = false;
    if (t.empty()) {
        return 0;
    }
    std::size_t used = 0;
    int v = 0;
    try {
        v = std::stoi(t, &used);
    } catch (const std::exception&) {
        return 0;
    }
    ok = used == t.size();
    return v;
}

int checked_label(const std::filesystem::path& path, std::size_t line, std::string_view raw,
                  int offset, int num_classes) {
    bool ok = false;
    const int value = parse_int(raw, ok);
    if (!ok || value - offset < 0 || value - offset >= num_classes) {
        fail(path, line, "unknown label value \"" + std::string(raw) + "\"");
    }
    return value - offset;
}

std::string checked_text(const std::filesystem::path& path, std::size_t line, std::string text) {
    if (trim(text).empty()) {
        fail(path, line, "empty text");
    }
    return text;
}

std::vector<LabeledInstance> read_agnews(const std::filesystem::path& path, const DatasetManifest& m,
                                         std::string_view prefix) {
    auto in = open_input(path);
    csv::Reader reader(in, path.string());
    std::vector<LabeledInstance> out;
    std::vector<std::string> f;
    std::size_t row = 0;
    while (reader.next(f)) {
        if (f.size() != 3) {
            fail(path, reader.line(), "expected 3 fields (class,title,description), got " +
                                          std::to_string(f.size()));
        }
        const int label = checked_label(path, reader.line(), f[0], 1, m.num_classes);
        std::string text = trim(f[1]) + " " + trim(f[2]);
        // The distributed files use a backslash where the source had a line break.
        std::replace(text.begin(), text.end(), '\\', ' ');
        out.push_back({row_id(prefix, ++row), checked_text(path, reader.line(), trim(text)), label});
    }
    return out;
}

std::vector<LabeledInstance> read_sst2(const std::filesystem::path& path, const DatasetManifest& m,
                                       std::string_view prefix) {
    auto in = open_input(path);
    std::vector<LabeledInstance> out;
    std::string line;
    std::size_t lineno = 0;
    std::size_t row = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') {
            line.pop_back();
        }
        if (line.empty()) {
            continue;
        }
        if (lineno == 1 && line == "sentence\tlabel") {
            continue;
        }
        const auto tab = line.rfind('\t');
        if (tab == std::string::npos) {
            fail(path, lineno, "expected sentence<TAB>label");
        }
        const int label = checked_label(path, lineno, std::string_view(line).substr(tab + 1), 0, m.num_classes);
        out.push_back({row_id(prefix, ++row), checked_text(path, lineno, trim(line.substr(0, tab))), label});
    }
    return out;
}

constexpr std::string_view kJigsawFlags[] = {"toxic", "severe_toxic", "obscene",
                                             "threat", "insult", "identity_hate"};

struct JigsawColumns {
    std::size_t id = SIZE_MAX;
    std::size_t text = SIZE_MAX;
    std::vector<std::size_t> flags;
};

JigsawColumns jigsaw_columns(const std::filesystem::path& path, const std::vector<std::string>& header,
                             bool need_text, bool need_flags) {
    JigsawColumns cols;
    for (std::size_t i = 0; i < header.size(); ++i) {
        const auto name = trim(header[i]);
        if (name == "id") {
            cols.id = i;
        } else if (name == "comment_text") {
            cols.text = i;
        }
    }
    if (need_flags) {
        for (auto flag : kJigsawFlags) {
            const auto it = std::find_if(header.begin(), header.end(),
                                         [&](const std::string& h) { return trim(h) == flag; });
            if (it == header.end()) {
                fail(path, 1, "missing column \"" + std::string(flag) + "\"");
            }
            cols.flags.push_back(static_cast<std::size_t>(it - header.begin()));
        }
    }
    if (cols.id == SIZE_MAX || (need_text && cols.text == SIZE_MAX)) {
        fail(path, 1, "missing id/comment_text column");
    }
    return cols;
}

/// Returns 1 if any flag is set, 0 if none, -1 if the row is unscored (all flags -1).
int collapse_flags(const std::filesystem::path& path, std::size_t line, const std::vector<std::string>& f,
                   const std::vector<std::size_t>& flags) {
    int any = 0;
    int unscored = 0;
    for (auto col : flags) {
        bool ok = false;
        const int v = parse_int(f[col], ok);
        if (!ok || (v != 0 && v != 1 && v != -1)) {
            fail(path, line, "unknown label value \"" + f[col] + "\"");
        }
        if (v == 1) {
            any = 1;
        } else if (v == -1) {
            ++unscored;
        }
    }
    if (unscored == static_cast<int>(flags.size())) {
        return -1;
    }
    if (unscored > 0) {
        fail(path, line, "partially unscored row");
    }
    return any;
}

std::vector<LabeledInstance> read_jigsaw(const std::filesystem::path& path, const DatasetManifest& m) {
    if (m.num_classes != 2) {
        throw IngestError("jigsaw_csv adapter produces 2 classes; manifest has " +
                          std::to_string(m.num_classes));
    }
    auto in = open_input(path);
    csv::Reader reader(in, path.string());
    std::vector<std::string> f;
    if (!reader.next(f)) {
        return {};
    }
    const auto cols = jigsaw_columns(path, f, true, true);
    std::vector<LabeledInstance> out;
    while (reader.next(f)) {
        const std::size_t need = std::max({cols.id, cols.text, *std::max_element(cols.flags.begin(), cols.flags.end())});
        if (f.size() <= need) {
            fail(path, reader.line(), "expected " + std::to_string(need + 1) + " fields, got " + std::to_string(f.size()));
        }
        const int label = collapse_flags(path, reader.line(), f, cols.flags);
        if (label < 0) {
            fail(path, reader.line(), "unscored row in labeled file");
        }
        out.push_back({trim(f[cols.id]), checked_text(path, reader.line(), f[cols.text]), label});
    }
    return out;
}

std::vector<LabeledInstance> read_jigsaw_test(const std::filesystem::path& texts_path,
                                              const std::filesystem::path& labels_path) {
    std::unordered_map<std::string, int> labels;
    {
        auto in = open_input(labels_path);
        csv::Reader reader(in, labels_path.string());
        std::vector<std::string> f;
        if (reader.next(f)) {
            const auto cols = jigsaw_columns(labels_path, f, false, true);
            while (reader.next(f)) {
                if (f.size() <= std::max(cols.id, *std::max_element(cols.flags.begin(), cols.flags.end()))) {
                    fail(labels_path, reader.line(), "short row");
                }
                labels[trim(f[cols.id])] = collapse_flags(labels_path, reader.line(), f, cols.flags);
            }
        }
    }
    auto in = open_input(texts_path);
    csv::Reader reader(in, texts_path.string());
    std::vector<std::string> f;
    std::vector<LabeledInstance> out;
    if (!reader.next(f)) {
        return out;
    }
    const auto cols = jigsaw_columns(texts_path, f, true, false);
    while (reader.next(f)) {
        if (f.size() <= std::max(cols.id, cols.text)) {
            fail(texts_path, reader.line(), "short row");
        }
        const auto id = trim(f[cols.id]);
        const auto it = labels.find(id);
        if (it == labels.end()) {
            fail(texts_path, reader.line(), "no label row for id \"" + id + "\"");
        }
        if (it->second < 0) {
            continue;
        }
        out.push_back({id, checked_text(texts_path, reader.line(), f[cols.text]), it->second});
    }
    return out;
}

int jsonl_label(const std::filesystem::path& path, std::size_t line, const json& v, const DatasetManifest& m) {
    if (v.is_number_integer()) {
        const auto label = v.get<long long>();
        if (label < 0 || label >= m.num_classes) {
            fail(path, line, "unknown label value \"" + v.dump() + "\"");
        }
        return static_cast<int>(label);
    }
    if (v.is_string()) {
        const auto& s = v.get_ref<const std::string&>();
        const auto it = std::find(m.class_names.begin(), m.class_names.end(), s);
        if (it != m.class_names.end()) {
            return static_cast<int>(it - m.class_names.begin());
        }
    }
    fail(path, line, "unknown label value \"" + (v.is_string() ? v.get<std::string>() : v.dump()) + "\"");
}

std::vector<LabeledInstance> read_jsonl(const std::filesystem::path& path, const DatasetManifest* m,
                                        std::string_view prefix, bool require_text) {
    auto in = open_input(path);
    std::vector<LabeledInstance> out;
    std::string line;
    std::size_t lineno = 0;
    std::size_t row = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (trim(line).empty()) {
            continue;
        }
        json obj;
        try {
            obj = json::parse(line);
        } catch (const json::parse_error& e) {
            fail(path, lineno, std::string("malformed JSON: ") + e.what());
        }
        if (!obj.is_object() || !obj.contains("text") || !obj["text"].is_string() || !obj.contains("label")) {
            fail(path, lineno, "expected an object with \"text\" and \"label\"");
        }
        ++row;
        LabeledInstance inst;
        if (obj.contains("id")) {
            const auto& id = obj["id"];
            if (id.is_string()) {
                inst.id = id.get<std::string>();
            } else if (id.is_number_integer()) {
                inst.id = std::to_string(id.get<long long>());
            } else {
                fail(path, lineno, "\"id\" must be a string or integer");
            }
        } else {
            inst.id = row_id(prefix, row);
        }
        inst.text = obj["text"].get<std::string>();
        if (require_text) {
            inst.text = checked_text(path, lineno, std::move(inst.text));
        }
        if (m != nullptr) {
            inst.label = jsonl_label(path, lineno, obj["label"], *m);
        } else {
            if (!obj["label"].is_number_integer() || obj["label"].get<long long>() < 0) {
                fail(path, lineno, "label must be a non-negative integer");
            }
            inst.label = obj["label"].get<int>();
        }
        out.push_back(std::move(inst));
    }
    return out;
}

InstanceStore make_store(std::vector<LabeledInstance> rows) { return InstanceStore(std::move(rows)); }

}  // namespace

InstanceStore::InstanceStore(std::vector<LabeledInstance> instances) : items_(std::move(instances)) {
    by_id_.reserve(items_.size());
    for (std::size_t i = 0; i < items_.size(); ++i) {
        if (!by_id_.emplace(items_[i].id, i).second) {
            throw DuplicateIdError(items_[i].id);
        }
    }
}

const LabeledInstance* InstanceStore::find(std::string_view id) const {
    const auto pos = position(id);
    return pos ? &items_[*pos] : nullptr;
}

std::optional<std::size_t> InstanceStore::position(std::string_view id) const {
    const auto it = by_id_.find(std::string(id));
    if (it == by_id_.end()) {
        return std::nullopt;
    }
    return it->second;
}

std::vector<std::size_t> InstanceStore::label_histogram(int num_classes) const {
    std::vector<std::size_t> h(static_cast<std::size_t>(std::max(num_classes, 0)), 0);
    for (const auto& x : items_) {
        if (x.label >= 0 && x.label < num_classes) {
            ++h[static_cast<std::size_t>(x.label)];
        }
    }
    return h;
}

std::string InstanceStore::content_hash() const { return sha256_hex(to_jsonl(*this)); }

void DatasetManifest::validate() const {
    if (num_classes < 2) {
        throw ManifestError("manifest \"" + name + "\": num_classes must be >= 2");
    }
    const auto p = static_cast<std::size_t>(num_classes);
    if (class_names.size() != p || verbaliser_sets.size() != p) {
        throw ManifestError("manifest \"" + name + "\": num_classes=" + std::to_string(p) + " but " +
                            std::to_string(class_names.size()) + " class names and " +
                            std::to_string(verbaliser_sets.size()) + " verbaliser sets");
    }
    std::set<std::string> names;
    for (const auto& c : class_names) {
        if (trim(c).empty() || c.find_first_of(",{}\n\r") != std::string::npos) {
            throw ManifestError("manifest \"" + name + "\": class name \"" + c +
                                "\" is empty or contains one of , { } or a line break");
        }
        if (!names.insert(c).second) {
            throw ManifestError("manifest \"" + name + "\": duplicate class name \"" + c + "\"");
        }
    }
    std::unordered_map<std::string, std::size_t> owner;
    for (std::size_t c = 0; c < p; ++c) {
        if (verbaliser_sets[c].empty()) {
            throw ManifestError("manifest \"" + name + "\": empty verbaliser set for class " + class_names[c]);
        }
        for (const auto& word : verbaliser_sets[c]) {
            const auto folded = casefold(trim(word));
            if (folded.empty()) {
                throw ManifestError("manifest \"" + name + "\": empty verbaliser word for class " + class_names[c]);
            }
            const auto [it, fresh] = owner.emplace(folded, c);
            if (!fresh && it->second != c) {
                throw ManifestError("manifest \"" + name + "\": verbaliser \"" + word + "\" shared by classes " +
                                    class_names[it->second] + " and " + class_names[c]);
            }
        }
    }
}

DatasetManifest manifest_preset(std::string_view name) {
    DatasetManifest m;
    if (name == "sst2") {
        m.name = "sst2";
        m.class_names = {"negative", "positive"};
        m.verbaliser_sets = {{"negative", "false"}, {"positive", "true"}};
    } else if (name == "agnews") {
        m.name = "agnews";
        m.class_names = {"World", "Sports", "Business", "Sci/Tech"};
        m.verbaliser_sets = {{"world"}, {"sports"}, {"business"}, {"science"}};
    } else if (name == "jigsaw") {
        m.name = "jigsaw";
        m.class_names = {"non-toxic", "toxic"};
        // "non" lets the first sub-token of "non-toxic" resolve to class 0.
        m.verbaliser_sets = {{"clean", "benign", "non"}, {"toxic", "offensive"}};
    } else {
        throw ManifestError("unknown manifest preset \"" + std::string(name) + "\"");
    }
    m.num_classes = static_cast<int>(m.class_names.size());
    return m;
}

DatasetManifest load_manifest(const std::filesystem::path& path) {
    const auto j = io::parse_json_file(path);
    DatasetManifest m;
    try {
        m.name = j.at("name").get<std::string>();
        m.class_names = j.at("class_names").get<std::vector<std::string>>();
        m.verbaliser_sets = j.at("verbaliser_sets").get<std::vector<std::vector<std::string>>>();
        m.num_classes = j.contains("num_classes") ? j.at("num_classes").get<int>()
                                                   : static_cast<int>(m.class_names.size());
        if (j.contains("splits")) {
            m.splits.train = j["splits"].value("train", std::size_t{0});
            m.splits.test = j["splits"].value("test", std::size_t{0});
        }
    } catch (const json::exception& e) {
        throw ManifestError(path.string() + ": " + e.what());
    }
    m.validate();
    return m;
}

void save_manifest(const DatasetManifest& m, const std::filesystem::path& path) {
    ordered_json j;
    j["name"] = m.name;
    j["num_classes"] = m.num_classes;
    j["class_names"] = m.class_names;
    j["verbaliser_sets"] = m.verbaliser_sets;
    j["splits"] = {{"train", m.splits.train}, {"test", m.splits.test}};
    io::write_file_atomic(path, j.dump(2) + "\n");
}

SourceFormat parse_source_format(std::string_view name) {
    if (name == "agnews_csv") return SourceFormat::agnews_csv;
    if (name == "sst2_tsv") return SourceFormat::sst2_tsv;
    if (name == "jigsaw_csv") return SourceFormat::jigsaw_csv;
    if (name == "jsonl") return SourceFormat::jsonl;
    throw IngestError("unknown source format \"" + std::string(name) +
                      "\" (expected agnews_csv, sst2_tsv, jigsaw_csv or jsonl)");
}

std::string_view to_string(SourceFormat format) noexcept {
    switch (format) {
        case SourceFormat::agnews_csv: return "agnews_csv";
        case SourceFormat::sst2_tsv: return "sst2_tsv";
        case SourceFormat::jigsaw_csv: return "jigsaw_csv";
        case SourceFormat::jsonl: return "jsonl";
    }
    return "unknown";
}

InstanceStore ingest_file(const std::filesystem::path& path, SourceFormat format,
                          const DatasetManifest& manifest, std::string_view id_prefix) {
    manifest.validate();
    std::vector<LabeledInstance> rows;
    switch (format) {
        case SourceFormat::agnews_csv: rows = read_agnews(path, manifest, id_prefix); break;
        case SourceFormat::sst2_tsv: rows = read_sst2(path, manifest, id_prefix); break;
        case SourceFormat::jigsaw_csv: rows = read_jigsaw(path, manifest); break;
        case SourceFormat::jsonl: rows = read_jsonl(path, &manifest, id_prefix, true); break;
    }
    return make_store(std::move(rows));
}

IngestResult ingest(const std::filesystem::path& dir, SourceFormat format, const DatasetManifest& manifest) {
    auto need = [&](const char* file) {
        auto p = dir / file;
        if (!std::filesystem::exists(p)) {
            throw IngestError("missing " + p.string() + " for format " + std::string(to_string(format)));
        }
        return p;
    };
    IngestResult r;
    switch (format) {
        case SourceFormat::agnews_csv:
            r.train = ingest_file(need("train.csv"), format, manifest, "train-");
            r.test = ingest_file(need("test.csv"), format, manifest, "test-");
            break;
        case SourceFormat::sst2_tsv:
            r.train = ingest_file(need("train.tsv"), format, manifest, "train-");
            r.test = ingest_file(need("dev.tsv"), format, manifest, "test-");
            break;
        case SourceFormat::jigsaw_csv:
            r.train = ingest_file(need("train.csv"), format, manifest);
            manifest.validate();
            r.test = make_store(read_jigsaw_test(need("test.csv"), need("test_labels.csv")));
            break;
        case SourceFormat::jsonl:
            r.train = ingest_file(need("train.jsonl"), format, manifest, "train-");
            r.test = ingest_file(need("test.jsonl"), format, manifest, "test-");
            break;
    }
    return r;
}

IngestResult split_by_id_hash(const InstanceStore& all, double test_fraction) {
    const auto threshold = static_cast<std::uint64_t>(std::clamp(test_fraction, 0.0, 1.0) * 10000.0);
    std::vector<LabeledInstance> train;
    std::vector<LabeledInstance> test;
    for (const auto& x : all) {
        (fnv1a64(x.id) % 10000 < threshold ? test : train).push_back(x);
    }
    return {InstanceStore(std::move(train)), InstanceStore(std::move(test))};
}

std::string to_jsonl(const InstanceStore& store) {
    std::string out;
    for (const auto& x : store) {
        ordered_json j;
        j["id"] = x.id;
        j["text"] = x.text;
        j["label"] = x.label;
        out += j.dump(-1, ' ', false, json::error_handler_t::replace);
        out.push_back('\n');
    }
    return out;
}

void write_store(const InstanceStore& store, const std::filesystem::path& path) {
    io::write_file_atomic(path, to_jsonl(store));
}

InstanceStore load_store(const std::filesystem::path& path) {
    if (!std::filesystem::exists(path)) {
        throw Error("missing instance store " + path.string());
    }
    return make_store(read_jsonl(path, nullptr, "", false));
}

}  // namespace aicl
