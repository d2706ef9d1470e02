#include "aicl/evalkit.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <map>
#include <sstream>

#include "aicl/error.hpp"
#include "json_io.hpp"

namespace aicl {

namespace {

double ratio(std::size_t num, std::size_t den) {
    return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
}

std::string fixed4(double v) {
    std::ostringstream os;
    os << std::fixed << std::setprecision(4) << v;
    return os.str();
}

io::ordered_json report_json(const MetricsReport& r) {
    io::ordered_json j;
    j["n"] = r.n;
    j["macro_precision"] = r.macro_precision;
    j["macro_recall"] = r.macro_recall;
    j["macro_f1"] = r.macro_f1;
    j["avg_k"] = r.avg_k;
    j["ais"] = r.ais;
    auto per = io::ordered_json::array();
    for (const auto& c : r.per_class) {
        per.push_back({{"precision", c.precision}, {"recall", c.recall}, {"f1", c.f1}});
    }
    j["per_class"] = std::move(per);
    return j;
}

MetricsReport report_from_json(const io::json& j) {
    MetricsReport r;
    r.n = j.at("n").get<std::size_t>();
    r.macro_precision = j.at("macro_precision").get<double>();
    r.macro_recall = j.at("macro_recall").get<double>();
    r.macro_f1 = j.at("macro_f1").get<double>();
    r.avg_k = j.at("avg_k").get<double>();
    r.ais = j.at("ais").get<long long>();
    for (const auto& c : j.at("per_class")) {
        r.per_class.push_back({c.at("precision").get<double>(), c.at("recall").get<double>(), c.at("f1").get<double>()});
    }
    return r;
}

}  // namespace

MetricsReport score(std::span<const RunRecord> records, int num_classes) {
    if (records.empty()) {
        throw EvalError("cannot score an empty run");
    }
    if (num_classes < 1) {
        throw EvalError("number of classes must be >= 1");
    }
    const auto p = static_cast<std::size_t>(num_classes);
    std::vector<std::size_t> tp(p, 0), fp(p, 0), fn(p, 0);
    std::size_t k_sum = 0;
    std::size_t token_sum = 0;
    for (const auto& r : records) {
        if (r.gold_label < 0 || r.gold_label >= num_classes || r.predicted_label < 0 ||
            r.predicted_label >= num_classes) {
            throw EvalError("record " + r.instance_id + " has a label outside 0.." + std::to_string(num_classes - 1));
        }
        const auto g = static_cast<std::size_t>(r.gold_label);
        const auto y = static_cast<std::size_t>(r.predicted_label);
        if (g == y) {
            ++tp[g];
        } else {
            ++fp[y];
            ++fn[g];
        }
        k_sum += r.k_used;
        token_sum += r.prompt_tokens;
    }

    MetricsReport out;
    out.n = records.size();
    out.per_class.resize(p);
    for (std::size_t c = 0; c < p; ++c) {
        auto& m = out.per_class[c];
        m.precision = ratio(tp[c], tp[c] + fp[c]);
        m.recall = ratio(tp[c], tp[c] + fn[c]);
        m.f1 = m.precision + m.recall == 0.0 ? 0.0 : 2.0 * m.precision * m.recall / (m.precision + m.recall);
        out.macro_precision += m.precision;
        out.macro_recall += m.recall;
        out.macro_f1 += m.f1;
    }
    const auto pd = static_cast<double>(p);
    out.macro_precision /= pd;
    out.macro_recall /= pd;
    out.macro_f1 /= pd;
    const auto n = static_cast<double>(out.n);
    out.avg_k = static_cast<double>(k_sum) / n;
    out.ais = std::llround(static_cast<double>(token_sum) / n);
    return out;
}

std::string format_k(double k) {
    if (k == std::floor(k)) {
        return std::to_string(static_cast<long long>(k));
    }
    std::ostringstream os;
    os << std::fixed << std::setprecision(2) << k;
    return os.str();
}

Comparison compare(std::span<const NamedReport> reports) {
    std::map<std::string, double> best;
    for (const auto& r : reports) {
        auto [it, fresh] = best.emplace(r.dataset, r.report.macro_f1);
        if (!fresh) {
            it->second = std::max(it->second, r.report.macro_f1);
        }
    }

    std::vector<std::vector<std::string>> rows;
    rows.push_back({"Dataset", "Method", "k", "Precision", "Recall", "F-score", "AIS"});
    auto json_rows = io::ordered_json::array();
    std::string csv = "dataset,method,k,precision,recall,f_score,ais\n";
    for (const auto& r : reports) {
        const auto& m = r.report;
        const bool is_best = m.macro_f1 == best.at(r.dataset);
        const auto f = fixed4(m.macro_f1);
        rows.push_back({r.dataset, r.method, format_k(m.avg_k), fixed4(m.macro_precision), fixed4(m.macro_recall),
                        is_best ? "**" + f + "**" : f, std::to_string(m.ais)});

        io::ordered_json j;
        j["dataset"] = r.dataset;
        j["method"] = r.method;
        j["k"] = m.avg_k;
        j["precision"] = m.macro_precision;
        j["recall"] = m.macro_recall;
        j["f_score"] = m.macro_f1;
        j["ais"] = m.ais;
        j["best"] = is_best;
        json_rows.push_back(std::move(j));

        csv += r.dataset + "," + r.method + "," + format_k(m.avg_k) + "," + fixed4(m.macro_precision) + "," +
               fixed4(m.macro_recall) + "," + f + "," + std::to_string(m.ais) + "\n";
    }

    std::vector<std::size_t> width(rows.front().size(), 0);
    for (const auto& row : rows) {
        for (std::size_t c = 0; c < row.size(); ++c) {
            width[c] = std::max(width[c], row[c].size());
        }
    }
    auto emit = [&](const std::vector<std::string>& row) {
        std::string line = "|";
        for (std::size_t c = 0; c < row.size(); ++c) {
            line += " " + row[c] + std::string(width[c] - row[c].size(), ' ') + " |";
        }
        return line + "\n";
    };

    Comparison out;
    out.text = emit(rows.front());
    out.text += "|";
    for (std::size_t c = 0; c < width.size(); ++c) {
        out.text += std::string(width[c] + 2, '-') + "|";
    }
    out.text += "\n";
    for (std::size_t i = 1; i < rows.size(); ++i) {
        out.text += emit(rows[i]);
    }
    out.json = io::ordered_json{{"rows", std::move(json_rows)}}.dump(2) + "\n";
    out.csv = std::move(csv);
    return out;
}

void save_report(const NamedReport& report, const std::filesystem::path& path) {
    io::ordered_json j;
    j["format"] = "aicl-report";
    j["version"] = 1;
    j["dataset"] = report.dataset;
    j["method"] = report.method;
    j["metrics"] = report_json(report.report);
    io::write_file_atomic(path, j.dump(2) + "\n");
}

NamedReport load_report(const std::filesystem::path& path) {
    const auto j = io::parse_json_file(path);
    try {
        if (j.value("format", "") != "aicl-report") {
            throw EvalError(path.string() + ": not a report file");
        }
        return {j.at("dataset").get<std::string>(), j.at("method").get<std::string>(), report_from_json(j.at("metrics"))};
    } catch (const io::json::exception& e) {
        throw EvalError(path.string() + ": " + e.what());
    }
}

}  // namespace aicl
