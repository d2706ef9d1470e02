#include "aicl/qpp.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "aicl/error.hpp"
#include "json_io.hpp"
#include "parallel.hpp"

namespace aicl {

double nqc(const RankedCandidates& candidates, double collection_score) {
    const auto& hits = candidates.hits;
    if (hits.empty() || !(collection_score > 0.0)) {
        return 0.0;
    }
    const auto n = static_cast<double>(hits.size());
    double mean = 0.0;
    for (const auto& h : hits) {
        mean += h.score;
    }
    mean /= n;
    double var = 0.0;
    for (const auto& h : hits) {
        var += (h.score - mean) * (h.score - mean);
    }
    return std::sqrt(var / n) / collection_score;
}

double nqc_collection_score(const Bm25Index& index, const LabeledInstance& query, const RankedCandidates& candidates) {
    const double s = index.collection_score(query);
    if (s > 0.0 || candidates.hits.empty()) {
        return s;
    }
    double mean = 0.0;
    for (const auto& h : candidates.hits) {
        mean += h.score;
    }
    return mean / static_cast<double>(candidates.hits.size());
}

NqcEstimate estimate(const Bm25Index& index, const LabeledInstance& query, const RankedCandidates& candidates,
                     const QppCalibration& cal) {
    if (!(cal.norm_constant > 0.0)) {
        throw CalibrationError("calibration norm_constant must be > 0");
    }
    NqcEstimate e;
    e.raw = nqc(candidates, nqc_collection_score(index, query, candidates));
    e.normalized = std::min(e.raw / cal.norm_constant, 1.0);
    return e;
}

std::vector<std::size_t> calibration_sample(const InstanceStore& train, std::size_t sample_size) {
    std::vector<std::size_t> order(train.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return train[a].id < train[b].id; });
    const std::size_t n = order.size();
    if (sample_size >= n) {
        return order;
    }
    std::vector<std::size_t> picked;
    picked.reserve(sample_size);
    for (std::size_t i = 0; i < sample_size; ++i) {
        picked.push_back(order[i * n / sample_size]);
    }
    return picked;
}

QppCalibration calibrate(const Bm25Index& index, const InstanceStore& train, std::size_t M, std::size_t sample_size,
                         std::size_t workers) {
    if (sample_size == 0) {
        throw CalibrationError("calibration sample_size must be >= 1");
    }
    if (M == 0) {
        throw CalibrationError("M must be >= 1");
    }
    const auto sample = calibration_sample(train, sample_size);
    std::vector<double> raw(sample.size(), 0.0);
    detail::parallel_for(sample.size(), workers, [&](std::size_t i) {
        const auto& q = train[sample[i]];
        const auto cands = index.retrieve(q, M, SelfMatch::exclude);
        raw[i] = nqc(cands, nqc_collection_score(index, q, cands));
    });
    QppCalibration cal;
    cal.M = M;
    cal.sample_size = sample.size();
    cal.corpus_hash = index.corpus_hash();
    cal.norm_constant = raw.empty() ? 0.0 : *std::max_element(raw.begin(), raw.end());
    if (!(cal.norm_constant > 0.0)) {
        throw CalibrationError("every sampled query has NQC 0; the corpus is degenerate for QPP");
    }
    return cal;
}

std::size_t choose_k(double normalized, std::size_t M) {
    if (M == 0) {
        throw CalibrationError("M must be >= 1");
    }
    const double clamped = std::clamp(std::isnan(normalized) ? 0.0 : normalized, 0.0, 1.0);
    const auto bin = std::min(static_cast<std::size_t>(std::floor(clamped * static_cast<double>(M))), M - 1);
    return M - bin;
}

std::size_t choose_k(const NqcEstimate& est, const QppCalibration& cal) { return choose_k(est.normalized, cal.M); }

void save_calibration(const QppCalibration& cal, const std::filesystem::path& path) {
    io::ordered_json j;
    j["norm_constant"] = cal.norm_constant;
    j["M"] = cal.M;
    j["sample_size"] = cal.sample_size;
    j["corpus_hash"] = cal.corpus_hash;
    io::write_file_atomic(path, j.dump(2) + "\n");
}

QppCalibration load_calibration(const std::filesystem::path& path) {
    const auto j = io::parse_json_file(path);
    QppCalibration cal;
    try {
        cal.norm_constant = j.at("norm_constant").get<double>();
        cal.M = j.at("M").get<std::size_t>();
        cal.sample_size = j.at("sample_size").get<std::size_t>();
        cal.corpus_hash = j.at("corpus_hash").get<std::string>();
    } catch (const io::json::exception& e) {
        throw CalibrationError(path.string() + ": " + e.what());
    }
    if (!(cal.norm_constant > 0.0) || cal.M == 0) {
        throw CalibrationError(path.string() + ": invalid calibration");
    }
    return cal;
}

}  // namespace aicl
