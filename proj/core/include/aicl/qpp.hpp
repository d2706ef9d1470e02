#pragma once

#include <cstddef>
#include <filesystem>
#include <string>

#include "aicl/corpus.hpp"
#include "aicl/text_index.hpp"

namespace aicl {

struct NqcEstimate {
    double raw = 0.0;
    double normalized = 0.0;
};

struct QppCalibration {
    /// Largest raw NQC observed over the calibration queries.
    double norm_constant = 0.0;
    std::size_t M = 0;
    std::size_t sample_size = 0;
    std::string corpus_hash;

    friend bool operator==(const QppCalibration&, const QppCalibration&) = default;
};

/// Standard deviation (population form) of the hit scores divided by `collection_score`.
/// Returns 0 for an empty list or a non-positive collection score.
double nqc(const RankedCandidates& candidates, double collection_score);

/// Normalizer for NQC: the query's BM25 score against the whole collection as one document,
/// or the mean top-M score when that is 0.
double nqc_collection_score(const Bm25Index& index, const LabeledInstance& query,
                            const RankedCandidates& candidates);

/// Raw NQC of `query` over `candidates`, normalized as min(raw / norm_constant, 1).
NqcEstimate estimate(const Bm25Index& index, const LabeledInstance& query, const RankedCandidates& candidates,
                     const QppCalibration& cal);

/// Positions of the calibration sample within `train` sorted by id: every instance when
/// sample_size >= |train|, otherwise the floor(i * n / sample_size)-th for i < sample_size.
std::vector<std::size_t> calibration_sample(const InstanceStore& train, std::size_t sample_size);

/// Max raw NQC over the stride sample, each query retrieving its own top-M with itself
/// excluded. Throws CalibrationError when every sampled NQC is 0.
QppCalibration calibrate(const Bm25Index& index, const InstanceStore& train, std::size_t M, std::size_t sample_size,
                         std::size_t workers = 1);

/// k = M - min(floor(normalized * M), M - 1), always in {1..M}.
std::size_t choose_k(double normalized, std::size_t M);
std::size_t choose_k(const NqcEstimate& est, const QppCalibration& cal);

void save_calibration(const QppCalibration& cal, const std::filesystem::path& path);
QppCalibration load_calibration(const std::filesystem::path& path);

}  // namespace aicl
