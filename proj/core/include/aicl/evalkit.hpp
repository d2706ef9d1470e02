#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "aicl/runner.hpp"

namespace aicl {

struct ClassMetrics {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    friend bool operator==(const ClassMetrics&, const ClassMetrics&) = default;
};

struct MetricsReport {
    std::vector<ClassMetrics> per_class;
    double macro_precision = 0.0;
    double macro_recall = 0.0;
    /// Mean of the per-class F1 values (not the harmonic mean of macro P and R).
    double macro_f1 = 0.0;
    double avg_k = 0.0;
    /// Mean prompt tokens rounded to the nearest integer.
    long long ais = 0;
    std::size_t n = 0;
    friend bool operator==(const MetricsReport&, const MetricsReport&) = default;
};

/// Confusion-matrix metrics over p classes; a zero denominator yields 0. Throws EvalError on an
/// empty record list or a label outside 0..p-1.
MetricsReport score(std::span<const RunRecord> records, int num_classes);

struct NamedReport {
    std::string dataset;
    std::string method;
    MetricsReport report;
};

struct Comparison {
    /// Markdown table; the best F-score of each dataset is bolded.
    std::string text;
    std::string json;
    std::string csv;
};

/// One row per report in the given order, columns k, Precision, Recall, F-score, AIS.
Comparison compare(std::span<const NamedReport> reports);

/// k column text: integers print bare, averages with two decimals.
std::string format_k(double k);

void save_report(const NamedReport& report, const std::filesystem::path& path);
NamedReport load_report(const std::filesystem::path& path);

}  // namespace aicl
