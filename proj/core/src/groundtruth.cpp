#include "aicl/groundtruth.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <mutex>
#include <optional>

#include "aicl/error.hpp"
#include "aicl/prompting.hpp"
#include "json_io.hpp"
#include "parallel.hpp"

namespace aicl {

std::pair<std::size_t, double> select_k_star(std::span<const Probe> probes) {
    double max_confidence = 0.0;
    std::size_t k_star = 1;
    for (const auto& p : probes) {
        if (p.confidence > max_confidence) {
            max_confidence = p.confidence;
            k_star = p.k;
        }
    }
    return {k_star, max_confidence};
}

GroundTruth build_ground_truth(LlmGateway& gateway, const DatasetManifest& manifest, const Bm25Index& index,
                               const InstanceStore& train, const GroundTruthOptions& options) {
    const std::size_t M = options.M;
    if (M == 0) {
        throw GroundTruthError("M must be >= 1");
    }
    const std::size_t n = train.size();
    const auto allowed_incomplete =
        static_cast<std::size_t>(std::floor(options.max_incomplete_fraction * static_cast<double>(n)));

    std::vector<std::optional<KLabel>> slots(n);
    std::vector<std::string> failures(n);
    std::atomic<std::size_t> incomplete{0};
    std::atomic<std::size_t> done{0};
    std::mutex progress_mu;

    detail::parallel_for(n, options.workers, [&](std::size_t i) {
        const auto& x = train[i];
        const auto candidates = index.retrieve(x, M, SelfMatch::exclude);
        KLabel label;
        label.instance_id = x.id;
        label.probed.reserve(M + 1);
        bool overflowed = false;
        try {
            for (std::size_t j = 0; j <= M; ++j) {
                Probe probe{j, -1, 0.0};
                if (!overflowed && j <= candidates.hits.size()) {
                    try {
                        const auto pred = predict(gateway, manifest, index, x, candidates, j);
                        probe.predicted_label = pred.posterior.argmax();
                        probe.confidence = probe.predicted_label == x.label
                                               ? pred.posterior.probs[static_cast<std::size_t>(probe.predicted_label)]
                                               : 0.0;
                    } catch (const ContextOverflowError&) {
                        overflowed = true;
                    }
                }
                label.probed.push_back(probe);
            }
        } catch (const GatewayError& e) {
            failures[i] = x.id + ": " + e.what();
            if (incomplete.fetch_add(1) + 1 > allowed_incomplete) {
                throw GroundTruthError("more than " + std::to_string(allowed_incomplete) + " of " + std::to_string(n) +
                                       " training instances failed; last: " + failures[i]);
            }
        }
        if (failures[i].empty()) {
            std::tie(label.k_star, label.confidence) = select_k_star(label.probed);
            slots[i] = std::move(label);
        }
        const auto finished = done.fetch_add(1) + 1;
        if (options.progress) {
            std::lock_guard lock(progress_mu);
            options.progress(finished, n);
        }
    });

    GroundTruth gt;
    for (std::size_t i = 0; i < n; ++i) {
        if (slots[i]) {
            gt.labels.push_back(std::move(*slots[i]));
        } else if (!failures[i].empty()) {
            gt.incomplete.push_back(std::move(failures[i]));
        }
    }
    std::sort(gt.labels.begin(), gt.labels.end(),
              [](const KLabel& a, const KLabel& b) { return a.instance_id < b.instance_id; });
    std::sort(gt.incomplete.begin(), gt.incomplete.end());
    return gt;
}

void export_klabels(std::span<const KLabel> labels, const std::filesystem::path& path) {
    std::vector<const KLabel*> order;
    order.reserve(labels.size());
    for (const auto& l : labels) {
        order.push_back(&l);
    }
    std::sort(order.begin(), order.end(), [](const KLabel* a, const KLabel* b) { return a->instance_id < b->instance_id; });
    std::string out;
    for (const auto* l : order) {
        io::ordered_json j;
        j["instance_id"] = l->instance_id;
        j["k_star"] = l->k_star;
        j["confidence"] = l->confidence;
        auto probes = io::json::array();
        for (const auto& p : l->probed) {
            probes.push_back({p.k, p.predicted_label, p.confidence});
        }
        j["probed"] = std::move(probes);
        out += j.dump();
        out.push_back('\n');
    }
    io::write_file_atomic(path, out);
}

std::vector<KLabel> import_klabels(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw Error("cannot open " + path.string());
    }
    std::vector<KLabel> labels;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) {
            continue;
        }
        try {
            const auto j = io::json::parse(line);
            KLabel l;
            l.instance_id = j.at("instance_id").get<std::string>();
            l.k_star = j.at("k_star").get<std::size_t>();
            l.confidence = j.at("confidence").get<double>();
            if (j.contains("probed")) {
                for (const auto& p : j["probed"]) {
                    l.probed.push_back({p.at(0).get<std::size_t>(), p.at(1).get<int>(), p.at(2).get<double>()});
                }
            }
            labels.push_back(std::move(l));
        } catch (const io::json::exception& e) {
            throw Error(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
        }
    }
    return labels;
}

std::vector<std::size_t> k_star_histogram(std::span<const KLabel> labels, std::size_t M) {
    std::vector<std::size_t> h(M + 1, 0);
    for (const auto& l : labels) {
        if (l.k_star <= M) {
            ++h[l.k_star];
        }
    }
    return h;
}

}  // namespace aicl
