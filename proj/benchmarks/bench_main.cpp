#include <benchmark/benchmark.h>

#include <memory>
#include <random>
#include <string>
#include <vector>

#include "aicl/evalkit.hpp"
#include "aicl/kpredictor.hpp"
#include "aicl/text_index.hpp"

namespace {

// Zipf-ish synthetic text so posting lists have a realistic skew.
std::vector<aicl::LabeledInstance> synthetic(std::size_t n, std::size_t vocab, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::vector<double> w(vocab);
    for (std::size_t i = 0; i < vocab; ++i) {
        w[i] = 1.0 / static_cast<double>(i + 1);
    }
    std::discrete_distribution<std::size_t> word(w.begin(), w.end());
    std::uniform_int_distribution<std::size_t> len(8, 40);
    std::vector<aicl::LabeledInstance> out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        std::string t;
        for (std::size_t j = len(rng); j > 0; --j) {
            t += "w" + std::to_string(word(rng)) + " ";
        }
        out.push_back({"doc" + std::to_string(i), t, static_cast<int>(i % 4)});
    }
    return out;
}

struct Shared {
    std::shared_ptr<const aicl::InstanceStore> store;
    std::unique_ptr<aicl::Bm25Index> index;

    static Shared& get() {
        static Shared s = [] {
            Shared x;
            x.store = std::make_shared<const aicl::InstanceStore>(synthetic(20000, 5000, 1));
            x.index = std::make_unique<aicl::Bm25Index>(aicl::Bm25Index::build(x.store));
            return x;
        }();
        return s;
    }
};

void BM_Retrieve(benchmark::State& state) {
    auto& s = Shared::get();
    const auto M = static_cast<std::size_t>(state.range(0));
    std::size_t i = 0;
    for (auto _ : state) {
        const auto& q = (*s.store)[i++ % s.store->size()];
        benchmark::DoNotOptimize(s.index->retrieve(q, M));
    }
    state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations()));
}
BENCHMARK(BM_Retrieve)->Arg(5)->Arg(50);

void BM_Featurize(benchmark::State& state) {
    auto& s = Shared::get();
    const aicl::Featurizer feat(*s.index, std::size_t{1} << 15);
    std::size_t i = 0;
    for (auto _ : state) {
        benchmark::DoNotOptimize(feat((*s.store)[i++ % s.store->size()].text));
    }
    state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations()));
}
BENCHMARK(BM_Featurize);

void BM_TrainEpoch(benchmark::State& state) {
    auto& s = Shared::get();
    const aicl::Featurizer feat(*s.index, std::size_t{1} << 15);
    std::vector<aicl::TrainingExample> ex;
    for (std::size_t i = 0; i < 5000; ++i) {
        ex.push_back({feat((*s.store)[i].text), i % 6, 1.0});
    }
    aicl::KHyperParams hp;
    hp.epochs = 1;
    for (auto _ : state) {
        benchmark::DoNotOptimize(aicl::train_softmax(ex, feat.dims(), 5, hp));
    }
    state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * ex.size()));
}
BENCHMARK(BM_TrainEpoch)->Unit(benchmark::kMillisecond);

void BM_Score(benchmark::State& state) {
    std::mt19937_64 rng(3);
    std::vector<aicl::RunRecord> run(static_cast<std::size_t>(state.range(0)));
    for (std::size_t i = 0; i < run.size(); ++i) {
        run[i].instance_id = std::to_string(i);
        run[i].gold_label = static_cast<int>(rng() % 4);
        run[i].predicted_label = static_cast<int>(rng() % 4);
        run[i].prompt_tokens = 100 + rng() % 400;
    }
    for (auto _ : state) {
        benchmark::DoNotOptimize(aicl::score(run, 4));
    }
    state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * run.size()));
}
BENCHMARK(BM_Score)->Arg(7600);

}  // namespace

BENCHMARK_MAIN();
