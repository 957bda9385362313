#include <benchmark/benchmark.h>

#include <random>
#include <string>

#include "attrib/agreement.hpp"
#include "attrib/calibrate.hpp"
#include "attrib/citeparse.hpp"
#include "attrib/corpus.hpp"
#include "attrib/metrics.hpp"

using namespace attrib;

namespace {

IndexSet random_set(std::mt19937& rng, int universe) {
    IndexSet s;
    for (int i = 0; i < universe; ++i) {
        if (rng() & 1) s.insert(i);
    }
    return s;
}

std::string long_explanation(int sentences) {
    std::string out = "The claim is false.";
    for (int i = 0; i < sentences; ++i) {
        out += " Report number " + std::to_string(i) + " from the U.S. agency says otherwise [" + std::to_string(i % 12) +
               "]";
        if (i % 3 == 0) out += "[" + std::to_string((i + 5) % 12) + "]";
        out += ".";
    }
    return out;
}

}  // namespace

static void BM_SetPrf(benchmark::State& state) {
    std::mt19937 rng(1);
    const auto a = random_set(rng, static_cast<int>(state.range(0)));
    const auto b = random_set(rng, static_cast<int>(state.range(0)));
    for (auto _ : state) benchmark::DoNotOptimize(metrics::set_prf(a, b));
}
BENCHMARK(BM_SetPrf)->Arg(5)->Arg(20);

static void BM_Alpha(benchmark::State& state) {
    std::mt19937 rng(2);
    std::vector<std::vector<IndexSet>> units(static_cast<std::size_t>(state.range(0)));
    for (auto& u : units) {
        for (int k = 0; k < 5; ++k) u.push_back(random_set(rng, 4));
    }
    for (auto _ : state) benchmark::DoNotOptimize(metrics::krippendorff_alpha(units, metrics::jaccard_distance));
    state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_Alpha)->Range(8, 256)->Complexity();

static void BM_Segment(benchmark::State& state) {
    const auto text = long_explanation(static_cast<int>(state.range(0)));
    for (auto _ : state) benchmark::DoNotOptimize(cite::segment_sentences(text));
    state.SetBytesProcessed(static_cast<std::int64_t>(state.iterations() * text.size()));
}
BENCHMARK(BM_Segment)->Arg(8)->Arg(64);

static void BM_Mask(benchmark::State& state) {
    const auto ex = make_explanation("c", "g", EvidenceSource::kHuman, {}, long_explanation(static_cast<int>(state.range(0))));
    for (auto _ : state) benchmark::DoNotOptimize(mask_citation(ex, 0));
}
BENCHMARK(BM_Mask)->Arg(8)->Arg(64);

static void BM_Ep(benchmark::State& state) {
    std::mt19937 rng(3);
    std::normal_distribution<double> n;
    std::vector<calib::UtilityObservation> obs;
    for (int i = 0; i < state.range(0); ++i) {
        for (int j = 0; j < 5; ++j) obs.push_back({"i" + std::to_string(i), "a" + std::to_string(j), n(rng)});
    }
    for (auto _ : state) benchmark::DoNotOptimize(calib::ep_calibrate(obs));
}
BENCHMARK(BM_Ep)->Arg(10)->Arg(50)->Unit(benchmark::kMillisecond);
BENCHMARK_MAIN();
