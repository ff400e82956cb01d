#include <benchmark/benchmark.h>

#include "afrclip/core.hpp"
#include "afrclip/metrics.hpp"
#include "afrclip/model.hpp"
#include "afrclip/mpfa.hpp"
#include "afrclip/rng.hpp"
#include "afrclip/scoring.hpp"

using namespace afrclip;

namespace {

Mat random_mat(uint64_t seed, int rows, int cols) {
    Rng rng(seed);
    Mat m(rows, cols);
    for (double& v : m.data) v = rng.gaussian();
    return m;
}

void BM_CosineRows(benchmark::State& state) {
    int n = static_cast<int>(state.range(0));
    Mat rows = random_mat(1, n, 768);
    Mat probe = random_mat(2, 1, 768);
    for (auto _ : state) {
        double acc = 0.0;
        for (int i = 0; i < n; ++i)
            acc += cosine_similarity(std::span(rows.row(i), 768), std::span(probe.data.data(), size_t(768)));
        benchmark::DoNotOptimize(acc);
    }
    state.SetItemsProcessed(state.iterations() * n);
}
BENCHMARK(BM_CosineRows)->Arg(64)->Arg(1369);

void BM_MpfaAggregate(benchmark::State& state) {
    int side = static_cast<int>(state.range(0));
    int m = static_cast<int>(state.range(1));
    Mat tokens = random_mat(3, side * side, 768);
    for (auto _ : state) {
        Mat out = mpfa::aggregate(tokens, m);
        benchmark::DoNotOptimize(out.data.data());
    }
}
BENCHMARK(BM_MpfaAggregate)->Args({8, 3})->Args({37, 3})->Args({37, 5});

void BM_BilinearUpsample(benchmark::State& state) {
    int side = static_cast<int>(state.range(0));
    Mat grid = random_mat(4, side, side);
    for (auto _ : state) {
        Mat up = bilinear_resize(grid, 518, 518);
        benchmark::DoNotOptimize(up.data.data());
    }
}
BENCHMARK(BM_BilinearUpsample)->Arg(8)->Arg(37);

void BM_Auroc(benchmark::State& state) {
    size_t n = static_cast<size_t>(state.range(0));
    Rng rng(5);
    std::vector<double> scores(n);
    std::vector<uint8_t> labels(n);
    for (size_t i = 0; i < n; ++i) {
        scores[i] = rng.uniform();
        labels[i] = rng.uniform() < 0.3;
    }
    labels[0] = 0;
    labels[1] = 1;
    for (auto _ : state) benchmark::DoNotOptimize(metrics::auroc(scores, labels));
    state.SetItemsProcessed(state.iterations() * n);
}
BENCHMARK(BM_Auroc)->Arg(1 << 12)->Arg(1 << 18);

void BM_SurrogateInfer(benchmark::State& state) {
    RunConfig cfg;  // default 64px surrogate
    Model model = Model::create(cfg);
    Rng rng(6);
    Image img(cfg.image_size, cfg.image_size);
    for (double& v : img.chan) v = rng.uniform();
    for (auto _ : state) {
        auto result = scoring::infer(model, img, "screw");
        benchmark::DoNotOptimize(result.image_score);
    }
}
BENCHMARK(BM_SurrogateInfer)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
