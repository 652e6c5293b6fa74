#include <benchmark/benchmark.h>

#include "vqb/clustering.hpp"
#include "vqb/quantizer.hpp"
#include "vqb/synthetic.hpp"
#include "vqb/trainer.hpp"

namespace {

using namespace vqb;

Matrix random_matrix(std::size_t rows, std::size_t cols, Rng& rng) {
    Matrix m(rows, cols);
    for (std::size_t i = 0; i < m.size(); ++i) m.data()[i] = rng.normal();
    return m;
}

void BM_PairwiseSqDists(benchmark::State& state) {
    Rng rng(1);
    const Matrix a = random_matrix(static_cast<std::size_t>(state.range(0)), 8, rng);
    const Matrix b = random_matrix(64, 8, rng);
    for (auto _ : state) benchmark::DoNotOptimize(pairwise_sq_dists(a, b));
}
BENCHMARK(BM_PairwiseSqDists)->Arg(32)->Arg(256);

void BM_Quantize(benchmark::State& state) {
    Rng rng(2);
    const Codebook cb = init_codebook(static_cast<std::size_t>(state.range(0)), 8, 1.0, rng);
    const Matrix e = random_matrix(64, 8, rng);
    for (auto _ : state) benchmark::DoNotOptimize(quantize(e, {cb}, QuantizerConfig{}));
}
BENCHMARK(BM_Quantize)->Arg(64)->Arg(1024);

void BM_Lloyd(benchmark::State& state) {
    Rng rng(3);
    const Matrix points = random_matrix(static_cast<std::size_t>(state.range(0)), 8, rng);
    for (auto _ : state) {
        Rng seed_rng(4);
        const Matrix init = kmeanspp_seed(points, 64, seed_rng);
        benchmark::DoNotOptimize(lloyd(points, init, 10, 1e-6));
    }
}
BENCHMARK(BM_Lloyd)->Arg(1024)->Arg(4096);

void BM_TrainStep(benchmark::State& state) {
    TrainerConfig cfg;
    cfg.method.batchnorm = true;
    cfg.method.reestimate = true;
    TrainerState st = make_trainer(cfg);
    const Dataset ds = make_synthetic(Task::Autoencode, 5);
    for (auto _ : state) {
        std::vector<std::size_t> idx(static_cast<std::size_t>(state.range(0)));
        for (auto& i : idx) i = st.train_rng.uniform_index(ds.train_x.rows());
        benchmark::DoNotOptimize(train_step(st, ds.train_batch(idx)));
    }
}
BENCHMARK(BM_TrainStep)->Arg(32)->Arg(128);

}  // namespace

BENCHMARK_MAIN();
