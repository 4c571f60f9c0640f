#include <algorithm>
#include <random>
#include <vector>

#include <benchmark/benchmark.h>

#include "syncmapv2/clustering.hpp"
#include "syncmapv2/reservoir.hpp"
#include "syncmapv2/similarity.hpp"
#include "syncmapv2/syncmap.hpp"

using namespace syncmap;

namespace {

Eigen::MatrixXd random_matrix(int rows, int cols, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    Eigen::MatrixXd m(rows, cols);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = gauss(rng);
    return m;
}

// one desk-profile patch alignment: 36-step responses over 512 neurons
void BM_DtwPair(benchmark::State& state) {
    const Eigen::MatrixXd a = random_matrix(36, 512, 1);
    const Eigen::MatrixXd b = random_matrix(36, 512, 2);
    for (auto _ : state) benchmark::DoNotOptimize(dtw_distance(a, b));
}
BENCHMARK(BM_DtwPair);

void BM_RunPatch(benchmark::State& state) {
    EsnParams params;
    params.input_dim = 36;
    params.seed = 7;
    const EsnWeights w = init_esn(params);
    InputSequence seq;
    seq.columns = random_matrix(36, 36, 3).cwiseAbs();
    for (auto _ : state) benchmark::DoNotOptimize(run_patch(w, seq, params.leak));
}
BENCHMARK(BM_RunPatch);

// one desk-profile dynamics update: 576 nodes, 15 dims, 17 positives
void BM_MapStep(benchmark::State& state) {
    DynamicsConfig cfg;
    cfg.l_movmean = 500;
    MapState map = init_map(576, cfg);
    std::mt19937_64 rng(11);
    std::vector<int> ps(17);
    for (auto _ : state) {
        for (auto& v : ps) v = static_cast<int>(rng() % 576);
        std::sort(ps.begin(), ps.end());
        ps.erase(std::unique(ps.begin(), ps.end()), ps.end());
        const ActivationSets sets = select_activation(ps, 576, map.rng, true);
        step(map, sets, cfg);
        benchmark::DoNotOptimize(map.coords.data());
    }
}
BENCHMARK(BM_MapStep);

void BM_NormalizeSpace(benchmark::State& state) {
    DynamicsConfig cfg;
    cfg.l_movmean = 500;
    MapState map = init_map(576, cfg);
    for (auto _ : state) {
        normalize_space(map, cfg);
        benchmark::DoNotOptimize(map.coords.data());
    }
}
BENCHMARK(BM_NormalizeSpace);

void BM_WardDendrogram(benchmark::State& state) {
    const Eigen::MatrixXd pts = random_matrix(576, 15, 5);
    for (auto _ : state) benchmark::DoNotOptimize(build_dendrogram(pts, Linkage::ward));
}
BENCHMARK(BM_WardDendrogram);

}  // namespace

BENCHMARK_MAIN();
