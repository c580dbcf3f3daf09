// SPDX-License-Identifier: Apache-2.0
// SPDX-FileCopyrightText: Copyright 2026 The uqd Authors

// Serial reference vs OpenMP kernels. Set OMP_NUM_THREADS to vary the
// parallel side.

#include <uqd/kernels.hpp>

#include <benchmark/benchmark.h>

using namespace uqd;
namespace ks = uqd::kernels::serial;
namespace kp = uqd::kernels::parallel;

namespace {

std::vector<Genotype> genotypes(std::size_t n)
{
    RngStream rng(1);
    std::vector<Genotype> out(n);
    for (auto& g : out) {
        g.params.resize(42);
        for (Eigen::Index i = 0; i < 42; ++i)
            g.params[i] = rng.normal();
    }
    return out;
}

std::vector<Vector> points(std::size_t n, Eigen::Index d)
{
    RngStream rng(2);
    std::vector<Vector> out(n, Vector(d));
    for (auto& v : out)
        for (Eigen::Index i = 0; i < d; ++i)
            v[i] = rng.uniform();
    return out;
}

template <bool Parallel>
void evaluate(benchmark::State& state)
{
    const MazeTask task(MazeWorld::standard());
    const auto gs = genotypes(static_cast<std::size_t>(state.range(0)));
    for (auto _ : state)
        benchmark::DoNotOptimize(Parallel ? kp::evaluate_batch(task, gs) : ks::evaluate_batch(task, gs));
    state.SetItemsProcessed(state.iterations() * state.range(0));
}

template <bool Parallel>
void novelty(benchmark::State& state)
{
    const auto n = static_cast<std::size_t>(state.range(0));
    const auto f = points(n, 10);
    std::vector<double> fit(n);
    RngStream rng(3);
    for (auto& v : fit)
        v = rng.normal();
    for (auto _ : state)
        benchmark::DoNotOptimize(Parallel ? kp::dominated_novelty_scores(f, fit) : ks::dominated_novelty_scores(f, fit));
}

template <bool Parallel>
void centroids(benchmark::State& state)
{
    RngStream rng(4);
    Matrix c(1024, 2), p(state.range(0), 2);
    for (Eigen::Index i = 0; i < c.size(); ++i)
        c.data()[i] = rng.uniform();
    for (Eigen::Index i = 0; i < p.size(); ++i)
        p.data()[i] = rng.uniform();
    for (auto _ : state)
        benchmark::DoNotOptimize(Parallel ? kp::nearest_centroids(c, p) : ks::nearest_centroids(c, p));
}

template <bool Parallel>
void min_distance(benchmark::State& state)
{
    const auto f = points(static_cast<std::size_t>(state.range(0)), 10);
    for (auto _ : state)
        benchmark::DoNotOptimize(Parallel ? kp::min_pairwise_distance(f) : ks::min_pairwise_distance(f));
}

} // namespace

BENCHMARK(evaluate<false>)->Arg(64)->Unit(benchmark::kMillisecond);
BENCHMARK(evaluate<true>)->Arg(64)->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(novelty<false>)->Arg(320)->Arg(1280);
BENCHMARK(novelty<true>)->Arg(320)->Arg(1280)->UseRealTime();
BENCHMARK(centroids<false>)->Arg(64)->Arg(4096);
BENCHMARK(centroids<true>)->Arg(64)->Arg(4096)->UseRealTime();
BENCHMARK(min_distance<false>)->Arg(320);
BENCHMARK(min_distance<true>)->Arg(320)->UseRealTime();

BENCHMARK_MAIN();
