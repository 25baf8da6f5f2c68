// Copyright (c) The sdrf Authors
// SPDX-License-Identifier: Apache-2.0

#include <benchmark/benchmark.h>

#include <algorithm>
#include <vector>

#include "sdrf/sampling.hpp"

namespace {

using namespace sdrf;

WeightPdf bench_pdf(int bins) {
    WeightPdf pdf;
    Pcg32 rng(5);
    pdf.bin_edges.resize(std::size_t(bins) + 1);
    for (int i = 0; i <= bins; ++i) pdf.bin_edges[std::size_t(i)] = 4.0 * i / bins;
    pdf.weights.resize(std::size_t(bins));
    for (double& w : pdf.weights) w = rng.next_double();
    return pdf;
}

void BM_KernelSmooth(benchmark::State& state) {
    const WeightPdf pdf = bench_pdf(int(state.range(0)));
    for (auto _ : state) {
        benchmark::DoNotOptimize(kernel_smooth(pdf, Kernel{}));
    }
}
BENCHMARK(BM_KernelSmooth)->Arg(32)->Arg(128);

void BM_ImportanceSample(benchmark::State& state) {
    const WeightPdf pdf = kernel_smooth(bench_pdf(32), Kernel{});
    Pcg32 rng(11);
    for (auto _ : state) {
        benchmark::DoNotOptimize(importance_sample(pdf, int(state.range(0)), rng));
    }
}
BENCHMARK(BM_ImportanceSample)->Arg(32)->Arg(128);

void BM_MergeSorted(benchmark::State& state) {
    Pcg32 rng(3);
    std::vector<double> a, b;
    for (int i = 0; i < int(state.range(0)); ++i) {
        a.push_back(4.0 * rng.next_double());
        b.push_back(4.0 * rng.next_double());
    }
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    for (auto _ : state) {
        benchmark::DoNotOptimize(merge_sorted(a, b));
    }
}
BENCHMARK(BM_MergeSorted)->Arg(64);

}  // namespace

BENCHMARK_MAIN();
