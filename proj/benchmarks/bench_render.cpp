// Copyright (c) The sdrf Authors
// SPDX-License-Identifier: Apache-2.0

#include <benchmark/benchmark.h>

#include "sdrf/losses.hpp"
#include "sdrf/renderer.hpp"

namespace {

using namespace sdrf;

VoxelField bench_scene() {
    VoxelField f = make_field({24, 24, 24}, {-1.0, -1.0, -1.0}, {1.0, 1.0, 1.0}, FieldInit::Blob, 8.0, 0.2);
    Pcg32 rng(9);
    for (double& c : f.color_raw) c = 0.5 * rng.next_gaussian();
    return f;
}

void BM_RenderImage(benchmark::State& state) {
    const VoxelField f = bench_scene();
    const int size = int(state.range(0));
    const Camera cam = orbit_camera(0.7, 0.3, 2.5, {0.0, 0.0, 0.0}, 0.7, size, size);
    SamplingConfig sampling;
    std::uint64_t seed = 0;
    for (auto _ : state) {
        benchmark::DoNotOptimize(render_image(f, cam, sampling, seed++, 1));
    }
}
BENCHMARK(BM_RenderImage)->Arg(16)->Arg(32)->Unit(benchmark::kMillisecond);

void BM_BackpropRender(benchmark::State& state) {
    const VoxelField f = bench_scene();
    const int size = int(state.range(0));
    const Camera cam = orbit_camera(0.7, 0.3, 2.5, {0.0, 0.0, 0.0}, 0.7, size, size);
    SamplingConfig sampling;
    const RenderResult res = render_image(f, cam, sampling, 1, 1);
    Image d_image(size, size, {1.0, -0.5, 0.25});
    std::vector<double> d_zvar(res.rays.size(), 0.01);
    for (auto _ : state) {
        benchmark::DoNotOptimize(backprop_render(f, res, d_image, d_zvar, 1));
    }
}
BENCHMARK(BM_BackpropRender)->Arg(16)->Arg(32)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
