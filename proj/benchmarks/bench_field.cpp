// Copyright (c) The sdrf Authors
// SPDX-License-Identifier: Apache-2.0

#include <benchmark/benchmark.h>

#include <filesystem>
#include <vector>

#include "sdrf/field.hpp"
#include "sdrf/rng.hpp"

namespace {

using namespace sdrf;

VoxelField bench_field(int res) {
    return make_field({res, res, res}, {-1.0, -1.0, -1.0}, {1.0, 1.0, 1.0}, FieldInit::Blob, 5.0, 0.25);
}

std::vector<Vec3> interior_points(std::size_t n) {
    Pcg32 rng(17);
    std::vector<Vec3> pts(n);
    for (Vec3& p : pts)
        p = {1.8 * rng.next_double() - 0.9, 1.8 * rng.next_double() - 0.9, 1.8 * rng.next_double() - 0.9};
    return pts;
}

void BM_FieldQuery(benchmark::State& state) {
    const VoxelField f = bench_field(int(state.range(0)));
    const std::vector<Vec3> pts = interior_points(1024);
    std::size_t i = 0;
    for (auto _ : state) {
        benchmark::DoNotOptimize(f.query(pts[i++ & 1023]));
    }
}
BENCHMARK(BM_FieldQuery)->Arg(16)->Arg(32)->Arg(64);

void BM_FieldQueryGrad(benchmark::State& state) {
    const VoxelField f = bench_field(int(state.range(0)));
    const std::vector<Vec3> pts = interior_points(1024);
    FieldGradients grads;
    grads.resize_like(f.vertex_count());
    std::size_t i = 0;
    for (auto _ : state) {
        f.query_grad(pts[i++ & 1023], 0.5, {0.1, 0.2, 0.3}, grads);
        benchmark::DoNotOptimize(grads);
    }
}
BENCHMARK(BM_FieldQueryGrad)->Arg(16)->Arg(32)->Arg(64);

void BM_FieldSaveLoad(benchmark::State& state) {
    const VoxelField f = bench_field(32);
    const auto path = std::filesystem::temp_directory_path() / "sdrf_bench_field.sfld";
    for (auto _ : state) {
        save_field(f, path);
        benchmark::DoNotOptimize(load_field(path));
    }
    std::filesystem::remove(path);
}
BENCHMARK(BM_FieldSaveLoad);

}  // namespace

BENCHMARK_MAIN();
