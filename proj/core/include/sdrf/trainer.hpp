// Copyright (c) The sdrf Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "sdrf/diffusion.hpp"
#include "sdrf/field.hpp"
#include "sdrf/geometry.hpp"
#include "sdrf/losses.hpp"
#include "sdrf/renderer.hpp"
#include "sdrf/rng.hpp"

namespace sdrf {

enum class AnnealKind { Sqrt, Linear, Cosine, Random };

struct AnnealSchedule {
    AnnealKind kind = AnnealKind::Sqrt;
    double t_min = 0.02;
    double t_max = 0.98;
    long total_iter = 10000;
};

/// Deterministic kinds only; endpoints are exact (iter 0 -> t_max,
/// total_iter -> t_min for sqrt/linear/cosine).
double anneal_t(const AnnealSchedule& sched, long iter);
/// Also serves the random kind, which draws uniformly from [t_min, t_max].
double anneal_t(const AnnealSchedule& sched, long iter, Pcg32& rng);

/// Bias-corrected Adam moments for one parameter group.
struct AdamState {
    std::vector<double> m;
    std::vector<double> v;
    long step = 0;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;

    void resize(std::size_t n);
};

/// One Adam update in place. Throws on non-finite gradients, naming the group.
void adam_step(AdamState& state, std::vector<double>& params, const std::vector<double>& grads, double lr,
               const char* group_name = "params");

/// Uniform pose shell for training views; fixed mode pins a single view.
struct PoseConfig {
    bool fixed = false;
    double azimuth = 0.0;    // radians, used when fixed
    double elevation = 0.0;  // radians, used when fixed
    double azimuth_min = 0.0;
    double azimuth_max = 6.283185307179586;
    double elevation_min = -0.5235987755982988;  // -30 deg
    double elevation_max = 0.7853981633974483;   // +45 deg
    double radius = 2.5;
    Vec3 target{0.0, 0.0, 0.0};
    double vertical_fov = 0.6981317007977318;  // 40 deg
};

struct TrainConfig {
    long total_iter = 10000;
    int image_width = 64;
    int image_height = 64;
    std::uint64_t seed = 0;
    int threads = 1;

    PoseConfig pose;
    SamplingConfig sampling;
    NoiseSchedule schedule;
    AnnealKind anneal = AnnealKind::Sqrt;
    ScoreOracle oracle;
    DenoiseConfig denoise;
    LossWeights loss;
    int codec_factor = 4;

    double lr_field = 1e-2;
    double lr_background = 1e-3;
    double grad_clip = 10.0;  // global norm across all parameter groups; <= 0 disables

    long log_every = 1;
    long checkpoint_every = 0;  // 0: no intermediate checkpoints
};

Camera sample_pose(const PoseConfig& pose, int width, int height, Pcg32& rng);

/// Holds the optimizer state across iterations of Algorithm-style training:
/// pose draw, render, encode, anneal, noise, oracle denoise, loss, backprop,
/// Adam update.
class Trainer {
  public:
    Trainer(VoxelField field, const TrainConfig& config);

    LossBreakdown step();  // runs iteration `iter()` and advances

    const VoxelField& field() const { return field_; }
    VoxelField& field() { return field_; }
    const Image& last_render() const { return last_render_; }
    long iter() const { return iter_; }
    const TrainConfig& config() const { return config_; }

  private:
    VoxelField field_;
    TrainConfig config_;
    AnnealSchedule anneal_;
    AdamState adam_density_;
    AdamState adam_color_;
    AdamState adam_background_;
    Pcg32 rng_;
    LatentCodec codec_;
    Image last_render_;
    long iter_ = 0;
};

struct TrainHooks {
    // Called every config.log_every iterations (and on the last one).
    std::function<void(long iter, const LossBreakdown&, const Image& render)> on_log;
    // Called every config.checkpoint_every iterations when > 0.
    std::function<void(long iter, const VoxelField&)> on_checkpoint;
};

/// Runs config.total_iter steps and returns the per-iteration breakdowns.
std::vector<LossBreakdown> train(VoxelField& field, const TrainConfig& config, const TrainHooks& hooks = {});

}  // namespace sdrf
