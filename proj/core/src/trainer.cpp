// Copyright (c) The sdrf Authors
// SPDX-License-Identifier: Apache-2.0
#include "sdrf/trainer.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace sdrf {

double anneal_t(const AnnealSchedule& sched, long iter) {
    if (iter < 0 || iter > sched.total_iter) throw std::invalid_argument("anneal iter out of range");
    if (sched.kind == AnnealKind::Random)
        throw std::invalid_argument("random annealing needs a random stream");
    if (iter == 0) return sched.t_max;
    if (iter == sched.total_iter) return sched.t_min;
    const double u = double(iter) / double(sched.total_iter);
    const double span = sched.t_max - sched.t_min;
    switch (sched.kind) {
        case AnnealKind::Sqrt:
            return sched.t_max - span * std::sqrt(u);
        case AnnealKind::Linear:
            return sched.t_max - span * u;
        case AnnealKind::Cosine:
            return sched.t_min + span * (1.0 + std::cos(3.14159265358979323846 * u)) / 2.0;
        case AnnealKind::Random:
            break;
    }
    throw std::logic_error("unknown anneal kind");
}

double anneal_t(const AnnealSchedule& sched, long iter, Pcg32& rng) {
    if (sched.kind != AnnealKind::Random) return anneal_t(sched, iter);
    if (iter < 0 || iter > sched.total_iter) throw std::invalid_argument("anneal iter out of range");
    return sched.t_min + (sched.t_max - sched.t_min) * rng.next_double();
}

void AdamState::resize(std::size_t n) {
    m.assign(n, 0.0);
    v.assign(n, 0.0);
    step = 0;
}

void adam_step(AdamState& state, std::vector<double>& params, const std::vector<double>& grads, double lr,
               const char* group_name) {
    if (params.size() != grads.size() || params.size() != state.m.size())
        throw std::invalid_argument(std::string("adam shape mismatch for ") + group_name);
    for (double g : grads) {
        if (!std::isfinite(g))
            throw std::runtime_error(std::string("non-finite gradient in ") + group_name);
    }
    state.step += 1;
    const double bc1 = 1.0 - std::pow(state.beta1, double(state.step));
    const double bc2 = 1.0 - std::pow(state.beta2, double(state.step));
    for (std::size_t i = 0; i < params.size(); ++i) {
        const double g = grads[i];
        state.m[i] = state.beta1 * state.m[i] + (1.0 - state.beta1) * g;
        state.v[i] = state.beta2 * state.v[i] + (1.0 - state.beta2) * g * g;
        const double mhat = state.m[i] / bc1;
        const double vhat = state.v[i] / bc2;
        params[i] -= lr * mhat / (std::sqrt(vhat) + state.eps);
    }
}

Camera sample_pose(const PoseConfig& pose, int width, int height, Pcg32& rng) {
    double az = pose.azimuth;
    double el = pose.elevation;
    if (!pose.fixed) {
        az = pose.azimuth_min + (pose.azimuth_max - pose.azimuth_min) * rng.next_double();
        el = pose.elevation_min + (pose.elevation_max - pose.elevation_min) * rng.next_double();
    }
    return orbit_camera(az, el, pose.radius, pose.target, pose.vertical_fov, width, height);
}

Trainer::Trainer(VoxelField field, const TrainConfig& config)
    : field_(std::move(field)), config_(config), rng_(config.seed) {
    anneal_.kind = config_.anneal;
    anneal_.t_min = config_.schedule.t_min;
    anneal_.t_max = config_.schedule.t_max;
    anneal_.total_iter = std::max(1L, config_.total_iter);
    adam_density_.resize(field_.vertex_count());
    adam_color_.resize(field_.vertex_count() * 3);
    adam_background_.resize(3);
    codec_.factor = config_.codec_factor;
}

namespace {

void clip_global_norm(FieldGradients& g, double max_norm) {
    if (max_norm <= 0.0) return;
    double sq = 0.0;
    for (double v : g.density_raw) sq += v * v;
    for (double v : g.color_raw) sq += v * v;
    sq += g.background_raw.norm_sq();
    const double norm = std::sqrt(sq);
    if (norm <= max_norm) return;
    const double scale = max_norm / norm;
    for (double& v : g.density_raw) v *= scale;
    for (double& v : g.color_raw) v *= scale;
    g.background_raw = scale * g.background_raw;
}

}  // namespace

LossBreakdown Trainer::step() {
    const Camera cam = sample_pose(config_.pose, config_.image_width, config_.image_height, rng_);
    const double t = anneal_t(anneal_, iter_, rng_);
    const ScheduleValues at = schedule_at(config_.schedule, t);

    const RenderResult render =
        render_image(field_, cam, config_.sampling, mix_seed(config_.seed, std::uint64_t(iter_)), config_.threads);
    const Image z = codec_.encode(render.image);

    Image eps = z;
    for (auto& p : eps.pixels) {
        p.x = rng_.next_gaussian();
        p.y = rng_.next_gaussian();
        p.z = rng_.next_gaussian();
    }
    const Image z_t = add_noise(z, at, eps);

    Image z_hat;
    if (config_.denoise.steps == 1) {
        z_hat = estimate_latent_single(z_t, oracle_eps(config_.oracle, z_t, t, config_.schedule), at);
    } else {
        z_hat = estimate_latent_multi(z_t, t, config_.oracle, config_.schedule, config_.denoise, rng_);
    }
    const Image x_hat = codec_.decode(z_hat);

    TotalLoss tl =
        total_loss_and_grads(field_, render, z, z_hat, x_hat, at.omega, t, config_.loss, codec_, config_.threads);
    clip_global_norm(tl.grads, config_.grad_clip);

    adam_step(adam_density_, field_.density_raw, tl.grads.density_raw, config_.lr_field, "field density");
    adam_step(adam_color_, field_.color_raw, tl.grads.color_raw, config_.lr_field, "field color");
    std::vector<double> bg_params{field_.background_raw.x, field_.background_raw.y, field_.background_raw.z};
    const std::vector<double> bg_grads{tl.grads.background_raw.x, tl.grads.background_raw.y,
                                       tl.grads.background_raw.z};
    adam_step(adam_background_, bg_params, bg_grads, config_.lr_background, "background");
    field_.background_raw = Vec3{bg_params[0], bg_params[1], bg_params[2]};

    last_render_ = render.image;
    ++iter_;
    return tl.breakdown;
}

std::vector<LossBreakdown> train(VoxelField& field, const TrainConfig& config, const TrainHooks& hooks) {
    Trainer tr(std::move(field), config);
    std::vector<LossBreakdown> log;
    log.reserve(std::size_t(std::max(0L, config.total_iter)));
    for (long i = 0; i < config.total_iter; ++i) {
        log.push_back(tr.step());
        const bool last = i == config.total_iter - 1;
        if (hooks.on_log && config.log_every > 0 && (i % config.log_every == 0 || last))
            hooks.on_log(i, log.back(), tr.last_render());
        if (hooks.on_checkpoint && config.checkpoint_every > 0 && (i + 1) % config.checkpoint_every == 0)
            hooks.on_checkpoint(i + 1, tr.field());
    }
    field = std::move(tr.field());
    return log;
}

}  // namespace sdrf
