// Copyright (c) The sdrf Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "sdrf/image.hpp"
#include "sdrf/rng.hpp"

namespace sdrf {

enum class WeightKind {
    SigmaSq,  // omega(t) = sigma_t^2
    One,
};

/// Variance-preserving cosine schedule on continuous t:
/// alpha(t) = cos(pi t / 2), sigma(t) = sin(pi t / 2).
struct NoiseSchedule {
    double t_min = 0.02;
    double t_max = 0.98;
    WeightKind weight = WeightKind::SigmaSq;
};

struct ScheduleValues {
    double alpha = 1.0;
    double sigma = 0.0;
    double omega = 0.0;
};

/// Throws std::invalid_argument when t is outside [t_min, t_max].
ScheduleValues schedule_at(const NoiseSchedule& sched, double t);

/// z_t = alpha_t z + sigma_t eps, elementwise.
Image add_noise(const Image& z, const ScheduleValues& at, const Image& eps);

/// Stand-in for the latent autoencoder: f x f block-average pooling down,
/// nearest-neighbor up. Linear, so the encode gradient is an exact block
/// spread of the upstream values divided by f^2.
struct LatentCodec {
    int factor = 4;

    Image encode(const Image& image) const;
    Image decode(const Image& latent) const;
    Image encode_adjoint(const Image& latent_grad) const;
};

enum class OracleKind {
    TargetLatent,   // knows the clean latent z*; eps_hat = (z_t - alpha z*) / sigma
    GaussianPrior,  // exact denoiser for z ~ N(0, v0 I); eps_hat = sigma z_t / (alpha^2 v0 + sigma^2)
    Guided,         // cfg blend: uncond = gaussian prior, cond = target latent
};

struct ScoreOracle {
    OracleKind kind = OracleKind::TargetLatent;
    Image target_latent;          // z*, required by TargetLatent and Guided
    double prior_variance = 1.0;  // v0
    double guidance_scale = 1.0;  // s, used by Guided
};

Image oracle_eps(const ScoreOracle& oracle, const Image& z_t, double t, const NoiseSchedule& sched);

/// eps_uncond + s (eps_cond - eps_uncond).
Image cfg_blend(const Image& eps_cond, const Image& eps_uncond, double s);

/// z_hat = (z_t - sigma_t eps_hat) / alpha_t.
Image estimate_latent_single(const Image& z_t, const Image& eps_hat, const ScheduleValues& at);

struct DenoiseConfig {
    int steps = 1;
    double eta = 1.0;    // scales the stochastic part of each DDIM step
    double ratio = 0.25; // geometric timestep decay between steps
};

/// DDIM-style multi-step denoise on the ladder t_k = ratio^k t, clamped to
/// the schedule's t_min, ending with a single-step clean estimate. steps = 1
/// is bitwise identical to estimate_latent_single on the oracle's output.
/// Fresh noise is drawn per step only when eta > 0.
Image estimate_latent_multi(const Image& z_t, double t, const ScoreOracle& oracle, const NoiseSchedule& sched,
                            const DenoiseConfig& cfg, Pcg32& rng);

}  // namespace sdrf
