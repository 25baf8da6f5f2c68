// Copyright (c) The sdrf Authors
// SPDX-License-Identifier: Apache-2.0
#include "sdrf/diffusion.hpp"

#include <cmath>
#include <stdexcept>

namespace sdrf {

namespace {

constexpr double kPi = 3.14159265358979323846;

void require_same_shape(const Image& a, const Image& b, const char* what) {
    if (a.width != b.width || a.height != b.height)
        throw std::invalid_argument(std::string("shape mismatch in ") + what);
}

}  // namespace

ScheduleValues schedule_at(const NoiseSchedule& sched, double t) {
    if (!(t >= sched.t_min && t <= sched.t_max))
        throw std::invalid_argument("timestep outside schedule range");
    ScheduleValues v;
    v.alpha = std::cos(kPi * t / 2.0);
    v.sigma = std::sin(kPi * t / 2.0);
    v.omega = sched.weight == WeightKind::SigmaSq ? v.sigma * v.sigma : 1.0;
    return v;
}

Image add_noise(const Image& z, const ScheduleValues& at, const Image& eps) {
    require_same_shape(z, eps, "add_noise");
    Image out = z;
    for (std::size_t i = 0; i < out.pixels.size(); ++i)
        out.pixels[i] = at.alpha * z.pixels[i] + at.sigma * eps.pixels[i];
    return out;
}

Image LatentCodec::encode(const Image& image) const {
    if (factor < 1 || image.width % factor != 0 || image.height % factor != 0)
        throw std::invalid_argument("image dimensions must be divisible by the codec factor");
    Image latent;
    latent.width = image.width / factor;
    latent.height = image.height / factor;
    latent.pixels.assign(std::size_t(latent.width) * latent.height, Vec3{});
    const double inv = 1.0 / (double(factor) * factor);
    for (int y = 0; y < image.height; ++y) {
        for (int x = 0; x < image.width; ++x) {
            latent.at(x / factor, y / factor) += inv * image.at(x, y);
        }
    }
    return latent;
}

Image LatentCodec::decode(const Image& latent) const {
    Image image;
    image.width = latent.width * factor;
    image.height = latent.height * factor;
    image.pixels.resize(std::size_t(image.width) * image.height);
    for (int y = 0; y < image.height; ++y) {
        for (int x = 0; x < image.width; ++x) {
            image.at(x, y) = latent.at(x / factor, y / factor);
        }
    }
    return image;
}

Image LatentCodec::encode_adjoint(const Image& latent_grad) const {
    Image image;
    image.width = latent_grad.width * factor;
    image.height = latent_grad.height * factor;
    image.pixels.resize(std::size_t(image.width) * image.height);
    const double inv = 1.0 / (double(factor) * factor);
    for (int y = 0; y < image.height; ++y) {
        for (int x = 0; x < image.width; ++x) {
            image.at(x, y) = inv * latent_grad.at(x / factor, y / factor);
        }
    }
    return image;
}

Image oracle_eps(const ScoreOracle& oracle, const Image& z_t, double t, const NoiseSchedule& sched) {
    const ScheduleValues at = schedule_at(sched, t);
    switch (oracle.kind) {
        case OracleKind::TargetLatent: {
            require_same_shape(z_t, oracle.target_latent, "target-latent oracle");
            Image eps = z_t;
            for (std::size_t i = 0; i < eps.pixels.size(); ++i)
                eps.pixels[i] = (z_t.pixels[i] - at.alpha * oracle.target_latent.pixels[i]) * (1.0 / at.sigma);
            return eps;
        }
        case OracleKind::GaussianPrior: {
            const double scale = at.sigma / (at.alpha * at.alpha * oracle.prior_variance + at.sigma * at.sigma);
            Image eps = z_t;
            for (auto& p : eps.pixels) p = scale * p;
            return eps;
        }
        case OracleKind::Guided: {
            ScoreOracle cond = oracle;
            cond.kind = OracleKind::TargetLatent;
            ScoreOracle uncond = oracle;
            uncond.kind = OracleKind::GaussianPrior;
            return cfg_blend(oracle_eps(cond, z_t, t, sched), oracle_eps(uncond, z_t, t, sched),
                             oracle.guidance_scale);
        }
    }
    throw std::logic_error("unknown oracle kind");
}

Image cfg_blend(const Image& eps_cond, const Image& eps_uncond, double s) {
    require_same_shape(eps_cond, eps_uncond, "cfg_blend");
    Image out = eps_uncond;
    for (std::size_t i = 0; i < out.pixels.size(); ++i)
        out.pixels[i] = eps_uncond.pixels[i] + s * (eps_cond.pixels[i] - eps_uncond.pixels[i]);
    return out;
}

Image estimate_latent_single(const Image& z_t, const Image& eps_hat, const ScheduleValues& at) {
    require_same_shape(z_t, eps_hat, "estimate_latent_single");
    Image out = z_t;
    const double inv_alpha = 1.0 / at.alpha;
    for (std::size_t i = 0; i < out.pixels.size(); ++i)
        out.pixels[i] = (z_t.pixels[i] - at.sigma * eps_hat.pixels[i]) * inv_alpha;
    return out;
}

Image estimate_latent_multi(const Image& z_t, double t, const ScoreOracle& oracle, const NoiseSchedule& sched,
                            const DenoiseConfig& cfg, Pcg32& rng) {
    if (cfg.steps < 1) throw std::invalid_argument("denoise steps must be >= 1");
    if (!(cfg.ratio > 0.0 && cfg.ratio < 1.0)) throw std::invalid_argument("denoise ratio must be in (0, 1)");

    Image z_cur = z_t;
    double t_cur = t;
    double ladder = t;
    for (int k = 1; k < cfg.steps; ++k) {
        ladder *= cfg.ratio;
        const double t_next = std::max(ladder, sched.t_min);
        const ScheduleValues cur = schedule_at(sched, t_cur);
        const ScheduleValues next = schedule_at(sched, t_next);
        const Image eps_hat = oracle_eps(oracle, z_cur, t_cur, sched);
        const Image z0 = estimate_latent_single(z_cur, eps_hat, cur);

        // DDIM transition t_cur -> t_next; eta interpolates between the
        // deterministic update and an ancestral-noise one.
        const double alpha_ratio = cur.alpha / next.alpha;
        const double noise_std = cfg.eta * (next.sigma / cur.sigma) *
                                 std::sqrt(std::max(0.0, 1.0 - alpha_ratio * alpha_ratio));
        const double dir_coeff = std::sqrt(std::max(0.0, next.sigma * next.sigma - noise_std * noise_std));
        Image z_next = z0;
        for (std::size_t i = 0; i < z_next.pixels.size(); ++i)
            z_next.pixels[i] = next.alpha * z0.pixels[i] + dir_coeff * eps_hat.pixels[i];
        if (cfg.eta > 0.0) {
            for (auto& p : z_next.pixels) {
                p.x += noise_std * rng.next_gaussian();
                p.y += noise_std * rng.next_gaussian();
                p.z += noise_std * rng.next_gaussian();
            }
        }
        z_cur = z_next;
        t_cur = t_next;
    }

    const ScheduleValues last = schedule_at(sched, t_cur);
    return estimate_latent_single(z_cur, oracle_eps(oracle, z_cur, t_cur, sched), last);
}

}  // namespace sdrf
