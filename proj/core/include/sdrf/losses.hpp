// Copyright (c) The sdrf Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <vector>

#include "sdrf/diffusion.hpp"
#include "sdrf/field.hpp"
#include "sdrf/image.hpp"
#include "sdrf/renderer.hpp"

namespace sdrf {

/// Opacity threshold of the foreground gate on the z-variance loss. The gate
/// is a hard indicator: no gradient flows through it.
constexpr double kForegroundOpacity = 0.5;

enum class LossSpace {
    LatentImage,  // omega (|z - z_hat|^2 + lambda_rgb |x - x_hat|^2)
    LatentOnly,
    ImageOnly,
};

struct LossWeights {
    double lambda_rgb = 0.1;
    double lambda_zvar = 3.0;
    LossSpace space = LossSpace::LatentImage;
};

/// Raw residual norms plus the weighted total. sds_latent and sds_image are
/// stored before weighting, so
/// total = omega (sds_latent + lambda_rgb sds_image) + lambda_zvar zvar.
struct LossBreakdown {
    double sds_latent = 0.0;
    double sds_image = 0.0;
    double zvar = 0.0;
    double total = 0.0;
    double t_used = 0.0;
    double foreground_ray_fraction = 0.0;
};

struct SdsLatentLoss {
    double value = 0.0;
    Image d_z;
};
/// omega |z - z_hat|^2 with z_hat held constant; gradient 2 omega (z - z_hat).
SdsLatentLoss sds_latent_loss(const Image& z, const Image& z_hat, double omega_t);

struct SdsPlusLoss {
    double value = 0.0;
    Image d_z;
    Image d_x;
};
/// omega (|z - z_hat|^2 + lambda_rgb |x - x_hat|^2), targets constant.
SdsPlusLoss sds_plus_loss(const Image& z, const Image& z_hat, const Image& x, const Image& x_hat, double omega_t,
                          double lambda_rgb);

struct ZvarLoss {
    double value = 0.0;               // mean over rays of gate * zvar
    std::vector<double> d_zvar;       // per-ray gradient on zvar (gate / count)
    double foreground_fraction = 0.0;
};
ZvarLoss zvar_loss(const std::vector<RenderOutput>& rays);

/// Pushes per-pixel color gradients and per-ray z-variance gradients through
/// the renderer into field parameter space (raw units). Rays accumulate into
/// per-worker buffers that are reduced in worker order.
FieldGradients backprop_render(const VoxelField& field, const RenderResult& render, const Image& d_image,
                               const std::vector<double>& d_zvar_per_ray, int threads = 1);

struct TotalLoss {
    LossBreakdown breakdown;
    FieldGradients grads;
};

/// Full objective on one rendered batch. z must be codec.encode(render.image);
/// z_hat and x_hat are constants (no gradient flows into the oracle or the
/// decoder). The z-variance gate uses each ray's current opacity.
TotalLoss total_loss_and_grads(const VoxelField& field, const RenderResult& render, const Image& z,
                               const Image& z_hat, const Image& x_hat, double omega_t, double t,
                               const LossWeights& weights, const LatentCodec& codec, int threads = 1);

}  // namespace sdrf
