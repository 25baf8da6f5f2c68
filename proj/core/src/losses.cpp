// Copyright (c) The sdrf Authors
// SPDX-License-Identifier: Apache-2.0
#include "sdrf/losses.hpp"

#include <stdexcept>

#include "sdrf/parallel.hpp"

namespace sdrf {

SdsLatentLoss sds_latent_loss(const Image& z, const Image& z_hat, double omega_t) {
    if (z.width != z_hat.width || z.height != z_hat.height)
        throw std::invalid_argument("latent shape mismatch in sds_latent_loss");
    SdsLatentLoss out;
    out.d_z = z;
    for (std::size_t i = 0; i < z.pixels.size(); ++i) {
        const Vec3 r = z.pixels[i] - z_hat.pixels[i];
        out.value += r.norm_sq();
        out.d_z.pixels[i] = 2.0 * omega_t * r;
    }
    out.value *= omega_t;
    return out;
}

SdsPlusLoss sds_plus_loss(const Image& z, const Image& z_hat, const Image& x, const Image& x_hat, double omega_t,
                          double lambda_rgb) {
    if (x.width != x_hat.width || x.height != x_hat.height)
        throw std::invalid_argument("image shape mismatch in sds_plus_loss");
    SdsPlusLoss out;
    const SdsLatentLoss latent = sds_latent_loss(z, z_hat, omega_t);
    out.d_z = latent.d_z;
    out.d_x = x;
    double img = 0.0;
    for (std::size_t i = 0; i < x.pixels.size(); ++i) {
        const Vec3 r = x.pixels[i] - x_hat.pixels[i];
        img += r.norm_sq();
        out.d_x.pixels[i] = 2.0 * omega_t * lambda_rgb * r;
    }
    out.value = latent.value + omega_t * lambda_rgb * img;
    return out;
}

ZvarLoss zvar_loss(const std::vector<RenderOutput>& rays) {
    if (rays.empty()) throw std::invalid_argument("zvar_loss needs a non-empty batch");
    ZvarLoss out;
    out.d_zvar.assign(rays.size(), 0.0);
    std::size_t fg = 0;
    for (std::size_t i = 0; i < rays.size(); ++i) {
        if (rays[i].opacity > kForegroundOpacity) {
            ++fg;
            out.value += rays[i].zvar;
            out.d_zvar[i] = 1.0 / double(rays.size());
        }
    }
    out.value /= double(rays.size());
    out.foreground_fraction = double(fg) / double(rays.size());
    return out;
}

FieldGradients backprop_render(const VoxelField& field, const RenderResult& render, const Image& d_image,
                               const std::vector<double>& d_zvar_per_ray, int threads) {
    if (render.rays.size() != d_image.pixels.size() ||
        (!d_zvar_per_ray.empty() && d_zvar_per_ray.size() != render.rays.size()))
        throw std::invalid_argument("batch shape mismatch in backprop_render");

    const Vec3 bg = field.background_color();
    const std::size_t workers = std::size_t(std::max(1, threads));
    std::vector<FieldGradients> buffers(workers);

    parallel_for(render.rays.size(), int(workers), [&](int worker, std::size_t begin, std::size_t end) {
        FieldGradients& acc = buffers[std::size_t(worker)];
        acc.resize_like(field.vertex_count());
        for (std::size_t i = begin; i < end; ++i) {
            const RayRecord& rec = render.rays[i];
            RenderUpstream up;
            up.d_color = d_image.pixels[i];
            up.d_zvar = d_zvar_per_ray.empty() ? 0.0 : d_zvar_per_ray[i];
            const RenderGrads rg = render_grad(rec.samples, bg, up);
            for (std::size_t s = 0; s < rec.samples.positions.size(); ++s) {
                field.query_grad(rec.ray.at(rec.samples.positions[s]), rg.d_density[s], rg.d_color[s], acc);
            }
            acc.background_raw += rg.d_background;  // still in activated space
        }
    });

    FieldGradients total;
    total.resize_like(field.vertex_count());
    for (const FieldGradients& buf : buffers) {
        if (!buf.density_raw.empty()) total.add(buf);
    }
    total.background_raw = Vec3{
        total.background_raw.x * sigmoid_derivative(field.background_raw.x),
        total.background_raw.y * sigmoid_derivative(field.background_raw.y),
        total.background_raw.z * sigmoid_derivative(field.background_raw.z),
    };
    return total;
}

TotalLoss total_loss_and_grads(const VoxelField& field, const RenderResult& render, const Image& z,
                               const Image& z_hat, const Image& x_hat, double omega_t, double t,
                               const LossWeights& weights, const LatentCodec& codec, int threads) {
    const Image& x = render.image;
    if (x.width != x_hat.width || x.height != x_hat.height)
        throw std::invalid_argument("decoded target shape mismatch in total_loss_and_grads");
    if (z.width * codec.factor != x.width || z.height * codec.factor != x.height)
        throw std::invalid_argument("latent shape mismatch in total_loss_and_grads");

    TotalLoss out;
    out.breakdown.t_used = t;

    const bool use_latent = weights.space != LossSpace::ImageOnly;
    const bool use_image = weights.space != LossSpace::LatentOnly;

    Image d_z = z;
    for (std::size_t i = 0; i < z.pixels.size(); ++i) {
        const Vec3 r = z.pixels[i] - z_hat.pixels[i];
        out.breakdown.sds_latent += r.norm_sq();
        d_z.pixels[i] = use_latent ? 2.0 * omega_t * r : Vec3{};
    }
    Image d_x = codec.encode_adjoint(d_z);
    for (std::size_t i = 0; i < x.pixels.size(); ++i) {
        const Vec3 r = x.pixels[i] - x_hat.pixels[i];
        out.breakdown.sds_image += r.norm_sq();
        if (use_image) d_x.pixels[i] += 2.0 * omega_t * weights.lambda_rgb * r;
    }

    std::vector<double> d_zvar(render.rays.size(), 0.0);
    std::size_t fg = 0;
    for (std::size_t i = 0; i < render.rays.size(); ++i) {
        const RenderOutput& ro = render.rays[i].out;
        if (ro.opacity > kForegroundOpacity) {
            ++fg;
            out.breakdown.zvar += ro.zvar;
            d_zvar[i] = weights.lambda_zvar / double(render.rays.size());
        }
    }
    out.breakdown.zvar /= double(render.rays.size());
    out.breakdown.foreground_ray_fraction = double(fg) / double(render.rays.size());

    out.breakdown.total = weights.lambda_zvar * out.breakdown.zvar;
    if (use_latent) out.breakdown.total += omega_t * out.breakdown.sds_latent;
    if (use_image) out.breakdown.total += omega_t * weights.lambda_rgb * out.breakdown.sds_image;

    out.grads = backprop_render(field, render, d_x, d_zvar, threads);
    return out;
}

}  // namespace sdrf
