// Copyright (c) The sdrf Authors
// SPDX-License-Identifier: Apache-2.0
#include "sdrf/renderer.hpp"

#include <cmath>

#include "sdrf/parallel.hpp"

namespace sdrf {

namespace {

double delta_at(const RaySampleSet& s, std::size_t i) {
    return i + 1 < s.positions.size() ? s.positions[i + 1] - s.positions[i] : s.delta_cap;
}

}  // namespace

RenderOutput render(const RaySampleSet& samples, const Vec3& background) {
    const std::size_t n = samples.positions.size();
    RenderOutput out;
    out.positions = samples.positions;
    out.weights.resize(n);
    double trans = 1.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double att = std::exp(-samples.samples[i].density * delta_at(samples, i));
        const double w = trans * (1.0 - att);
        out.weights[i] = w;
        out.color_fg += w * samples.samples[i].color;
        out.opacity += w;
        trans *= att;
    }
    out.color = out.color_fg + (1.0 - out.opacity) * background;
    const DepthDisparity dd = depth_disparity(out);
    out.background = dd.background;
    out.depth = dd.depth;
    out.disparity = dd.disparity;
    out.zvar = z_variance(out);
    return out;
}

DepthDisparity depth_disparity(const RenderOutput& out, double opacity_floor) {
    DepthDisparity dd;
    if (out.opacity <= opacity_floor) return dd;
    double zw = 0.0;
    for (std::size_t i = 0; i < out.weights.size(); ++i) zw += out.positions[i] * out.weights[i];
    dd.background = false;
    dd.depth = zw / out.opacity;
    dd.disparity = dd.depth > 0.0 ? 1.0 / dd.depth : 0.0;
    return dd;
}

double z_variance(const RenderOutput& out, double opacity_floor) {
    if (out.opacity <= opacity_floor) return 0.0;
    double zw = 0.0;
    for (std::size_t i = 0; i < out.weights.size(); ++i) zw += out.positions[i] * out.weights[i];
    const double mu = zw / out.opacity;
    double acc = 0.0;
    for (std::size_t i = 0; i < out.weights.size(); ++i) {
        const double d = out.positions[i] - mu;
        acc += d * d * out.weights[i];
    }
    return acc / out.opacity;
}

RenderGrads render_grad(const RaySampleSet& samples, const Vec3& background, const RenderUpstream& upstream,
                        double opacity_floor) {
    const std::size_t n = samples.positions.size();
    RenderGrads g;
    g.d_density.assign(n, 0.0);
    g.d_color.assign(n, Vec3{});

    // Forward quantities: weights, post-sample transmittances, depth stats.
    std::vector<double> w(n), trans_after(n);
    double trans = 1.0, opacity = 0.0, zw = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double att = std::exp(-samples.samples[i].density * delta_at(samples, i));
        w[i] = trans * (1.0 - att);
        trans *= att;
        trans_after[i] = trans;
        opacity += w[i];
        zw += samples.positions[i] * w[i];
    }
    g.d_background = (1.0 - opacity) * upstream.d_color;
    if (n == 0) return g;

    const bool fg = opacity > opacity_floor;
    double mu = 0.0, zvar = 0.0;
    if (fg) {
        mu = zw / opacity;
        for (std::size_t i = 0; i < n; ++i) {
            const double d = samples.positions[i] - mu;
            zvar += d * d * w[i];
        }
        zvar /= opacity;
    }

    // dL/dweight_k from every output that consumes the weights.
    std::vector<double> dw(n, 0.0);
    for (std::size_t k = 0; k < n; ++k) {
        dw[k] = dot(upstream.d_color, samples.samples[k].color - background) + upstream.d_opacity;
        if (fg) {
            const double zk = samples.positions[k] - mu;
            const double dmu = zk / opacity;
            dw[k] += upstream.d_depth * dmu;
            if (mu > 0.0) dw[k] -= upstream.d_disparity * dmu / (mu * mu);
            dw[k] += upstream.d_zvar * (zk * zk - zvar) / opacity;
        }
        g.d_color[k] = w[k] * upstream.d_color;
    }

    // weight_i depends on density_k as: i == k via its own opacity term,
    // i > k via transmittance. Suffix sums make the chain O(N).
    double suffix = 0.0;  // sum over i > k of dw[i] * w[i]
    for (std::size_t r = n; r-- > 0;) {
        g.d_density[r] = delta_at(samples, r) * (trans_after[r] * dw[r] - suffix);
        suffix += dw[r] * w[r];
    }
    return g;
}

namespace {

RaySampleSet query_along(const VoxelField& field, const Ray& ray, const std::vector<double>& positions,
                         double delta_cap) {
    RaySampleSet s;
    s.delta_cap = delta_cap;
    s.positions = positions;
    s.samples.reserve(positions.size());
    for (double t : positions) s.samples.push_back(field.query(ray.at(t)));
    return s;
}

void render_one_ray(const VoxelField& field, const Vec3& bg, const SamplingConfig& config, std::uint64_t seed,
                    std::size_t ray_index, RayRecord& rec) {
    rec.samples.delta_cap = config.delta_cap;
    Ray clipped = rec.ray;
    rec.hit = clip_to_aabb(clipped, field.bbox_min, field.bbox_max) && clipped.t_far - clipped.t_near > 1e-12;
    if (!rec.hit) {
        rec.out = render(rec.samples, bg);
        return;
    }

    Pcg32 rng(mix_seed(seed, std::uint64_t(ray_index)));
    const std::vector<double> coarse_zs = stratified_sample(clipped, config.n_coarse, rng, config.jitter);
    const RaySampleSet coarse = query_along(field, rec.ray, coarse_zs, config.delta_cap);
    const RenderOutput coarse_out = render(coarse, bg);

    WeightPdf pdf;
    pdf.bin_edges.resize(std::size_t(config.n_coarse) + 1);
    const double span = clipped.t_far - clipped.t_near;
    for (int j = 0; j <= config.n_coarse; ++j)
        pdf.bin_edges[std::size_t(j)] = clipped.t_near + span * j / config.n_coarse;
    pdf.weights.resize(std::size_t(config.n_coarse));
    for (int j = 0; j < config.n_coarse; ++j)
        pdf.weights[std::size_t(j)] = coarse_out.weights[std::size_t(j)] + config.weight_floor;
    if (config.kernel_smooth) pdf = kernel_smooth(pdf, config.kernel);

    ImportanceResult fine;
    if (config.jitter) {
        fine = importance_sample(pdf, config.n_fine, rng);
    } else {
        std::vector<double> ladder(std::size_t(config.n_fine));
        for (int j = 0; j < config.n_fine; ++j) ladder[std::size_t(j)] = (j + 0.5) / config.n_fine;
        fine = importance_sample_with(pdf, ladder);
    }

    const std::vector<double> merged = merge_sorted(coarse_zs, fine.positions);
    rec.samples = query_along(field, rec.ray, merged, config.delta_cap);
    rec.out = render(rec.samples, bg);
}

}  // namespace

RenderResult render_image(const VoxelField& field, const Camera& camera, const SamplingConfig& config,
                          std::uint64_t seed, int threads) {
    RenderResult res;
    res.image.width = camera.image_width;
    res.image.height = camera.image_height;
    res.image.pixels.resize(std::size_t(camera.image_width) * camera.image_height);
    const std::vector<Ray> rays = cast_rays(camera, config.t_near, config.t_far);
    res.rays.resize(rays.size());
    const Vec3 bg = field.background_color();

    parallel_for(rays.size(), threads, [&](int, std::size_t begin, std::size_t end) {
        for (std::size_t i = begin; i < end; ++i) {
            res.rays[i].ray = rays[i];
            render_one_ray(field, bg, config, seed, i, res.rays[i]);
            res.image.pixels[i] = res.rays[i].out.color;
        }
    });
    return res;
}

RenderResult rerender_at_positions(const VoxelField& field, const RenderResult& prev, int threads) {
    RenderResult res;
    res.image = prev.image;
    res.rays.resize(prev.rays.size());
    const Vec3 bg = field.background_color();

    parallel_for(prev.rays.size(), threads, [&](int, std::size_t begin, std::size_t end) {
        for (std::size_t i = begin; i < end; ++i) {
            const RayRecord& src = prev.rays[i];
            RayRecord& dst = res.rays[i];
            dst.ray = src.ray;
            dst.hit = src.hit;
            dst.samples = query_along(field, src.ray, src.samples.positions, src.samples.delta_cap);
            dst.out = render(dst.samples, bg);
            res.image.pixels[i] = dst.out.color;
        }
    });
    return res;
}

}  // namespace sdrf
