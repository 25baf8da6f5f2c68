// Copyright (c) The sdrf Authors
// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <vector>

#include <doctest.h>

#include "sdrf/diffusion.hpp"
#include "sdrf/field.hpp"
#include "sdrf/geometry.hpp"
#include "sdrf/losses.hpp"
#include "sdrf/renderer.hpp"
#include "sdrf/rng.hpp"

#include "support/fd_check.hpp"
#include "support/test_scenes.hpp"

using namespace sdrf;

namespace {

Image one_pixel(const Vec3& v) { return Image(1, 1, v); }

RenderOutput ray_with(double opacity, double zvar) {
    RenderOutput out;
    out.opacity = opacity;
    out.zvar = zvar;
    out.background = opacity <= kOpacityFloor;
    return out;
}

/// Dense 4^3 test field: every 8x8 ray is solidly foreground, so the
/// z-variance gate has a wide margin for finite-difference probing.
VoxelField dense_field(std::uint64_t seed) {
    VoxelField f = make_field({4, 4, 4}, Vec3{-1, -1, -1}, Vec3{1, 1, 1}, FieldInit::Empty);
    Pcg32 rng(seed);
    const double base = inv_softplus(1.2);
    for (double& v : f.density_raw) v = base + 0.6 * (rng.next_double() - 0.5);
    for (double& v : f.color_raw) v = 2.0 * rng.next_double() - 1.0;
    f.background_raw = Vec3{0.2, -0.1, 0.4};
    return f;
}

Camera narrow_camera(int size) {
    Camera cam = orbit_camera(0.6, 0.25, 2.5, Vec3{}, 0.5, size, size);
    return cam;
}

}  // namespace

TEST_CASE("latent sds loss value and gradient") {
    SUBCASE("zero residual") {
        const Image z = one_pixel(Vec3{0.3, -0.2, 0.9});
        const SdsLatentLoss l = sds_latent_loss(z, z, 0.7);
        CHECK(l.value == 0.0);
        CHECK(l.d_z.pixels[0].norm() == 0.0);
    }
    SUBCASE("unit scalar residual") {
        const SdsLatentLoss l = sds_latent_loss(one_pixel(Vec3{1, 0, 0}), one_pixel(Vec3{}), 1.0);
        CHECK(l.value == doctest::Approx(1.0).epsilon(1e-15));
        CHECK(l.d_z.pixels[0].x == doctest::Approx(2.0).epsilon(1e-15));
        CHECK(l.d_z.pixels[0].y == 0.0);
    }
    SUBCASE("omega scales value and gradient") {
        const SdsLatentLoss l = sds_latent_loss(one_pixel(Vec3{1, 0, 0}), one_pixel(Vec3{}), 0.25);
        CHECK(l.value == doctest::Approx(0.25).epsilon(1e-15));
        CHECK(l.d_z.pixels[0].x == doctest::Approx(0.5).epsilon(1e-15));
    }
}

TEST_CASE("latent residual gradient is the noise residual direction") {
    const NoiseSchedule sched;
    Pcg32 rng(21);
    for (int i = 0; i < 200; ++i) {
        const double t = sched.t_min + (sched.t_max - sched.t_min) * rng.next_double();
        const ScheduleValues at = schedule_at(sched, t);
        const Image z = one_pixel(Vec3{rng.next_gaussian(), rng.next_gaussian(), rng.next_gaussian()});
        const Image eps = one_pixel(Vec3{rng.next_gaussian(), rng.next_gaussian(), rng.next_gaussian()});
        const Image eps_hat = one_pixel(Vec3{rng.next_gaussian(), rng.next_gaussian(), rng.next_gaussian()});
        const Image z_t = add_noise(z, at, eps);
        const Image z_hat = estimate_latent_single(z_t, eps_hat, at);

        // z - z_hat = (sigma/alpha)(eps_hat - eps), so the squared-residual
        // gradient 2 omega (z - z_hat) carries the classic noise-residual
        // direction omega (eps_hat - eps) up to the factor alpha / (2 sigma).
        const SdsLatentLoss l = sds_latent_loss(z, z_hat, at.omega);
        const Vec3 classic = at.omega * (eps_hat.pixels[0] - eps.pixels[0]);
        const Vec3 scaled = (at.alpha / (2.0 * at.sigma)) * l.d_z.pixels[0];
        const double scale = std::max(classic.norm(), scaled.norm());
        if (scale > 1e-12) CHECK((classic - scaled).norm() / scale < 1e-10);
    }
}

TEST_CASE("sds plus adds the weighted image residual") {
    const Image z = one_pixel(Vec3{2, 0, 0});
    const Image z_hat = one_pixel(Vec3{});
    const Image x = one_pixel(Vec3{3, 1, 0});
    const Image x_hat = one_pixel(Vec3{});
    const SdsPlusLoss l = sds_plus_loss(z, z_hat, x, x_hat, 1.0, 0.1);
    CHECK(l.value == doctest::Approx(5.0).epsilon(1e-15));
    CHECK(l.d_z.pixels[0].x == doctest::Approx(4.0).epsilon(1e-15));
    CHECK(l.d_x.pixels[0].x == doctest::Approx(0.6).epsilon(1e-15));
    CHECK(l.d_x.pixels[0].y == doctest::Approx(0.2).epsilon(1e-15));

    const SdsPlusLoss reduced = sds_plus_loss(z, z_hat, x, x_hat, 0.5, 0.0);
    const SdsLatentLoss latent = sds_latent_loss(z, z_hat, 0.5);
    CHECK(reduced.value == latent.value);
    CHECK(reduced.d_x.pixels[0].norm() == 0.0);

    const SdsPlusLoss zero = sds_plus_loss(z, z, x, x, 1.0, 0.1);
    CHECK(zero.value == 0.0);
}

TEST_CASE("z-variance loss gates on opacity") {
    SUBCASE("all rays below the gate") {
        const std::vector<RenderOutput> rays{ray_with(0.4, 1.0), ray_with(0.4, 9.0)};
        const ZvarLoss l = zvar_loss(rays);
        CHECK(l.value == 0.0);
        CHECK(l.foreground_fraction == 0.0);
        CHECK(l.d_zvar == std::vector<double>{0.0, 0.0});
    }
    SUBCASE("opaque Dirac ray") {
        const ZvarLoss l = zvar_loss({ray_with(1.0, 0.0)});
        CHECK(l.value == 0.0);
        CHECK(l.foreground_fraction == 1.0);
        CHECK(l.d_zvar == std::vector<double>{1.0});
    }
    SUBCASE("mixed batch averages over all rays") {
        const ZvarLoss l = zvar_loss({ray_with(0.9, 1.0), ray_with(0.3, 5.0)});
        CHECK(l.value == doctest::Approx(0.5).epsilon(1e-15));
        CHECK(l.foreground_fraction == 0.5);
        CHECK(l.d_zvar[0] == doctest::Approx(0.5).epsilon(1e-15));
        CHECK(l.d_zvar[1] == 0.0);
    }
    SUBCASE("zero-opacity rays only dilute the mean") {
        const ZvarLoss l = zvar_loss({ray_with(0.9, 1.0), ray_with(0.0, 0.0), ray_with(0.0, 0.0)});
        CHECK(l.value == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
    }
}

TEST_CASE("total loss breakdown satisfies the weighting identity") {
    const VoxelField field = dense_field(31);
    const Camera cam = narrow_camera(8);
    const RenderResult render = render_image(field, cam, testsup::reference_sampling(true), 17);
    const LatentCodec codec{4};
    const Image z = codec.encode(render.image);
    Pcg32 rng(55);
    Image z_hat = z;
    for (Vec3& p : z_hat.pixels) p += Vec3{0.2 * rng.next_gaussian(), 0.2 * rng.next_gaussian(), 0.2 * rng.next_gaussian()};
    const Image x_hat = codec.decode(z_hat);

    const double omega = 0.42;
    LossWeights weights;
    const TotalLoss total = total_loss_and_grads(field, render, z, z_hat, x_hat, omega, 0.5, weights, codec);
    const LossBreakdown& b = total.breakdown;
    CHECK(b.total == doctest::Approx(omega * (b.sds_latent + weights.lambda_rgb * b.sds_image) +
                                     weights.lambda_zvar * b.zvar)
                         .epsilon(1e-12));
    CHECK(b.t_used == 0.5);
    CHECK(b.sds_latent > 0.0);
    CHECK(b.sds_image > 0.0);
    CHECK(b.foreground_ray_fraction == 1.0);  // dense field, narrow fov
    CHECK(total.grads.all_finite());

    LossWeights latent_only = weights;
    latent_only.space = LossSpace::LatentOnly;
    const TotalLoss lo = total_loss_and_grads(field, render, z, z_hat, x_hat, omega, 0.5, latent_only, codec);
    CHECK(lo.breakdown.total ==
          doctest::Approx(omega * b.sds_latent + weights.lambda_zvar * b.zvar).epsilon(1e-12));

    LossWeights image_only = weights;
    image_only.space = LossSpace::ImageOnly;
    const TotalLoss io = total_loss_and_grads(field, render, z, z_hat, x_hat, omega, 0.5, image_only, codec);
    CHECK(io.breakdown.total ==
          doctest::Approx(omega * weights.lambda_rgb * b.sds_image + weights.lambda_zvar * b.zvar).epsilon(1e-12));

    LossWeights pure = weights;
    pure.lambda_rgb = 0.0;
    pure.lambda_zvar = 0.0;
    const TotalLoss p = total_loss_and_grads(field, render, z, z_hat, x_hat, omega, 0.5, pure, codec);
    CHECK(p.breakdown.total == doctest::Approx(omega * b.sds_latent).epsilon(1e-12));
}

TEST_CASE("total loss gradients match finite differences") {
    const VoxelField field = dense_field(32);
    const Camera cam = narrow_camera(8);
    const SamplingConfig scfg = testsup::reference_sampling(true);
    const RenderResult render = render_image(field, cam, scfg, 23);

    // Gate margin: the finite-difference step must not flip any foreground gate.
    for (const RayRecord& r : render.rays) REQUIRE(std::abs(r.out.opacity - kForegroundOpacity) > 1e-3);

    const LatentCodec codec{4};
    const Image z = codec.encode(render.image);
    Pcg32 rng(66);
    Image z_hat = z;
    for (Vec3& p : z_hat.pixels) p += Vec3{0.3 * rng.next_gaussian(), 0.3 * rng.next_gaussian(), 0.3 * rng.next_gaussian()};
    const Image x_hat = codec.decode(z_hat);
    const double omega = 0.8;
    const LossWeights weights;

    const TotalLoss total = total_loss_and_grads(field, render, z, z_hat, x_hat, omega, 0.4, weights, codec);

    auto loss_at = [&](const VoxelField& f) {
        const RenderResult rr = rerender_at_positions(f, render);
        const Image zz = codec.encode(rr.image);
        return total_loss_and_grads(f, rr, zz, z_hat, x_hat, omega, 0.4, weights, codec).breakdown.total;
    };

    double max_abs = 0.0;
    const std::size_t n_params = testsup::field_param_count(field);
    for (std::size_t i = 0; i < n_params; ++i)
        max_abs = std::max(max_abs, std::abs(testsup::field_grad_at(total.grads, i)));
    REQUIRE(max_abs > 0.0);

    const double h = 1e-5;
    int checked = 0;
    double worst = 0.0;
    for (std::size_t i = 0; i < n_params && checked < 120; ++i) {
        const double analytic = testsup::field_grad_at(total.grads, i);
        if (std::abs(analytic) < 1e-4 * max_abs) continue;
        VoxelField fp = field;
        testsup::field_param(fp, i) += h;
        VoxelField fm = field;
        testsup::field_param(fm, i) -= h;
        const double fd = (loss_at(fp) - loss_at(fm)) / (2.0 * h);
        worst = std::max(worst, testsup::rel_err(fd, analytic));
        ++checked;
    }
    CHECK(checked >= 100);
    CHECK(worst < 1e-5);
}

TEST_CASE("gradient descent on the target objective decreases the loss") {
    VoxelField field = make_field({4, 4, 4}, Vec3{-1, -1, -1}, Vec3{1, 1, 1}, FieldInit::Blob, 3.0, 0.3);
    const Camera cam = narrow_camera(8);
    const SamplingConfig scfg = testsup::reference_sampling(false);
    const LatentCodec codec{4};

    // Fixed target: a slightly different field's render through the codec.
    VoxelField target_field = dense_field(99);
    const Image target = render_image(target_field, cam, scfg, 0).image;
    const Image z_hat = codec.encode(target);
    const Image x_hat = codec.decode(z_hat);

    const LossWeights weights;
    const double lr = 2e-3;
    double prev = 0.0;
    for (int step = 0; step < 50; ++step) {
        const RenderResult render = render_image(field, cam, scfg, 0);
        const Image z = codec.encode(render.image);
        const TotalLoss total = total_loss_and_grads(field, render, z, z_hat, x_hat, 1.0, 0.1, weights, codec);
        if (step > 0) CHECK(total.breakdown.total < prev + 1e-12);
        prev = total.breakdown.total;
        for (std::size_t i = 0; i < field.density_raw.size(); ++i)
            field.density_raw[i] -= lr * total.grads.density_raw[i];
        for (std::size_t i = 0; i < field.color_raw.size(); ++i)
            field.color_raw[i] -= lr * total.grads.color_raw[i];
        field.background_raw -= lr * total.grads.background_raw;
    }
}

TEST_CASE("loss values stay finite for fuzzed batches") {
    Pcg32 rng(77);
    const LatentCodec codec{4};
    for (int rep = 0; rep < 30; ++rep) {
        VoxelField f = make_field({3, 3, 3}, Vec3{-1, -1, -1}, Vec3{1, 1, 1}, FieldInit::Empty);
        for (double& v : f.density_raw) v = 8.0 * (rng.next_double() - 0.5);
        for (double& v : f.color_raw) v = 8.0 * (rng.next_double() - 0.5);
        f.background_raw = Vec3{4.0 * (rng.next_double() - 0.5), 4.0 * (rng.next_double() - 0.5),
                                4.0 * (rng.next_double() - 0.5)};
        const Camera cam = orbit_camera(rng.next_double() * 6.28, rng.next_double() - 0.5, 2.5, Vec3{}, 0.8, 8, 8);
        const RenderResult render = render_image(f, cam, testsup::reference_sampling(true), rep);
        const Image z = codec.encode(render.image);
        Image z_hat = z;
        for (Vec3& p : z_hat.pixels) p += Vec3{rng.next_gaussian(), rng.next_gaussian(), rng.next_gaussian()};
        const TotalLoss total =
            total_loss_and_grads(f, render, z, z_hat, codec.decode(z_hat), 0.5, 0.5, LossWeights{}, codec);
        CHECK(std::isfinite(total.breakdown.total));
        CHECK(total.grads.all_finite());
    }
}

TEST_CASE("backprop is reproducible per thread count and stable across them") {
    const VoxelField field = dense_field(41);
    const Camera cam = narrow_camera(8);
    const RenderResult render = render_image(field, cam, testsup::reference_sampling(true), 3);
    Image d_image(8, 8, Vec3{0.1, -0.2, 0.3});
    const std::vector<double> d_zvar(render.rays.size(), 0.01);

    // Same worker count twice: the reduction order is fixed, so bitwise equal.
    const FieldGradients a = backprop_render(field, render, d_image, d_zvar, 4);
    const FieldGradients b = backprop_render(field, render, d_image, d_zvar, 4);
    for (std::size_t i = 0; i < a.density_raw.size(); ++i) CHECK(a.density_raw[i] == b.density_raw[i]);
    for (std::size_t i = 0; i < a.color_raw.size(); ++i) CHECK(a.color_raw[i] == b.color_raw[i]);
    CHECK((a.background_raw - b.background_raw).norm() == 0.0);

    // Different worker counts regroup the per-worker partial sums, so the
    // results agree only up to rounding.
    const FieldGradients c = backprop_render(field, render, d_image, d_zvar, 1);
    double max_scale = 1e-12;
    for (double v : c.density_raw) max_scale = std::max(max_scale, std::abs(v));
    for (double v : c.color_raw) max_scale = std::max(max_scale, std::abs(v));
    for (std::size_t i = 0; i < a.density_raw.size(); ++i)
        CHECK(std::abs(a.density_raw[i] - c.density_raw[i]) < 1e-12 * max_scale);
    for (std::size_t i = 0; i < a.color_raw.size(); ++i)
        CHECK(std::abs(a.color_raw[i] - c.color_raw[i]) < 1e-12 * max_scale);
    CHECK((a.background_raw - c.background_raw).norm() < 1e-12 * max_scale);
}
