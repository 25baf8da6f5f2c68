// Copyright (c) The sdrf Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <vector>

#include "sdrf/field.hpp"
#include "sdrf/geometry.hpp"
#include "sdrf/image.hpp"
#include "sdrf/sampling.hpp"

namespace sdrf {

/// Sorted samples along one ray with the field values found there. The last
/// interval gets a fixed cap so the final sample can still absorb light.
struct RaySampleSet {
    std::vector<double> positions;
    std::vector<FieldSample> samples;
    double delta_cap = 1e3;
};

/// Everything the compositing pass produces for one ray.
struct RenderOutput {
    Vec3 color_fg{};            // weighted sample colors only
    Vec3 color{};               // with background composited in
    double opacity = 0.0;       // sum of weights
    std::vector<double> weights;
    std::vector<double> positions;  // copy of sample positions, for depth stats
    bool background = true;     // opacity at or below the floor; depth stats are sentinels
    double depth = 0.0;
    double disparity = 0.0;
    double zvar = 0.0;
};

constexpr double kOpacityFloor = 1e-6;

RenderOutput render(const RaySampleSet& samples, const Vec3& background);

/// Weighted mean depth and its reciprocal. Background rays (opacity at or
/// below the floor) report the sentinel pair (0, 0).
struct DepthDisparity {
    bool background = true;
    double depth = 0.0;
    double disparity = 0.0;
};
DepthDisparity depth_disparity(const RenderOutput& out, double opacity_floor = kOpacityFloor);

/// Variance of sample positions under the normalized weight pdf; 0 for
/// background rays and exactly 0 when a single sample carries all mass.
double z_variance(const RenderOutput& out, double opacity_floor = kOpacityFloor);

/// Upstream gradients on the per-ray outputs.
struct RenderUpstream {
    Vec3 d_color{};       // on the composited color
    double d_opacity = 0.0;
    double d_depth = 0.0;
    double d_disparity = 0.0;
    double d_zvar = 0.0;
};

/// Gradients with respect to the ray's sample densities/colors and the
/// background color (all in activated space).
struct RenderGrads {
    std::vector<double> d_density;
    std::vector<Vec3> d_color;
    Vec3 d_background{};
};

RenderGrads render_grad(const RaySampleSet& samples, const Vec3& background, const RenderUpstream& upstream,
                        double opacity_floor = kOpacityFloor);

/// Two-pass sampling setup for render_image.
struct SamplingConfig {
    int n_coarse = 32;
    int n_fine = 32;
    bool kernel_smooth = true;
    Kernel kernel{};
    bool jitter = true;        // off: midpoint strata and midpoint-ladder fine draws
    double t_near = 0.5;
    double t_far = 4.5;
    double delta_cap = 1e3;
    double weight_floor = 1e-5;  // added per coarse bin before normalization
};

/// One ray's full record: enough to re-evaluate the field at the same
/// positions and to run the backward pass.
struct RayRecord {
    Ray ray;
    bool hit = false;          // ray segment intersects the field bbox
    RaySampleSet samples;      // final merged pass (empty when !hit)
    RenderOutput out;
};

struct RenderResult {
    Image image;
    std::vector<RayRecord> rays;  // row-major, one per pixel
};

/// Full coarse-to-fine pipeline per ray: stratified samples, coarse render,
/// weight pdf (plus floor), optional kernel smoothing, inverse-CDF refinement,
/// merge, final render. The coarse pass is used only to place samples.
/// Per-ray randomness is derived from (seed, ray index) so results do not
/// depend on evaluation order.
RenderResult render_image(const VoxelField& field, const Camera& camera, const SamplingConfig& config,
                          std::uint64_t seed, int threads = 1);

/// Re-evaluates the field at a previous result's sample positions and
/// re-renders. Positions stay fixed; densities, colors, and the background
/// are re-read from the given field.
RenderResult rerender_at_positions(const VoxelField& field, const RenderResult& prev, int threads = 1);

}  // namespace sdrf
