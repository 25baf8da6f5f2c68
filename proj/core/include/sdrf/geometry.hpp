// Copyright (c) The sdrf Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <vector>

#include "sdrf/rng.hpp"
#include "sdrf/vec3.hpp"

namespace sdrf {

/// Pinhole camera. The basis is right-handed and built by Gram-Schmidt from
/// (look_at - position, up); `up` must not be parallel to the view direction.
struct Camera {
    Vec3 position;
    Vec3 look_at;
    Vec3 up{0.0, 1.0, 0.0};
    double vertical_fov = 0.6981317007977318;  // radians
    int image_width = 64;
    int image_height = 64;
};

struct CameraBasis {
    Vec3 right;
    Vec3 up;
    Vec3 forward;
};

/// Throws std::invalid_argument on a degenerate camera (up parallel to view,
/// fov outside (0, pi), non-positive image size).
CameraBasis camera_basis(const Camera& cam);

struct Ray {
    Vec3 origin;
    Vec3 direction;  // unit length
    double t_near = 0.0;
    double t_far = 1.0;

    Vec3 at(double t) const { return origin + direction * t; }
};

/// One ray per pixel in row-major order (index = y * width + x), each through
/// its pixel center. Pixel centers sit at half-integer coordinates; row 0 is
/// the top of the image.
std::vector<Ray> cast_rays(const Camera& cam, double t_near, double t_far);

/// Shrinks [t_near, t_far] to the ray's overlap with an axis-aligned box.
/// Returns false (ray untouched) when there is no overlap.
bool clip_to_aabb(Ray& ray, const Vec3& box_min, const Vec3& box_max);

/// Stratified positions: one uniform draw per bin of [t_near, t_far] split
/// into n_coarse equal bins, bin midpoints when jitter is off. Output is
/// strictly increasing. Requires n_coarse >= 2.
std::vector<double> stratified_sample(const Ray& ray, int n_coarse, Pcg32& rng, bool jitter = true);

/// Orbit pose around `target`: azimuth (radians, about +y), elevation
/// (radians, positive above the horizon), fixed radius. y is up.
Camera orbit_camera(double azimuth, double elevation, double radius, const Vec3& target,
                    double vertical_fov, int width, int height);

}  // namespace sdrf
