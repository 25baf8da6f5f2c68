// Copyright (c) The sdrf Authors
// SPDX-License-Identifier: Apache-2.0
#include "sdrf/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace sdrf {

CameraBasis camera_basis(const Camera& cam) {
    if (cam.image_width < 1 || cam.image_height < 1) {
        throw std::invalid_argument("camera: image size must be at least 1x1");
    }
    if (!(cam.vertical_fov > 0.0) || !(cam.vertical_fov < 3.14159265358979323846)) {
        throw std::invalid_argument("camera: vertical_fov must lie in (0, pi)");
    }
    const Vec3 view = cam.look_at - cam.position;
    if (view.norm() == 0.0) {
        throw std::invalid_argument("camera: look_at coincides with position");
    }
    const Vec3 forward = view.normalized();
    const Vec3 right_unnorm = cross(forward, cam.up);
    const double rn = right_unnorm.norm();
    if (rn < 1e-12) {
        throw std::invalid_argument("camera: up vector is parallel to the view direction");
    }
    const Vec3 right = right_unnorm / rn;
    const Vec3 up = cross(right, forward);
    return {right, up, forward};
}

std::vector<Ray> cast_rays(const Camera& cam, double t_near, double t_far) {
    if (!(t_near >= 0.0) || !(t_near < t_far)) {
        throw std::invalid_argument("cast_rays: need 0 <= t_near < t_far");
    }
    const CameraBasis basis = camera_basis(cam);
    const double tan_half = std::tan(cam.vertical_fov * 0.5);
    const double aspect = double(cam.image_width) / double(cam.image_height);

    std::vector<Ray> rays;
    rays.reserve(std::size_t(cam.image_width) * cam.image_height);
    for (int y = 0; y < cam.image_height; ++y) {
        // +v points up in world space, row 0 is the top image row.
        const double v = (1.0 - 2.0 * (y + 0.5) / cam.image_height) * tan_half;
        for (int x = 0; x < cam.image_width; ++x) {
            const double u = (2.0 * (x + 0.5) / cam.image_width - 1.0) * tan_half * aspect;
            const Vec3 dir = (basis.forward + basis.right * u + basis.up * v).normalized();
            rays.push_back(Ray{cam.position, dir, t_near, t_far});
        }
    }
    return rays;
}

bool clip_to_aabb(Ray& ray, const Vec3& box_min, const Vec3& box_max) {
    double t0 = ray.t_near;
    double t1 = ray.t_far;
    for (int axis = 0; axis < 3; ++axis) {
        const double o = ray.origin[axis];
        const double d = ray.direction[axis];
        if (d == 0.0) {
            if (o < box_min[axis] || o > box_max[axis]) return false;
            continue;
        }
        double ta = (box_min[axis] - o) / d;
        double tb = (box_max[axis] - o) / d;
        if (ta > tb) std::swap(ta, tb);
        t0 = std::max(t0, ta);
        t1 = std::min(t1, tb);
        if (t0 >= t1) return false;
    }
    ray.t_near = t0;
    ray.t_far = t1;
    return true;
}

std::vector<double> stratified_sample(const Ray& ray, int n_coarse, Pcg32& rng, bool jitter) {
    if (n_coarse < 2) {
        throw std::invalid_argument("stratified_sample: n_coarse must be >= 2");
    }
    const double span = ray.t_far - ray.t_near;
    const double step = span / n_coarse;
    std::vector<double> zs(n_coarse);
    for (int i = 0; i < n_coarse; ++i) {
        const double u = jitter ? rng.next_double() : 0.5;
        zs[i] = ray.t_near + (i + u) * step;
    }
    return zs;
}

Camera orbit_camera(double azimuth, double elevation, double radius, const Vec3& target,
                    double vertical_fov, int width, int height) {
    const double ce = std::cos(elevation);
    const Vec3 offset{radius * ce * std::sin(azimuth), radius * std::sin(elevation),
                      radius * ce * std::cos(azimuth)};
    Camera cam;
    cam.position = target + offset;
    cam.look_at = target;
    cam.up = {0.0, 1.0, 0.0};
    cam.vertical_fov = vertical_fov;
    cam.image_width = width;
    cam.image_height = height;
    return cam;
}

}  // namespace sdrf
