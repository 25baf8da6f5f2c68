// Copyright (c) The sdrf Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <vector>

#include "sdrf/vec3.hpp"

namespace sdrf {

/// Row-major RGB raster with double precision channels. Also used for latents,
/// which are just lower resolution three-channel rasters here.
struct Image {
    int width = 0;
    int height = 0;
    std::vector<Vec3> pixels;

    Image() = default;
    Image(int w, int h, const Vec3& fill = {}) : width(w), height(h), pixels(size_t(w) * size_t(h), fill) {}

    Vec3& at(int x, int y) { return pixels[std::size_t(y) * width + x]; }
    const Vec3& at(int x, int y) const { return pixels[std::size_t(y) * width + x]; }

    std::size_t pixel_count() const { return pixels.size(); }
    bool same_shape(const Image& o) const { return width == o.width && height == o.height; }
};

/// Single-channel row-major raster (depth, disparity, opacity, z-variance maps).
struct ScalarMap {
    int width = 0;
    int height = 0;
    std::vector<double> values;

    ScalarMap() = default;
    ScalarMap(int w, int h, double fill = 0.0) : width(w), height(h), values(size_t(w) * size_t(h), fill) {}

    double& at(int x, int y) { return values[std::size_t(y) * width + x]; }
    double at(int x, int y) const { return values[std::size_t(y) * width + x]; }
};

inline Image operator-(const Image& a, const Image& b) {
    Image out(a.width, a.height);
    for (std::size_t i = 0; i < a.pixels.size(); ++i) out.pixels[i] = a.pixels[i] - b.pixels[i];
    return out;
}

inline Image operator+(const Image& a, const Image& b) {
    Image out(a.width, a.height);
    for (std::size_t i = 0; i < a.pixels.size(); ++i) out.pixels[i] = a.pixels[i] + b.pixels[i];
    return out;
}

inline Image operator*(double s, const Image& a) {
    Image out(a.width, a.height);
    for (std::size_t i = 0; i < a.pixels.size(); ++i) out.pixels[i] = a.pixels[i] * s;
    return out;
}

inline double sum_squares(const Image& a) {
    double s = 0.0;
    for (const Vec3& p : a.pixels) s += p.norm_sq();
    return s;
}

inline double dot(const Image& a, const Image& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.pixels.size(); ++i) s += dot(a.pixels[i], b.pixels[i]);
    return s;
}

}  // namespace sdrf
