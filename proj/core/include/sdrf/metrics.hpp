// Copyright (c) The sdrf Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

#include "sdrf/image.hpp"
#include "sdrf/losses.hpp"
#include "sdrf/renderer.hpp"

namespace sdrf {

/// Peak signal-to-noise ratio in dB for images with values in [0, 1].
inline double psnr(const Image& a, const Image& b) {
    if (a.width != b.width || a.height != b.height) throw std::invalid_argument("psnr shape mismatch");
    double mse = 0.0;
    for (std::size_t i = 0; i < a.pixels.size(); ++i) mse += (a.pixels[i] - b.pixels[i]).norm_sq();
    mse /= double(a.pixels.size()) * 3.0;
    if (mse <= 0.0) return std::numeric_limits<double>::infinity();
    return -10.0 * std::log10(mse);
}

/// Mean over pixels and channels of the per-pixel standard deviation across
/// a stack of same-shaped images. The flicker statistic.
inline double mean_pixel_std(const std::vector<Image>& stack) {
    if (stack.size() < 2) return 0.0;
    const std::size_t n = stack.front().pixels.size();
    const double count = double(stack.size());
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        Vec3 mean{};
        for (const Image& im : stack) mean += im.pixels[i];
        mean = (1.0 / count) * mean;
        Vec3 var{};
        for (const Image& im : stack) {
            const Vec3 d = im.pixels[i] - mean;
            var += Vec3{d.x * d.x, d.y * d.y, d.z * d.z};
        }
        acc += std::sqrt(var.x / count) + std::sqrt(var.y / count) + std::sqrt(var.z / count);
    }
    return acc / (double(n) * 3.0);
}

/// Mean final-pass z-variance over foreground rays (opacity above the gate).
/// Returns 0 when no ray qualifies.
inline double foreground_zvar_mean(const std::vector<RayRecord>& rays) {
    double acc = 0.0;
    std::size_t fg = 0;
    for (const RayRecord& r : rays) {
        if (r.out.opacity > kForegroundOpacity) {
            acc += r.out.zvar;
            ++fg;
        }
    }
    return fg == 0 ? 0.0 : acc / double(fg);
}

}  // namespace sdrf
