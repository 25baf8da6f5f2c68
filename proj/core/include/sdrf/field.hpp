// Copyright (c) The sdrf Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "sdrf/vec3.hpp"

namespace sdrf {

// Numerically safe activations. Density uses softplus, color uses sigmoid.
double softplus(double x);
double softplus_derivative(double x);  // = sigmoid(x)
double inv_softplus(double y);
double sigmoid(double x);
double sigmoid_derivative(double x);
double logit(double p);

/// Density and color of the field at one point.
struct FieldSample {
    double density = 0.0;  // 1 / scene unit, >= 0
    Vec3 color{};          // rgb in [0,1]^3
};

/// Per-parameter gradient accumulator shaped like a VoxelField.
struct FieldGradients {
    std::vector<double> density_raw;
    std::vector<double> color_raw;  // rgb interleaved per vertex
    Vec3 background_raw{};

    void resize_like(std::size_t vertex_count);
    void clear();
    void add(const FieldGradients& other);
    bool all_finite() const;
};

enum class FieldInit {
    Empty,  // activated density ~= 0.01 everywhere
    Blob,   // centered Gaussian density bump
};

/// Dense voxel grid over an axis-aligned bounding box. Raw (pre-activation)
/// values live at grid vertices in x-fastest order and are trilinearly
/// interpolated before activation. Points outside the bbox are empty space.
struct VoxelField {
    std::array<int, 3> resolution{2, 2, 2};
    Vec3 bbox_min{-1.0, -1.0, -1.0};
    Vec3 bbox_max{1.0, 1.0, 1.0};
    std::vector<double> density_raw;
    std::vector<double> color_raw;  // rgb interleaved per vertex
    Vec3 background_raw{};

    std::size_t vertex_count() const {
        return std::size_t(resolution[0]) * resolution[1] * resolution[2];
    }
    std::size_t vertex_index(int x, int y, int z) const {
        return std::size_t(x) + std::size_t(resolution[0]) * (std::size_t(y) + std::size_t(resolution[1]) * z);
    }

    Vec3 background_color() const;

    FieldSample query(const Vec3& point) const;

    /// Accumulates dLoss/draw for the activated outputs' upstream gradients
    /// (d_density on the activated density, d_color on the activated rgb).
    void query_grad(const Vec3& point, double d_density, const Vec3& d_color, FieldGradients& grads) const;
};

VoxelField make_field(const std::array<int, 3>& resolution, const Vec3& bbox_min, const Vec3& bbox_max,
                      FieldInit init, double blob_peak_density = 5.0, double blob_sigma_frac = 0.25);

/// Checkpoint format (little-endian): magic "SFLD1", resolution as 3 x u32,
/// bbox as 6 x f64 (min xyz then max xyz), density_raw as f32[N] in x-fastest
/// vertex order, color_raw as f32[3N] (rgb interleaved, same vertex order),
/// then the raw background rgb as 3 x f32.
void save_field(const VoxelField& field, const std::filesystem::path& path);
VoxelField load_field(const std::filesystem::path& path);

}  // namespace sdrf
