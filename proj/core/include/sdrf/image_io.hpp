// Copyright (c) The sdrf Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>

#include "sdrf/image.hpp"

namespace sdrf {

/// 8-bit quantization used by every image writer: clamp to [0,1], scale by
/// 255, round half away from zero.
std::uint8_t quantize_byte(double v);

// PPM (P6, maxval 255): the bit-exact reference format for tests.
void write_ppm(const Image& image, const std::filesystem::path& path);
Image read_ppm(const std::filesystem::path& path);

// 8-bit RGB PNG.
void write_png(const Image& image, const std::filesystem::path& path);
Image read_png(const std::filesystem::path& path);

/// Loads by extension: .png or .ppm.
Image read_image(const std::filesystem::path& path);

/// Channel tags for scalar-map sidecars.
enum class MapChannel : std::uint32_t {
    Depth = 1,
    Disparity = 2,
    Opacity = 3,
    ZVariance = 4,
};

/// Raw f32 sidecar: 16-byte header (magic "SMAP1", 3 zero pad bytes,
/// u32 width, u32 height), then a u32 channel tag, then row-major f32 data,
/// all little-endian.
void write_scalar_map(const ScalarMap& map, MapChannel channel, const std::filesystem::path& path);
struct ScalarMapFile {
    ScalarMap map;
    MapChannel channel;
};
ScalarMapFile read_scalar_map(const std::filesystem::path& path);

/// Grayscale 8-bit PNG of (v - lo) / (hi - lo), clamped. When lo == hi the
/// output is all black.
void write_scalar_png(const ScalarMap& map, double lo, double hi, const std::filesystem::path& path);

}  // namespace sdrf
