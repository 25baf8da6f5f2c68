// Copyright (c) The sdrf Authors
// SPDX-License-Identifier: Apache-2.0
#include "sdrf/image_io.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <memory>
#include <vector>

#include "sdrf/errors.hpp"

namespace sdrf {

std::uint8_t quantize_byte(double v) {
    const double scaled = std::round(std::clamp(v, 0.0, 1.0) * 255.0);
    return std::uint8_t(scaled);
}

namespace {

void ensure_parent(const std::filesystem::path& path) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
}

std::vector<std::uint8_t> to_bytes(const Image& image) {
    std::vector<std::uint8_t> bytes(image.pixels.size() * 3);
    for (std::size_t i = 0; i < image.pixels.size(); ++i) {
        bytes[3 * i + 0] = quantize_byte(image.pixels[i].x);
        bytes[3 * i + 1] = quantize_byte(image.pixels[i].y);
        bytes[3 * i + 2] = quantize_byte(image.pixels[i].z);
    }
    return bytes;
}

}  // namespace

void write_ppm(const Image& image, const std::filesystem::path& path) {
    ensure_parent(path);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw FormatError("cannot open for writing: " + path.string());
    out << "P6\n" << image.width << " " << image.height << "\n255\n";
    const auto bytes = to_bytes(image);
    out.write(reinterpret_cast<const char*>(bytes.data()), std::streamsize(bytes.size()));
    if (!out) throw FormatError("ppm write failed: " + path.string());
}

Image read_ppm(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("cannot open: " + path.string());
    std::string magic;
    int w = 0, h = 0, maxval = 0;
    in >> magic >> w >> h >> maxval;
    if (magic != "P6" || w <= 0 || h <= 0 || maxval != 255)
        throw FormatError("unsupported ppm (want P6 maxval 255): " + path.string());
    in.get();  // single whitespace after the header
    std::vector<std::uint8_t> bytes(std::size_t(w) * h * 3);
    in.read(reinterpret_cast<char*>(bytes.data()), std::streamsize(bytes.size()));
    if (std::size_t(in.gcount()) != bytes.size()) throw FormatError("ppm truncated: " + path.string());
    Image image;
    image.width = w;
    image.height = h;
    image.pixels.resize(std::size_t(w) * h);
    for (std::size_t i = 0; i < image.pixels.size(); ++i) {
        image.pixels[i] = Vec3{bytes[3 * i] / 255.0, bytes[3 * i + 1] / 255.0, bytes[3 * i + 2] / 255.0};
    }
    return image;
}

namespace {

struct FileCloser {
    void operator()(std::FILE* f) const {
        if (f) std::fclose(f);
    }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

}  // namespace

void write_png(const Image& image, const std::filesystem::path& path) {
    ensure_parent(path);
    FilePtr fp(std::fopen(path.string().c_str(), "wb"));
    if (!fp) throw FormatError("cannot open for writing: " + path.string());

    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png) throw FormatError("png writer init failed");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_write_struct(&png, nullptr);
        throw FormatError("png writer init failed");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw FormatError("png write failed: " + path.string());
    }
    png_init_io(png, fp.get());
    png_set_IHDR(png, info, png_uint_32(image.width), png_uint_32(image.height), 8, PNG_COLOR_TYPE_RGB,
                 PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);

    const auto bytes = to_bytes(image);
    for (int y = 0; y < image.height; ++y) {
        png_write_row(png, const_cast<png_bytep>(bytes.data() + std::size_t(y) * image.width * 3));
    }
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
}

Image read_png(const std::filesystem::path& path) {
    FilePtr fp(std::fopen(path.string().c_str(), "rb"));
    if (!fp) throw FormatError("cannot open: " + path.string());

    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png) throw FormatError("png reader init failed");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_read_struct(&png, nullptr, nullptr);
        throw FormatError("png reader init failed");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw FormatError("png read failed: " + path.string());
    }
    png_init_io(png, fp.get());
    png_read_info(png, info);

    // Normalize whatever we were handed to 8-bit RGB.
    png_set_expand(png);
    png_set_strip_16(png);
    png_set_strip_alpha(png);
    png_set_gray_to_rgb(png);
    png_read_update_info(png, info);
    const png_uint_32 w = png_get_image_width(png, info);
    const png_uint_32 h = png_get_image_height(png, info);
    if (png_get_rowbytes(png, info) != w * 3) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw FormatError("unexpected png layout: " + path.string());
    }

    std::vector<std::uint8_t> bytes(std::size_t(w) * h * 3);
    for (png_uint_32 y = 0; y < h; ++y) {
        png_read_row(png, bytes.data() + std::size_t(y) * w * 3, nullptr);
    }
    png_destroy_read_struct(&png, &info, nullptr);

    Image image;
    image.width = int(w);
    image.height = int(h);
    image.pixels.resize(std::size_t(w) * h);
    for (std::size_t i = 0; i < image.pixels.size(); ++i) {
        image.pixels[i] = Vec3{bytes[3 * i] / 255.0, bytes[3 * i + 1] / 255.0, bytes[3 * i + 2] / 255.0};
    }
    return image;
}

Image read_image(const std::filesystem::path& path) {
    const auto ext = path.extension().string();
    if (ext == ".png") return read_png(path);
    if (ext == ".ppm") return read_ppm(path);
    throw FormatError("unsupported image extension: " + path.string());
}

void write_scalar_map(const ScalarMap& map, MapChannel channel, const std::filesystem::path& path) {
    ensure_parent(path);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw FormatError("cannot open for writing: " + path.string());
    const char header[8] = {'S', 'M', 'A', 'P', '1', 0, 0, 0};
    out.write(header, 8);
    const std::uint32_t w = std::uint32_t(map.width), h = std::uint32_t(map.height);
    const std::uint32_t tag = std::uint32_t(channel);
    out.write(reinterpret_cast<const char*>(&w), 4);
    out.write(reinterpret_cast<const char*>(&h), 4);
    out.write(reinterpret_cast<const char*>(&tag), 4);
    std::vector<float> data(map.values.size());
    for (std::size_t i = 0; i < data.size(); ++i) data[i] = float(map.values[i]);
    out.write(reinterpret_cast<const char*>(data.data()), std::streamsize(data.size() * 4));
    if (!out) throw FormatError("scalar map write failed: " + path.string());
}

ScalarMapFile read_scalar_map(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("cannot open: " + path.string());
    char header[8];
    in.read(header, 8);
    if (in.gcount() != 8 || std::memcmp(header, "SMAP1\0\0\0", 8) != 0)
        throw FormatError("bad scalar map magic: " + path.string());
    std::uint32_t w = 0, h = 0, tag = 0;
    in.read(reinterpret_cast<char*>(&w), 4);
    in.read(reinterpret_cast<char*>(&h), 4);
    in.read(reinterpret_cast<char*>(&tag), 4);
    if (!in || w == 0 || h == 0) throw FormatError("bad scalar map header: " + path.string());
    std::vector<float> data(std::size_t(w) * h);
    in.read(reinterpret_cast<char*>(data.data()), std::streamsize(data.size() * 4));
    if (std::size_t(in.gcount()) != data.size() * 4) throw FormatError("scalar map truncated: " + path.string());

    ScalarMapFile out;
    out.map.width = int(w);
    out.map.height = int(h);
    out.map.values.assign(data.begin(), data.end());
    out.channel = MapChannel(tag);
    return out;
}

void write_scalar_png(const ScalarMap& map, double lo, double hi, const std::filesystem::path& path) {
    Image gray;
    gray.width = map.width;
    gray.height = map.height;
    gray.pixels.resize(map.values.size());
    const double span = hi - lo;
    for (std::size_t i = 0; i < map.values.size(); ++i) {
        const double v = span > 0.0 ? (map.values[i] - lo) / span : 0.0;
        gray.pixels[i] = Vec3{v, v, v};
    }
    write_png(gray, path);
}

}  // namespace sdrf
