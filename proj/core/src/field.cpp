// Copyright (c) The sdrf Authors
// SPDX-License-Identifier: Apache-2.0
#include "sdrf/field.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include "sdrf/errors.hpp"

namespace sdrf {

static_assert(std::endian::native == std::endian::little, "checkpoint io assumes a little-endian host");

double softplus(double x) {
    if (x > 0.0) return x + std::log1p(std::exp(-x));
    return std::log1p(std::exp(x));
}

double softplus_derivative(double x) { return sigmoid(x); }

double inv_softplus(double y) {
    if (y > 30.0) return y;  // softplus(y) == y to double precision
    return std::log(std::expm1(y));
}

double sigmoid(double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

double sigmoid_derivative(double x) {
    const double s = sigmoid(x);
    return s * (1.0 - s);
}

double logit(double p) { return std::log(p / (1.0 - p)); }

void FieldGradients::resize_like(std::size_t vertex_count) {
    density_raw.assign(vertex_count, 0.0);
    color_raw.assign(vertex_count * 3, 0.0);
    background_raw = Vec3{};
}

void FieldGradients::clear() {
    std::fill(density_raw.begin(), density_raw.end(), 0.0);
    std::fill(color_raw.begin(), color_raw.end(), 0.0);
    background_raw = Vec3{};
}

void FieldGradients::add(const FieldGradients& other) {
    for (std::size_t i = 0; i < density_raw.size(); ++i) density_raw[i] += other.density_raw[i];
    for (std::size_t i = 0; i < color_raw.size(); ++i) color_raw[i] += other.color_raw[i];
    background_raw += other.background_raw;
}

bool FieldGradients::all_finite() const {
    for (double v : density_raw)
        if (!std::isfinite(v)) return false;
    for (double v : color_raw)
        if (!std::isfinite(v)) return false;
    return std::isfinite(background_raw.x) && std::isfinite(background_raw.y) && std::isfinite(background_raw.z);
}

Vec3 VoxelField::background_color() const {
    return Vec3{sigmoid(background_raw.x), sigmoid(background_raw.y), sigmoid(background_raw.z)};
}

namespace {

/// Trilinear cell lookup: vertex indices of the enclosing cell plus the
/// fractional position within it. Valid only for points inside the bbox.
struct CellWeights {
    std::size_t corner[8];
    double weight[8];
};

bool locate(const VoxelField& f, const Vec3& p, CellWeights& cw) {
    const double pos[3] = {p.x, p.y, p.z};
    const double bmin[3] = {f.bbox_min.x, f.bbox_min.y, f.bbox_min.z};
    const double bmax[3] = {f.bbox_max.x, f.bbox_max.y, f.bbox_max.z};
    int i0[3];
    double frac[3];
    for (int a = 0; a < 3; ++a) {
        if (pos[a] < bmin[a] || pos[a] > bmax[a]) return false;
        const double u = (pos[a] - bmin[a]) / (bmax[a] - bmin[a]) * (f.resolution[a] - 1);
        int lo = int(std::floor(u));
        if (lo > f.resolution[a] - 2) lo = f.resolution[a] - 2;
        if (lo < 0) lo = 0;
        i0[a] = lo;
        frac[a] = u - lo;
    }
    for (int c = 0; c < 8; ++c) {
        const int dx = c & 1, dy = (c >> 1) & 1, dz = (c >> 2) & 1;
        cw.corner[c] = f.vertex_index(i0[0] + dx, i0[1] + dy, i0[2] + dz);
        const double wx = dx ? frac[0] : 1.0 - frac[0];
        const double wy = dy ? frac[1] : 1.0 - frac[1];
        const double wz = dz ? frac[2] : 1.0 - frac[2];
        cw.weight[c] = wx * wy * wz;
    }
    return true;
}

}  // namespace

FieldSample VoxelField::query(const Vec3& point) const {
    CellWeights cw;
    if (!locate(*this, point, cw)) return FieldSample{};
    double d = 0.0, r = 0.0, g = 0.0, b = 0.0;
    for (int c = 0; c < 8; ++c) {
        const double w = cw.weight[c];
        const std::size_t v = cw.corner[c];
        d += w * density_raw[v];
        r += w * color_raw[3 * v + 0];
        g += w * color_raw[3 * v + 1];
        b += w * color_raw[3 * v + 2];
    }
    FieldSample s;
    s.density = softplus(d);
    s.color = Vec3{sigmoid(r), sigmoid(g), sigmoid(b)};
    return s;
}

void VoxelField::query_grad(const Vec3& point, double d_density, const Vec3& d_color, FieldGradients& grads) const {
    CellWeights cw;
    if (!locate(*this, point, cw)) return;
    double d = 0.0, r = 0.0, g = 0.0, b = 0.0;
    for (int c = 0; c < 8; ++c) {
        const double w = cw.weight[c];
        const std::size_t v = cw.corner[c];
        d += w * density_raw[v];
        r += w * color_raw[3 * v + 0];
        g += w * color_raw[3 * v + 1];
        b += w * color_raw[3 * v + 2];
    }
    const double dd = d_density * softplus_derivative(d);
    const double dr = d_color.x * sigmoid_derivative(r);
    const double dg = d_color.y * sigmoid_derivative(g);
    const double db = d_color.z * sigmoid_derivative(b);
    for (int c = 0; c < 8; ++c) {
        const double w = cw.weight[c];
        const std::size_t v = cw.corner[c];
        grads.density_raw[v] += w * dd;
        grads.color_raw[3 * v + 0] += w * dr;
        grads.color_raw[3 * v + 1] += w * dg;
        grads.color_raw[3 * v + 2] += w * db;
    }
}

VoxelField make_field(const std::array<int, 3>& resolution, const Vec3& bbox_min, const Vec3& bbox_max,
                      FieldInit init, double blob_peak_density, double blob_sigma_frac) {
    for (int a = 0; a < 3; ++a) {
        if (resolution[a] < 2) throw std::invalid_argument("field resolution must be >= 2 per axis");
    }
    const Vec3 extent = bbox_max - bbox_min;
    if (extent.x <= 0.0 || extent.y <= 0.0 || extent.z <= 0.0)
        throw std::invalid_argument("field bbox must have positive extent");

    VoxelField f;
    f.resolution = resolution;
    f.bbox_min = bbox_min;
    f.bbox_max = bbox_max;
    f.density_raw.assign(f.vertex_count(), 0.0);
    f.color_raw.assign(f.vertex_count() * 3, 0.0);

    if (init == FieldInit::Empty) {
        const double raw = inv_softplus(0.01);
        std::fill(f.density_raw.begin(), f.density_raw.end(), raw);
        return f;
    }

    const Vec3 center = 0.5 * (bbox_min + bbox_max);
    const double min_extent = std::min(extent.x, std::min(extent.y, extent.z));
    const double sigma = blob_sigma_frac * min_extent;
    constexpr double kDensityFloor = 1e-8;  // keeps inv_softplus finite far from the blob
    for (int z = 0; z < resolution[2]; ++z) {
        for (int y = 0; y < resolution[1]; ++y) {
            for (int x = 0; x < resolution[0]; ++x) {
                const Vec3 p{
                    bbox_min.x + extent.x * x / (resolution[0] - 1),
                    bbox_min.y + extent.y * y / (resolution[1] - 1),
                    bbox_min.z + extent.z * z / (resolution[2] - 1),
                };
                const double d2 = (p - center).norm_sq();
                const double target = std::max(blob_peak_density * std::exp(-d2 / (2.0 * sigma * sigma)), kDensityFloor);
                f.density_raw[f.vertex_index(x, y, z)] = inv_softplus(target);
            }
        }
    }
    return f;
}

namespace {

constexpr char kMagic[5] = {'S', 'F', 'L', 'D', '1'};

void write_bytes(std::ofstream& out, const void* data, std::size_t n) {
    out.write(static_cast<const char*>(data), std::streamsize(n));
}

void read_bytes(std::ifstream& in, void* data, std::size_t n) {
    in.read(static_cast<char*>(data), std::streamsize(n));
    if (std::size_t(in.gcount()) != n) throw FormatError("checkpoint truncated");
}

void write_u32(std::ofstream& out, std::uint32_t v) { write_bytes(out, &v, 4); }
void write_f32(std::ofstream& out, float v) { write_bytes(out, &v, 4); }
void write_f64(std::ofstream& out, double v) { write_bytes(out, &v, 8); }

std::uint32_t read_u32(std::ifstream& in) {
    std::uint32_t v;
    read_bytes(in, &v, 4);
    return v;
}
float read_f32(std::ifstream& in) {
    float v;
    read_bytes(in, &v, 4);
    return v;
}
double read_f64(std::ifstream& in) {
    double v;
    read_bytes(in, &v, 8);
    return v;
}

}  // namespace

void save_field(const VoxelField& field, const std::filesystem::path& path) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw FormatError("cannot open checkpoint for writing: " + path.string());
    write_bytes(out, kMagic, 5);
    for (int a = 0; a < 3; ++a) write_u32(out, std::uint32_t(field.resolution[a]));
    write_f64(out, field.bbox_min.x);
    write_f64(out, field.bbox_min.y);
    write_f64(out, field.bbox_min.z);
    write_f64(out, field.bbox_max.x);
    write_f64(out, field.bbox_max.y);
    write_f64(out, field.bbox_max.z);
    for (double v : field.density_raw) write_f32(out, float(v));
    for (double v : field.color_raw) write_f32(out, float(v));
    write_f32(out, float(field.background_raw.x));
    write_f32(out, float(field.background_raw.y));
    write_f32(out, float(field.background_raw.z));
    if (!out) throw FormatError("checkpoint write failed: " + path.string());
}

VoxelField load_field(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("cannot open checkpoint: " + path.string());
    char magic[5];
    read_bytes(in, magic, 5);
    if (std::memcmp(magic, kMagic, 5) != 0) throw FormatError("bad checkpoint magic: " + path.string());

    VoxelField f;
    for (int a = 0; a < 3; ++a) {
        const std::uint32_t r = read_u32(in);
        if (r < 2 || r > (1u << 20)) throw FormatError("checkpoint resolution out of range");
        f.resolution[a] = int(r);
    }
    f.bbox_min = Vec3{read_f64(in), read_f64(in), read_f64(in)};
    f.bbox_max = Vec3{read_f64(in), read_f64(in), read_f64(in)};
    const Vec3 extent = f.bbox_max - f.bbox_min;
    if (extent.x <= 0.0 || extent.y <= 0.0 || extent.z <= 0.0) throw FormatError("checkpoint bbox degenerate");

    const std::size_t n = f.vertex_count();
    f.density_raw.resize(n);
    for (std::size_t i = 0; i < n; ++i) f.density_raw[i] = read_f32(in);
    f.color_raw.resize(n * 3);
    for (std::size_t i = 0; i < n * 3; ++i) f.color_raw[i] = read_f32(in);
    f.background_raw = Vec3{read_f32(in), read_f32(in), read_f32(in)};

    char extra;
    in.read(&extra, 1);
    if (in.gcount() != 0) throw FormatError("checkpoint has trailing bytes: " + path.string());
    return f;
}

}  // namespace sdrf
