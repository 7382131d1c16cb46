#ifndef DTREG_VOLUME_HPP
#define DTREG_VOLUME_HPP

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "dtreg/core.hpp"
#include "dtreg/errors.hpp"
#include "dtreg/parallel.hpp"

namespace dtreg {

// Regular anisotropic grid with world-space placement. Cell-centered
// convention: `origin` is the world position of the center of voxel (0,0,0);
// the columns of `direction` are the world directions of the voxel axes.
struct Grid {
    std::array<int, 3> dims{0, 0, 0};
    Vec3 spacing{1.0, 1.0, 1.0};
    Vec3 origin{0.0, 0.0, 0.0};
    Mat3 direction = Mat3::identity();

    std::size_t voxel_count() const {
        return static_cast<std::size_t>(dims[0]) * static_cast<std::size_t>(dims[1]) *
               static_cast<std::size_t>(dims[2]);
    }
    // x-fastest linear index
    std::size_t index(int i, int j, int k) const {
        return static_cast<std::size_t>(i) +
               static_cast<std::size_t>(dims[0]) *
                   (static_cast<std::size_t>(j) + static_cast<std::size_t>(dims[1]) * static_cast<std::size_t>(k));
    }

    Vec3 voxel_to_world(const Vec3& c) const {
        return origin + direction * c.cwise(spacing);
    }
    Vec3 world_to_voxel(const Vec3& p) const {
        return direction.tmul(p - origin).cwise_div(spacing);
    }
    Vec3 voxel_center(int i, int j, int k) const {
        return voxel_to_world({static_cast<double>(i), static_cast<double>(j), static_cast<double>(k)});
    }
    // world center of the voxel-center hull
    Vec3 domain_center() const {
        return voxel_to_world({(dims[0] - 1) * 0.5, (dims[1] - 1) * 0.5, (dims[2] - 1) * 0.5});
    }
    double voxel_volume() const { return spacing.x * spacing.y * spacing.z; }
    double min_spacing() const { return std::min({spacing.x, spacing.y, spacing.z}); }

    bool same_geometry(const Grid& o, double tol = 1e-9) const {
        if (dims != o.dims) return false;
        if ((spacing - o.spacing).norm_inf() > tol) return false;
        if ((origin - o.origin).norm_inf() > tol) return false;
        for (std::size_t i = 0; i < 9; ++i)
            if (std::abs(direction.m[i] - o.direction.m[i]) > tol) return false;
        return true;
    }
};

struct Volume3D {
    Grid grid;
    std::vector<float> data;

    float& at(int i, int j, int k) { return data[grid.index(i, j, k)]; }
    float at(int i, int j, int k) const { return data[grid.index(i, j, k)]; }
};

struct Mask3D {
    Grid grid;
    std::vector<std::uint8_t> data;

    std::uint8_t& at(int i, int j, int k) { return data[grid.index(i, j, k)]; }
    std::uint8_t at(int i, int j, int k) const { return data[grid.index(i, j, k)]; }
};

// 3-vector per voxel, stored as separate component planes. Used both for
// displacement fields (mm) and for per-voxel gradient vectors.
struct VectorField3 {
    Grid grid;
    std::array<std::vector<double>, 3> comp;

    void resize_zero(const Grid& g) {
        grid = g;
        for (auto& c : comp) c.assign(g.voxel_count(), 0.0);
    }
    Vec3 at(std::size_t idx) const {
        return {comp[0][idx], comp[1][idx], comp[2][idx]};
    }
    void set(std::size_t idx, const Vec3& v) {
        comp[0][idx] = v.x;
        comp[1][idx] = v.y;
        comp[2][idx] = v.z;
    }
    double max_norm() const {
        double m = 0.0;
        for (std::size_t i = 0; i < comp[0].size(); ++i) m = std::max(m, at(i).norm());
        return m;
    }
};

// Displacement field u on the reference grid; the mapped point is
// y(x) = x + u(x) with u in world mm.
using DeformationField = VectorField3;

inline Volume3D make_volume(const Grid& g, float fill = 0.0f) {
    Volume3D v;
    v.grid = g;
    v.data.assign(g.voxel_count(), fill);
    return v;
}

inline void validate_grid(const Grid& g, const std::string& what) {
    for (int a = 0; a < 3; ++a) {
        if (g.dims[a] <= 0) throw DataError(what + ": non-positive dimension");
        if (!(g.spacing[a] > 0.0)) throw DataError(what + ": non-positive spacing");
    }
    for (int c = 0; c < 3; ++c) {
        const Vec3 col = g.direction.col(c);
        if (std::abs(col.norm() - 1.0) > 1e-9)
            throw NonOrthonormalDirection(what + ": direction column not unit length");
        for (int c2 = c + 1; c2 < 3; ++c2) {
            if (std::abs(col.dot(g.direction.col(c2))) > 1e-9)
                throw NonOrthonormalDirection(what + ": direction columns not orthogonal");
        }
    }
}

inline void validate_volume(const Volume3D& v, const std::string& what = "volume") {
    validate_grid(v.grid, what);
    if (v.data.size() != v.grid.voxel_count())
        throw DataError(what + ": data length does not match dims");
    for (float x : v.data)
        if (!std::isfinite(x)) throw DataError(what + ": non-finite value");
}

// --- world/voxel mapping (spec surface passes the volume) -----------------

inline Vec3 world_to_voxel(const Volume3D& v, const Vec3& p) {
    return v.grid.world_to_voxel(p);
}

inline Vec3 voxel_to_world(const Volume3D& v, const Vec3& c) {
    return v.grid.voxel_to_world(c);
}

// --- trilinear sampling ----------------------------------------------------

enum class OutsideRule {
    Zero,  // Dirichlet-zero extension outside the voxel-center hull
    Clamp, // clamp continuous coordinates to the hull (edge extension)
};

namespace detail {

struct TrilinearCell {
    // base voxel and fractional offsets; valid only when inside is true
    int i0, j0, k0;
    double fx, fy, fz;
    bool inside;
};

inline TrilinearCell locate(const Grid& g, const Vec3& c, OutsideRule rule) {
    TrilinearCell cell{};
    Vec3 q = c;
    if (rule == OutsideRule::Clamp) {
        q.x = std::min(std::max(q.x, 0.0), static_cast<double>(g.dims[0] - 1));
        q.y = std::min(std::max(q.y, 0.0), static_cast<double>(g.dims[1] - 1));
        q.z = std::min(std::max(q.z, 0.0), static_cast<double>(g.dims[2] - 1));
    } else {
        if (q.x < 0.0 || q.y < 0.0 || q.z < 0.0 || q.x > g.dims[0] - 1 || q.y > g.dims[1] - 1 ||
            q.z > g.dims[2] - 1) {
            cell.inside = false;
            return cell;
        }
    }
    cell.inside = true;
    cell.i0 = std::min(static_cast<int>(q.x), g.dims[0] - 2 >= 0 ? g.dims[0] - 2 : 0);
    cell.j0 = std::min(static_cast<int>(q.y), g.dims[1] - 2 >= 0 ? g.dims[1] - 2 : 0);
    cell.k0 = std::min(static_cast<int>(q.z), g.dims[2] - 2 >= 0 ? g.dims[2] - 2 : 0);
    cell.fx = q.x - cell.i0;
    cell.fy = q.y - cell.j0;
    cell.fz = q.z - cell.k0;
    if (g.dims[0] == 1) { cell.i0 = 0; cell.fx = 0.0; }
    if (g.dims[1] == 1) { cell.j0 = 0; cell.fy = 0.0; }
    if (g.dims[2] == 1) { cell.k0 = 0; cell.fz = 0.0; }
    return cell;
}

template <class Data>
double interp_cell(const Grid& g, const Data& data, const TrilinearCell& c) {
    const int i1 = std::min(c.i0 + 1, g.dims[0] - 1);
    const int j1 = std::min(c.j0 + 1, g.dims[1] - 1);
    const int k1 = std::min(c.k0 + 1, g.dims[2] - 1);
    const double v000 = data[g.index(c.i0, c.j0, c.k0)];
    const double v100 = data[g.index(i1, c.j0, c.k0)];
    const double v010 = data[g.index(c.i0, j1, c.k0)];
    const double v110 = data[g.index(i1, j1, c.k0)];
    const double v001 = data[g.index(c.i0, c.j0, k1)];
    const double v101 = data[g.index(i1, c.j0, k1)];
    const double v011 = data[g.index(c.i0, j1, k1)];
    const double v111 = data[g.index(i1, j1, k1)];
    const double c00 = v000 + (v100 - v000) * c.fx;
    const double c10 = v010 + (v110 - v010) * c.fx;
    const double c01 = v001 + (v101 - v001) * c.fx;
    const double c11 = v011 + (v111 - v011) * c.fx;
    const double c0 = c00 + (c10 - c00) * c.fy;
    const double c1 = c01 + (c11 - c01) * c.fy;
    return c0 + (c1 - c0) * c.fz;
}

} // namespace detail

template <class Data>
double sample_trilinear_data(const Grid& g, const Data& data, const Vec3& p,
                             OutsideRule rule = OutsideRule::Zero) {
    const detail::TrilinearCell cell = detail::locate(g, g.world_to_voxel(p), rule);
    if (!cell.inside) return 0.0;
    return detail::interp_cell(g, data, cell);
}

inline double sample_trilinear(const Volume3D& v, const Vec3& p,
                               OutsideRule rule = OutsideRule::Zero) {
    return sample_trilinear_data(v.grid, v.data, p, rule);
}

struct SampleWithGradient {
    double value = 0.0;
    Vec3 gradient{}; // d value / d world position
};

// Value and exact spatial derivative of the trilinear interpolant. The
// derivative is the cell-local slope (piecewise constant per axis inside a
// cell); outside the hull both are zero.
template <class Data>
SampleWithGradient sample_trilinear_gradient_data(const Grid& g, const Data& data, const Vec3& p) {
    SampleWithGradient out;
    const detail::TrilinearCell c = detail::locate(g, g.world_to_voxel(p), OutsideRule::Zero);
    if (!c.inside) return out;
    const int i1 = std::min(c.i0 + 1, g.dims[0] - 1);
    const int j1 = std::min(c.j0 + 1, g.dims[1] - 1);
    const int k1 = std::min(c.k0 + 1, g.dims[2] - 1);
    const double v000 = data[g.index(c.i0, c.j0, c.k0)];
    const double v100 = data[g.index(i1, c.j0, c.k0)];
    const double v010 = data[g.index(c.i0, j1, c.k0)];
    const double v110 = data[g.index(i1, j1, c.k0)];
    const double v001 = data[g.index(c.i0, c.j0, k1)];
    const double v101 = data[g.index(i1, c.j0, k1)];
    const double v011 = data[g.index(c.i0, j1, k1)];
    const double v111 = data[g.index(i1, j1, k1)];
    const double fx = c.fx, fy = c.fy, fz = c.fz;
    const double c00 = v000 + (v100 - v000) * fx;
    const double c10 = v010 + (v110 - v010) * fx;
    const double c01 = v001 + (v101 - v001) * fx;
    const double c11 = v011 + (v111 - v011) * fx;
    const double c0 = c00 + (c10 - c00) * fy;
    const double c1 = c01 + (c11 - c01) * fy;
    out.value = c0 + (c1 - c0) * fz;
    // derivative w.r.t. continuous voxel coordinates
    const double dx = ((v100 - v000) * (1 - fy) + (v110 - v010) * fy) * (1 - fz) +
                      ((v101 - v001) * (1 - fy) + (v111 - v011) * fy) * fz;
    const double dy = (c10 - c00) * (1 - fz) + (c11 - c01) * fz;
    const double dz = c1 - c0;
    // chain to world coordinates: c = diag(1/s) D^T (p - o)
    const Vec3 dc{dx / g.spacing.x, dy / g.spacing.y, dz / g.spacing.z};
    out.gradient = g.direction * dc;
    return out;
}

inline SampleWithGradient sample_trilinear_gradient(const Volume3D& v, const Vec3& p) {
    return sample_trilinear_gradient_data(v.grid, v.data, p);
}

inline Vec3 sample_field(const VectorField3& f, const Vec3& p,
                         OutsideRule rule = OutsideRule::Zero) {
    return {sample_trilinear_data(f.grid, f.comp[0], p, rule),
            sample_trilinear_data(f.grid, f.comp[1], p, rule),
            sample_trilinear_data(f.grid, f.comp[2], p, rule)};
}

// --- pyramid ---------------------------------------------------------------

struct Pyramid {
    std::vector<Volume3D> levels; // index 0 = finest
};

namespace detail {

// 3-tap (1/4, 1/2, 1/4) smoothing along one axis, boundaries mirrored about
// the edge sample (f[-1] := f[1], f[n] := f[n-2]).
inline void smooth_axis(const Grid& g, const std::vector<float>& in, std::vector<float>& out,
                        int axis) {
    const int nx = g.dims[0], ny = g.dims[1], nz = g.dims[2];
    const int n = g.dims[axis];
    const std::size_t stride = axis == 0 ? 1
                             : axis == 1 ? static_cast<std::size_t>(nx)
                                         : static_cast<std::size_t>(nx) * ny;
    const int la = axis == 0 ? ny : nx;
    const int lb = axis == 2 ? ny : nz;
    par::parallel_for(static_cast<std::int64_t>(la) * lb, [&](std::int64_t b, std::int64_t e) {
        for (std::int64_t line = b; line < e; ++line) {
            const int a = static_cast<int>(line % la);
            const int bb = static_cast<int>(line / la);
            std::size_t base;
            if (axis == 0) base = g.index(0, a, bb);
            else if (axis == 1) base = g.index(a, 0, bb);
            else base = g.index(a, bb, 0);
            for (int i = 0; i < n; ++i) {
                const int im = i == 0 ? (n > 1 ? 1 : 0) : i - 1;
                const int ip = i == n - 1 ? (n > 1 ? n - 2 : n - 1) : i + 1;
                const double v = 0.25 * in[base + static_cast<std::size_t>(im) * stride] +
                                 0.5 * in[base + static_cast<std::size_t>(i) * stride] +
                                 0.25 * in[base + static_cast<std::size_t>(ip) * stride];
                out[base + static_cast<std::size_t>(i) * stride] = static_cast<float>(v);
            }
        }
    });
}

} // namespace detail

// Smooth with the per-axis 3-tap kernel, then keep every second voxel
// (indices 0, 2, 4, ...). Output dims = ceil(dims/2), spacing doubled; the
// retained index-0 voxel keeps the origin unchanged.
inline Volume3D downsample(const Volume3D& v) {
    for (int a = 0; a < 3; ++a)
        if (v.grid.dims[a] < 2)
            throw DimensionTooSmall("downsample: all dims must be >= 2");
    std::vector<float> tmp(v.data.size()), smoothed = v.data;
    for (int axis = 0; axis < 3; ++axis) {
        detail::smooth_axis(v.grid, smoothed, tmp, axis);
        smoothed.swap(tmp);
    }
    Grid cg;
    for (int a = 0; a < 3; ++a) cg.dims[a] = (v.grid.dims[a] + 1) / 2;
    cg.spacing = v.grid.spacing * 2.0;
    cg.origin = v.grid.origin;
    cg.direction = v.grid.direction;
    Volume3D coarse = make_volume(cg);
    for (int k = 0; k < cg.dims[2]; ++k)
        for (int j = 0; j < cg.dims[1]; ++j)
            for (int i = 0; i < cg.dims[0]; ++i)
                coarse.at(i, j, k) = smoothed[v.grid.index(2 * i, 2 * j, 2 * k)];
    return coarse;
}

inline Pyramid build_pyramid(const Volume3D& v, int levels) {
    if (levels < 1) throw DataError("build_pyramid: levels must be >= 1");
    Pyramid p;
    p.levels.reserve(static_cast<std::size_t>(levels));
    p.levels.push_back(v);
    for (int l = 1; l < levels; ++l) p.levels.push_back(downsample(p.levels.back()));
    return p;
}

} // namespace dtreg

#endif
