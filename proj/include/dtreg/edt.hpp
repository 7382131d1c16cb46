#ifndef DTREG_EDT_HPP
#define DTREG_EDT_HPP

#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <vector>

#include "dtreg/errors.hpp"
#include "dtreg/parallel.hpp"
#include "dtreg/volume.hpp"

namespace dtreg {

enum class EdtMode { Interior, Exterior, Signed };

// Distance map in mm on the mask's grid. Interior mode: 0 on background,
// distance to the nearest background voxel center on foreground.
struct DistanceMap {
    Volume3D volume;
    EdtMode mode = EdtMode::Interior;
};

namespace detail {

constexpr double kInf = std::numeric_limits<double>::infinity();

struct EdtWorkspace {
    std::vector<double> d;
    std::vector<int> v;
    std::vector<double> z;
    void resize(std::size_t n) {
        d.resize(n);
        v.resize(n);
        z.resize(n + 1);
    }
};

// One lower-envelope pass over a line of squared distances:
// out[i] = min_j ((i-j)^2 step^2 + f[j]). Parabolas with infinite height are
// skipped, so all-infinity lines pass through unchanged. Envelope positions
// are parameterized by the physical coordinate i*step.
inline void edt_1d_squared_inplace(double* f, int n, double step, EdtWorkspace& ws) {
    ws.resize(static_cast<std::size_t>(n));
    int k = -1;
    for (int i = 0; i < n; ++i) {
        if (f[i] == kInf) continue;
        const double xi = i * step;
        const double qi = f[i] + xi * xi;
        while (k >= 0) {
            const double xv = ws.v[k] * step;
            const double s = (qi - (f[ws.v[k]] + xv * xv)) / (2.0 * (xi - xv));
            if (s <= ws.z[k]) {
                --k;
            } else {
                ++k;
                ws.v[k] = i;
                ws.z[k] = s;
                ws.z[k + 1] = kInf;
                break;
            }
        }
        if (k < 0) {
            k = 0;
            ws.v[0] = i;
            ws.z[0] = -kInf;
            ws.z[1] = kInf;
        }
    }
    if (k < 0) return; // no finite entries
    int idx = 0;
    for (int i = 0; i < n; ++i) {
        const double xq = i * step;
        while (ws.z[idx + 1] < xq) ++idx;
        const double t = (i - ws.v[idx]) * step;
        ws.d[static_cast<std::size_t>(i)] = t * t + f[ws.v[idx]];
    }
    for (int i = 0; i < n; ++i) f[i] = ws.d[static_cast<std::size_t>(i)];
}

// Axis pass over a full volume of squared distances; lines are independent.
inline void edt_axis_pass(const Grid& g, std::vector<double>& sq, int axis) {
    const int nx = g.dims[0], ny = g.dims[1], nz = g.dims[2];
    const int n = g.dims[axis];
    const double step = g.spacing[axis];
    const std::size_t stride = axis == 0 ? 1
                             : axis == 1 ? static_cast<std::size_t>(nx)
                                         : static_cast<std::size_t>(nx) * ny;
    const int la = axis == 0 ? ny : nx;
    const int lb = axis == 2 ? ny : nz;
    par::parallel_for(
        static_cast<std::int64_t>(la) * lb,
        [&](std::int64_t b, std::int64_t e) {
            EdtWorkspace ws;
            std::vector<double> line(static_cast<std::size_t>(n));
            for (std::int64_t li = b; li < e; ++li) {
                const int a = static_cast<int>(li % la);
                const int bb = static_cast<int>(li / la);
                std::size_t base;
                if (axis == 0) base = g.index(0, a, bb);
                else if (axis == 1) base = g.index(a, 0, bb);
                else base = g.index(a, bb, 0);
                if (stride == 1) {
                    edt_1d_squared_inplace(sq.data() + base, n, step, ws);
                } else {
                    for (int i = 0; i < n; ++i) line[static_cast<std::size_t>(i)] = sq[base + i * stride];
                    edt_1d_squared_inplace(line.data(), n, step, ws);
                    for (int i = 0; i < n; ++i) sq[base + i * stride] = line[static_cast<std::size_t>(i)];
                }
            }
        },
        64);
}

inline void check_classes(const Mask3D& mask, bool distance_to_background) {
    bool has_fg = false, has_bg = false;
    for (std::uint8_t v : mask.data) {
        (v ? has_fg : has_bg) = true;
        if (has_fg && has_bg) return;
    }
    if (distance_to_background) {
        // distances measured from foreground voxels to background
        if (has_fg && !has_bg)
            throw EmptyBackground("interior distance undefined without background voxels");
    } else {
        if (has_bg && !has_fg)
            throw EmptyForeground("exterior distance undefined without foreground voxels");
    }
}

} // namespace detail

// Squared 1-D pass as a pure function (spec surface); values in [0, +inf].
inline std::vector<double> edt_1d_squared(std::span<const double> f, double step) {
    std::vector<double> out(f.begin(), f.end());
    detail::EdtWorkspace ws;
    if (!out.empty())
        detail::edt_1d_squared_inplace(out.data(), static_cast<int>(out.size()), step, ws);
    return out;
}

// Squared distance-to-nearest-background (interior) or -foreground
// (exterior) for every voxel, in exact separable passes (x, then y, then z).
inline std::vector<double> edt3_squared(const Mask3D& mask, EdtMode mode) {
    if (mode == EdtMode::Signed)
        throw DataError("edt3_squared: signed mode has no squared form");
    const bool interior = mode == EdtMode::Interior;
    detail::check_classes(mask, interior);
    std::vector<double> sq(mask.data.size());
    for (std::size_t i = 0; i < mask.data.size(); ++i) {
        const bool zero_set = interior ? mask.data[i] == 0 : mask.data[i] != 0;
        sq[i] = zero_set ? 0.0 : detail::kInf;
    }
    for (int axis = 0; axis < 3; ++axis) detail::edt_axis_pass(mask.grid, sq, axis);
    return sq;
}

inline DistanceMap edt3(const Mask3D& mask, EdtMode mode = EdtMode::Interior) {
    DistanceMap out;
    out.mode = mode;
    out.volume.grid = mask.grid;
    out.volume.data.resize(mask.data.size());
    if (mode == EdtMode::Signed) {
        const std::vector<double> in = edt3_squared(mask, EdtMode::Interior);
        const std::vector<double> ex = edt3_squared(mask, EdtMode::Exterior);
        for (std::size_t i = 0; i < in.size(); ++i)
            out.volume.data[i] = static_cast<float>(std::sqrt(in[i]) - std::sqrt(ex[i]));
        return out;
    }
    const std::vector<double> sq = edt3_squared(mask, mode);
    for (std::size_t i = 0; i < sq.size(); ++i)
        out.volume.data[i] = static_cast<float>(std::sqrt(sq[i]));
    return out;
}

// All-pairs reference: for each voxel of the source class, minimize the
// spacing-weighted squared offset over every voxel of the target class.
// Guarded to small grids; per-candidate arithmetic matches the separable
// passes term for term so results agree exactly.
inline std::vector<double> edt3_oracle_squared(const Mask3D& mask, EdtMode mode) {
    if (mode == EdtMode::Signed)
        throw DataError("edt3_oracle_squared: signed mode has no squared form");
    const Grid& g = mask.grid;
    if (g.dims[0] > 32 || g.dims[1] > 32 || g.dims[2] > 32)
        throw GridTooLarge("edt3_oracle: grids above 32^3 are rejected");
    const bool interior = mode == EdtMode::Interior;
    detail::check_classes(mask, interior);
    std::vector<std::array<int, 3>> targets;
    for (int k = 0; k < g.dims[2]; ++k)
        for (int j = 0; j < g.dims[1]; ++j)
            for (int i = 0; i < g.dims[0]; ++i) {
                const bool is_target = interior ? mask.at(i, j, k) == 0 : mask.at(i, j, k) != 0;
                if (is_target) targets.push_back({i, j, k});
            }
    std::vector<double> sq(mask.data.size());
    const double hx = g.spacing.x, hy = g.spacing.y, hz = g.spacing.z;
    for (int k = 0; k < g.dims[2]; ++k)
        for (int j = 0; j < g.dims[1]; ++j)
            for (int i = 0; i < g.dims[0]; ++i) {
                const std::size_t idx = g.index(i, j, k);
                const bool on_zero_set = interior ? mask.at(i, j, k) == 0 : mask.at(i, j, k) != 0;
                if (on_zero_set) {
                    sq[idx] = 0.0;
                    continue;
                }
                double best = detail::kInf;
                for (const auto& t : targets) {
                    const double dx = (i - t[0]) * hx;
                    const double dy = (j - t[1]) * hy;
                    const double dz = (k - t[2]) * hz;
                    // same summation order as the separable passes (x, y, z)
                    const double d = dz * dz + (dy * dy + dx * dx);
                    if (d < best) best = d;
                }
                sq[idx] = best;
            }
    return sq;
}

inline DistanceMap edt3_oracle(const Mask3D& mask, EdtMode mode = EdtMode::Interior) {
    DistanceMap out;
    out.mode = mode;
    out.volume.grid = mask.grid;
    out.volume.data.resize(mask.data.size());
    if (mode == EdtMode::Signed) {
        const std::vector<double> in = edt3_oracle_squared(mask, EdtMode::Interior);
        const std::vector<double> ex = edt3_oracle_squared(mask, EdtMode::Exterior);
        for (std::size_t i = 0; i < in.size(); ++i)
            out.volume.data[i] = static_cast<float>(std::sqrt(in[i]) - std::sqrt(ex[i]));
        return out;
    }
    const std::vector<double> sq = edt3_oracle_squared(mask, mode);
    for (std::size_t i = 0; i < sq.size(); ++i)
        out.volume.data[i] = static_cast<float>(std::sqrt(sq[i]));
    return out;
}

} // namespace dtreg

#endif
