#ifndef DTREG_SYNTH_HPP
#define DTREG_SYNTH_HPP

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "dtreg/edt.hpp"
#include "dtreg/errors.hpp"
#include "dtreg/metrics_types.hpp"
#include "dtreg/rng.hpp"
#include "dtreg/transform.hpp"
#include "dtreg/volume.hpp"

namespace dtreg::synth {

// A desk-scale surrogate case: distance maps of sulci-like sheet structures,
// a known smooth deformation, and landmark pairs placed on the structures.
//
// Geometry convention: after(x) = before(x + u(x)) with u = true_field, so a
// feature of the before map at p appears in the after map at the preimage q
// with p = q + u(q). Landmark pairs are generated to satisfy exactly that
// relation: applying the field to the after landmarks reproduces the before
// landmarks.
struct SynthCase {
    DistanceMap before_map; // template image
    DistanceMap after_map;  // reference image (warped, with erased cavity)
    DeformationField true_field;
    LandmarkSet landmarks_before;
    LandmarkSet landmarks_after;
    std::uint64_t seed = 0;
    Vec3 cavity_lo, cavity_hi; // world bounds of the erased block
};

namespace detail {

struct Frame {
    Vec3 n, e1, e2; // orthonormal
};

inline Frame random_frame(SplitMix64& rng) {
    // normal from spherical angles, then any orthonormal completion
    const double z = rng.uniform(-1.0, 1.0);
    const double phi = rng.uniform(0.0, 2.0 * M_PI);
    const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
    Frame f;
    f.n = {r * std::cos(phi), r * std::sin(phi), z};
    const Vec3 seed_axis = std::abs(f.n.x) < 0.8 ? Vec3{1, 0, 0} : Vec3{0, 1, 0};
    const Vec3 e1_raw = seed_axis - f.n * f.n.dot(seed_axis);
    f.e1 = e1_raw / e1_raw.norm();
    f.e2 = {f.n.y * f.e1.z - f.n.z * f.e1.y, f.n.z * f.e1.x - f.n.x * f.e1.z,
            f.n.x * f.e1.y - f.n.y * f.e1.x};
    return f;
}

// one curved sheet patch: |n.(x-c) - bend(q1,q2)| <= half_thickness within an
// elliptical in-plane extent
struct Sheet {
    Vec3 center;
    Frame frame;
    double bend11, bend22, bend12;
    double ext1, ext2;
    double half_thickness;

    bool contains(const Vec3& p) const {
        const Vec3 d = p - center;
        const double q1 = frame.e1.dot(d);
        const double q2 = frame.e2.dot(d);
        const double e = (q1 / ext1) * (q1 / ext1) + (q2 / ext2) * (q2 / ext2);
        if (e > 1.0) return false;
        const double s = frame.n.dot(d) - (bend11 * q1 * q1 + bend22 * q2 * q2 + bend12 * q1 * q2);
        return std::abs(s) <= half_thickness;
    }
};

} // namespace detail

// 3-8 smooth curved sheets, 1-3 voxels thick, placed away from the volume
// boundary; deterministic per seed, foreground fraction within [0.5%, 10%].
inline Mask3D gen_sulci_mask(std::uint64_t seed, std::array<int, 3> dims, Vec3 spacing) {
    for (int a = 0; a < 3; ++a)
        if (dims[a] < 32) throw DataError("gen_sulci_mask: dims must be >= 32 per axis");
    Grid g;
    g.dims = dims;
    g.spacing = spacing;
    Mask3D mask;
    mask.grid = g;
    mask.data.assign(g.voxel_count(), 0);

    const Vec3 extent{(dims[0] - 1) * spacing.x, (dims[1] - 1) * spacing.y,
                      (dims[2] - 1) * spacing.z};
    const double size = std::min({extent.x, extent.y, extent.z});

    SplitMix64 rng = SplitMix64::stream(seed, 1);
    const int sheet_count = 3 + static_cast<int>(rng.next_below(6)); // 3..8

    auto rasterize = [&](const detail::Sheet& s) {
        for (int k = 0; k < dims[2]; ++k)
            for (int j = 0; j < dims[1]; ++j)
                for (int i = 0; i < dims[0]; ++i)
                    if (s.contains(g.voxel_center(i, j, k))) mask.at(i, j, k) = 1;
    };

    auto make_sheet = [&]() {
        detail::Sheet s;
        s.center = {rng.uniform(0.38, 0.62) * extent.x, rng.uniform(0.38, 0.62) * extent.y,
                    rng.uniform(0.38, 0.62) * extent.z};
        s.frame = detail::random_frame(rng);
        const double kappa = rng.uniform(0.005, 0.02); // 1/mm, gentle bending
        s.bend11 = rng.uniform(-kappa, kappa);
        s.bend22 = rng.uniform(-kappa, kappa);
        s.bend12 = rng.uniform(-kappa, kappa) * 0.5;
        s.ext1 = rng.uniform(0.16, 0.26) * size;
        s.ext2 = rng.uniform(0.16, 0.26) * size;
        const double thickness_vox = 1.0 + rng.next_below(3); // 1..3 voxels
        s.half_thickness = 0.5 * thickness_vox * g.min_spacing();
        return s;
    };

    for (int n = 0; n < sheet_count; ++n) rasterize(make_sheet());

    auto fraction = [&] {
        std::size_t fg = 0;
        for (auto v : mask.data) fg += v;
        return static_cast<double>(fg) / static_cast<double>(mask.data.size());
    };
    // deterministic top-up for sparse draws; the per-sheet volume bound keeps
    // the total below the cap
    for (int extra = 0; extra < 20 && fraction() < 0.005; ++extra) rasterize(make_sheet());
    return mask;
}

// Random 5^3 control lattice upsampled trilinearly and rescaled so the
// maximum displacement magnitude equals max_mag; requires
// max_mag <= 0.4 * control spacing, which bounds the interpolant's slopes
// and keeps id+u fold-free.
inline DeformationField gen_smooth_field(std::uint64_t seed, const Grid& grid, double max_mag) {
    if (!(max_mag > 0.0)) throw DataError("gen_smooth_field: max_mag must be > 0");
    constexpr int kNodes = 5;
    const Vec3 lo = grid.voxel_to_world({0, 0, 0});
    const Vec3 hi = grid.voxel_to_world({static_cast<double>(grid.dims[0] - 1),
                                         static_cast<double>(grid.dims[1] - 1),
                                         static_cast<double>(grid.dims[2] - 1)});
    const Vec3 ctrl_spacing = (hi - lo) / (kNodes - 1);
    const double min_ctrl = std::min({ctrl_spacing.x, ctrl_spacing.y, ctrl_spacing.z});
    if (max_mag > 0.4 * min_ctrl)
        throw DataError("gen_smooth_field: max_mag exceeds 0.4 x control spacing");

    SplitMix64 rng = SplitMix64::stream(seed, 2);
    std::array<std::array<double, kNodes * kNodes * kNodes>, 3> ctrl{};
    for (int d = 0; d < 3; ++d)
        for (auto& v : ctrl[static_cast<std::size_t>(d)]) v = rng.uniform(-1.0, 1.0);

    auto node = [&](int d, int a, int b, int c) -> double& {
        return ctrl[static_cast<std::size_t>(d)]
                   [static_cast<std::size_t>(a + kNodes * (b + kNodes * c))];
    };
    auto interp = [&](int d, const Vec3& p) {
        Vec3 t = (p - lo).cwise_div(hi - lo) * (kNodes - 1.0);
        t.x = std::clamp(t.x, 0.0, kNodes - 1.0);
        t.y = std::clamp(t.y, 0.0, kNodes - 1.0);
        t.z = std::clamp(t.z, 0.0, kNodes - 1.0);
        const int a = std::min(static_cast<int>(t.x), kNodes - 2);
        const int b = std::min(static_cast<int>(t.y), kNodes - 2);
        const int c = std::min(static_cast<int>(t.z), kNodes - 2);
        const double fx = t.x - a, fy = t.y - b, fz = t.z - c;
        double v = 0.0;
        for (int dz = 0; dz < 2; ++dz)
            for (int dy = 0; dy < 2; ++dy)
                for (int dx = 0; dx < 2; ++dx) {
                    const double w = (dx ? fx : 1 - fx) * (dy ? fy : 1 - fy) * (dz ? fz : 1 - fz);
                    v += w * node(d, a + dx, b + dy, c + dz);
                }
        return v;
    };

    DeformationField f;
    f.resize_zero(grid);
    const int nx = grid.dims[0], ny = grid.dims[1];
    for (std::size_t idx = 0; idx < grid.voxel_count(); ++idx) {
        const int i = static_cast<int>(idx % static_cast<std::size_t>(nx));
        const int j = static_cast<int>((idx / static_cast<std::size_t>(nx)) % static_cast<std::size_t>(ny));
        const int k = static_cast<int>(idx / (static_cast<std::size_t>(nx) * ny));
        const Vec3 p = grid.voxel_center(i, j, k);
        f.set(idx, {interp(0, p), interp(1, p), interp(2, p)});
    }
    const double peak = f.max_norm();
    if (peak <= 0.0) throw NumericalError("gen_smooth_field: degenerate control lattice");
    const double scale = max_mag / peak;
    for (int d = 0; d < 3; ++d)
        for (auto& v : f.comp[d]) v *= scale;
    return f;
}

inline SynthCase make_case(std::uint64_t seed, std::array<int, 3> dims, Vec3 spacing,
                           double max_mag) {
    SynthCase sc;
    sc.seed = seed;

    const Mask3D mask = gen_sulci_mask(seed, dims, spacing);
    sc.before_map = edt3(mask, EdtMode::Interior);
    const Grid& g = sc.before_map.volume.grid;
    sc.true_field = gen_smooth_field(seed, g, max_mag);

    // after image: pull-back warp of the before map, then an erased block
    // standing in for the resection cavity
    sc.after_map.mode = EdtMode::Interior;
    sc.after_map.volume = warp_image(sc.before_map.volume, sc.true_field);

    SplitMix64 rng = SplitMix64::stream(seed, 3);
    const Vec3 extent{(dims[0] - 1) * spacing.x, (dims[1] - 1) * spacing.y,
                      (dims[2] - 1) * spacing.z};
    const Vec3 cavity_center{g.origin.x + rng.uniform(0.3, 0.7) * extent.x,
                             g.origin.y + rng.uniform(0.3, 0.7) * extent.y,
                             g.origin.z + rng.uniform(0.3, 0.7) * extent.z};
    const Vec3 cavity_half{rng.uniform(4.0, 7.0), rng.uniform(4.0, 7.0), rng.uniform(4.0, 7.0)};
    sc.cavity_lo = cavity_center - cavity_half;
    sc.cavity_hi = cavity_center + cavity_half;
    for (int k = 0; k < dims[2]; ++k)
        for (int j = 0; j < dims[1]; ++j)
            for (int i = 0; i < dims[0]; ++i) {
                const Vec3 p = g.voxel_center(i, j, k);
                if (p.x >= sc.cavity_lo.x && p.x <= sc.cavity_hi.x && p.y >= sc.cavity_lo.y &&
                    p.y <= sc.cavity_hi.y && p.z >= sc.cavity_lo.z && p.z <= sc.cavity_hi.z)
                    sc.after_map.volume.at(i, j, k) = 0.0f;
            }

    // landmarks on high-value ridge voxels of the before map, excluded from
    // the cavity neighborhood and the volume rim
    float peak = 0.0f;
    for (float v : sc.before_map.volume.data) peak = std::max(peak, v);

    const int target = 10 + static_cast<int>(rng.next_below(9)); // 10..18
    SplitMix64 pick = SplitMix64::stream(seed, 4);

    auto solve_after_point = [&](const Vec3& p) {
        // fixed point of q = p - u(q); converges since max |grad u| < 1
        Vec3 q = p;
        for (int it = 0; it < 60; ++it) {
            const Vec3 next = p - sample_field(sc.true_field, q, OutsideRule::Clamp);
            if ((next - q).norm() < 1e-13) return next;
            q = next;
        }
        return q;
    };
    auto near_cavity = [&](const Vec3& p, double margin) {
        return p.x >= sc.cavity_lo.x - margin && p.x <= sc.cavity_hi.x + margin &&
               p.y >= sc.cavity_lo.y - margin && p.y <= sc.cavity_hi.y + margin &&
               p.z >= sc.cavity_lo.z - margin && p.z <= sc.cavity_hi.z + margin;
    };
    auto inside_margin = [&](const Vec3& p, double margin) {
        const Vec3 lo = g.voxel_to_world({0, 0, 0});
        const Vec3 hi = g.voxel_to_world({static_cast<double>(dims[0] - 1),
                                          static_cast<double>(dims[1] - 1),
                                          static_cast<double>(dims[2] - 1)});
        return p.x >= lo.x + margin && p.x <= hi.x - margin && p.y >= lo.y + margin &&
               p.y <= hi.y - margin && p.z >= lo.z + margin && p.z <= hi.z - margin;
    };

    struct Attempt {
        double value_frac, separation, disp_floor;
    };
    // landmarks must sit on strongly displaced ridge voxels first; later
    // attempts relax the criteria so sparse seeds still yield enough points
    const Attempt attempts[] = {{0.7, 6.0, 0.25 * max_mag}, {0.5, 4.5, 0.25 * max_mag},
                                {0.5, 3.0, 0.12 * max_mag}, {0.35, 2.5, 0.0}};
    for (const Attempt& att : attempts) {
        std::vector<std::size_t> candidates;
        for (std::size_t idx = 0; idx < sc.before_map.volume.data.size(); ++idx)
            if (sc.before_map.volume.data[idx] >= att.value_frac * peak) candidates.push_back(idx);
        // deterministic shuffle
        for (std::size_t i = candidates.size(); i > 1; --i)
            std::swap(candidates[i - 1], candidates[pick.next_below(i)]);

        sc.landmarks_before.entries.clear();
        sc.landmarks_after.entries.clear();
        std::vector<Vec3> accepted;
        for (std::size_t idx : candidates) {
            if (static_cast<int>(accepted.size()) >= target) break;
            const int i = static_cast<int>(idx % static_cast<std::size_t>(dims[0]));
            const int j = static_cast<int>((idx / static_cast<std::size_t>(dims[0])) %
                                           static_cast<std::size_t>(dims[1]));
            const int k = static_cast<int>(idx / (static_cast<std::size_t>(dims[0]) * dims[1]));
            const Vec3 p = g.voxel_center(i, j, k);
            if (!inside_margin(p, 6.0)) continue;
            bool spread = true;
            for (const Vec3& a : accepted)
                if ((p - a).norm() < att.separation) {
                    spread = false;
                    break;
                }
            if (!spread) continue;
            const Vec3 q = solve_after_point(p);
            if (!inside_margin(q, 4.0)) continue;
            if (near_cavity(p, 5.0) || near_cavity(q, 5.0)) continue;
            if ((p - q).norm() < att.disp_floor) continue;
            accepted.push_back(p);
            const std::string id = std::to_string(accepted.size());
            sc.landmarks_before.entries.push_back({id, p});
            sc.landmarks_after.entries.push_back({id, q});
        }
        if (static_cast<int>(accepted.size()) >= target) break;
    }
    if (sc.landmarks_before.entries.size() < 10)
        throw NumericalError("make_case: could not place enough landmarks for seed " +
                             std::to_string(seed));
    return sc;
}

} // namespace dtreg::synth

#endif
