#ifndef DTREG_TRANSFORM_HPP
#define DTREG_TRANSFORM_HPP

#include <cmath>
#include <cstdint>

#include "dtreg/core.hpp"
#include "dtreg/errors.hpp"
#include "dtreg/metrics_types.hpp"
#include "dtreg/parallel.hpp"
#include "dtreg/volume.hpp"

namespace dtreg {

// 6-DOF rigid transform: Euler angles (rx, ry, rz) composed as
// Q = Rz(rz) * Ry(ry) * Rx(rx), rotation about `center`, then translation.
// Mapped point: M p = Q (p - center) + center + translation.
struct RigidParams {
    Vec3 angles{};      // radians, each in (-pi, pi]
    Vec3 translation{}; // mm
    Vec3 center{};      // mm, world rotation center
};

namespace detail {

inline Mat3 rotation_x(double a) {
    Mat3 r = Mat3::identity();
    const double c = std::cos(a), s = std::sin(a);
    r(1, 1) = c; r(1, 2) = -s;
    r(2, 1) = s; r(2, 2) = c;
    return r;
}
inline Mat3 rotation_y(double a) {
    Mat3 r = Mat3::identity();
    const double c = std::cos(a), s = std::sin(a);
    r(0, 0) = c; r(0, 2) = s;
    r(2, 0) = -s; r(2, 2) = c;
    return r;
}
inline Mat3 rotation_z(double a) {
    Mat3 r = Mat3::identity();
    const double c = std::cos(a), s = std::sin(a);
    r(0, 0) = c; r(0, 1) = -s;
    r(1, 0) = s; r(1, 1) = c;
    return r;
}

inline Mat3 d_rotation_x(double a) {
    Mat3 r{};
    r.m.fill(0.0);
    const double c = std::cos(a), s = std::sin(a);
    r(1, 1) = -s; r(1, 2) = -c;
    r(2, 1) = c; r(2, 2) = -s;
    return r;
}
inline Mat3 d_rotation_y(double a) {
    Mat3 r{};
    r.m.fill(0.0);
    const double c = std::cos(a), s = std::sin(a);
    r(0, 0) = -s; r(0, 2) = c;
    r(2, 0) = -c; r(2, 2) = -s;
    return r;
}
inline Mat3 d_rotation_z(double a) {
    Mat3 r{};
    r.m.fill(0.0);
    const double c = std::cos(a), s = std::sin(a);
    r(0, 0) = -s; r(0, 1) = -c;
    r(1, 0) = c; r(1, 1) = -s;
    return r;
}

// Nearest rotation in the Frobenius sense via Higham's polar iteration,
// X <- (X + X^-T)/2; quadratic convergence for nonsingular input.
inline Mat3 polar_rotation(const Mat3& a) {
    Mat3 x = a;
    for (int it = 0; it < 60; ++it) {
        const Mat3 next = (x + x.inverse().transposed()) * 0.5;
        const double diff = (next - x).frobenius_norm();
        x = next;
        if (diff < 1e-15) break;
    }
    return x;
}

} // namespace detail

inline Mat3 rotation_matrix(const Vec3& angles) {
    return detail::rotation_z(angles.z) * detail::rotation_y(angles.y) *
           detail::rotation_x(angles.x);
}

// d rotation / d angle component (0 = rx, 1 = ry, 2 = rz)
inline Mat3 rotation_matrix_derivative(const Vec3& angles, int which) {
    const Mat3 rx = which == 0 ? detail::d_rotation_x(angles.x) : detail::rotation_x(angles.x);
    const Mat3 ry = which == 1 ? detail::d_rotation_y(angles.y) : detail::rotation_y(angles.y);
    const Mat3 rz = which == 2 ? detail::d_rotation_z(angles.z) : detail::rotation_z(angles.z);
    return rz * ry * rx;
}

inline Mat44 rigid_to_matrix(const RigidParams& r) {
    const Mat3 q = rotation_matrix(r.angles);
    // M p = Q p + (center - Q center + translation)
    const Vec3 t = r.center - q * r.center + r.translation;
    return Mat44::from_linear_translation(q, t);
}

// Extracts the nearest rotation (polar factor) plus the translation
// consistent with `center`. For already-rigid input the linear block is used
// directly, so the roundtrip through rigid_to_matrix is exact to rounding.
// `rigid_deviation`, when given, receives the Frobenius distance between the
// linear block and its polar factor; callers warn above 1e-6.
inline RigidParams matrix_to_rigid(const Mat44& m, const Vec3& center,
                                   double* rigid_deviation = nullptr) {
    const Mat3 a = m.linear();
    if (a.det() <= 0.0)
        throw NonOrientationPreserving("matrix_to_rigid: linear part has non-positive determinant");
    const Mat3 ata = a.transposed() * a;
    double ortho_err = 0.0;
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j)
            ortho_err = std::max(ortho_err, std::abs(ata(i, j) - (i == j ? 1.0 : 0.0)));
    const Mat3 q = ortho_err < 1e-12 ? a : detail::polar_rotation(a);
    const double deviation = (a - q).frobenius_norm();
    if (rigid_deviation) *rigid_deviation = deviation;

    RigidParams out;
    out.center = center;
    // Q = Rz(c) Ry(b) Rx(a): row 2 is (-sin b, cos b sin a, cos b cos a)
    const double sb = -q(2, 0);
    out.angles.y = std::asin(std::min(1.0, std::max(-1.0, sb)));
    if (std::abs(std::cos(out.angles.y)) > 1e-9) {
        out.angles.x = std::atan2(q(2, 1), q(2, 2));
        out.angles.z = std::atan2(q(1, 0), q(0, 0));
    } else {
        // gimbal lock: rx and rz are coupled; fold everything into rx
        out.angles.x = std::atan2(-q(1, 2), q(1, 1));
        out.angles.z = 0.0;
    }
    // m p = Q p + t0  with  t0 = center - Q center + translation
    const Vec3 t0 = m.translation_part();
    out.translation = t0 - center + q * center;
    return out;
}

inline Mat44 invert_rigid_matrix(const Mat44& m) {
    const Mat3 qt = m.linear().transposed();
    const Vec3 t = (qt * m.translation_part()) * -1.0;
    return Mat44::from_linear_translation(qt, t);
}

inline RigidParams invert_rigid(const RigidParams& r) {
    return matrix_to_rigid(invert_rigid_matrix(rigid_to_matrix(r)), r.center);
}

// u(x) = M x - x at every voxel center of `grid`.
inline DeformationField rigid_to_field(const RigidParams& r, const Grid& grid) {
    const Mat44 m = rigid_to_matrix(r);
    DeformationField f;
    f.resize_zero(grid);
    const int nx = grid.dims[0], ny = grid.dims[1];
    par::parallel_for(static_cast<std::int64_t>(grid.voxel_count()), [&](std::int64_t b, std::int64_t e) {
        for (std::int64_t li = b; li < e; ++li) {
            const auto idx = static_cast<std::size_t>(li);
            const int i = static_cast<int>(li % nx);
            const int j = static_cast<int>((li / nx) % ny);
            const int k = static_cast<int>(li / (static_cast<std::int64_t>(nx) * ny));
            const Vec3 x = grid.voxel_center(i, j, k);
            f.set(idx, m.apply(x) - x);
        }
    });
    return f;
}

inline DeformationField rigid_to_field(const RigidParams& r, const Volume3D& grid_of) {
    return rigid_to_field(r, grid_of.grid);
}

// out(x) = template(x + u(x)) on the field's grid; zero outside the template
// hull.
inline Volume3D warp_image(const Volume3D& tmpl, const DeformationField& field) {
    Volume3D out = make_volume(field.grid);
    const Grid& g = field.grid;
    const int nx = g.dims[0], ny = g.dims[1];
    par::parallel_for(static_cast<std::int64_t>(g.voxel_count()), [&](std::int64_t b, std::int64_t e) {
        for (std::int64_t li = b; li < e; ++li) {
            const auto idx = static_cast<std::size_t>(li);
            const int i = static_cast<int>(li % nx);
            const int j = static_cast<int>((li / nx) % ny);
            const int k = static_cast<int>(li / (static_cast<std::int64_t>(nx) * ny));
            const Vec3 x = g.voxel_center(i, j, k);
            out.data[idx] = static_cast<float>(sample_trilinear(tmpl, x + field.at(idx)));
        }
    });
    return out;
}

// p' = p + u(p); points outside the field grid keep their position and are
// flagged through `outside` when provided.
inline LandmarkSet warp_points(const DeformationField& field, const LandmarkSet& pts,
                               std::vector<bool>* outside = nullptr) {
    LandmarkSet out;
    out.entries.reserve(pts.entries.size());
    if (outside) outside->assign(pts.entries.size(), false);
    const Grid& g = field.grid;
    for (std::size_t n = 0; n < pts.entries.size(); ++n) {
        const Landmark& lm = pts.entries[n];
        const Vec3 c = g.world_to_voxel(lm.position);
        const bool in = c.x >= 0.0 && c.y >= 0.0 && c.z >= 0.0 && c.x <= g.dims[0] - 1 &&
                        c.y <= g.dims[1] - 1 && c.z <= g.dims[2] - 1;
        Vec3 u{};
        if (in) u = sample_field(field, lm.position, OutsideRule::Zero);
        else if (outside) (*outside)[n] = true;
        out.entries.push_back({lm.id, lm.position + u});
    }
    return out;
}

// Displacement vectors are in mm, hence scale-free: prolongation is plain
// trilinear resampling onto the finer grid (edge-clamped so constant fields
// stay constant across the half-voxel rim).
inline DeformationField prolong_field(const DeformationField& field, const Grid& finer) {
    const Grid& cg = field.grid;
    // both grids must cover the same world extent within one coarse voxel
    const Vec3 lo_c = cg.voxel_to_world({0, 0, 0});
    const Vec3 hi_c = cg.voxel_to_world({static_cast<double>(cg.dims[0] - 1),
                                         static_cast<double>(cg.dims[1] - 1),
                                         static_cast<double>(cg.dims[2] - 1)});
    const Vec3 lo_f = finer.voxel_to_world({0, 0, 0});
    const Vec3 hi_f = finer.voxel_to_world({static_cast<double>(finer.dims[0] - 1),
                                            static_cast<double>(finer.dims[1] - 1),
                                            static_cast<double>(finer.dims[2] - 1)});
    const double tol = cg.spacing.norm() + 1e-9;
    if ((lo_c - lo_f).norm() > tol || (hi_c - hi_f).norm() > tol)
        throw ExtentMismatch("prolong_field: grids cover different world extents");

    DeformationField out;
    out.resize_zero(finer);
    const int nx = finer.dims[0], ny = finer.dims[1];
    par::parallel_for(static_cast<std::int64_t>(finer.voxel_count()), [&](std::int64_t b, std::int64_t e) {
        for (std::int64_t li = b; li < e; ++li) {
            const auto idx = static_cast<std::size_t>(li);
            const int i = static_cast<int>(li % nx);
            const int j = static_cast<int>((li / nx) % ny);
            const int k = static_cast<int>(li / (static_cast<std::int64_t>(nx) * ny));
            const Vec3 x = finer.voxel_center(i, j, k);
            out.set(idx, sample_field(field, x, OutsideRule::Clamp));
        }
    });
    return out;
}

inline DeformationField prolong_field(const DeformationField& field, const Volume3D& finer) {
    return prolong_field(field, finer.grid);
}

// Restriction of a fine-grid field onto a coarser grid: same resampling,
// used to move the rigid initialization to the coarsest deformable level.
inline DeformationField resample_field(const DeformationField& field, const Grid& target) {
    DeformationField out;
    out.resize_zero(target);
    const int nx = target.dims[0], ny = target.dims[1];
    par::parallel_for(static_cast<std::int64_t>(target.voxel_count()), [&](std::int64_t b, std::int64_t e) {
        for (std::int64_t li = b; li < e; ++li) {
            const auto idx = static_cast<std::size_t>(li);
            const int i = static_cast<int>(li % nx);
            const int j = static_cast<int>((li / nx) % ny);
            const int k = static_cast<int>(li / (static_cast<std::int64_t>(nx) * ny));
            const Vec3 x = target.voxel_center(i, j, k);
            out.set(idx, sample_field(field, x, OutsideRule::Clamp));
        }
    });
    return out;
}

} // namespace dtreg

#endif
