#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "dtreg/rng.hpp"
#include "dtreg/transform.hpp"
#include "test_support.hpp"

using namespace dtreg;
using test::unit_grid;
using test::volume_from;

TEST_CASE("rigid_to_matrix basics") {
    RigidParams id;
    const Mat44 m = rigid_to_matrix(id);
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j) REQUIRE(m(i, j) == Catch::Approx(i == j ? 1.0 : 0.0).margin(1e-15));

    RigidParams t;
    t.translation = {1, 2, 3};
    const Mat44 mt = rigid_to_matrix(t);
    CHECK(mt(0, 3) == Catch::Approx(1));
    CHECK(mt(1, 3) == Catch::Approx(2));
    CHECK(mt(2, 3) == Catch::Approx(3));
    CHECK(mt(0, 0) == Catch::Approx(1));

    RigidParams rz;
    rz.angles = {0, 0, M_PI / 2};
    const Vec3 p = rigid_to_matrix(rz).apply({1, 0, 0});
    CHECK((p - Vec3{0, 1, 0}).norm() < 1e-12);
}

TEST_CASE("matrix_to_rigid roundtrips random rigid transforms") {
    SplitMix64 rng(17);
    for (int n = 0; n < 200; ++n) {
        RigidParams r;
        r.angles = {rng.uniform(-1.2, 1.2), rng.uniform(-1.2, 1.2), rng.uniform(-3.0, 3.0)};
        r.translation = {rng.uniform(-20, 20), rng.uniform(-20, 20), rng.uniform(-20, 20)};
        r.center = {rng.uniform(-10, 10), rng.uniform(-10, 10), rng.uniform(-10, 10)};
        const Mat44 m = rigid_to_matrix(r);
        double dev = 1.0;
        const RigidParams back = matrix_to_rigid(m, r.center, &dev);
        REQUIRE(dev < 1e-9);
        REQUIRE((back.angles - r.angles).norm() < 1e-9);
        REQUIRE((back.translation - r.translation).norm() < 1e-9);
    }
}

TEST_CASE("matrix_to_rigid extracts the polar factor of scaled input") {
    Mat44 m = Mat44::identity();
    m(0, 0) = m(1, 1) = m(2, 2) = 2.0; // uniform scale
    double dev = 0.0;
    const RigidParams r = matrix_to_rigid(m, {0, 0, 0}, &dev);
    CHECK(r.angles.norm() < 1e-12);
    CHECK(r.translation.norm() < 1e-12);
    CHECK(dev > 1e-6); // callers warn on this
}

TEST_CASE("matrix_to_rigid rejects reflections") {
    Mat44 m = Mat44::identity();
    m(0, 0) = -1.0;
    CHECK_THROWS_AS(matrix_to_rigid(m, {0, 0, 0}), NonOrientationPreserving);
}

TEST_CASE("rigid_to_field examples") {
    Grid g = unit_grid(6, 5, 4, {1, 1.5, 2}, {3, 4, 5});

    const DeformationField zero = rigid_to_field(RigidParams{}, g);
    CHECK(zero.max_norm() == 0.0);

    RigidParams t;
    t.translation = {2, -1, 0.5};
    const DeformationField ft = rigid_to_field(t, g);
    for (std::size_t i = 0; i < g.voxel_count(); ++i)
        REQUIRE((ft.at(i) - t.translation).norm() < 1e-12);

    RigidParams rot;
    rot.angles = {0, 0, M_PI / 2};
    rot.center = g.domain_center();
    const Mat44 m = rigid_to_matrix(rot);
    const DeformationField fr = rigid_to_field(rot, g);
    SplitMix64 rng(3);
    for (int n = 0; n < 10; ++n) {
        const int i = static_cast<int>(rng.next_below(6));
        const int j = static_cast<int>(rng.next_below(5));
        const int k = static_cast<int>(rng.next_below(4));
        const Vec3 x = g.voxel_center(i, j, k);
        REQUIRE((fr.at(g.index(i, j, k)) - (m.apply(x) - x)).norm() < 1e-12);
    }
}

TEST_CASE("warp_image with the zero field resamples the template") {
    Grid g = unit_grid(8, 8, 8);
    Volume3D v = test::smooth_random_volume(g, 12);
    DeformationField zero;
    zero.resize_zero(g);
    const Volume3D w = warp_image(v, zero);
    for (std::size_t i = 0; i < v.data.size(); ++i) REQUIRE(w.data[i] == v.data[i]);
}

TEST_CASE("warp_image recovers a translated affine image") {
    // template(p) = f(p - t); warping with constant field +t yields f(p)
    Grid g = unit_grid(10, 10, 10, {1, 1, 1}, {0, 0, 0});
    const Vec3 t{1.25, -0.5, 0.75};
    auto f = [](const Vec3& p) { return 2.0 * p.x - 1.5 * p.y + 0.25 * p.z + 3.0; };
    Volume3D tmpl = volume_from(g, [&](int i, int j, int k) {
        return f(g.voxel_center(i, j, k) - t);
    });
    DeformationField shift;
    shift.resize_zero(g);
    for (std::size_t i = 0; i < g.voxel_count(); ++i) shift.set(i, t);
    const Volume3D w = warp_image(tmpl, shift);
    // interior voxels only: the shifted sample must stay inside the hull
    for (int k = 2; k < 8; ++k)
        for (int j = 2; j < 8; ++j)
            for (int i = 2; i < 8; ++i)
                REQUIRE(w.at(i, j, k) ==
                        Catch::Approx(f(g.voxel_center(i, j, k))).margin(1e-4));
}

TEST_CASE("warp_image with a field pointing outside yields zeros") {
    Grid g = unit_grid(6, 6, 6);
    Volume3D v = volume_from(g, [](int, int, int) { return 3.0; });
    DeformationField far_field;
    far_field.resize_zero(g);
    for (std::size_t i = 0; i < g.voxel_count(); ++i) far_field.set(i, {100, 100, 100});
    const Volume3D w = warp_image(v, far_field);
    for (float x : w.data) REQUIRE(x == 0.0f);
}

TEST_CASE("warp_points examples") {
    Grid g = unit_grid(20, 20, 20);
    LandmarkSet pts;
    pts.entries = {{"1", {10, 0, 0}}, {"2", {3, 4, 5}}};

    DeformationField zero;
    zero.resize_zero(g);
    const LandmarkSet same = warp_points(zero, pts);
    CHECK((same.entries[0].position - pts.entries[0].position).norm() == 0.0);

    DeformationField c;
    c.resize_zero(g);
    for (std::size_t i = 0; i < g.voxel_count(); ++i) c.set(i, {1, 2, 3});
    const LandmarkSet moved = warp_points(c, pts);
    CHECK((moved.entries[1].position - Vec3{4, 6, 8}).norm() < 1e-12);

    // linear field u = (0.1 x, 0, 0): trilinear sampling is exact
    DeformationField lin;
    lin.resize_zero(g);
    for (int k = 0; k < 20; ++k)
        for (int j = 0; j < 20; ++j)
            for (int i = 0; i < 20; ++i)
                lin.set(g.index(i, j, k), {0.1 * g.voxel_center(i, j, k).x, 0, 0});
    const LandmarkSet l = warp_points(lin, pts);
    CHECK((l.entries[0].position - Vec3{11, 0, 0}).norm() < 1e-9);

    // outside points are flagged and keep zero displacement
    LandmarkSet outside_pts;
    outside_pts.entries = {{"far", {-50, 0, 0}}};
    std::vector<bool> flags;
    const LandmarkSet kept = warp_points(c, outside_pts, &flags);
    CHECK(flags[0]);
    CHECK((kept.entries[0].position - outside_pts.entries[0].position).norm() == 0.0);
}

TEST_CASE("prolong_field is exact for constant and linear fields") {
    Grid fine = unit_grid(17, 16, 15, {1, 1, 1});
    Grid coarse;
    coarse.dims = {9, 8, 8};
    coarse.spacing = {2, 2, 2};
    coarse.origin = fine.origin;

    DeformationField cfield;
    cfield.resize_zero(coarse);
    for (std::size_t i = 0; i < coarse.voxel_count(); ++i) cfield.set(i, {1.5, -2, 0.25});
    const DeformationField f = prolong_field(cfield, fine);
    for (std::size_t i = 0; i < fine.voxel_count(); ++i)
        REQUIRE((f.at(i) - Vec3{1.5, -2, 0.25}).norm() < 1e-12);

    DeformationField zero;
    zero.resize_zero(coarse);
    const DeformationField fz = prolong_field(zero, fine);
    CHECK(fz.max_norm() == 0.0);

    DeformationField lin;
    lin.resize_zero(coarse);
    for (int k = 0; k < 8; ++k)
        for (int j = 0; j < 8; ++j)
            for (int i = 0; i < 9; ++i) {
                const Vec3 p = coarse.voxel_center(i, j, k);
                lin.set(coarse.index(i, j, k), {0.1 * p.x + 0.02 * p.y, -0.05 * p.z, 0.03 * p.x});
            }
    const DeformationField fl = prolong_field(lin, fine);
    // interior fine voxels lie inside the coarse hull where trilinear
    // interpolation of a linear field is exact
    for (int k = 2; k < 13; ++k)
        for (int j = 2; j < 14; ++j)
            for (int i = 2; i < 15; ++i) {
                const Vec3 p = fine.voxel_center(i, j, k);
                const Vec3 expect{0.1 * p.x + 0.02 * p.y, -0.05 * p.z, 0.03 * p.x};
                REQUIRE((fl.at(fine.index(i, j, k)) - expect).norm() < 1e-9);
            }
}

TEST_CASE("prolong_field rejects mismatched extents") {
    Grid fine = unit_grid(16, 16, 16);
    Grid far = unit_grid(8, 8, 8, {2, 2, 2}, {100, 0, 0});
    DeformationField f;
    f.resize_zero(far);
    CHECK_THROWS_AS(prolong_field(f, fine), ExtentMismatch);
}

TEST_CASE("warp_points through a prolonged affine field matches the coarse field") {
    Grid fine = unit_grid(17, 17, 17);
    Grid coarse;
    coarse.dims = {9, 9, 9};
    coarse.spacing = {2, 2, 2};
    coarse.origin = fine.origin;
    DeformationField aff;
    aff.resize_zero(coarse);
    for (int k = 0; k < 9; ++k)
        for (int j = 0; j < 9; ++j)
            for (int i = 0; i < 9; ++i) {
                const Vec3 p = coarse.voxel_center(i, j, k);
                aff.set(coarse.index(i, j, k),
                        {0.05 * p.x + 0.01 * p.y + 0.3, 0.02 * p.z - 0.1, 0.01 * p.x});
            }
    const DeformationField fine_field = prolong_field(aff, fine);
    LandmarkSet pts;
    pts.entries = {{"a", {4.5, 7.25, 3.0}}, {"b", {10.0, 2.0, 12.5}}};
    const LandmarkSet via_coarse = warp_points(aff, pts);
    const LandmarkSet via_fine = warp_points(fine_field, pts);
    for (std::size_t i = 0; i < pts.entries.size(); ++i)
        REQUIRE((via_coarse.entries[i].position - via_fine.entries[i].position).norm() < 1e-6);
}
