#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "dtreg/objective.hpp"
#include "dtreg/rng.hpp"
#include "dtreg/synth.hpp"
#include "test_support.hpp"

using namespace dtreg;
using test::unit_grid;
using test::volume_from;

namespace {

// perturb a float-stored intensity and report the achieved step
double perturb(Volume3D& v, std::size_t idx, double delta) {
    const double before = v.data[idx];
    v.data[idx] = static_cast<float>(before + delta);
    return static_cast<double>(v.data[idx]) - before;
}

DeformationField smooth_test_field(const Grid& g, std::uint64_t seed, double mag) {
    DeformationField u = synth::gen_smooth_field(seed, g, mag);
    return u;
}

} // namespace

TEST_CASE("image_gradient basics") {
    Grid g = unit_grid(8, 6, 5, {0.5, 1.0, 2.0});
    Volume3D c = volume_from(g, [](int, int, int) { return 4.2; });
    const VectorField3 gc = image_gradient(c);
    CHECK(gc.max_norm() == 0.0);

    Volume3D lin = volume_from(g, [&](int i, int j, int k) {
        return 3.0 * g.voxel_center(i, j, k).x;
    });
    const VectorField3 gl = image_gradient(lin);
    for (std::size_t i = 0; i < g.voxel_count(); ++i)
        REQUIRE((gl.at(i) - Vec3{3, 0, 0}).norm() < 1e-5);
}

TEST_CASE("image_gradient stencil on a quadratic row") {
    // f = x^2 along x, spacing 1: central差 gives exactly 2x interior, and
    // the one-sided faces give f(1)-f(0) and f(n-1)-f(n-2)
    Grid g = unit_grid(8, 2, 2);
    Volume3D v = volume_from(g, [](int i, int, int) { return i * i; });
    const VectorField3 gv = image_gradient(v);
    CHECK(gv.comp[0][g.index(0, 0, 0)] == Catch::Approx(1.0));
    for (int i = 1; i < 7; ++i)
        CHECK(gv.comp[0][g.index(i, 0, 0)] == Catch::Approx(2.0 * i));
    CHECK(gv.comp[0][g.index(7, 0, 0)] == Catch::Approx(49.0 - 36.0));
}

TEST_CASE("image_gradient requires dims >= 2") {
    Grid g = unit_grid(4, 1, 4);
    Volume3D v = make_volume(g);
    CHECK_THROWS_AS(image_gradient(v), DimensionTooSmall);
}

TEST_CASE("estimate_eps on flat, ramp and rescaled volumes") {
    Grid g = unit_grid(10, 10, 10);
    Volume3D flat = volume_from(g, [](int, int, int) { return 7.0; });
    CHECK(estimate_eps(flat) == Catch::Approx(1e-12));

    Volume3D ramp = volume_from(g, [&](int i, int, int) { return 3.0 * i; });
    CHECK(estimate_eps(ramp) == Catch::Approx(0.3));

    Volume3D big = ramp;
    for (auto& x : big.data) x *= 10.0f;
    CHECK(estimate_eps(big) == Catch::Approx(10.0 * estimate_eps(ramp)).epsilon(1e-9));
}

TEST_CASE("ngf_distance is zero for identical and for constant images") {
    Grid g = unit_grid(10, 9, 8, {1, 1.5, 0.5});
    Volume3D r = test::smooth_random_volume(g, 21);
    const NgfResult same = ngf_distance(r, r, 0.7);
    CHECK(same.value == 0.0);
    for (double d : same.d_dtw) REQUIRE(d == 0.0);

    Volume3D c1 = volume_from(g, [](int, int, int) { return 5.0; });
    Volume3D c2 = volume_from(g, [](int, int, int) { return -2.0; });
    CHECK(ngf_distance(c1, c2, 0.3).value == 0.0);
}

TEST_CASE("ngf_distance derivative matches finite differences") {
    Grid g = unit_grid(16, 16, 16);
    Volume3D tw = test::smooth_random_volume(g, 31, 5, 10.0);
    Volume3D r = test::smooth_random_volume(g, 32, 5, 10.0);
    const double eps = 0.5;
    const NgfResult res = ngf_distance(tw, r, eps);

    double grad_scale = 0.0;
    for (double d : res.d_dtw) grad_scale = std::max(grad_scale, std::abs(d));

    SplitMix64 rng(77);
    for (int n = 0; n < 20; ++n) {
        const std::size_t idx = rng.next_below(g.voxel_count());
        Volume3D plus = tw, minus = tw;
        const double dp = perturb(plus, idx, 1e-3);
        const double dm = perturb(minus, idx, -1e-3);
        const double fd =
            (ngf_distance(plus, r, eps).value - ngf_distance(minus, r, eps).value) / (dp - dm);
        const double denom = std::max({std::abs(fd), std::abs(res.d_dtw[idx]), 1e-3 * grad_scale});
        REQUIRE(std::abs(fd - res.d_dtw[idx]) / denom < 1e-4);
    }
}

TEST_CASE("ngf_distance value bound and grid mismatch") {
    Grid g = unit_grid(12, 12, 12, {0.5, 0.5, 0.5});
    Volume3D a = test::smooth_random_volume(g, 41);
    Volume3D b = test::smooth_random_volume(g, 42);
    const NgfResult res = ngf_distance(a, b, 0.1);
    CHECK(res.value >= 0.0);
    CHECK(res.value <= g.voxel_volume() * static_cast<double>(g.voxel_count()));

    Volume3D other = make_volume(unit_grid(12, 12, 11, {0.5, 0.5, 0.5}));
    CHECK_THROWS_AS(ngf_distance(a, other, 0.1), GridMismatch);
}

TEST_CASE("ngf_distance under joint affine intensity rescaling") {
    Grid g = unit_grid(12, 11, 10);
    Volume3D a = test::smooth_random_volume(g, 51);
    Volume3D b = test::smooth_random_volume(g, 52);
    // quantize so that the x10 rescale is exact in float32
    for (auto& x : a.data) x = std::round(x * 8.0f) / 8.0f;
    for (auto& x : b.data) x = std::round(x * 8.0f) / 8.0f;
    Volume3D a10 = a, b10 = b;
    for (auto& x : a10.data) x *= 10.0f;
    for (auto& x : b10.data) x *= 10.0f;
    const double eps = 0.4;
    const NgfResult base = ngf_distance(a, b, eps);
    const NgfResult scaled = ngf_distance(a10, b10, 10.0 * eps);
    REQUIRE(scaled.value == Catch::Approx(base.value).epsilon(1e-9));
}

TEST_CASE("curvature of zero and constant fields vanishes") {
    Grid g = unit_grid(9, 8, 7, {1, 2, 0.5});
    DeformationField zero;
    zero.resize_zero(g);
    const CurvatureResult rz = curvature(zero);
    CHECK(rz.value == 0.0);
    CHECK(rz.gradient.max_norm() == 0.0);

    DeformationField c;
    c.resize_zero(g);
    for (std::size_t i = 0; i < g.voxel_count(); ++i) c.set(i, {5, 5, 5});
    const CurvatureResult rc = curvature(c);
    CHECK(rc.value == 0.0);
    CHECK(rc.gradient.max_norm() == 0.0);
}

TEST_CASE("curvature hand sum on a quadratic 1-D profile") {
    // u_x = x^2 on an 8-voxel row, spacing 1, mirrored ends:
    // Lap u = [1, 2,2,2,2,2,2, -13]; S = 1/2 (1 + 6*4 + 169) = 97
    Grid g = unit_grid(8, 1, 1);
    DeformationField u;
    u.resize_zero(g);
    for (int i = 0; i < 8; ++i) u.comp[0][g.index(i, 0, 0)] = i * i;
    const CurvatureResult r = curvature(u);
    CHECK(r.value == Catch::Approx(97.0));
}

TEST_CASE("curvature gradient matches finite differences at 1e-6") {
    Grid g = unit_grid(9, 9, 9, {1, 1.3, 0.8});
    DeformationField u = smooth_test_field(g, 61, 0.6);
    const CurvatureResult res = curvature(u);

    double scale = 0.0;
    for (int d = 0; d < 3; ++d)
        for (double v : res.gradient.comp[d]) scale = std::max(scale, std::abs(v));

    SplitMix64 rng(62);
    for (int n = 0; n < 30; ++n) {
        const int d = static_cast<int>(rng.next_below(3));
        const std::size_t idx = rng.next_below(g.voxel_count());
        DeformationField up = u, um = u;
        const double delta = 1e-5;
        up.comp[d][idx] += delta;
        um.comp[d][idx] -= delta;
        const double fd = (curvature(up).value - curvature(um).value) / (2 * delta);
        const double denom = std::max({std::abs(fd), std::abs(res.gradient.comp[d][idx]), scale * 1e-3});
        REQUIRE(std::abs(fd - res.gradient.comp[d][idx]) / denom < 1e-6);
    }
}

TEST_CASE("objective_eval is exactly zero for aligned inputs") {
    Grid g = unit_grid(12, 12, 12);
    Volume3D r = test::smooth_random_volume(g, 71);
    DeformationField zero;
    zero.resize_zero(g);
    ObjectiveSettings s;
    s.alpha = 1.0;
    s.eps = 0.5;
    const ObjectiveValueGrad res = objective_eval(zero, r, r, s);
    CHECK(res.value == 0.0);
    CHECK(res.gradient.max_norm() == 0.0);
}

TEST_CASE("objective_eval is positive for a translated template") {
    Grid g = unit_grid(12, 12, 12);
    Volume3D r = test::smooth_random_volume(g, 72);
    Volume3D t = volume_from(g, [&](int i, int j, int k) {
        const Vec3 p = g.voxel_center(i, j, k) - Vec3{1.5, 0, 0};
        return sample_trilinear(r, p, OutsideRule::Clamp);
    });
    DeformationField zero;
    zero.resize_zero(g);
    ObjectiveSettings s;
    s.eps = 0.5;
    const ObjectiveValueGrad res = objective_eval(zero, t, r, s);
    CHECK(res.value > 0.0);
}

TEST_CASE("objective_eval gradient matches finite differences") {
    Grid g = unit_grid(12, 12, 12);
    Volume3D tmpl = test::smooth_random_volume(g, 81, 5, 10.0);
    Volume3D r = test::smooth_random_volume(g, 82, 5, 10.0);
    DeformationField u = smooth_test_field(g, 83, 0.9);
    ObjectiveSettings s;
    s.alpha = 0.1;
    s.eps = 0.5;

    ObjectiveEngine engine(tmpl, r, s);
    DeformationField grad;
    const double j0 = engine.evaluate(u, &grad);
    CHECK(std::isfinite(j0));

    double scale = 0.0;
    for (int d = 0; d < 3; ++d)
        for (double v : grad.comp[d]) scale = std::max(scale, std::abs(v));

    SplitMix64 rng(84);
    int checked = 0;
    for (int n = 0; n < 60 && checked < 30; ++n) {
        const int d = static_cast<int>(rng.next_below(3));
        const std::size_t idx = rng.next_below(g.voxel_count());
        if (std::abs(grad.comp[d][idx]) < 1e-4 * scale) continue; // skip dead zones
        DeformationField up = u, um = u;
        const double delta = 1e-4;
        up.comp[d][idx] += delta;
        um.comp[d][idx] -= delta;
        const double fd = (engine.evaluate(up, nullptr) - engine.evaluate(um, nullptr)) / (2 * delta);
        const double denom = std::max({std::abs(fd), std::abs(grad.comp[d][idx]), 1e-3 * scale});
        REQUIRE(std::abs(fd - grad.comp[d][idx]) / denom < 1e-3);
        ++checked;
    }
    REQUIRE(checked >= 20);
}
