#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "dtreg/metrics.hpp"
#include "dtreg/synth.hpp"
#include "test_support.hpp"

using namespace dtreg;

TEST_CASE("gen_sulci_mask is deterministic and bounded") {
    const std::array<int, 3> dims{64, 64, 64};
    const Vec3 spacing{1, 1, 1};
    for (std::uint64_t seed : {1ull, 2ull, 7ull, 13ull, 29ull}) {
        const Mask3D a = synth::gen_sulci_mask(seed, dims, spacing);
        const Mask3D b = synth::gen_sulci_mask(seed, dims, spacing);
        REQUIRE(a.data == b.data);

        std::size_t fg = 0, bg = 0;
        for (auto v : a.data) (v ? fg : bg) += 1;
        const double fraction = static_cast<double>(fg) / static_cast<double>(a.data.size());
        REQUIRE(fraction >= 0.005);
        REQUIRE(fraction <= 0.10);
        REQUIRE(bg >= 1);
    }
    CHECK_THROWS_AS(synth::gen_sulci_mask(1, {16, 64, 64}, spacing), DataError);
}

TEST_CASE("gen_smooth_field hits the requested magnitude and stays smooth") {
    Grid g = test::unit_grid(64, 64, 64);
    for (std::uint64_t seed : {3ull, 11ull, 23ull}) {
        const DeformationField f = synth::gen_smooth_field(seed, g, 4.0);
        REQUIRE(f.max_norm() == Catch::Approx(4.0).margin(1e-6));
        const DeformationField f2 = synth::gen_smooth_field(seed, g, 4.0);
        REQUIRE(f.comp[0] == f2.comp[0]);
    }
    CHECK_THROWS_AS(synth::gen_smooth_field(1, g, 0.0), DataError);
    CHECK_THROWS_AS(synth::gen_smooth_field(1, g, 50.0), DataError);
}

TEST_CASE("gen_smooth_field is fold-free: positive FD Jacobian everywhere") {
    Grid g = test::unit_grid(48, 48, 48);
    for (std::uint64_t seed : {1ull, 2ull, 3ull, 4ull, 5ull, 6ull, 7ull, 8ull, 9ull, 10ull}) {
        const DeformationField f = synth::gen_smooth_field(seed, g, 4.0);
        double min_det = 1e9;
        for (int k = 1; k < 47; ++k)
            for (int j = 1; j < 47; ++j)
                for (int i = 1; i < 47; ++i) {
                    Mat3 jac = Mat3::identity();
                    for (int d = 0; d < 3; ++d) {
                        const double xp = f.comp[d][g.index(i + 1, j, k)];
                        const double xm = f.comp[d][g.index(i - 1, j, k)];
                        const double yp = f.comp[d][g.index(i, j + 1, k)];
                        const double ym = f.comp[d][g.index(i, j - 1, k)];
                        const double zp = f.comp[d][g.index(i, j, k + 1)];
                        const double zm = f.comp[d][g.index(i, j, k - 1)];
                        jac(d, 0) += (xp - xm) / 2.0;
                        jac(d, 1) += (yp - ym) / 2.0;
                        jac(d, 2) += (zp - zm) / 2.0;
                    }
                    min_det = std::min(min_det, jac.det());
                }
        REQUIRE(min_det > 0.0);
    }
}

TEST_CASE("make_case invariants") {
    const synth::SynthCase sc = synth::make_case(7, {64, 64, 64}, {1, 1, 1}, 4.0);

    // determinism
    const synth::SynthCase sc2 = synth::make_case(7, {64, 64, 64}, {1, 1, 1}, 4.0);
    REQUIRE(sc.before_map.volume.data == sc2.before_map.volume.data);
    REQUIRE(sc.after_map.volume.data == sc2.after_map.volume.data);
    for (std::size_t i = 0; i < sc.landmarks_after.entries.size(); ++i)
        REQUIRE((sc.landmarks_after.entries[i].position -
                 sc2.landmarks_after.entries[i].position)
                    .norm() == 0.0);

    // count within the published per-case range
    REQUIRE(sc.landmarks_before.entries.size() >= 10);
    REQUIRE(sc.landmarks_before.entries.size() <= 18);
    REQUIRE(sc.landmarks_after.entries.size() == sc.landmarks_before.entries.size());

    // applying the true field to the after landmarks reproduces the before
    // landmarks exactly (the advection relation is solved to convergence)
    for (std::size_t i = 0; i < sc.landmarks_before.entries.size(); ++i) {
        const Vec3 p = sc.landmarks_before.entries[i].position;
        const Vec3 q = sc.landmarks_after.entries[i].position;
        const Vec3 u = sample_field(sc.true_field, q, OutsideRule::Clamp);
        REQUIRE((q + u - p).norm() < 1e-9);
    }

    // landmarks sit on high-value ridge voxels of the before map
    float peak = 0.0f;
    for (float v : sc.before_map.volume.data) peak = std::max(peak, v);
    for (const auto& lm : sc.landmarks_before.entries)
        REQUIRE(sample_trilinear(sc.before_map.volume, lm.position) > 0.3 * peak);

    // nonzero initial TRE within the generator's design envelope
    const TREReport before = tre(sc.landmarks_before, sc.landmarks_after);
    REQUIRE(before.mean > 0.0);
    REQUIRE(before.mean >= 1.0);
    REQUIRE(before.mean <= 4.0);
}

TEST_CASE("make_case across seeds keeps initial TRE in range") {
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        const synth::SynthCase sc = synth::make_case(seed, {64, 64, 64}, {1, 1, 1}, 4.0);
        const TREReport before = tre(sc.landmarks_before, sc.landmarks_after);
        REQUIRE(before.mean > 0.5);
        REQUIRE(before.mean < 4.0);
        REQUIRE(sc.landmarks_before.entries.size() >= 10);
        REQUIRE(sc.landmarks_before.entries.size() <= 18);
    }
}
