#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "dtreg/metrics.hpp"
#include "dtreg/rng.hpp"
#include "dtreg/transform.hpp"

using namespace dtreg;

namespace {

LandmarkSet random_set(std::uint64_t seed, int n) {
    SplitMix64 rng(seed);
    LandmarkSet s;
    for (int i = 0; i < n; ++i)
        s.entries.push_back({std::to_string(i + 1),
                             {rng.uniform(-40, 40), rng.uniform(-40, 40), rng.uniform(-40, 40)}});
    return s;
}

} // namespace

TEST_CASE("tre on identical sets is zero") {
    const LandmarkSet s = random_set(1, 9);
    const TREReport r = tre(s, s);
    CHECK(r.mean == 0.0);
    CHECK(r.max_d == 0.0);
    CHECK(r.pair_count() == 9);
}

TEST_CASE("tre with a uniform 3-4-5 offset") {
    const LandmarkSet s = random_set(2, 7);
    LandmarkSet moved = s;
    for (auto& e : moved.entries) e.position += Vec3{3, 4, 0};
    const TREReport r = tre(s, moved);
    CHECK(r.mean == Catch::Approx(5.0));
    CHECK(r.sd == Catch::Approx(0.0).margin(1e-12));
    CHECK(r.min_d == Catch::Approx(5.0));
    CHECK(r.max_d == Catch::Approx(5.0));
}

TEST_CASE("tre stats match a direct recomputation") {
    const LandmarkSet a = random_set(3, 13);
    const LandmarkSet b = random_set(4, 13);
    const TREReport r = tre(a, b);
    REQUIRE(r.pair_count() == 13);
    std::vector<double> ds;
    for (std::size_t i = 0; i < 13; ++i)
        ds.push_back((a.entries[i].position - b.entries[i].position).norm());
    double mean = 0;
    for (double d : ds) mean += d;
    mean /= 13.0;
    double var = 0;
    for (double d : ds) var += (d - mean) * (d - mean);
    const double sd = std::sqrt(var / 12.0);
    CHECK(r.mean == Catch::Approx(mean).epsilon(1e-12));
    CHECK(r.sd == Catch::Approx(sd).epsilon(1e-12));
    CHECK(r.min_d == Catch::Approx(*std::min_element(ds.begin(), ds.end())));
    CHECK(r.max_d == Catch::Approx(*std::max_element(ds.begin(), ds.end())));
}

TEST_CASE("tre is symmetric and matches by id, not order") {
    LandmarkSet a = random_set(5, 6);
    LandmarkSet b = random_set(6, 6);
    LandmarkSet b_shuffled;
    for (int i = 5; i >= 0; --i) b_shuffled.entries.push_back(b.entries[static_cast<std::size_t>(i)]);
    const TREReport r1 = tre(a, b);
    const TREReport r2 = tre(b_shuffled, a);
    CHECK(r1.mean == Catch::Approx(r2.mean).epsilon(1e-12));
    CHECK(r1.max_d == Catch::Approx(r2.max_d).epsilon(1e-12));
}

TEST_CASE("tre is invariant under a common rigid motion") {
    const LandmarkSet a = random_set(7, 11);
    const LandmarkSet b = random_set(8, 11);
    RigidParams r;
    r.angles = {0.3, -0.2, 0.9};
    r.translation = {5, -3, 2};
    r.center = {1, 2, 3};
    const Mat44 m = rigid_to_matrix(r);
    LandmarkSet am = a, bm = b;
    for (auto& e : am.entries) e.position = m.apply(e.position);
    for (auto& e : bm.entries) e.position = m.apply(e.position);
    const TREReport before = tre(a, b);
    const TREReport after = tre(am, bm);
    CHECK(after.mean == Catch::Approx(before.mean).margin(1e-9));
    CHECK(after.max_d == Catch::Approx(before.max_d).margin(1e-9));
}

TEST_CASE("tre unmatched ids are listed and excluded") {
    LandmarkSet a;
    a.entries = {{"1", {0, 0, 0}}, {"2", {1, 0, 0}}, {"only_a", {9, 9, 9}}};
    LandmarkSet b;
    b.entries = {{"2", {1, 0, 1}}, {"1", {0, 0, 0}}, {"only_b", {-9, 9, 9}}};
    const TREReport r = tre(a, b);
    CHECK(r.pair_count() == 2);
    REQUIRE(r.unmatched_fixed == std::vector<std::string>{"only_a"});
    REQUIRE(r.unmatched_moving == std::vector<std::string>{"only_b"});

    LandmarkSet c;
    c.entries = {{"zzz", {0, 0, 0}}};
    CHECK_THROWS_AS(tre(a, c), NoCommonLandmarks);
}

TEST_CASE("format_report renders cells and aggregates") {
    TREReport before;
    before.mean = 5.80;
    before.min_d = 3.62;
    before.max_d = 7.22;
    TREReport after;
    after.mean = 1.05;
    after.min_d = 0.28;
    after.max_d = 2.48;
    std::vector<CaseRow> rows{{"1", 13, before, after}};
    const std::string text = format_report(rows);
    CHECK(text.find("5.80 (3.62 - 7.22)") != std::string::npos);
    CHECK(text.find("1.05 (0.28 - 2.48)") != std::string::npos);

    // one landmark: min = mean = max, sd 0.00 in the aggregate
    TREReport single;
    single.mean = single.min_d = single.max_d = 2.5;
    std::vector<CaseRow> one{{"s", 1, single, single}};
    const std::string t1 = format_report(one);
    CHECK(t1.find("2.50 (2.50 - 2.50)") != std::string::npos);
    CHECK(t1.find("2.50±0.00") != std::string::npos);
}

TEST_CASE("format_report reproduces the published aggregate row") {
    // 17 per-case rows: landmark count, before mean (min-max), after mean
    struct Row {
        const char* label;
        std::size_t n;
        double bm, bl, bh, am, al, ah;
    };
    const Row rows[] = {
        {"1", 13, 5.80, 3.62, 7.22, 1.05, 0.28, 2.48},
        {"2", 10, 3.65, 1.71, 6.72, 2.32, 0.42, 4.16},
        {"3", 11, 2.91, 1.53, 4.30, 1.39, 0.55, 2.24},
        {"4", 12, 2.22, 1.25, 2.94, 0.81, 0.25, 1.80},
        {"6", 11, 2.12, 0.75, 3.82, 1.62, 0.39, 4.65},
        {"7", 18, 3.62, 1.19, 5.93, 1.25, 0.25, 3.15},
        {"12", 11, 3.97, 2.58, 6.35, 0.87, 0.20, 1.82},
        {"14", 17, 0.63, 0.17, 1.76, 0.62, 0.32, 1.10},
        {"15", 15, 1.63, 0.62, 2.69, 0.80, 0.27, 1.81},
        {"16", 17, 3.13, 0.82, 5.41, 1.26, 0.22, 3.91},
        {"17", 11, 5.71, 4.25, 8.03, 1.51, 0.47, 5.59},
        {"18", 13, 5.29, 2.94, 9.26, 1.53, 0.30, 3.61},
        {"19", 13, 2.05, 0.43, 3.24, 1.60, 0.39, 3.45},
        {"21", 9, 3.35, 2.34, 5.64, 1.82, 0.25, 5.12},
        {"24", 14, 2.61, 1.96, 3.41, 0.90, 0.24, 2.33},
        {"25", 12, 7.61, 6.40, 10.25, 1.00, 0.30, 2.44},
        {"27", 12, 3.98, 3.09, 4.82, 1.24, 0.35, 2.74},
    };
    std::vector<CaseRow> cases;
    for (const Row& r : rows) {
        CaseRow c;
        c.label = r.label;
        c.landmarks = r.n;
        c.before.mean = r.bm;
        c.before.min_d = r.bl;
        c.before.max_d = r.bh;
        c.after.mean = r.am;
        c.after.min_d = r.al;
        c.after.max_d = r.ah;
        cases.push_back(c);
    }
    const std::string text = format_report(cases);
    CHECK(text.find("3.55±1.76") != std::string::npos);
    CHECK(text.find("1.27±0.44") != std::string::npos);
    CHECK(text.find("12.9±2.6") != std::string::npos);
    // byte-stable: a second render is identical
    CHECK(text == format_report(cases));
}
