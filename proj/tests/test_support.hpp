#ifndef DTREG_TEST_SUPPORT_HPP
#define DTREG_TEST_SUPPORT_HPP

#include <cmath>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "dtreg/rng.hpp"
#include "dtreg/volume.hpp"

namespace dtreg::test {

inline Grid unit_grid(int nx, int ny, int nz, Vec3 spacing = {1, 1, 1}, Vec3 origin = {0, 0, 0}) {
    Grid g;
    g.dims = {nx, ny, nz};
    g.spacing = spacing;
    g.origin = origin;
    return g;
}

inline Volume3D volume_from(const Grid& g, const std::function<double(int, int, int)>& f) {
    Volume3D v = make_volume(g);
    for (int k = 0; k < g.dims[2]; ++k)
        for (int j = 0; j < g.dims[1]; ++j)
            for (int i = 0; i < g.dims[0]; ++i)
                v.at(i, j, k) = static_cast<float>(f(i, j, k));
    return v;
}

// smooth band-limited random volume: a short sum of cosines with seeded
// frequencies and phases; well suited to finite-difference checks
inline Volume3D smooth_random_volume(const Grid& g, std::uint64_t seed, int waves = 6,
                                     double amplitude = 10.0) {
    SplitMix64 rng(seed);
    struct Wave {
        Vec3 k;
        double phase, amp;
    };
    std::vector<Wave> ws;
    for (int w = 0; w < waves; ++w) {
        const double fx = rng.uniform(0.02, 0.12);
        const double fy = rng.uniform(0.02, 0.12);
        const double fz = rng.uniform(0.02, 0.12);
        ws.push_back({{2 * M_PI * fx, 2 * M_PI * fy, 2 * M_PI * fz},
                      rng.uniform(0, 2 * M_PI),
                      rng.uniform(0.3, 1.0)});
    }
    return volume_from(g, [&](int i, int j, int k) {
        const Vec3 p = g.voxel_center(i, j, k);
        double v = 0.0;
        for (const Wave& w : ws) v += w.amp * std::cos(w.k.dot(p) + w.phase);
        return amplitude * v;
    });
}

inline Mask3D random_mask(const Grid& g, std::uint64_t seed, double fg_fraction = 0.3) {
    SplitMix64 rng(seed);
    Mask3D m;
    m.grid = g;
    m.data.resize(g.voxel_count());
    for (auto& v : m.data) v = rng.next_double() < fg_fraction ? 1 : 0;
    return m;
}

// unique scratch directory under the build tree
inline std::filesystem::path scratch_dir(const std::string& name) {
    const std::filesystem::path p = std::filesystem::temp_directory_path() / ("dtreg_" + name);
    std::filesystem::remove_all(p);
    std::filesystem::create_directories(p);
    return p;
}

} // namespace dtreg::test

#endif
