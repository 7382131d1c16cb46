#ifndef DTREG_PIPELINE_HPP
#define DTREG_PIPELINE_HPP

#include <chrono>
#include <cmath>
#include <optional>
#include <vector>

#include "dtreg/objective.hpp"
#include "dtreg/solver.hpp"
#include "dtreg/transform.hpp"
#include "dtreg/volume.hpp"

namespace dtreg {

struct RegistrationConfig {
    int levels = 3;       // deformable scales, coarsest to native
    int rigid_offset = 1; // rigid stage runs one level coarser by default
    // The curvature term stays in the rigid objective but with a weight that
    // keeps it inert: at unit weight its boundary stencil (which does not
    // annihilate linear fields) measurably shrinks recovered rotations.
    ObjectiveSettings rigid_objective{1e-6, std::nullopt};
    ObjectiveSettings deformable_objective{};
    SolverOptions rigid_solver = [] {
        SolverOptions o;
        o.max_iter = 200;
        o.grad_tol = 1e-6;
        o.fun_tol = 1e-12;
        return o;
    }();
    SolverOptions deformable_solver{};
    std::optional<Mat44> initial; // tracking-system guess, world-to-world
};

struct LevelReport {
    int level = 0; // pyramid index, 0 = finest
    double objective_initial = 0.0;
    double objective_final = 0.0;
    SolveReport solve;
};

struct RegistrationResult {
    RigidParams rigid;
    DeformationField field; // finest reference grid, rigid folded in
    Volume3D warped;        // template resampled through `field`
    LevelReport rigid_report;
    std::vector<LevelReport> deformable_reports; // coarsest first
    double seconds = 0.0;
};

namespace detail {

// scale factor that puts the angle parameters on a millimeter footing
inline double angle_scale(const Grid& g) {
    const Vec3 extent{(g.dims[0] - 1) * g.spacing.x, (g.dims[1] - 1) * g.spacing.y,
                      (g.dims[2] - 1) * g.spacing.z};
    return std::max(1.0, 0.5 * extent.norm());
}

} // namespace detail

// Parametric stage: minimizes the objective over the 6 rigid parameters on a
// pyramid level `cfg.rigid_offset` levels coarser than the native grid. The
// curvature term is evaluated on the induced field; it vanishes for pure
// translations and stays near zero for small rotations.
inline RigidParams register_rigid(const Volume3D& tmpl, const Volume3D& reference,
                                  const std::optional<Mat44>& init, const RegistrationConfig& cfg,
                                  LevelReport* report = nullptr) {
    const int depth = cfg.rigid_offset + 1;
    const Volume3D level_t = build_pyramid(tmpl, depth).levels.back();
    const Volume3D level_r = build_pyramid(reference, depth).levels.back();
    const Grid& grid = level_r.grid;
    const Vec3 center = reference.grid.domain_center();

    RigidParams start;
    start.center = center;
    if (init) start = matrix_to_rigid(*init, center);

    ObjectiveEngine engine(level_t, level_r, cfg.rigid_objective);
    const double rho = detail::angle_scale(grid);

    DeformationField u, grad_u;
    u.resize_zero(grid);
    grad_u.resize_zero(grid);

    auto objective = [&](std::span<const double> x, std::span<double> g) -> double {
        RigidParams r;
        r.center = center;
        r.angles = {x[0] / rho, x[1] / rho, x[2] / rho};
        r.translation = {x[3], x[4], x[5]};
        const Mat44 m = rigid_to_matrix(r);
        const int nx = grid.dims[0], ny = grid.dims[1];
        par::parallel_for(static_cast<std::int64_t>(grid.voxel_count()),
                          [&](std::int64_t b, std::int64_t e) {
                              for (std::int64_t li = b; li < e; ++li) {
                                  const auto idx = static_cast<std::size_t>(li);
                                  const int i = static_cast<int>(li % nx);
                                  const int j = static_cast<int>((li / nx) % ny);
                                  const int k = static_cast<int>(li / (static_cast<std::int64_t>(nx) * ny));
                                  const Vec3 p = grid.voxel_center(i, j, k);
                                  u.set(idx, m.apply(p) - p);
                              }
                          });
        const double value = engine.evaluate(u, &grad_u);

        // chain rule: dJ/dtheta = sum_x gradJ(x) . du(x)/dtheta
        Mat3 dq[3];
        for (int a = 0; a < 3; ++a) dq[a] = rotation_matrix_derivative(r.angles, a);
        double acc[6];
        const std::int64_t n = static_cast<std::int64_t>(grid.voxel_count());
        for (int a = 0; a < 3; ++a) {
            acc[a] = par::deterministic_sum(n, [&](std::int64_t li) {
                const auto idx = static_cast<std::size_t>(li);
                const int i = static_cast<int>(li % nx);
                const int j = static_cast<int>((li / nx) % ny);
                const int k = static_cast<int>(li / (static_cast<std::int64_t>(nx) * ny));
                const Vec3 p = grid.voxel_center(i, j, k);
                const Vec3 dv = dq[a] * (p - center);
                return grad_u.comp[0][idx] * dv.x + grad_u.comp[1][idx] * dv.y +
                       grad_u.comp[2][idx] * dv.z;
            });
        }
        for (int a = 0; a < 3; ++a) {
            acc[3 + a] = par::deterministic_sum(n, [&](std::int64_t li) {
                return grad_u.comp[a][static_cast<std::size_t>(li)];
            });
        }
        for (int a = 0; a < 3; ++a) g[a] = acc[a] / rho;
        for (int a = 3; a < 6; ++a) g[a] = acc[a];
        return value;
    };

    std::vector<double> x0{start.angles.x * rho, start.angles.y * rho, start.angles.z * rho,
                           start.translation.x, start.translation.y, start.translation.z};
    SolveResult sol = lbfgs_minimize(objective, std::move(x0), cfg.rigid_solver);

    RigidParams out;
    out.center = center;
    out.angles = {sol.x[0] / rho, sol.x[1] / rho, sol.x[2] / rho};
    out.translation = {sol.x[3], sol.x[4], sol.x[5]};
    if (report) {
        report->level = cfg.rigid_offset;
        report->objective_initial = sol.report.trace.empty() ? 0.0 : sol.report.trace.front();
        report->objective_final = sol.report.final_objective;
        report->solve = std::move(sol.report);
    }
    return out;
}

// Non-parametric stage: restrict u0 to the coarsest of `levels` grids,
// minimize over the full field, prolong, repeat down to the native grid.
inline DeformationField register_deformable(const Volume3D& tmpl, const Volume3D& reference,
                                            const DeformationField& u0,
                                            const RegistrationConfig& cfg,
                                            std::vector<LevelReport>* reports = nullptr) {
    if (cfg.levels < 1) throw DataError("register_deformable: levels must be >= 1");
    const Pyramid pt = build_pyramid(tmpl, cfg.levels);
    const Pyramid pr = build_pyramid(reference, cfg.levels);

    DeformationField u = resample_field(u0, pr.levels.back().grid);
    for (int level = cfg.levels - 1; level >= 0; --level) {
        const Volume3D& lt = pt.levels[static_cast<std::size_t>(level)];
        const Volume3D& lr = pr.levels[static_cast<std::size_t>(level)];
        if (level != cfg.levels - 1) u = prolong_field(u, lr.grid);

        ObjectiveEngine engine(lt, lr, cfg.deformable_objective);
        const std::size_t n = lr.grid.voxel_count();
        DeformationField grad;
        grad.resize_zero(lr.grid);
        DeformationField trial;
        trial.resize_zero(lr.grid);

        auto objective = [&](std::span<const double> x, std::span<double> g) -> double {
            for (int d = 0; d < 3; ++d)
                std::copy(x.begin() + static_cast<std::ptrdiff_t>(d * n),
                          x.begin() + static_cast<std::ptrdiff_t>((d + 1) * n),
                          trial.comp[d].begin());
            const double value = engine.evaluate(trial, &grad);
            for (int d = 0; d < 3; ++d)
                std::copy(grad.comp[d].begin(), grad.comp[d].end(),
                          g.begin() + static_cast<std::ptrdiff_t>(d * n));
            return value;
        };

        std::vector<double> x0(3 * n);
        for (int d = 0; d < 3; ++d)
            std::copy(u.comp[d].begin(), u.comp[d].end(),
                      x0.begin() + static_cast<std::ptrdiff_t>(d * n));
        SolveResult sol = lbfgs_minimize(objective, std::move(x0), cfg.deformable_solver);
        for (int d = 0; d < 3; ++d)
            std::copy(sol.x.begin() + static_cast<std::ptrdiff_t>(d * n),
                      sol.x.begin() + static_cast<std::ptrdiff_t>((d + 1) * n),
                      u.comp[d].begin());
        if (reports) {
            LevelReport rep;
            rep.level = level;
            rep.objective_initial = sol.report.trace.empty() ? 0.0 : sol.report.trace.front();
            rep.objective_final = sol.report.final_objective;
            rep.solve = std::move(sol.report);
            reports->push_back(std::move(rep));
        }
    }
    return u;
}

// Full driver: rigid stage (tracking matrix as the initial guess when
// given), fold the result into a displacement field, multilevel deformable
// refinement, then warp the template.
inline RegistrationResult register_volumes(const Volume3D& tmpl, const Volume3D& reference,
                                           const RegistrationConfig& cfg) {
    const auto t0 = std::chrono::steady_clock::now();
    RegistrationResult res;
    res.rigid = register_rigid(tmpl, reference, cfg.initial, cfg, &res.rigid_report);
    const DeformationField u0 = rigid_to_field(res.rigid, reference.grid);
    res.field = register_deformable(tmpl, reference, u0, cfg, &res.deformable_reports);
    res.warped = warp_image(tmpl, res.field);
    res.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return res;
}

} // namespace dtreg

#endif
