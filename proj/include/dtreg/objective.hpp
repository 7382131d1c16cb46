#ifndef DTREG_OBJECTIVE_HPP
#define DTREG_OBJECTIVE_HPP

#include <cmath>
#include <cstdint>
#include <optional>
#include <vector>

#include "dtreg/errors.hpp"
#include "dtreg/parallel.hpp"
#include "dtreg/transform.hpp"
#include "dtreg/volume.hpp"

namespace dtreg {

// Settings for J(u) = D_ngf(T(id+u), R) + alpha * S_curv(u). eps empty means
// the edge parameter is estimated from the reference per pyramid level.
// Image gradients are always spacing-aware central differences, one-sided at
// the faces.
struct ObjectiveSettings {
    double alpha = 1.0;
    std::optional<double> eps; // intensity-gradient units
};

namespace detail {

inline double pairwise_sum_slabs(const std::vector<double>& partials) {
    return par::detail::pairwise_sum(partials.data(), partials.size());
}

// central differences on all three axes in one sweep, one-sided at the faces
template <class In>
void gradient_all_into(const Grid& g, const In& f, VectorField3& out) {
    const int nx = g.dims[0], ny = g.dims[1], nz = g.dims[2];
    const std::size_t sy = static_cast<std::size_t>(nx), sz = sy * static_cast<std::size_t>(ny);
    const double ix1 = 1.0 / g.spacing.x, ix2 = 0.5 / g.spacing.x;
    const double iy1 = 1.0 / g.spacing.y, iy2 = 0.5 / g.spacing.y;
    const double iz1 = 1.0 / g.spacing.z, iz2 = 0.5 / g.spacing.z;
    double* gx = out.comp[0].data();
    double* gy = out.comp[1].data();
    double* gz = out.comp[2].data();
    par::parallel_for(nz, [&](std::int64_t kb, std::int64_t ke) {
        for (std::int64_t k = kb; k < ke; ++k) {
            for (int j = 0; j < ny; ++j) {
                const std::size_t row = static_cast<std::size_t>(k) * sz + static_cast<std::size_t>(j) * sy;
                for (int i = 0; i < nx; ++i) {
                    const std::size_t c = row + static_cast<std::size_t>(i);
                    // promote to double before differencing
                    const double v = f[c];
                    const double xp = i < nx - 1 ? f[c + 1] : v;
                    const double xm = i > 0 ? f[c - 1] : v;
                    const double yp = j < ny - 1 ? f[c + sy] : v;
                    const double ym = j > 0 ? f[c - sy] : v;
                    const double zp = k < nz - 1 ? f[c + sz] : v;
                    const double zm = k > 0 ? f[c - sz] : v;
                    gx[c] = i == 0 ? (xp - v) * ix1 : i == nx - 1 ? (v - xm) * ix1 : (xp - xm) * ix2;
                    gy[c] = j == 0 ? (yp - v) * iy1 : j == ny - 1 ? (v - ym) * iy1 : (yp - ym) * iy2;
                    gz[c] = k == 0 ? (zp - v) * iz1 : k == nz - 1 ? (v - zm) * iz1 : (zp - zm) * iz2;
                }
            }
        }
    }, 1);
}

// gather-form adjoint of gradient_all_into: out(v) = sum_d G_d^T w_d, written
// (not accumulated) into out
inline void gradient_all_adjoint_into(const Grid& g, const VectorField3& w,
                                      std::vector<double>& out) {
    const int nx = g.dims[0], ny = g.dims[1], nz = g.dims[2];
    const std::size_t sy = static_cast<std::size_t>(nx), sz = sy * static_cast<std::size_t>(ny);
    const double ix1 = 1.0 / g.spacing.x, ix2 = 0.5 / g.spacing.x;
    const double iy1 = 1.0 / g.spacing.y, iy2 = 0.5 / g.spacing.y;
    const double iz1 = 1.0 / g.spacing.z, iz2 = 0.5 / g.spacing.z;
    const double* wx = w.comp[0].data();
    const double* wy = w.comp[1].data();
    const double* wz = w.comp[2].data();
    // per-axis source weights: interior sources contribute +-1/(2h), the
    // one-sided face stencils +-1/h
    par::parallel_for(nz, [&](std::int64_t kb, std::int64_t ke) {
        for (std::int64_t kk = kb; kk < ke; ++kk) {
            const int k = static_cast<int>(kk);
            for (int j = 0; j < ny; ++j) {
                const std::size_t row = static_cast<std::size_t>(k) * sz + static_cast<std::size_t>(j) * sy;
                for (int i = 0; i < nx; ++i) {
                    const std::size_t c = row + static_cast<std::size_t>(i);
                    double acc = 0.0;
                    // x axis
                    if (i >= 1) {
                        if (i - 1 == 0) acc += wx[c - 1] * ix1;
                        if (i - 1 >= 1 && i - 1 <= nx - 2) acc += wx[c - 1] * ix2;
                    }
                    if (i == 0) acc -= wx[c] * ix1;
                    if (i == nx - 1) acc += wx[c] * ix1;
                    if (i <= nx - 2) {
                        if (i + 1 <= nx - 2 && i + 1 >= 1) acc -= wx[c + 1] * ix2;
                        if (i + 1 == nx - 1) acc -= wx[c + 1] * ix1;
                    }
                    // y axis
                    if (j >= 1) {
                        if (j - 1 == 0) acc += wy[c - sy] * iy1;
                        if (j - 1 >= 1 && j - 1 <= ny - 2) acc += wy[c - sy] * iy2;
                    }
                    if (j == 0) acc -= wy[c] * iy1;
                    if (j == ny - 1) acc += wy[c] * iy1;
                    if (j <= ny - 2) {
                        if (j + 1 <= ny - 2 && j + 1 >= 1) acc -= wy[c + sy] * iy2;
                        if (j + 1 == ny - 1) acc -= wy[c + sy] * iy1;
                    }
                    // z axis
                    if (k >= 1) {
                        if (k - 1 == 0) acc += wz[c - sz] * iz1;
                        if (k - 1 >= 1 && k - 1 <= nz - 2) acc += wz[c - sz] * iz2;
                    }
                    if (k == 0) acc -= wz[c] * iz1;
                    if (k == nz - 1) acc += wz[c] * iz1;
                    if (k <= nz - 2) {
                        if (k + 1 <= nz - 2 && k + 1 >= 1) acc -= wz[c + sz] * iz2;
                        if (k + 1 == nz - 1) acc -= wz[c + sz] * iz1;
                    }
                    out[c] = acc;
                }
            }
        }
    }, 1);
}

template <class In>
void image_gradient_into(const Grid& g, const In& data, VectorField3& out) {
    for (int a = 0; a < 3; ++a)
        if (g.dims[a] < 2)
            throw DimensionTooSmall("image_gradient: all dims must be >= 2");
    if (out.comp[0].size() != g.voxel_count()) out.resize_zero(g);
    out.grid = g;
    gradient_all_into(g, data, out);
}

// spacing-aware 7-point Laplacian with mirror (zero-Neumann) boundaries:
// ghost samples replicate the boundary value, which keeps the stencil
// symmetric and annihilates constants exactly. Returns sum(out^2) reduced
// over fixed per-slab partials, so the value is thread-count independent.
inline double laplacian_into_sumsq(const Grid& g, const std::vector<double>& f,
                                   std::vector<double>& out) {
    const int nx = g.dims[0], ny = g.dims[1], nz = g.dims[2];
    const double wx = 1.0 / (g.spacing.x * g.spacing.x);
    const double wy = 1.0 / (g.spacing.y * g.spacing.y);
    const double wz = 1.0 / (g.spacing.z * g.spacing.z);
    out.resize(f.size());
    const std::size_t sx = 1, sy = static_cast<std::size_t>(nx),
                      sz = static_cast<std::size_t>(nx) * ny;
    std::vector<double> slab_sum(static_cast<std::size_t>(nz), 0.0);
    par::parallel_for(static_cast<std::int64_t>(nz), [&](std::int64_t b, std::int64_t e) {
        for (std::int64_t k = b; k < e; ++k) {
            double acc = 0.0;
            for (int j = 0; j < ny; ++j) {
                const std::size_t row = static_cast<std::size_t>(k) * sz + static_cast<std::size_t>(j) * sy;
                for (int i = 0; i < nx; ++i) {
                    const std::size_t c = row + static_cast<std::size_t>(i);
                    const double v = f[c];
                    const double xm = i > 0 ? f[c - sx] : v;
                    const double xp = i < nx - 1 ? f[c + sx] : v;
                    const double ym = j > 0 ? f[c - sy] : v;
                    const double yp = j < ny - 1 ? f[c + sy] : v;
                    const double zm = k > 0 ? f[c - sz] : v;
                    const double zp = k < nz - 1 ? f[c + sz] : v;
                    const double lap = wx * (xm - 2.0 * v + xp) + wy * (ym - 2.0 * v + yp) +
                                       wz * (zm - 2.0 * v + zp);
                    out[c] = lap;
                    acc += lap * lap;
                }
            }
            slab_sum[static_cast<std::size_t>(k)] = acc;
        }
    }, 1);
    return pairwise_sum_slabs(slab_sum);
}

inline void laplacian_into(const Grid& g, const std::vector<double>& f, std::vector<double>& out) {
    laplacian_into_sumsq(g, f, out);
}

// trilinear sample with derivative in continuous voxel coordinates; zero
// value and slope outside the node hull
struct CellSample {
    double value = 0.0;
    double dx = 0.0, dy = 0.0, dz = 0.0;
};

inline CellSample sample_cell_grad(const float* data, int nx, int ny, int nz, double cx,
                                   double cy, double cz) {
    CellSample s;
    if (cx < 0.0 || cy < 0.0 || cz < 0.0 || cx > nx - 1 || cy > ny - 1 || cz > nz - 1) return s;
    int i0 = std::min(static_cast<int>(cx), nx - 2);
    int j0 = std::min(static_cast<int>(cy), ny - 2);
    int k0 = std::min(static_cast<int>(cz), nz - 2);
    if (i0 < 0) i0 = 0;
    if (j0 < 0) j0 = 0;
    if (k0 < 0) k0 = 0;
    const double fx = cx - i0, fy = cy - j0, fz = cz - k0;
    const std::size_t sy = static_cast<std::size_t>(nx), sz = sy * static_cast<std::size_t>(ny);
    const std::size_t b = static_cast<std::size_t>(i0) + static_cast<std::size_t>(j0) * sy +
                          static_cast<std::size_t>(k0) * sz;
    const double v000 = data[b], v100 = data[b + 1];
    const double v010 = data[b + sy], v110 = data[b + sy + 1];
    const double v001 = data[b + sz], v101 = data[b + sz + 1];
    const double v011 = data[b + sy + sz], v111 = data[b + sy + sz + 1];
    const double c00 = v000 + (v100 - v000) * fx;
    const double c10 = v010 + (v110 - v010) * fx;
    const double c01 = v001 + (v101 - v001) * fx;
    const double c11 = v011 + (v111 - v011) * fx;
    const double c0 = c00 + (c10 - c00) * fy;
    const double c1 = c01 + (c11 - c01) * fy;
    s.value = c0 + (c1 - c0) * fz;
    s.dx = ((v100 - v000) * (1 - fy) + (v110 - v010) * fy) * (1 - fz) +
           ((v101 - v001) * (1 - fy) + (v111 - v011) * fy) * fz;
    s.dy = (c10 - c00) * (1 - fz) + (c11 - c01) * fz;
    s.dz = c1 - c0;
    return s;
}

} // namespace detail

// Per-voxel intensity gradient (intensity/mm), central differences interior,
// one-sided at the faces.
inline VectorField3 image_gradient(const Volume3D& v) {
    VectorField3 out;
    detail::image_gradient_into(v.grid, v.data, out);
    return out;
}

// eps = 0.1 * mean |grad R| over the gradient support (voxels above 1% of
// the peak magnitude), floored at 1e-6 of the intensity range plus a tiny
// absolute floor so the result is positive even for constant volumes.
// Restricting the mean to the support keeps the estimate meaningful on
// distance maps, whose gradients vanish on most of the volume.
inline double estimate_eps(const Volume3D& r) {
    const VectorField3 g = image_gradient(r);
    const std::int64_t n = static_cast<std::int64_t>(r.grid.voxel_count());
    std::vector<double> mag(static_cast<std::size_t>(n));
    double peak = 0.0;
    for (std::size_t i = 0; i < mag.size(); ++i) {
        mag[i] = std::sqrt(g.comp[0][i] * g.comp[0][i] + g.comp[1][i] * g.comp[1][i] +
                           g.comp[2][i] * g.comp[2][i]);
        peak = std::max(peak, mag[i]);
    }
    const double support_floor = 0.01 * peak;
    double sum = 0.0;
    std::int64_t count = 0;
    for (double m : mag) {
        if (m > support_floor) {
            sum += m;
            ++count;
        }
    }
    const double mean_mag = count > 0 ? sum / static_cast<double>(count) : 0.0;
    float lo = r.data.empty() ? 0.0f : r.data[0], hi = lo;
    for (float x : r.data) {
        lo = std::min(lo, x);
        hi = std::max(hi, x);
    }
    const double floor_val = std::max(1e-6 * (static_cast<double>(hi) - lo), 1e-12);
    return std::max(0.1 * mean_mag, floor_val);
}

struct NgfResult {
    double value = 0.0;
    std::vector<double> d_dtw; // derivative w.r.t. the warped-template intensities
};

namespace detail {

// Shared core: gradients of both images are given; returns the value and the
// per-voxel derivative with respect to the gtw vectors in `w` (overwritten).
inline double ngf_value_and_w(const Grid& g, const VectorField3& gtw, const VectorField3& gr,
                              double eps, VectorField3& w) {
    const double eps2 = eps * eps;
    const double hbar = g.voxel_volume();
    if (w.comp[0].size() != g.voxel_count()) w.resize_zero(g);
    const std::int64_t n = static_cast<std::int64_t>(g.voxel_count());
    const double value = par::deterministic_sum(n, [&](std::int64_t ii) {
        const auto i = static_cast<std::size_t>(ii);
        const double tx = gtw.comp[0][i], ty = gtw.comp[1][i], tz = gtw.comp[2][i];
        const double rx = gr.comp[0][i], ry = gr.comp[1][i], rz = gr.comp[2][i];
        const double num = tx * rx + ty * ry + tz * rz + eps2;
        const double a2 = tx * tx + ty * ty + tz * tz + eps2;
        const double b2 = rx * rx + ry * ry + rz * rz + eps2;
        const double rho2 = (num * num) / (a2 * b2);
        const double scale = -hbar * num / (a2 * b2);
        const double q = num / a2;
        w.comp[0][i] = scale * (rx - q * tx);
        w.comp[1][i] = scale * (ry - q * ty);
        w.comp[2][i] = scale * (rz - q * tz);
        // clamp guards rounding noise at perfect alignment; rho2 <= 1 by
        // Cauchy-Schwarz in exact arithmetic
        return std::max(0.0, 1.0 - rho2);
    });
    return 0.5 * hbar * value;
}

} // namespace detail

// Normalized gradient field distance between the warped template and the
// reference: D = (hbar/2) * sum_x (1 - rho(x)^2) with
// rho = (grad Tw . grad R + eps^2) / sqrt((|grad Tw|^2 + eps^2)(|grad R|^2 + eps^2)).
// The returned derivative is with respect to the tw intensities, assembled
// through the adjoint of the difference stencil.
inline NgfResult ngf_distance(const Volume3D& tw, const Volume3D& r, double eps) {
    if (!tw.grid.same_geometry(r.grid))
        throw GridMismatch("ngf_distance: images live on different grids");
    VectorField3 gtw, gr, w;
    detail::image_gradient_into(tw.grid, tw.data, gtw);
    detail::image_gradient_into(r.grid, r.data, gr);
    NgfResult res;
    res.value = detail::ngf_value_and_w(tw.grid, gtw, gr, eps, w);
    res.d_dtw.assign(tw.grid.voxel_count(), 0.0);
    detail::gradient_all_adjoint_into(tw.grid, w, res.d_dtw);
    return res;
}

struct CurvatureResult {
    double value = 0.0;
    VectorField3 gradient;
};

// S = (hbar/2) * sum_d sum_x (Lap u_d)^2 with the mirrored 7-point Laplacian;
// gradient = hbar * Lap(Lap u_d) per component (the stencil is self-adjoint).
inline CurvatureResult curvature(const DeformationField& u) {
    CurvatureResult res;
    res.gradient.resize_zero(u.grid);
    const double hbar = u.grid.voxel_volume();
    const std::int64_t n = static_cast<std::int64_t>(u.grid.voxel_count());
    std::vector<double> lap(u.grid.voxel_count()), lap2;
    double total = 0.0;
    for (int d = 0; d < 3; ++d) {
        total += detail::laplacian_into_sumsq(u.grid, u.comp[d], lap);
        detail::laplacian_into(u.grid, lap, lap2);
        par::parallel_for(n, [&](std::int64_t b, std::int64_t e) {
            for (std::int64_t i = b; i < e; ++i)
                res.gradient.comp[d][static_cast<std::size_t>(i)] =
                    hbar * lap2[static_cast<std::size_t>(i)];
        });
    }
    res.value = 0.5 * hbar * total;
    return res;
}

struct ObjectiveValueGrad {
    double value = 0.0;
    DeformationField gradient;
};

// Evaluator that keeps the reference-side quantities (gradients, eps) and
// the scratch buffers alive across calls; one instance per pyramid level.
// Not safe for concurrent evaluate() calls on the same instance.
class ObjectiveEngine {
public:
    ObjectiveEngine(const Volume3D& tmpl, const Volume3D& reference, const ObjectiveSettings& s)
        : tmpl_(tmpl), grid_(reference.grid), alpha_(s.alpha) {
        if (!(s.alpha > 0.0)) throw DataError("objective: alpha must be > 0");
        detail::image_gradient_into(grid_, reference.data, gr_);
        eps_ = s.eps.value_or(estimate_eps(reference));
        if (!(eps_ > 0.0)) throw DataError("objective: eps must be > 0");
        const std::size_t n = grid_.voxel_count();
        tw_.assign(n, 0.0);
        v_.assign(n, 0.0);
        dt_.resize_zero(grid_);
        gtw_.resize_zero(grid_);
        w_.resize_zero(grid_);
        lap_.assign(n, 0.0);
    }

    double eps() const { return eps_; }
    double alpha() const { return alpha_; }
    const Grid& grid() const { return grid_; }

    // J(u) and, when grad != nullptr, dJ/du assembled by the chain rule
    // through trilinear sampling: the template interpolant's spatial
    // gradient at the warped position times the NGF intensity derivative,
    // plus the regularizer gradient.
    double evaluate(const DeformationField& u, DeformationField* grad) {
        if (!u.grid.same_geometry(grid_))
            throw GridMismatch("objective: field grid does not match the reference grid");
        const std::int64_t n = static_cast<std::int64_t>(grid_.voxel_count());
        const int nx = grid_.dims[0], ny = grid_.dims[1];

        const Grid& tg = tmpl_.grid;
        const float* tdata = tmpl_.data.data();
        const int tnx = tg.dims[0], tny = tg.dims[1], tnz = tg.dims[2];
        // warped continuous coordinate in the template grid:
        //   c = D_t^T (x + u - o_t) / s_t,  with x = voxel center of `grid_`
        // When both grids coincide, c reduces to idx + D^T u / s.
        const bool shared_grid = grid_.same_geometry(tg);
        par::parallel_for(n, [&](std::int64_t b, std::int64_t e) {
            for (std::int64_t li = b; li < e; ++li) {
                const auto idx = static_cast<std::size_t>(li);
                const int i = static_cast<int>(li % nx);
                const int j = static_cast<int>((li / nx) % ny);
                const int k = static_cast<int>(li / (static_cast<std::int64_t>(nx) * ny));
                Vec3 c;
                if (shared_grid) {
                    const Vec3 rot = tg.direction.tmul(u.at(idx));
                    c = Vec3{static_cast<double>(i), static_cast<double>(j),
                             static_cast<double>(k)} +
                        rot.cwise_div(tg.spacing);
                } else {
                    const Vec3 x = grid_.voxel_center(i, j, k);
                    c = tg.world_to_voxel(x + u.at(idx));
                }
                const detail::CellSample s =
                    detail::sample_cell_grad(tdata, tnx, tny, tnz, c.x, c.y, c.z);
                tw_[idx] = s.value;
                // derivative w.r.t. world position: D * diag(1/s) * dc
                const Vec3 dc{s.dx / tg.spacing.x, s.dy / tg.spacing.y, s.dz / tg.spacing.z};
                dt_.set(idx, tg.direction * dc);
            }
        });

        detail::gradient_all_into(grid_, tw_, gtw_);
        double value = detail::ngf_value_and_w(grid_, gtw_, gr_, eps_, w_);

        if (grad) {
            if (grad->comp[0].size() != grid_.voxel_count()) grad->resize_zero(grid_);
            grad->grid = grid_;
            detail::gradient_all_adjoint_into(grid_, w_, v_);
            par::parallel_for(n, [&](std::int64_t b, std::int64_t e) {
                for (std::int64_t i = b; i < e; ++i) {
                    const auto idx = static_cast<std::size_t>(i);
                    grad->comp[0][idx] = v_[idx] * dt_.comp[0][idx];
                    grad->comp[1][idx] = v_[idx] * dt_.comp[1][idx];
                    grad->comp[2][idx] = v_[idx] * dt_.comp[2][idx];
                }
            });
        }

        const double hbar = grid_.voxel_volume();
        double curv = 0.0;
        for (int d = 0; d < 3; ++d) {
            curv += detail::laplacian_into_sumsq(grid_, u.comp[d], lap_);
            if (grad) {
                detail::laplacian_into(grid_, lap_, lap2_);
                par::parallel_for(n, [&](std::int64_t b, std::int64_t e) {
                    for (std::int64_t i = b; i < e; ++i)
                        grad->comp[d][static_cast<std::size_t>(i)] +=
                            alpha_ * hbar * lap2_[static_cast<std::size_t>(i)];
                });
            }
        }
        value += alpha_ * 0.5 * hbar * curv;
        return value;
    }

private:
    Volume3D tmpl_; // copy keeps the engine self-contained across levels
    Grid grid_;
    double alpha_;
    double eps_ = 0.0;
    VectorField3 gr_, dt_, gtw_, w_;
    std::vector<double> tw_, v_, lap_, lap2_;
};

// One-shot evaluation of J(u) and its gradient field.
inline ObjectiveValueGrad objective_eval(const DeformationField& u, const Volume3D& tmpl,
                                         const Volume3D& r, const ObjectiveSettings& s) {
    ObjectiveEngine engine(tmpl, r, s);
    ObjectiveValueGrad out;
    out.gradient.resize_zero(r.grid);
    out.value = engine.evaluate(u, &out.gradient);
    return out;
}

} // namespace dtreg

#endif
