#ifndef DTREG_SOLVER_HPP
#define DTREG_SOLVER_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <deque>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "dtreg/errors.hpp"

namespace dtreg {

struct SolverOptions {
    int memory = 5;
    int max_iter = 100;
    double grad_tol = 1e-3; // relative to max(1, initial gradient norm)
    double fun_tol = 1e-6;  // relative objective decrease per iteration
    double wolfe_c1 = 1e-4;
    double wolfe_c2 = 0.9;
    int max_line_search = 20;
};

enum class StopReason { GradTol, FunTol, MaxIter, LineSearchFail };

inline const char* to_string(StopReason r) {
    switch (r) {
        case StopReason::GradTol: return "GradTol";
        case StopReason::FunTol: return "FunTol";
        case StopReason::MaxIter: return "MaxIter";
        case StopReason::LineSearchFail: return "LineSearchFail";
    }
    return "?";
}

struct SolveReport {
    int iterations = 0;
    double final_objective = 0.0;
    double final_grad_norm = 0.0;
    StopReason stop_reason = StopReason::MaxIter;
    std::vector<double> trace; // objective after each accepted iterate, trace[0] = f(x0)
};

// value = f(x), gradient written into grad (same length as x)
using ObjectiveFn = std::function<double(std::span<const double>, std::span<double>)>;

struct SolveResult {
    std::vector<double> x;
    SolveReport report;
};

namespace detail {

inline double dot(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

inline double norm2(std::span<const double> a) { return std::sqrt(dot(a, a)); }

// minimizer of the cubic interpolating (a, fa, ga) and (b, fb, gb); falls
// back to bisection when the fit is degenerate
inline double cubic_minimizer(double a, double fa, double ga, double b, double fb, double gb) {
    const double d1 = ga + gb - 3.0 * (fa - fb) / (a - b);
    const double disc = d1 * d1 - ga * gb;
    if (disc < 0.0 || !std::isfinite(disc)) return 0.5 * (a + b);
    const double d2 = std::copysign(std::sqrt(disc), b - a);
    double t = b - (b - a) * (gb + d2 - d1) / (gb - ga + 2.0 * d2);
    const double lo = std::min(a, b), hi = std::max(a, b);
    const double margin = 0.1 * (hi - lo);
    if (!std::isfinite(t) || t < lo + margin || t > hi - margin) t = 0.5 * (a + b);
    return t;
}

} // namespace detail

// Limited-memory BFGS with a strong-Wolfe line search (bracket + zoom, cubic
// interpolation). Curvature pairs with s.y <= 1e-12 |s||y| are not stored.
// The objective trace is non-increasing: only Wolfe-accepted steps are taken.
inline SolveResult lbfgs_minimize(const ObjectiveFn& f, std::vector<double> x0,
                                  const SolverOptions& opts) {
    const std::size_t n = x0.size();
    SolveResult res;
    res.x = std::move(x0);
    std::vector<double> g(n), x_new(n), g_new(n), p(n);

    double fx = f(res.x, g);
    if (!std::isfinite(fx))
        throw NonFiniteObjective("lbfgs_minimize: objective not finite at the initial point");
    res.report.trace.push_back(fx);

    const double g0_norm = detail::norm2(g);
    const double grad_target = opts.grad_tol * std::max(1.0, g0_norm);

    struct Pair {
        std::vector<double> s, y;
        double rho;
    };
    std::deque<Pair> mem;

    auto finish = [&](StopReason reason) {
        res.report.stop_reason = reason;
        res.report.final_objective = fx;
        res.report.final_grad_norm = detail::norm2(g);
        return res;
    };

    if (g0_norm <= grad_target) return finish(StopReason::GradTol);

    std::vector<double> alpha_buf;
    for (int iter = 0; iter < opts.max_iter; ++iter) {
        // two-loop recursion: p = -H g
        p.assign(g.begin(), g.end());
        alpha_buf.assign(mem.size(), 0.0);
        for (std::size_t mi = mem.size(); mi-- > 0;) {
            const Pair& pr = mem[mi];
            const double a = pr.rho * detail::dot(pr.s, p);
            alpha_buf[mi] = a;
            for (std::size_t i = 0; i < n; ++i) p[i] -= a * pr.y[i];
        }
        if (!mem.empty()) {
            const Pair& last = mem.back();
            const double gamma = detail::dot(last.s, last.y) / detail::dot(last.y, last.y);
            for (double& v : p) v *= gamma;
        }
        for (std::size_t mi = 0; mi < mem.size(); ++mi) {
            const Pair& pr = mem[mi];
            const double b = pr.rho * detail::dot(pr.y, p);
            for (std::size_t i = 0; i < n; ++i) p[i] += (alpha_buf[mi] - b) * pr.s[i];
        }
        for (double& v : p) v = -v;

        double dphi0 = detail::dot(g, p);
        if (dphi0 >= 0.0) {
            // H lost positive definiteness numerically; restart from steepest descent
            mem.clear();
            for (std::size_t i = 0; i < n; ++i) p[i] = -g[i];
            dphi0 = detail::dot(g, p);
            if (dphi0 >= 0.0) return finish(StopReason::GradTol); // gradient is exactly zero
        }

        // --- strong-Wolfe line search -------------------------------------
        const double phi0 = fx;
        auto eval = [&](double a) {
            for (std::size_t i = 0; i < n; ++i) x_new[i] = res.x[i] + a * p[i];
            const double v = f(x_new, g_new);
            return v;
        };
        int trials = 0;
        double alpha = 1.0, alpha_prev = 0.0;
        if (iter == 0) {
            // before any curvature information the direction is raw steepest
            // descent; bound the largest single-component move to one unit
            double p_inf = 0.0;
            for (double v : p) p_inf = std::max(p_inf, std::abs(v));
            alpha = std::min(1.0, 1.0 / std::max(1e-12, p_inf));
        }
        double phi_prev = phi0, dphi_prev = dphi0;
        double accepted = -1.0, phi_acc = 0.0;
        // best sufficient-decrease point seen; the fallback when the
        // curvature condition cannot be met within the trial budget
        // (interpolated images are only piecewise smooth)
        double armijo_alpha = -1.0, armijo_phi = phi0;

        auto note_armijo = [&](double a, double phi) {
            if (phi < phi0 + opts.wolfe_c1 * a * dphi0 && phi < armijo_phi) {
                armijo_alpha = a;
                armijo_phi = phi;
            }
        };

        auto zoom = [&](double lo, double philo, double dphilo, double hi, double phihi,
                        double dphihi) {
            while (trials < opts.max_line_search) {
                const double aj = detail::cubic_minimizer(lo, philo, dphilo, hi, phihi, dphihi);
                const double phij = eval(aj);
                ++trials;
                if (!std::isfinite(phij)) {
                    hi = aj;
                    phihi = phij;
                    dphihi = 0.0;
                    continue;
                }
                note_armijo(aj, phij);
                if (phij > phi0 + opts.wolfe_c1 * aj * dphi0 || phij >= philo) {
                    hi = aj;
                    phihi = phij;
                    dphihi = detail::dot(g_new, p);
                } else {
                    const double dphij = detail::dot(g_new, p);
                    if (std::abs(dphij) <= -opts.wolfe_c2 * dphi0) {
                        accepted = aj;
                        phi_acc = phij;
                        return;
                    }
                    if (dphij * (hi - lo) >= 0.0) {
                        hi = lo;
                        phihi = philo;
                        dphihi = dphilo;
                    }
                    lo = aj;
                    philo = phij;
                    dphilo = dphij;
                }
                if (std::abs(hi - lo) < 1e-16 * std::max(1.0, std::abs(lo))) return;
            }
        };

        while (trials < opts.max_line_search) {
            const double phi = eval(alpha);
            ++trials;
            const double dphi = std::isfinite(phi) ? detail::dot(g_new, p) : 0.0;
            if (std::isfinite(phi)) note_armijo(alpha, phi);
            if (!std::isfinite(phi) || phi > phi0 + opts.wolfe_c1 * alpha * dphi0 ||
                (trials > 1 && phi >= phi_prev)) {
                zoom(alpha_prev, phi_prev, dphi_prev, alpha, phi, dphi);
                break;
            }
            if (std::abs(dphi) <= -opts.wolfe_c2 * dphi0) {
                accepted = alpha;
                phi_acc = phi;
                break;
            }
            if (dphi >= 0.0) {
                zoom(alpha, phi, dphi, alpha_prev, phi_prev, dphi_prev);
                break;
            }
            alpha_prev = alpha;
            phi_prev = phi;
            dphi_prev = dphi;
            alpha *= 2.0;
        }

        if (accepted < 0.0 && armijo_alpha > 0.0) {
            // no point satisfied the curvature condition; take the best
            // sufficient-decrease step so progress continues
            accepted = armijo_alpha;
            phi_acc = armijo_phi;
        }
        if (accepted < 0.0) return finish(StopReason::LineSearchFail);

        // g_new corresponds to the point where phi_acc was evaluated only if
        // the last eval was at `accepted`; re-evaluate when it is stale
        bool stale = false;
        for (std::size_t i = 0; i < n; ++i) {
            const double xi = res.x[i] + accepted * p[i];
            if (x_new[i] != xi) {
                stale = true;
                break;
            }
        }
        if (stale) phi_acc = eval(accepted);

        // curvature pair
        Pair pr;
        pr.s.resize(n);
        pr.y.resize(n);
        for (std::size_t i = 0; i < n; ++i) {
            pr.s[i] = x_new[i] - res.x[i];
            pr.y[i] = g_new[i] - g[i];
        }
        const double sy = detail::dot(pr.s, pr.y);
        const double sy_floor = 1e-12 * detail::norm2(pr.s) * detail::norm2(pr.y);
        if (sy > sy_floor) {
            pr.rho = 1.0 / sy;
            mem.push_back(std::move(pr));
            if (static_cast<int>(mem.size()) > opts.memory) mem.pop_front();
        }

        const double f_prev = fx;
        res.x.swap(x_new);
        g.swap(g_new);
        fx = phi_acc;
        res.report.iterations = iter + 1;
        res.report.trace.push_back(fx);

        if (detail::norm2(g) <= grad_target) return finish(StopReason::GradTol);
        if (f_prev - fx <= opts.fun_tol * std::max({std::abs(f_prev), std::abs(fx), 1.0}))
            return finish(StopReason::FunTol);
    }
    return finish(StopReason::MaxIter);
}

} // namespace dtreg

#endif
