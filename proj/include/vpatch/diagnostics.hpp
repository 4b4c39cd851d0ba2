#pragma once

#include <array>
#include <chrono>
#include <cmath>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "vpatch/energy_solver.hpp"
#include "vpatch/errors.hpp"
#include "vpatch/green_kernel.hpp"
#include "vpatch/parallel.hpp"
#include "vpatch/patch_class.hpp"

namespace vpatch {

/// Vorticity centroid (1/kappa_i) int x omega_i dx over one patch.
inline Vec2 centroid(const DiskGrid& g, std::span<const int> patch_cells,
                     std::span<const double> omega, double kappa_i) {
    if (kappa_i == 0.0) throw contract_error("centroid: zero patch mass");
    double sx = 0.0, sy = 0.0;
    for (int i : patch_cells) {
        sx += g.centers[i].x * omega[i];
        sy += g.centers[i].y * omega[i];
    }
    return {sx * g.cell_area / kappa_i, sy * g.cell_area / kappa_i};
}

/// Support diameter, outer convention: max pairwise distance between active
/// cell centers plus one cell diagonal, so it bounds the diameter of the
/// union of cells from above.
inline double support_diameter(const DiskGrid& g, std::span<const int> patch_cells,
                               std::span<const double> omega) {
    std::vector<Vec2> pts;
    for (int i : patch_cells)
        if (omega[i] != 0.0) pts.push_back(g.centers[i]);
    if (pts.empty()) throw contract_error("support_diameter: empty support");
    double d2max = 0.0;
    for (std::size_t a = 0; a < pts.size(); ++a)
        for (std::size_t b = a + 1; b < pts.size(); ++b)
            d2max = std::max(d2max, norm2(pts[a] - pts[b]));
    return std::sqrt(d2max) + std::sqrt(2.0) * g.spacing;
}

// Scalar probe functions for the weak vorticity equation: the residual
//   | int omega (grad^perp psi) . grad(eta) dx |
// vanishes for every weak solution and for every eta in C_0^inf(D).  The
// three shipped probes share a C^inf bump b supported in |x| < 0.9 and carry
// the angular factors sin(2 theta) (quadrupole, two radial weights) and
// sin(6 theta) (dodecapole).  That structure keeps them odd in both
// coordinates, so the symmetric two-patch maximizer produces a genuine
// discretization-scale residual, while exact antisymmetry under a quarter
// turn cancels the residual of any radially symmetric field to rounding.
struct WeakTestField {
    std::string name;
    std::function<double(Vec2)> eta;
    std::function<Vec2(Vec2)> grad;
};

namespace detail {

constexpr double probe_support_radius = 0.9;

// b(u) = exp(1 - 1/(1-u)) on [0,1), 0 beyond; u = |x|^2 / 0.81.
inline double probe_bump(double u) {
    if (u >= 1.0) return 0.0;
    return std::exp(1.0 - 1.0 / (1.0 - u));
}
inline double probe_bump_du(double u) {
    if (u >= 1.0) return 0.0;
    double d = 1.0 - u;
    return -probe_bump(u) / (d * d);
}

} // namespace detail

inline std::array<WeakTestField, 3> weak_test_fields() {
    const double s2 = detail::probe_support_radius * detail::probe_support_radius;
    auto bump = [s2](Vec2 p) { return detail::probe_bump(norm2(p) / s2); };
    auto bump_grad = [s2](Vec2 p) -> Vec2 {
        double du = detail::probe_bump_du(norm2(p) / s2) * (2.0 / s2);
        return {du * p.x, du * p.y};
    };

    WeakTestField quad{"quadrupole",
                       [bump](Vec2 p) { return p.x * p.y * bump(p); },
                       [bump, bump_grad](Vec2 p) -> Vec2 {
                           double b = bump(p);
                           Vec2 gb = bump_grad(p);
                           return {p.y * b + p.x * p.y * gb.x, p.x * b + p.x * p.y * gb.y};
                       }};
    WeakTestField quad_r2{"quadrupole_r2",
                          [bump](Vec2 p) { return p.x * p.y * norm2(p) * bump(p); },
                          [bump, bump_grad](Vec2 p) -> Vec2 {
                              double r2 = norm2(p);
                              double b = bump(p);
                              Vec2 gb = bump_grad(p);
                              double q = p.x * p.y * r2;
                              return {(3.0 * p.x * p.x * p.y + p.y * p.y * p.y) * b + q * gb.x,
                                      (p.x * p.x * p.x + 3.0 * p.x * p.y * p.y) * b + q * gb.y};
                          }};
    WeakTestField dodeca{"dodecapole",
                         [bump](Vec2 p) {
                             double x = p.x, y = p.y;
                             double im_z6 = 6.0 * x * x * x * x * x * y -
                                            20.0 * x * x * x * y * y * y +
                                            6.0 * x * y * y * y * y * y;
                             return im_z6 * bump(p);
                         },
                         [bump, bump_grad](Vec2 p) -> Vec2 {
                             double x = p.x, y = p.y;
                             double im_z6 = 6.0 * x * x * x * x * x * y -
                                            20.0 * x * x * x * y * y * y +
                                            6.0 * x * y * y * y * y * y;
                             double dx = 30.0 * x * x * x * x * y - 60.0 * x * x * y * y * y +
                                         6.0 * y * y * y * y * y;
                             double dy = 6.0 * x * x * x * x * x - 60.0 * x * x * x * y * y +
                                         30.0 * x * y * y * y * y;
                             double b = bump(p);
                             Vec2 gb = bump_grad(p);
                             return {dx * b + im_z6 * gb.x, dy * b + im_z6 * gb.y};
                         }};
    return {quad, quad_r2, dodeca};
}

/// Quadrature of |int omega v . grad(eta)| over the active cells for each
/// shipped probe, normalized by the squared circulation scale times the
/// probe's maximum gradient over the grid.
inline std::array<double, 3> weak_residual(const DiskGrid& g, std::span<const double> omega,
                                           int threads = 0) {
    const KernelEval ker(g);
    const std::vector<int> act = detail::active_cells(omega);
    std::array<double, 3> out{0.0, 0.0, 0.0};
    if (act.empty()) return out;

    std::vector<Vec2> targets;
    targets.reserve(act.size());
    for (int i : act) targets.push_back(g.centers[i]);
    std::vector<Vec2> vel = velocity_at(g, omega, targets, ker, threads);

    double abs_mass = 0.0;
    for (int i : act) abs_mass += std::fabs(omega[i]);
    abs_mass *= g.cell_area;
    const double circ = std::max(0.5 * abs_mass, 1e-300); // kappa for the two-patch classes

    auto fields = weak_test_fields();
    for (std::size_t f = 0; f < fields.size(); ++f) {
        double acc = 0.0;
        for (std::size_t k = 0; k < act.size(); ++k) {
            Vec2 xi = fields[f].grad(targets[k]);
            acc += omega[act[k]] * dot(vel[k], xi);
        }
        acc *= g.cell_area;
        double max_grad = 0.0;
        for (const Vec2& c : g.centers) max_grad = std::max(max_grad, norm(fields[f].grad(c)));
        out[f] = std::fabs(acc) / (circ * circ * std::max(max_grad, 1e-300));
    }
    return out;
}

/// Per-solve diagnostics record; everything except iterations and wall_time
/// is recomputable from the persisted patch alone.
struct SolveReport {
    double lambda = 0.0;
    double epsilon = 0.0; // sqrt(kappa / (lambda pi))
    double energy = 0.0;
    double mu = 0.0;
    Vec2 centroid1, centroid2;
    double diam1 = 0.0, diam2 = 0.0;
    std::array<double, 3> weak_residuals{0.0, 0.0, 0.0};
    int iterations = 0;
    bool converged = false;
    double wall_time = 0.0; // seconds; not persisted

    double diam_over_eps1() const { return diam1 / epsilon; }
    double diam_over_eps2() const { return diam2 / epsilon; }
    double centroid_err1(Vec2 p1) const { return dist(centroid1, p1); }
    double centroid_err2(Vec2 p2) const { return dist(centroid2, p2); }
};

inline SolveReport make_report(const DiskGrid& g, const SolveResult& res, double wall_time,
                               int threads = 0) {
    const PatchConstraints& pc = res.omega.constraints;
    SolveReport r;
    r.lambda = pc.lambda;
    r.epsilon = std::sqrt(pc.kappa1 / (pc.lambda * M_PI));
    r.energy = res.energy;
    r.mu = res.mu;
    r.centroid1 = centroid(g, res.omega.support1.cells, res.omega.omega, pc.kappa1);
    // In the symmetric class patch 2 is enumerated through the x2 mirror of
    // patch 1, which makes centroid2 the bitwise mirror of centroid1.
    std::vector<int> cells2(res.omega.support2.cells);
    if (pc.symmetric) {
        cells2.clear();
        for (int i : res.omega.support1.cells) cells2.push_back(g.reflect_x2[i]);
    }
    r.centroid2 = centroid(g, cells2, res.omega.omega, pc.kappa2);
    r.diam1 = support_diameter(g, res.omega.support1.cells, res.omega.omega);
    r.diam2 = support_diameter(g, cells2, res.omega.omega);
    r.weak_residuals = weak_residual(g, res.omega.omega, threads);
    r.iterations = res.iterations;
    r.converged = res.converged;
    r.wall_time = wall_time;
    return r;
}

/// Least-squares fits of mu and E against ln(lambda) over a sweep, and the
/// largest diameter-to-epsilon ratio observed.
struct SweepFit {
    double mu_slope = std::numeric_limits<double>::quiet_NaN();
    double mu_intercept = std::numeric_limits<double>::quiet_NaN();
    double energy_slope = std::numeric_limits<double>::quiet_NaN();
    double energy_intercept = std::numeric_limits<double>::quiet_NaN();
    double diam_ratio_max = 0.0;
    int points_used = 0;
};

namespace detail {

inline std::pair<double, double> least_squares(std::span<const double> x,
                                               std::span<const double> y) {
    double n = static_cast<double>(x.size());
    double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sx += x[i];
        sy += y[i];
        sxx += x[i] * x[i];
        sxy += x[i] * y[i];
    }
    double denom = n * sxx - sx * sx;
    double slope = (n * sxy - sx * sy) / denom;
    double intercept = (sy - slope * sx) / n;
    return {slope, intercept};
}

} // namespace detail

inline SweepFit fit_sweep(std::span<const SolveReport> reports) {
    SweepFit fit;
    std::vector<double> lx, mu, en;
    for (const SolveReport& r : reports) {
        fit.diam_ratio_max =
            std::max({fit.diam_ratio_max, r.diam_over_eps1(), r.diam_over_eps2()});
        if (!r.converged) continue;
        lx.push_back(std::log(r.lambda));
        mu.push_back(r.mu);
        en.push_back(r.energy);
    }
    fit.points_used = static_cast<int>(lx.size());
    if (fit.points_used >= 4) {
        auto [ms, mi] = detail::least_squares(lx, mu);
        fit.mu_slope = ms;
        fit.mu_intercept = mi;
        auto [es, ei] = detail::least_squares(lx, en);
        fit.energy_slope = es;
        fit.energy_intercept = ei;
    }
    return fit;
}

/// Class parameters shared across a sweep; constraints_for(lambda) instantiates
/// the per-solve class.
struct ClassSpec {
    double kappa1 = 1.0;
    double kappa2 = -1.0;
    bool symmetric = true;
    double delta = 0.0; // <= 0: default ball radius for the class

    PatchConstraints constraints_for(double lambda) const {
        if (symmetric) {
            PatchConstraints pc = PatchConstraints::symmetric_class(kappa1, lambda);
            if (delta > 0.0) {
                pc.ball1.radius = delta;
                pc.ball2.radius = delta;
            }
            return pc;
        }
        return PatchConstraints::general_class(kappa1, kappa2, lambda, delta);
    }
};

struct SweepResult {
    std::vector<SolveReport> reports;
    std::vector<SolveResult> solves;
    SweepFit fit;
};

/// Run one solve per lambda (work pool across entries, VPL_THREADS caps it)
/// and fit the growth laws.  Lambdas must be increasing, at least four of
/// them.  Non-converged entries are flagged and excluded from the fit.
inline SweepResult sweep(const DiskGrid& g, const ClassSpec& spec,
                         std::span<const double> lambdas, const SolverConfig& cfg = {}) {
    if (lambdas.size() < 4) throw contract_error("sweep: need at least 4 lambda values");
    for (std::size_t i = 1; i < lambdas.size(); ++i)
        if (!(lambdas[i] > lambdas[i - 1]))
            throw contract_error("sweep: lambdas must be strictly increasing");

    SweepResult out;
    out.reports.resize(lambdas.size());
    out.solves.resize(lambdas.size());
    std::vector<std::string> failures(lambdas.size());

    parallel_for(lambdas.size(), [&](std::size_t k) {
        auto t0 = std::chrono::steady_clock::now();
        try {
            PatchConstraints pc = spec.constraints_for(lambdas[k]);
            SolveResult res = solve(g, pc, cfg, /*threads=*/1);
            double dt = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
            out.reports[k] = make_report(g, res, dt, /*threads=*/1);
            out.solves[k] = std::move(res);
        } catch (const error& e) {
            failures[k] = e.what();
        }
    });
    for (std::size_t k = 0; k < lambdas.size(); ++k)
        if (!failures[k].empty())
            throw numerical_error("sweep: solve at lambda=" + std::to_string(lambdas[k]) +
                                  " failed: " + failures[k]);

    out.fit = fit_sweep(out.reports);
    return out;
}

} // namespace vpatch
