#pragma once

#include <span>
#include <vector>

#include "vpatch/disk_grid.hpp"
#include "vpatch/errors.hpp"
#include "vpatch/geometry.hpp"
#include "vpatch/parallel.hpp"

namespace vpatch {

// Dirichlet Green's function of the unit disk and its regular part:
//
//   G(x,y) = (1/2pi) ln(1/|x-y|) - h(x,y)
//   h(x,y) = -(1/2pi) ln( |y| |x - y/|y|^2| )
//
// Both are evaluated through S(x,y) = 1 - 2 x.y + |x|^2 |y|^2, which equals
// |y|^2 |x - y/|y|^2|^2 and stays positive and finite as y -> 0, so the
// apparent singularity of h at the origin needs no special casing:
// h(x,0) = 0 and G(x,0) = (1/2pi) ln(1/|x|), the continuous extension.

namespace detail {
inline double mirror_s(Vec2 x, Vec2 y) {
    return 1.0 - 2.0 * dot(x, y) + norm2(x) * norm2(y);
}
} // namespace detail

inline double green(Vec2 x, Vec2 y) {
    if (norm2(x) >= 1.0 || norm2(y) >= 1.0)
        throw domain_error("green: arguments must lie in the open unit disk");
    double d2 = norm2(x - y);
    if (d2 == 0.0) throw singularity_error("green: coincident arguments");
    return std::log(detail::mirror_s(x, y) / d2) / (4.0 * M_PI);
}

inline double h_regular(Vec2 x, Vec2 y) {
    if (norm2(x) >= 1.0 || norm2(y) >= 1.0)
        throw domain_error("h_regular: arguments must lie in the open unit disk");
    return -std::log(detail::mirror_s(x, y)) / (4.0 * M_PI);
}

/// Robin function h(x,x) = -(1/2pi) ln(1 - |x|^2).
inline double robin(Vec2 x) {
    double r2 = norm2(x);
    if (r2 >= 1.0) throw domain_error("robin: argument must lie in the open unit disk");
    return -std::log1p(-r2) / (2.0 * M_PI);
}

// Exact average of ln|t - y| over the square cell of side h centered at c.
// Antiderivative with d2F/dxdy = ln(x^2+y^2):
//   F(x,y) = xy(ln(x^2+y^2) - 3) + x^2 atan(y/x) + y^2 atan(x/y)
// (continuous through the axes; F(0,0) = 0), so
//   int_cell ln|t-y| dy = 1/2 [F]_{corners of cell - t}.
namespace detail {
inline double log_antideriv(double x, double y) {
    double v = 0.0;
    if (x != 0.0 && y != 0.0)
        v = x * y * (std::log(x * x + y * y) - 3.0);
    if (x != 0.0) v += x * x * std::atan(y / x);
    if (y != 0.0) v += y * y * std::atan(x / y);
    return v;
}
} // namespace detail

/// Mean of (1/2pi) ln(1/|t-y|) over the square cell [c +- h/2]^2, closed form.
inline double log_kernel_cell_average(Vec2 t, Vec2 c, double h) {
    double x0 = c.x - t.x - 0.5 * h, x1 = c.x - t.x + 0.5 * h;
    double y0 = c.y - t.y - 0.5 * h, y1 = c.y - t.y + 0.5 * h;
    using detail::log_antideriv;
    double rect = log_antideriv(x1, y1) - log_antideriv(x1, y0) -
                  log_antideriv(x0, y1) + log_antideriv(x0, y0);
    double mean_log_dist = 0.5 * rect / (h * h);
    return -mean_log_dist / (2.0 * M_PI);
}

/// Regularization policy for targets that fall inside a source cell: below
/// cutoff the log part switches to the exact cell average.  Default ties the
/// cutoff to the grid (half a spacing), not to an absolute length.
struct KernelEval {
    double cutoff;

    explicit KernelEval(const DiskGrid& g) : cutoff(0.5 * g.spacing) {}
    explicit KernelEval(double cut) : cutoff(cut) {
        if (!(cutoff > 0.0)) throw config_error("KernelEval: cutoff must be positive");
    }
};

/// Discrete stream function psi = G omega sampled on the grid cells.
struct StreamField {
    const DiskGrid* grid = nullptr;
    std::vector<double> values;
};

namespace detail {
inline std::vector<int> active_cells(std::span<const double> omega) {
    std::vector<int> act;
    for (std::size_t i = 0; i < omega.size(); ++i)
        if (omega[i] != 0.0) act.push_back(static_cast<int>(i));
    return act;
}
} // namespace detail

// psi(t) = sum_i G(t, c_i) omega_i a_i over the support of omega.  Direct
// kernel summation: the support is O(kappa/lambda / h^2) cells, so this beats
// a grid Poisson solve and carries no boundary discretization error.  The
// per-target sum runs over sources in fixed index order, which keeps results
// independent of the thread partition.
inline std::vector<double> apply_green(const DiskGrid& g, std::span<const double> omega,
                                       std::span<const Vec2> targets, const KernelEval& ker,
                                       int threads = 0) {
    if (omega.size() != g.size())
        throw contract_error("apply_green: omega length does not match cell count");
    const std::vector<int> act = detail::active_cells(omega);
    std::vector<double> psi(targets.size(), 0.0);
    const double cut2 = ker.cutoff * ker.cutoff;
    parallel_for(targets.size(), [&](std::size_t k) {
        const Vec2 t = targets[k];
        double s = 0.0;
        for (int i : act) {
            const Vec2 c = g.centers[i];
            double geff;
            if (norm2(t - c) < cut2)
                geff = log_kernel_cell_average(t, c, g.spacing) - h_regular(t, c);
            else
                geff = green(t, c);
            s += geff * omega[i];
        }
        psi[k] = s * g.cell_area;
    }, threads);
    return psi;
}

inline StreamField solve_stream(const DiskGrid& g, std::span<const double> omega,
                                const KernelEval& ker, int threads = 0) {
    return {&g, apply_green(g, omega, std::span<const Vec2>(g.centers), ker, threads)};
}

// v = grad^perp psi = (d2 psi, -d1 psi), by analytic differentiation of the
// kernel sum.  grad_t G = (1/4pi) [ (2|c|^2 t - 2c)/S - 2(t-c)/|t-c|^2 ];
// inside the cutoff the log-part gradient is dropped (symmetric-cell limit),
// the regular part keeps its gradient.
inline std::vector<Vec2> velocity_at(const DiskGrid& g, std::span<const double> omega,
                                     std::span<const Vec2> targets, const KernelEval& ker,
                                     int threads = 0) {
    if (omega.size() != g.size())
        throw contract_error("velocity_at: omega length does not match cell count");
    const std::vector<int> act = detail::active_cells(omega);
    std::vector<Vec2> vel(targets.size());
    const double cut2 = ker.cutoff * ker.cutoff;
    const double c4pi = 1.0 / (4.0 * M_PI);
    parallel_for(targets.size(), [&](std::size_t k) {
        const Vec2 t = targets[k];
        double gx = 0.0, gy = 0.0;
        for (int i : act) {
            const Vec2 c = g.centers[i];
            const double s = detail::mirror_s(t, c);
            const double c2 = norm2(c);
            double dgx = (2.0 * c2 * t.x - 2.0 * c.x) / s;
            double dgy = (2.0 * c2 * t.y - 2.0 * c.y) / s;
            const double d2 = norm2(t - c);
            if (d2 >= cut2) {
                dgx -= 2.0 * (t.x - c.x) / d2;
                dgy -= 2.0 * (t.y - c.y) / d2;
            }
            gx += dgx * omega[i];
            gy += dgy * omega[i];
        }
        vel[k] = {c4pi * g.cell_area * gy, -c4pi * g.cell_area * gx};
    }, threads);
    return vel;
}

} // namespace vpatch
