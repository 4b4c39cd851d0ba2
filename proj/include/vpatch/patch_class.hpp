#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "vpatch/disk_grid.hpp"
#include "vpatch/errors.hpp"
#include "vpatch/geometry.hpp"
#include "vpatch/kirchhoff_routh.hpp"

namespace vpatch {

/// Radius of the symmetric two-vortex equilibrium, sqrt(sqrt(5) - 2).
inline double symmetric_vortex_radius() { return std::sqrt(std::sqrt(5.0) - 2.0); }

// Admissible vorticity class: two patches supported in disjoint balls, pointwise
// bound lambda, prescribed masses, and either the full even-in-x1/odd-in-x2
// symmetry (symmetric == true, kappa2 = -kappa1, ball2 the x2-mirror of ball1)
// or even-in-x1 only.  Ball centers must sit on the x2 axis so that the x1
// reflection acts exactly on each ball's cell set.
struct PatchConstraints {
    double lambda = 0.0;
    double kappa1 = 0.0;
    double kappa2 = 0.0;
    Ball ball1;
    Ball ball2;
    bool symmetric = true;

    void validate() const {
        if (!(lambda > 0.0)) throw config_error("constraints: lambda must be positive");
        if (!(kappa1 > 0.0)) throw config_error("constraints: kappa1 must be positive");
        if (!(kappa2 < 0.0)) throw config_error("constraints: kappa2 must be negative");
        if (!(ball1.radius > 0.0) || !(ball2.radius > 0.0))
            throw config_error("constraints: ball radii must be positive");
        if (!ball1.strictly_inside_disk() || !ball2.strictly_inside_disk())
            throw config_error("constraints: support balls must sit strictly inside the disk");
        if (!closures_disjoint(ball1, ball2))
            throw config_error("constraints: support ball closures must be disjoint");
        if (ball1.center.x != 0.0 || ball2.center.x != 0.0)
            throw config_error("constraints: ball centers must lie on the x2 axis");
        if (symmetric) {
            if (kappa2 != -kappa1)
                throw config_error("constraints: symmetric class requires kappa2 = -kappa1");
            if (ball2.center.y != -ball1.center.y || ball2.radius != ball1.radius)
                throw config_error("constraints: symmetric class requires ball2 = x2-mirror of ball1");
        }
        if (!(lambda * ball1.area() > kappa1))
            throw config_error("constraints: class is empty, lambda*|B1| <= kappa1");
        if (!(lambda * ball2.area() > -kappa2))
            throw config_error("constraints: class is empty, lambda*|B2| <= |kappa2|");
    }

    /// Symmetric class with the default balls at (0, +-sqrt(sqrt5-2)), radius half that.
    static PatchConstraints symmetric_class(double kappa, double lambda) {
        double rho = symmetric_vortex_radius();
        double delta = 0.5 * rho;
        PatchConstraints pc;
        pc.lambda = lambda;
        pc.kappa1 = kappa;
        pc.kappa2 = -kappa;
        pc.ball1 = {{0.0, rho}, delta};
        pc.ball2 = {{0.0, -rho}, delta};
        pc.symmetric = true;
        return pc;
    }

    /// Non-symmetric class with balls centered at the Kirchhoff-Routh minimizer
    /// for gamma = -kappa2/kappa1.  delta <= 0 picks a radius that keeps the
    /// balls inside the disk and disjoint with margin.
    static PatchConstraints general_class(double kappa1, double kappa2, double lambda,
                                          double delta = 0.0) {
        KrProblem prob{kappa1, kappa2};
        prob.validate();
        KrCritPoint cp = kr_minimize(prob);
        double p = cp.rho1, q = -cp.rho2;
        if (delta <= 0.0) {
            double room = 1.0 - std::max(p, -q);
            delta = std::min(0.5 * symmetric_vortex_radius(),
                             std::min(0.8 * room, 0.8 * 0.5 * (p - q)));
        }
        PatchConstraints pc;
        pc.lambda = lambda;
        pc.kappa1 = kappa1;
        pc.kappa2 = kappa2;
        pc.ball1 = {{0.0, p}, delta};
        pc.ball2 = {{0.0, q}, delta};
        pc.symmetric = false;
        return pc;
    }
};

// Cells of one support ball, with the x1 > 0 half as representatives.  Ball
// centers on the x2 axis make the cell set exactly closed under reflect_x1,
// so a representative always speaks for itself and its mirror.
struct BallCells {
    std::vector<int> cells; // all grid cells with center strictly inside the ball
    std::vector<int> reps;  // the x1 > 0 subset, ascending cell index
};

inline BallCells ball_cells(const DiskGrid& g, const Ball& b) {
    BallCells bc;
    for (std::size_t i = 0; i < g.size(); ++i) {
        if (b.contains(g.centers[i])) {
            bc.cells.push_back(static_cast<int>(i));
            if (g.centers[i].x > 0.0) bc.reps.push_back(static_cast<int>(i));
        }
    }
    return bc;
}

struct PatchField {
    const DiskGrid* grid = nullptr;
    PatchConstraints constraints;
    std::vector<double> omega; // full cell-indexed field
    BallCells support1;
    BallCells support2;

    double mass1() const {
        double s = 0.0;
        for (int i : support1.cells) s += omega[i];
        return s * grid->cell_area;
    }
    double mass2() const {
        double s = 0.0;
        for (int i : support2.cells) s += omega[i];
        return s * grid->cell_area;
    }

    std::vector<int> active_cells() const {
        std::vector<int> act;
        for (std::size_t i = 0; i < omega.size(); ++i)
            if (omega[i] != 0.0) act.push_back(static_cast<int>(i));
        return act;
    }
};

struct ValidationResult {
    bool ok = true;
    std::string first_violation;
};

/// Class-membership check; reports the first violated clause.
inline ValidationResult validate_patch(const PatchField& f) {
    const DiskGrid& g = *f.grid;
    const PatchConstraints& pc = f.constraints;
    auto fail = [](std::string why) { return ValidationResult{false, std::move(why)}; };

    std::vector<char> in_support(g.size(), 0);
    for (int i : f.support1.cells) in_support[i] = 1;
    for (int i : f.support2.cells) in_support[i] = 2;
    for (std::size_t i = 0; i < g.size(); ++i)
        if (!in_support[i] && f.omega[i] != 0.0)
            return fail("support: omega nonzero outside B1 and B2");

    for (int i : f.support1.cells)
        if (f.omega[i] < 0.0 || f.omega[i] > pc.lambda)
            return fail("bound: omega outside [0, lambda] on B1");
    for (int i : f.support2.cells)
        if (f.omega[i] > 0.0 || f.omega[i] < -pc.lambda)
            return fail("bound: omega outside [-lambda, 0] on B2");

    if (std::fabs(f.mass1() - pc.kappa1) > 1e-12 * std::fabs(pc.kappa1))
        return fail("mass: patch 1 mass differs from kappa1");
    if (std::fabs(f.mass2() - pc.kappa2) > 1e-12 * std::fabs(pc.kappa2))
        return fail("mass: patch 2 mass differs from kappa2");

    for (std::size_t i = 0; i < g.size(); ++i)
        if (f.omega[i] != f.omega[g.reflect_x1[i]])
            return fail("symmetry: omega not even in x1");
    if (pc.symmetric) {
        for (std::size_t i = 0; i < g.size(); ++i)
            if (f.omega[i] != -f.omega[g.reflect_x2[i]])
                return fail("symmetry: omega not odd in x2");
    }
    return {};
}

namespace detail {

struct GreedyFill {
    std::vector<int> full;        // positions (into the ordered list) filled at the bound
    int fractional = -1;          // position holding the remainder, or -1
    double fractional_value = 0.0;
    int last_full = -1;           // position of the last fully filled entry
};

// Fill entries in the given order with `bound` until target mass is reached;
// uniform capacity bound*cell_mass per entry, one fractional entry at most.
// The fractional value is recomputed from the residual so the patch mass is
// exact up to a single rounding.
inline GreedyFill greedy_fill(std::size_t count, double cell_mass, double bound, double target) {
    GreedyFill out;
    const double cap = bound * cell_mass;
    double need = target;
    for (std::size_t k = 0; k < count; ++k) {
        if (need <= 0.0) break;
        if (need >= cap) {
            out.full.push_back(static_cast<int>(k));
            out.last_full = static_cast<int>(k);
            need -= cap;
        } else {
            out.fractional = static_cast<int>(k);
            double filled = cap * static_cast<double>(out.full.size());
            out.fractional_value = (target - filled) / cell_mass;
            need = 0.0;
            break;
        }
    }
    if (need > 0.0)
        throw infeasible_error("greedy_fill: target mass unreachable under the bound");
    return out;
}

// Mirror representative values across reflect_x1 within one ball.
inline void scatter_even(const DiskGrid& g, const BallCells& bc,
                         std::span<const double> rep_values, std::vector<double>& omega) {
    for (std::size_t k = 0; k < bc.reps.size(); ++k) {
        int i = bc.reps[k];
        omega[i] = rep_values[k];
        omega[g.reflect_x1[i]] = rep_values[k];
    }
}

} // namespace detail

/// Assemble a symmetric-class field from values on ball1's x1 > 0 cells; the
/// rest of the field is generated by the index maps, so both symmetries hold
/// bitwise.
inline PatchField assemble_symmetric(const DiskGrid& g, const PatchConstraints& pc,
                                     std::span<const double> rep_values) {
    PatchField f;
    f.grid = &g;
    f.constraints = pc;
    f.omega.assign(g.size(), 0.0);
    f.support1 = ball_cells(g, pc.ball1);
    f.support2 = ball_cells(g, pc.ball2);
    if (rep_values.size() != f.support1.reps.size())
        throw contract_error("assemble_symmetric: representative count mismatch");
    detail::scatter_even(g, f.support1, rep_values, f.omega);
    for (int i : f.support1.cells) f.omega[g.reflect_x2[i]] = -f.omega[i];
    return f;
}

/// Assemble a general-class field from per-ball representative values (signed:
/// nonnegative on ball1, nonpositive on ball2); even in x1 bitwise.
inline PatchField assemble_general(const DiskGrid& g, const PatchConstraints& pc,
                                   std::span<const double> rep_values1,
                                   std::span<const double> rep_values2) {
    PatchField f;
    f.grid = &g;
    f.constraints = pc;
    f.omega.assign(g.size(), 0.0);
    f.support1 = ball_cells(g, pc.ball1);
    f.support2 = ball_cells(g, pc.ball2);
    if (rep_values1.size() != f.support1.reps.size() ||
        rep_values2.size() != f.support2.reps.size())
        throw contract_error("assemble_general: representative count mismatch");
    detail::scatter_even(g, f.support1, rep_values1, f.omega);
    detail::scatter_even(g, f.support2, rep_values2, f.omega);
    return f;
}

namespace detail {

// Representative fill order for geometric initialization: nearest to the ball
// center first, ties by index.
inline std::vector<std::size_t> order_by_distance(const DiskGrid& g, const BallCells& bc,
                                                  Vec2 center) {
    std::vector<std::size_t> ord(bc.reps.size());
    for (std::size_t k = 0; k < ord.size(); ++k) ord[k] = k;
    std::sort(ord.begin(), ord.end(), [&](std::size_t a, std::size_t b) {
        double da = norm2(g.centers[bc.reps[a]] - center);
        double db = norm2(g.centers[bc.reps[b]] - center);
        if (da != db) return da < db;
        return bc.reps[a] < bc.reps[b];
    });
    return ord;
}

inline std::vector<double> fill_to_values(const GreedyFill& gf, std::size_t count,
                                          const std::vector<std::size_t>& order, double bound) {
    std::vector<double> vals(count, 0.0);
    for (int pos : gf.full) vals[order[pos]] = bound;
    if (gf.fractional >= 0) vals[order[gf.fractional]] = gf.fractional_value;
    return vals;
}

} // namespace detail

/// Starting field: a disk of area kappa/lambda in each ball (rounded to cells,
/// one fractional representative makes the mass exact).  init_shift moves the
/// starting disk's center along the x2 axis away from the ball center; the
/// ascent may then settle on a different local maximizer, which is why the
/// shift is part of the reproducible configuration.
inline PatchField initial_patch(const PatchConstraints& pc, const DiskGrid& g,
                                double init_shift = 0.0) {
    pc.validate();
    BallCells b1 = ball_cells(g, pc.ball1);
    const double pair_mass = 2.0 * g.cell_area; // each representative covers a mirror pair
    const Vec2 seed1{pc.ball1.center.x, pc.ball1.center.y + init_shift};

    auto ord1 = detail::order_by_distance(g, b1, seed1);
    auto gf1 = detail::greedy_fill(ord1.size(), pair_mass, pc.lambda, pc.kappa1);
    auto vals1 = detail::fill_to_values(gf1, b1.reps.size(), ord1, pc.lambda);

    if (pc.symmetric) return assemble_symmetric(g, pc, vals1);

    BallCells b2 = ball_cells(g, pc.ball2);
    const Vec2 seed2{pc.ball2.center.x, pc.ball2.center.y - init_shift};
    auto ord2 = detail::order_by_distance(g, b2, seed2);
    auto gf2 = detail::greedy_fill(ord2.size(), pair_mass, pc.lambda, -pc.kappa2);
    auto vals2 = detail::fill_to_values(gf2, b2.reps.size(), ord2, pc.lambda);
    for (double& v : vals2) v = -v;
    return assemble_general(g, pc, vals1, vals2);
}

namespace detail {

// Clip representative values into [0, bound] and shift mass on the sorted
// boundary layer until the patch mass is exact: excess is drained from the
// smallest values, deficit poured into the largest non-full ones, at most one
// partially adjusted cell on either path.
inline std::vector<double> adjust_mass(const DiskGrid& g, const BallCells& bc,
                                       std::vector<double> vals, double bound, double target,
                                       double cell_mass) {
    for (double& v : vals) v = std::clamp(v, 0.0, bound);
    if (bound * cell_mass * static_cast<double>(vals.size()) < target)
        throw infeasible_error("make_feasible: mass unreachable under the bound");

    double mass = 0.0;
    for (double v : vals) mass += v * cell_mass;

    std::vector<std::size_t> ord(vals.size());
    for (std::size_t k = 0; k < ord.size(); ++k) ord[k] = k;
    auto key = [&](std::size_t k) {
        return std::make_tuple(vals[k], std::fabs(g.centers[bc.reps[k]].y),
                               -bc.reps[k]);
    };
    std::sort(ord.begin(), ord.end(),
              [&](std::size_t a, std::size_t b) { return key(a) < key(b); }); // ascending

    // The partially adjusted index, if any, is finally set from the residual
    // of all the other values so the patch mass is exact to one rounding.
    long partial = -1;
    if (mass > target) {
        for (std::size_t k : ord) {
            double excess = mass - target;
            if (excess <= 0.0) break;
            double m = vals[k] * cell_mass;
            if (m <= excess) {
                vals[k] = 0.0;
                mass -= m;
            } else {
                partial = static_cast<long>(k);
                break;
            }
        }
    } else if (mass < target) {
        for (auto it = ord.rbegin(); it != ord.rend(); ++it) {
            double deficit = target - mass;
            if (deficit <= 0.0) break;
            double headroom = (bound - vals[*it]) * cell_mass;
            if (headroom <= deficit) {
                vals[*it] = bound;
                mass += headroom;
            } else {
                partial = static_cast<long>(*it);
                break;
            }
        }
        if (partial < 0 && mass < target)
            throw infeasible_error("make_feasible: mass unreachable under the bound");
    }
    if (partial >= 0) {
        double others = 0.0;
        for (std::size_t k = 0; k < vals.size(); ++k)
            if (static_cast<long>(k) != partial) others += vals[k] * cell_mass;
        vals[static_cast<std::size_t>(partial)] = std::clamp((target - others) / cell_mass, 0.0, bound);
    }
    return vals;
}

} // namespace detail

/// Project a raw cell field onto the class: clip to the bound, correct each
/// patch mass through the sorted boundary layer, mirror per the class symmetry.
/// Pre: raw vanishes outside B1 and B2.
inline PatchField make_feasible(const DiskGrid& g, std::span<const double> raw,
                                const PatchConstraints& pc) {
    pc.validate();
    if (raw.size() != g.size())
        throw contract_error("make_feasible: raw length does not match cell count");
    BallCells b1 = ball_cells(g, pc.ball1);
    BallCells b2 = ball_cells(g, pc.ball2);
    {
        std::vector<char> in_support(g.size(), 0);
        for (int i : b1.cells) in_support[i] = 1;
        for (int i : b2.cells) in_support[i] = 1;
        for (std::size_t i = 0; i < g.size(); ++i)
            if (!in_support[i] && raw[i] != 0.0)
                throw contract_error("make_feasible: raw field not supported in B1 union B2");
    }
    const double pair_mass = 2.0 * g.cell_area;

    auto rep_average = [&](const BallCells& bc, double sign) {
        std::vector<double> v(bc.reps.size());
        for (std::size_t k = 0; k < v.size(); ++k) {
            int i = bc.reps[k];
            v[k] = sign * 0.5 * (raw[i] + raw[g.reflect_x1[i]]);
        }
        return v;
    };

    auto vals1 = detail::adjust_mass(g, b1, rep_average(b1, 1.0), pc.lambda, pc.kappa1, pair_mass);
    if (pc.symmetric) return assemble_symmetric(g, pc, vals1);

    auto vals2 =
        detail::adjust_mass(g, b2, rep_average(b2, -1.0), pc.lambda, -pc.kappa2, pair_mass);
    for (double& v : vals2) v = -v;
    return assemble_general(g, pc, vals1, vals2);
}

} // namespace vpatch
