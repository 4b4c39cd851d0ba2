#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <vector>

#include "vpatch/errors.hpp"
#include "vpatch/green_kernel.hpp"
#include "vpatch/patch_class.hpp"

namespace vpatch {

// Kinetic-energy maximization over the patch class by bathtub ascent: each
// step evaluates psi = G omega on the support balls and refills the patches
// with the bound value on the highest-psi cells.  A fixed point of the
// selection satisfies omega = lambda I_{psi > mu} within each ball, up to the
// fractional mirror pair that makes the mass exact, and the energy is
// non-decreasing along the iteration.

struct SolverConfig {
    int max_iters = 500;
    double stability_tol = 0.0;  // fraction of cells allowed to change at convergence
    double energy_tol = 1e-13;   // relative energy stall that also stops the loop
    double init_shift = 0.0;     // x2 offset of the starting disk from the ball center
    bool validate_iterates = false;

    void validate() const {
        if (max_iters < 1) throw config_error("SolverConfig: max_iters must be >= 1");
    }
};

/// E(omega) = 1/2 sum_ij G(c_i, c_j) w_i w_j a_i a_j, self cells using the
/// exact log average; equals 1/2 sum psi*omega*area with psi = apply_green.
inline double energy(const DiskGrid& g, std::span<const double> omega, const KernelEval& ker,
                     int threads = 0) {
    const std::vector<int> act = detail::active_cells(omega);
    std::vector<Vec2> targets;
    targets.reserve(act.size());
    for (int i : act) targets.push_back(g.centers[i]);
    std::vector<double> psi = apply_green(g, omega, targets, ker, threads);
    double e = 0.0;
    for (std::size_t k = 0; k < act.size(); ++k) e += psi[k] * omega[act[k]];
    return 0.5 * e * g.cell_area;
}

struct BathtubSelection {
    std::vector<int> full;          // cell ids assigned the bound, in fill order
    int fractional = -1;            // cell id holding the remainder, or -1
    double fractional_value = 0.0;  // in (0, bound)
    double mu = std::numeric_limits<double>::quiet_NaN(); // psi at the last fully filled cell
};

// Fill the given cells with `bound`, highest psi first, until target_mass is
// reached; the next cell takes the fractional remainder.  Ties in psi break
// deterministically: larger |x2| first, then smaller cell index.  Each cell
// carries mass bound*area*area_multiplier (multiplier 2 when a cell stands
// for a mirror pair).  mu is psi at the last fully filled cell; if the target
// fits inside a single fractional cell, mu is psi at the top cell so that
// {psi > mu} is empty.
inline BathtubSelection bathtub_select(const DiskGrid& g, std::span<const int> cells,
                                       std::span<const double> psi, double target_mass,
                                       double bound, double area_multiplier = 1.0) {
    if (cells.size() != psi.size())
        throw contract_error("bathtub_select: psi length does not match cell count");
    if (!(target_mass > 0.0)) throw contract_error("bathtub_select: target mass must be positive");

    std::vector<std::size_t> order(cells.size());
    for (std::size_t k = 0; k < order.size(); ++k) order[k] = k;
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (psi[a] != psi[b]) return psi[a] > psi[b];
        double ya = std::fabs(g.centers[cells[a]].y);
        double yb = std::fabs(g.centers[cells[b]].y);
        if (ya != yb) return ya > yb;
        return cells[a] < cells[b];
    });

    const double cell_mass = g.cell_area * area_multiplier;
    detail::GreedyFill gf = detail::greedy_fill(order.size(), cell_mass, bound, target_mass);

    BathtubSelection sel;
    for (int pos : gf.full) sel.full.push_back(cells[order[pos]]);
    if (gf.fractional >= 0) {
        sel.fractional = cells[order[gf.fractional]];
        sel.fractional_value = gf.fractional_value;
    }
    if (gf.last_full >= 0)
        sel.mu = psi[order[gf.last_full]];
    else if (!order.empty())
        sel.mu = psi[order[0]];
    return sel;
}

struct SolveResult {
    PatchField omega;
    double mu = 0.0;  // threshold of patch 1
    double mu2 = 0.0; // threshold of patch 2 (equals mu for the symmetric class)
    double energy = 0.0;
    int iterations = 0;
    bool converged = false;
    std::vector<double> energy_history; // E(omega_0), E(omega_1), ...
};

/// mu of one patch as a pure function of the field: the minimum of the signed
/// stream function over the patch's fully filled x1 > 0 cells (the bathtub
/// convention: psi at the last fully filled cell).  With no full cell, the top
/// signed psi over the ball, which leaves {psi > mu} empty.
inline double patch_threshold(const DiskGrid& g, const PatchField& f, int patch,
                              const KernelEval& ker, int threads = 0) {
    const BallCells& bc = (patch == 1) ? f.support1 : f.support2;
    const double sign = (patch == 1) ? 1.0 : -1.0;
    std::vector<Vec2> targets;
    targets.reserve(bc.reps.size());
    for (int i : bc.reps) targets.push_back(g.centers[i]);
    std::vector<double> psi = apply_green(g, f.omega, targets, ker, threads);

    const double lam = f.constraints.lambda;
    bool any_full = false;
    double mu = 0.0, top = -std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < bc.reps.size(); ++k) {
        double score = sign * psi[k];
        top = std::max(top, score);
        if (f.omega[bc.reps[k]] == sign * lam) {
            mu = any_full ? std::min(mu, score) : score;
            any_full = true;
        }
    }
    return any_full ? mu : top;
}

namespace detail {

struct RepSelection {
    std::vector<char> chosen; // per representative: 0 empty, 1 full, 2 fractional
    double fractional_value = 0.0;
    double mu = 0.0;

    bool operator==(const RepSelection& o) const {
        return chosen == o.chosen; // same cells at the bound and same fractional cell
    }

    int active_count() const {
        int n = 0;
        for (char c : chosen) n += (c != 0);
        return n;
    }
    int changed_from(const RepSelection& o) const {
        int n = 0;
        for (std::size_t k = 0; k < chosen.size(); ++k) n += (chosen[k] != o.chosen[k]);
        return n;
    }
};

inline RepSelection to_rep_selection(const BallCells& bc, const BathtubSelection& sel) {
    RepSelection rs;
    rs.chosen.assign(bc.reps.size(), 0);
    rs.fractional_value = sel.fractional_value;
    rs.mu = sel.mu;
    for (int id : sel.full) {
        auto it = std::lower_bound(bc.reps.begin(), bc.reps.end(), id);
        rs.chosen[static_cast<std::size_t>(it - bc.reps.begin())] = 1;
    }
    if (sel.fractional >= 0) {
        auto it = std::lower_bound(bc.reps.begin(), bc.reps.end(), sel.fractional);
        rs.chosen[static_cast<std::size_t>(it - bc.reps.begin())] = 2;
    }
    return rs;
}

inline std::vector<double> rep_values(const RepSelection& rs, double bound) {
    std::vector<double> v(rs.chosen.size(), 0.0);
    for (std::size_t k = 0; k < v.size(); ++k) {
        if (rs.chosen[k] == 1) v[k] = bound;
        if (rs.chosen[k] == 2) v[k] = rs.fractional_value;
    }
    return v;
}

} // namespace detail

/// Bathtub ascent on the class defined by `pc`.  Stops at an exact fixed point
/// of the active set (or on an energy stall below energy_tol); max_iters
/// exceeded returns converged = false.  An energy decrease beyond 1e-12
/// relative aborts: the selection maximizes the linearized energy, so a
/// decrease signals a quadrature or selection bug.
inline SolveResult solve(const DiskGrid& g, const PatchConstraints& pc,
                         const SolverConfig& cfg = {}, int threads = 0) {
    pc.validate();
    cfg.validate();
    const KernelEval ker(g);

    PatchField field = initial_patch(pc, g, cfg.init_shift);
    const BallCells& b1 = field.support1;
    const BallCells& b2 = field.support2;

    std::vector<Vec2> targets1, targets2;
    for (int i : b1.reps) targets1.push_back(g.centers[i]);
    if (!pc.symmetric)
        for (int i : b2.reps) targets2.push_back(g.centers[i]);

    SolveResult res;
    res.energy_history.push_back(energy(g, field.omega, ker, threads));

    detail::RepSelection prev1, prev2;
    bool have_prev = false;

    for (int it = 1; it <= cfg.max_iters; ++it) {
        std::vector<double> psi1 = apply_green(g, field.omega, targets1, ker, threads);
        BathtubSelection sel1 =
            bathtub_select(g, b1.reps, psi1, pc.kappa1, pc.lambda, 2.0);
        detail::RepSelection rep1 = detail::to_rep_selection(b1, sel1);

        detail::RepSelection rep2;
        if (!pc.symmetric) {
            std::vector<double> psi2 = apply_green(g, field.omega, targets2, ker, threads);
            for (double& v : psi2) v = -v; // patch 2 fills where psi is most negative
            BathtubSelection sel2 =
                bathtub_select(g, b2.reps, psi2, -pc.kappa2, pc.lambda, 2.0);
            rep2 = detail::to_rep_selection(b2, sel2);
        }

        PatchField next =
            pc.symmetric
                ? assemble_symmetric(g, pc, detail::rep_values(rep1, pc.lambda))
                : [&] {
                      auto v1 = detail::rep_values(rep1, pc.lambda);
                      auto v2 = detail::rep_values(rep2, pc.lambda);
                      for (double& v : v2) v = -v;
                      return assemble_general(g, pc, v1, v2);
                  }();

        double e_next = energy(g, next.omega, ker, threads);
        double e_prev = res.energy_history.back();
        if (e_next < e_prev - 1e-12 * std::fabs(e_prev))
            throw numerical_error("solve: energy decreased along the ascent");
        res.energy_history.push_back(e_next);
        res.iterations = it;

        if (cfg.validate_iterates) {
            ValidationResult v = validate_patch(next);
            if (!v.ok) throw numerical_error("solve: iterate left the class: " + v.first_violation);
        }

        // stability_tol = 0 demands the exact fixed point of the cell set;
        // a positive value tolerates that fraction of changed active cells.
        auto stable = [&](const detail::RepSelection& cur, const detail::RepSelection& prev) {
            return cur.changed_from(prev) <=
                   static_cast<int>(cfg.stability_tol * cur.active_count());
        };
        bool fixed_point = have_prev && stable(rep1, prev1) &&
                           (pc.symmetric || stable(rep2, prev2));
        bool stalled = std::fabs(e_next - e_prev) <= cfg.energy_tol * std::max(std::fabs(e_prev), 1.0);

        field = std::move(next);
        prev1 = std::move(rep1);
        prev2 = std::move(rep2);
        have_prev = true;

        if (fixed_point || stalled) {
            res.converged = true;
            break;
        }
    }

    // mu recomputed from the final field so it is reproducible from the
    // persisted patch alone.
    res.mu = patch_threshold(g, field, 1, ker, threads);
    res.mu2 = pc.symmetric ? res.mu : patch_threshold(g, field, 2, ker, threads);
    res.energy = res.energy_history.back();
    res.omega = std::move(field);
    return res;
}

/// Threshold map f of the converged profile: f(t) = lambda for t > mu, 0 on
/// [-mu, mu], -lambda for t < -mu.
inline double threshold_value(double lambda, double mu, double t) {
    if (t > mu) return lambda;
    if (t < -mu) return -lambda;
    return 0.0;
}

struct ThresholdCheck {
    double lambda = 0.0;
    double mu = 0.0;
    double mu2 = 0.0;
    int violations_patch1 = 0;  // cells in B1 with omega != f(psi); fractional cells count
    int violations_patch2 = 0;
    int violations_outside = 0; // cells outside both balls where |psi| exceeds the threshold

    /// Patch form of the converged profile: at most the fractional mirror pair
    /// per patch may deviate, and psi must stay inside [-mu, mu] off the balls.
    bool patch_form_ok() const {
        return violations_patch1 <= 2 && violations_patch2 <= 2 && violations_outside == 0;
    }
};

/// Verify omega = f(psi) cell by cell on the converged result.  More than the
/// fractional mirror pair per patch (or any outside violation) signals that
/// lambda is not large enough or the grid too coarse.
inline ThresholdCheck threshold_profile(const DiskGrid& g, const SolveResult& res,
                                        int threads = 0) {
    if (!res.converged) throw contract_error("threshold_profile: result did not converge");
    const PatchConstraints& pc = res.omega.constraints;
    const KernelEval ker(g);
    StreamField psi = solve_stream(g, res.omega.omega, ker, threads);

    double max_abs_psi = 0.0;
    for (double v : psi.values) max_abs_psi = std::max(max_abs_psi, std::fabs(v));
    const double tol = 1e-9 * max_abs_psi;
    const double lam = pc.lambda;

    ThresholdCheck chk;
    chk.lambda = lam;
    chk.mu = res.mu;
    chk.mu2 = res.mu2;

    std::vector<char> where(g.size(), 0);
    for (int i : res.omega.support1.cells) where[i] = 1;
    for (int i : res.omega.support2.cells) where[i] = 2;

    // omega = f(psi) with f(t) = lambda for t > mu, 0 on [-mu2, mu],
    // -lambda for t < -mu2; fractional cells fail by construction
    auto consistent = [&](double w, double p) {
        if (w == lam) return p >= res.mu - tol;
        if (w == -lam) return p <= -res.mu2 + tol;
        if (w == 0.0) return p <= res.mu + tol && p >= -res.mu2 - tol;
        return false;
    };
    for (std::size_t i = 0; i < g.size(); ++i) {
        if (consistent(res.omega.omega[i], psi.values[i])) continue;
        if (where[i] == 1)
            ++chk.violations_patch1;
        else if (where[i] == 2)
            ++chk.violations_patch2;
        else
            ++chk.violations_outside;
    }
    return chk;
}

} // namespace vpatch
