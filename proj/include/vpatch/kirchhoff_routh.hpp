#pragma once

#include <array>
#include <cmath>
#include <optional>

#include "vpatch/errors.hpp"
#include "vpatch/geometry.hpp"
#include "vpatch/green_kernel.hpp"

namespace vpatch {

// Two-vortex Kirchhoff-Routh function on the unit disk,
//
//   H2(x,y) = -2 k1 k2 G(x,y) + k1^2 h(x,x) + k2^2 h(y,y),
//
// its radial reduction over antipodal placements, and the Newton solve for
// the radial critical point.  With k1 > 0 > k2 and gamma = -k2/k1, every
// minimum of H2 sits at (rho1 e, -rho2 e) for a unit vector e; the radii
// solve the polynomial system (F1, F2) below.

struct KrProblem {
    double kappa1 = 1.0;
    double kappa2 = -1.0;

    double gamma() const { return -kappa2 / kappa1; }

    void validate() const {
        if (!(kappa1 > 0.0)) throw config_error("KrProblem: kappa1 must be positive");
        if (!(kappa2 < 0.0)) throw config_error("KrProblem: kappa2 must be negative");
    }
};

struct KrCritPoint {
    double rho1 = 0.0; // radius of the positive vortex
    double rho2 = 0.0; // radius of the negative vortex
    double theta = 0.0;
    double value = 0.0; // H2 at the critical configuration
    double f1 = 0.0;    // residuals of the polynomial system
    double f2 = 0.0;

    // Reported representative of the circle of minimizers; theta = pi/2 puts
    // the positive vortex on the upper x2 axis.
    Vec2 point1() const { return {rho1 * std::cos(theta), rho1 * std::sin(theta)}; }
    Vec2 point2() const { return {-rho2 * std::cos(theta), -rho2 * std::sin(theta)}; }
};

inline double kr_energy(const KrProblem& p, Vec2 x, Vec2 y) {
    p.validate();
    if (norm2(x - y) == 0.0) throw singularity_error("kr_energy: coincident vortices");
    return -2.0 * p.kappa1 * p.kappa2 * green(x, y) + p.kappa1 * p.kappa1 * robin(x) +
           p.kappa2 * p.kappa2 * robin(y);
}

// R(rho1, rho2) = (1 + r1 r2)^(2g) / [ (r1 + r2)^(2g) (1 - r1^2)(1 - r2^2)^(g^2) ],
// the antipodal reduction of H2 up to scale: H2 = (k1^2 / 2pi) ln R there.
// Used as the argmin objective only; values are cross-checked against
// kr_energy at the reported configuration.
inline double radial_objective(double gamma, double rho1, double rho2) {
    if (!(gamma > 0.0)) throw domain_error("radial_objective: gamma must be positive");
    if (!(rho1 > 0.0 && rho1 < 1.0 && rho2 > 0.0 && rho2 < 1.0))
        throw domain_error("radial_objective: radii must lie in (0,1)");
    return std::pow(1.0 + rho1 * rho2, 2.0 * gamma) /
           (std::pow(rho1 + rho2, 2.0 * gamma) * (1.0 - rho1 * rho1) *
            std::pow(1.0 - rho2 * rho2, gamma * gamma));
}

struct CritResidual {
    double f1 = 0.0;
    double f2 = 0.0;
};

// Stationarity system of ln R, cleared of denominators:
//   (1+r1r2)(r1+r2)(1-r1^2)/2  * d(ln R)/dr1 = F1
//   (1+r1r2)(r1+r2)(1-r2^2)/(2g) * d(ln R)/dr2 = F2.
inline CritResidual crit_system(double gamma, double rho1, double rho2) {
    const double g = gamma, r1 = rho1, r2 = rho2;
    double f1 = r1 * r2 + (1.0 + g) * r1 * r1 + g * r2 * r2 + r1 * r1 * r1 * r2 +
                (1.0 - g) * r1 * r1 * r2 * r2 - g;
    double f2 = g * r1 * r2 + r1 * r1 + r2 * r2 + (g - 1.0) * r1 * r1 * r2 * r2 +
                g * r2 * r2 + g * r1 * r2 * r2 * r2 - 1.0;
    return {f1, f2};
}

/// Row-major Jacobian [dF1/dr1, dF1/dr2, dF2/dr1, dF2/dr2].
inline std::array<double, 4> crit_jacobian(double gamma, double rho1, double rho2) {
    const double g = gamma, r1 = rho1, r2 = rho2;
    return {
        r2 + 2.0 * (1.0 + g) * r1 + 3.0 * r1 * r1 * r2 + 2.0 * (1.0 - g) * r1 * r2 * r2,
        r1 + 2.0 * g * r2 + r1 * r1 * r1 + 2.0 * (1.0 - g) * r1 * r1 * r2,
        g * r2 + 2.0 * r1 + 2.0 * (g - 1.0) * r1 * r2 * r2 + g * r2 * r2 * r2,
        g * r1 + 2.0 * r2 + 2.0 * (g - 1.0) * r1 * r1 * r2 + 2.0 * g * r2 + 3.0 * g * r1 * r2 * r2,
    };
}

namespace detail {

// Damped Newton on (F1, F2), iterates clamped into [0.01, 0.99]^2.
inline std::optional<std::array<double, 2>> newton_crit(double gamma, double r1, double r2,
                                                        int max_iters, double tol) {
    auto resid_norm = [gamma](double a, double b) {
        auto f = crit_system(gamma, a, b);
        return std::max(std::fabs(f.f1), std::fabs(f.f2));
    };
    auto clamp01 = [](double v) { return std::min(0.99, std::max(0.01, v)); };

    double fn = resid_norm(r1, r2);
    for (int it = 0; it < max_iters; ++it) {
        if (fn <= tol) return std::array<double, 2>{r1, r2};
        auto f = crit_system(gamma, r1, r2);
        auto j = crit_jacobian(gamma, r1, r2);
        double det = j[0] * j[3] - j[1] * j[2];
        if (det == 0.0) return std::nullopt;
        double dr1 = -(f.f1 * j[3] - f.f2 * j[1]) / det;
        double dr2 = -(f.f2 * j[0] - f.f1 * j[2]) / det;
        double alpha = 1.0;
        bool accepted = false;
        while (alpha > 1e-8) {
            double c1 = clamp01(r1 + alpha * dr1);
            double c2 = clamp01(r2 + alpha * dr2);
            double cn = resid_norm(c1, c2);
            if (cn < fn) {
                r1 = c1;
                r2 = c2;
                fn = cn;
                accepted = true;
                break;
            }
            alpha *= 0.5;
        }
        if (!accepted) return std::nullopt;
    }
    return fn <= tol ? std::optional<std::array<double, 2>>({r1, r2}) : std::nullopt;
}

// Fallback seed: coarse scan of R over (0,1)^2.
inline std::array<double, 2> grid_seed(double gamma, int n = 400) {
    double best = 0.0, b1 = 0.5, b2 = 0.5;
    bool first = true;
    for (int i = 1; i < n; ++i) {
        for (int j = 1; j < n; ++j) {
            double r1 = static_cast<double>(i) / n;
            double r2 = static_cast<double>(j) / n;
            double v = radial_objective(gamma, r1, r2);
            if (first || v < best) {
                best = v;
                b1 = r1;
                b2 = r2;
                first = false;
            }
        }
    }
    return {b1, b2};
}

} // namespace detail

/// Radial minimizer of H2 for the given circulation pair.  Newton from
/// `start` with step damping; on failure retries from a grid-scanned seed.
inline KrCritPoint kr_minimize(const KrProblem& p, std::array<double, 2> start = {0.5, 0.5},
                               int max_iters = 100) {
    p.validate();
    const double gamma = p.gamma();
    const double tol = 1e-14;
    auto root = detail::newton_crit(gamma, start[0], start[1], max_iters, tol);
    if (!root) {
        auto seed = detail::grid_seed(gamma);
        root = detail::newton_crit(gamma, seed[0], seed[1], max_iters, tol);
    }
    if (!root) throw numerical_error("kr_minimize: Newton iteration did not converge");

    KrCritPoint cp;
    cp.rho1 = (*root)[0];
    cp.rho2 = (*root)[1];
    cp.theta = M_PI / 2.0;
    auto f = crit_system(gamma, cp.rho1, cp.rho2);
    cp.f1 = f.f1;
    cp.f2 = f.f2;
    cp.value = kr_energy(p, cp.point1(), cp.point2());
    return cp;
}

inline KrCritPoint kr_minimize(double gamma, std::array<double, 2> start = {0.5, 0.5},
                               int max_iters = 100) {
    if (!(gamma > 0.0)) throw config_error("kr_minimize: gamma must be positive");
    return kr_minimize(KrProblem{1.0, -gamma}, start, max_iters);
}

} // namespace vpatch
