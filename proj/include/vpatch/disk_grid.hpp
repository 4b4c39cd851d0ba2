#pragma once

#include <span>
#include <vector>

#include "vpatch/errors.hpp"
#include "vpatch/geometry.hpp"

namespace vpatch {

// Uniform Cartesian lattice of spacing 2/n clipped to the open unit disk.
// Cell centers sit at (mx/n, my/n) with mx, my odd integers, so the lattice is
// offset by half a spacing from both axes: no center lies on an axis and the
// reflections x -> (-x1, x2) and x -> (x1, -x2) act exactly on the index set.
struct DiskGrid {
    int n = 0;              // requested cells per axis
    double spacing = 0.0;   // h = 2/n
    double cell_area = 0.0; // h^2

    std::vector<Vec2> centers;   // strictly inside the disk
    std::vector<int> mx, my;     // integer coordinates, center = (mx/n, my/n)
    std::vector<int> reflect_x1; // cell index of (-x1, x2)
    std::vector<int> reflect_x2; // cell index of (x1, -x2)
    std::vector<int> quadrant;   // cells with x1 > 0 and x2 > 0

    std::size_t size() const { return centers.size(); }

    double total_area() const { return static_cast<double>(centers.size()) * cell_area; }
};

inline DiskGrid build_grid(int n) {
    if (n < 8) throw config_error("build_grid: n must be at least 8");

    DiskGrid g;
    g.n = n;
    g.spacing = 2.0 / n;
    g.cell_area = g.spacing * g.spacing;

    // odd m with |m| <= n-1 covers (-1, 1); slot(m) maps it to [0, n)
    auto slot = [n](int m) { return (m + n - 1) / 2; };
    std::vector<int> index(static_cast<std::size_t>(n) * n, -1);

    const long long nn = static_cast<long long>(n) * n;
    for (int my_ = -(n - 1); my_ <= n - 1; my_ += 2) {
        for (int mx_ = -(n - 1); mx_ <= n - 1; mx_ += 2) {
            if (mx_ % 2 == 0 || my_ % 2 == 0) continue;
            long long r2 = static_cast<long long>(mx_) * mx_ + static_cast<long long>(my_) * my_;
            if (r2 >= nn) continue; // center-inside test, exact in integers
            int id = static_cast<int>(g.centers.size());
            g.centers.push_back({static_cast<double>(mx_) / n, static_cast<double>(my_) / n});
            g.mx.push_back(mx_);
            g.my.push_back(my_);
            index[static_cast<std::size_t>(slot(my_)) * n + slot(mx_)] = id;
        }
    }

    g.reflect_x1.resize(g.size());
    g.reflect_x2.resize(g.size());
    for (std::size_t i = 0; i < g.size(); ++i) {
        g.reflect_x1[i] = index[static_cast<std::size_t>(slot(g.my[i])) * n + slot(-g.mx[i])];
        g.reflect_x2[i] = index[static_cast<std::size_t>(slot(-g.my[i])) * n + slot(g.mx[i])];
        if (g.mx[i] > 0 && g.my[i] > 0) g.quadrant.push_back(static_cast<int>(i));
    }
    return g;
}

/// Midpoint quadrature: sum_i field[i] * area_i.
inline double integrate(const DiskGrid& g, std::span<const double> field) {
    if (field.size() != g.size())
        throw contract_error("integrate: field length does not match cell count");
    double s = 0.0;
    for (double v : field) s += v;
    return s * g.cell_area;
}

// Projection onto fields even in x1 and odd in x2:
//   g(x) = (f(x) + f(xbar) - f(xtil) - f(xbar~)) / 4.
// The pair sums are formed so that g(reflect_x2(i)) == -g(i) and
// g(reflect_x1(i)) == g(i) hold bitwise, not just to rounding.
inline std::vector<double> symmetrize_even_odd(const DiskGrid& g, std::span<const double> f) {
    if (f.size() != g.size())
        throw contract_error("symmetrize_even_odd: field length does not match cell count");
    std::vector<double> out(g.size());
    for (std::size_t i = 0; i < g.size(); ++i) {
        int i1 = g.reflect_x1[i];
        int i2 = g.reflect_x2[i];
        int i12 = g.reflect_x1[i2];
        double even_part = f[i] + f[i1];          // values on the x2 > 0 side of the orbit
        double odd_part = f[i2] + f[i12];         // their x2-mirrors
        out[i] = 0.25 * (even_part - odd_part);
    }
    return out;
}

} // namespace vpatch
