#pragma once

#include <cmath>

namespace vpatch {

struct Vec2 {
    double x = 0.0;
    double y = 0.0;

    friend Vec2 operator+(Vec2 a, Vec2 b) { return {a.x + b.x, a.y + b.y}; }
    friend Vec2 operator-(Vec2 a, Vec2 b) { return {a.x - b.x, a.y - b.y}; }
    friend Vec2 operator*(double s, Vec2 a) { return {s * a.x, s * a.y}; }
    friend Vec2 operator*(Vec2 a, double s) { return s * a; }
};

inline double dot(Vec2 a, Vec2 b) { return a.x * b.x + a.y * b.y; }
inline double norm2(Vec2 a) { return a.x * a.x + a.y * a.y; }
inline double norm(Vec2 a) { return std::sqrt(norm2(a)); }
inline double dist(Vec2 a, Vec2 b) { return norm(a - b); }

// rotate by -pi/2: the perp used in v = grad^perp(psi) = (d2 psi, -d1 psi)
inline Vec2 perp(Vec2 g) { return {g.y, -g.x}; }

/// Open ball, used for the patch supports; must sit strictly inside the unit disk.
struct Ball {
    Vec2 center;
    double radius = 0.0;

    bool contains(Vec2 p) const { return dist(p, center) < radius; }
    double area() const { return M_PI * radius * radius; }
    bool strictly_inside_disk() const { return norm(center) + radius < 1.0; }
};

inline bool closures_disjoint(const Ball& a, const Ball& b) {
    return dist(a.center, b.center) > a.radius + b.radius;
}

} // namespace vpatch
