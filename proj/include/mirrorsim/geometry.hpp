#pragma once

#include <cmath>
#include <stdexcept>
#include <string>

#include "mirrorsim/vec3.hpp"

namespace mirrorsim {

// Cylinder of radius A around the x axis.  Particles live in the sub-cylinder
// of radius A_bar and are held away from the wall by an axial magnetic field
// whose strength diverges at r = A.  L bounds the axial diagnostic window,
// M the index range of the populated slabs.
struct Geometry {
    double A = 1.0;
    double A_bar = 0.6;
    double theta = 3.0;
    int L = 16;
    int M = 16;
};

inline void validate(const Geometry& g) {
    if (!(g.A > 0.0))
        throw std::invalid_argument("geometry: A must be positive (got " + std::to_string(g.A) + ")");
    if (!(g.A_bar > 0.5 * g.A && g.A_bar < g.A))
        throw std::invalid_argument("geometry: A_bar must lie in (A/2, A) (got " + std::to_string(g.A_bar) + ")");
    if (!(g.theta > 2.0))
        throw std::invalid_argument("geometry: theta must exceed 2 (got " + std::to_string(g.theta) + ")");
    if (g.M < 1 || g.L < g.M)
        throw std::invalid_argument("geometry: need L >= M >= 1 (got L=" + std::to_string(g.L) +
                                    ", M=" + std::to_string(g.M) + ")");
}

// Mirror strength h(r^2) = (A^2 - r^2)^(-theta), diverging at the wall.
inline double eval_h(const Geometry& g, double r_sq) {
    const double gap = g.A * g.A - r_sq;
    if (!(gap > 0.0))
        throw std::domain_error("eval_h: r_sq outside the cylinder (r_sq=" + std::to_string(r_sq) + ")");
    return std::pow(gap, -g.theta);
}

// B(x) = (h(y^2 + z^2), 0, 0): axial, invariant along x and under rotation
// about the axis.
inline Vec3 eval_B(const Geometry& g, const Vec3& pos) {
    return {eval_h(g, radial_sq(pos)), 0.0, 0.0};
}

// Primitive of h in the r^2 variable: H(u) = (A^2 - u)^(1 - theta) / (theta - 1),
// so H' = h and H diverges at u = A^2.  The integration constant is fixed to 0.
inline double eval_H(const Geometry& g, double u) {
    const double gap = g.A * g.A - u;
    if (!(gap > 0.0))
        throw std::domain_error("eval_H: u outside [0, A^2) (u=" + std::to_string(u) + ")");
    return std::pow(gap, 1.0 - g.theta) / (g.theta - 1.0);
}

}  // namespace mirrorsim
