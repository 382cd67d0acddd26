#pragma once

#include <cstdint>
#include <limits>
#include <vector>

#include "mirrorsim/geometry.hpp"
#include "mirrorsim/vec3.hpp"

namespace mirrorsim {

struct Particle {
    std::int64_t id = 0;
    Vec3 pos;
    Vec3 vel;
    double weight = 0.0;
};

// Parameters of the initial measure: Gaussian velocity profile
// C0 * exp(-lambda |v|^2) truncated at |v| < N_cutoff, axial slab masses
// decaying like C1 * |i|^(-alpha).  N_cutoff = infinity means no truncation.
struct InitialDataParams {
    double C0 = 1.0;
    double lambda = 1.0;
    double C1 = 1.0;
    double alpha = 0.7;
    double N_cutoff = std::numeric_limits<double>::infinity();
};

inline void validate(const InitialDataParams& p) {
    if (!(p.C0 > 0.0))
        throw std::invalid_argument("initial data: C0 must be positive");
    if (!(p.lambda > 0.0))
        throw std::invalid_argument("initial data: lambda must be positive");
    if (!(p.C1 > 0.0))
        throw std::invalid_argument("initial data: C1 must be positive");
    if (!(p.alpha > 5.0 / 9.0))
        throw std::invalid_argument("initial data: alpha must exceed 5/9 (got " +
                                    std::to_string(p.alpha) + ")");
    if (!(p.N_cutoff > 0.0))
        throw std::invalid_argument("initial data: N_cutoff must be positive");
    // A cutoff far below the thermal speed would make rejection sampling spin
    // almost forever; treat it as a configuration mistake.
    if (p.N_cutoff < 0.1 / std::sqrt(p.lambda))
        throw std::invalid_argument("initial data: N_cutoff must be at least 0.1/sqrt(lambda)");
}

// Weighted particle cloud together with everything needed to reproduce or
// evolve it.  Particles are kept in ascending id order.
struct Ensemble {
    std::vector<Particle> particles;
    InitialDataParams params;
    Geometry geometry;
    std::uint64_t seed = 0;
    double time = 0.0;
};

}  // namespace mirrorsim
