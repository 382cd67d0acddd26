#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <stdexcept>
#include <vector>

#include "mirrorsim/particle.hpp"
#include "mirrorsim/rng.hpp"

namespace mirrorsim {

// Total weight of slab i (axial extent [i, i+1)).  The central slab carries
// C1, the others decay like |i|^(-alpha); alpha > 5/9 keeps the interaction
// energy of the infinite cloud finite.
inline double slab_mass(const InitialDataParams& p, int i) {
    if (i == 0) return p.C1;
    return p.C1 * std::pow(static_cast<double>(std::abs(i)), -p.alpha);
}

namespace detail {

// One Gaussian triple of variance 1/(2*lambda) per component.  Consumes
// exactly four uniforms (two Box-Muller pairs, last deviate discarded) so a
// rejection loop advances every stream by a fixed, cutoff-independent amount
// per attempt.
inline Vec3 gaussian_triple(SplitMix64& rng, double lambda) {
    const double sigma = 1.0 / std::sqrt(2.0 * lambda);
    const double two_pi = 2.0 * std::numbers::pi;
    const double u1 = rng.uniform();
    const double u2 = rng.uniform();
    const double u3 = rng.uniform();
    const double u4 = rng.uniform();
    const double r1 = std::sqrt(-2.0 * std::log(1.0 - u1));
    const double r2 = std::sqrt(-2.0 * std::log(1.0 - u3));
    return {sigma * r1 * std::cos(two_pi * u2),
            sigma * r1 * std::sin(two_pi * u2),
            sigma * r2 * std::cos(two_pi * u4)};
}

}  // namespace detail

// Draws n_per_slab equal-weight particles per slab i in [-M, M]: positions
// uniform on [i, i+1) x disc(A_bar), velocities Gaussian conditioned on
// |v| < N_cutoff.  Deterministic in (seed); each particle owns RNG substream
// seed/global-index, so the accepted draw for a particle agrees between two
// cutoffs whenever it passes the smaller one.
inline Ensemble sample_ensemble(const Geometry& geom, const InitialDataParams& params,
                                int n_per_slab, std::uint64_t seed) {
    validate(geom);
    validate(params);
    if (n_per_slab < 1)
        throw std::invalid_argument("sample_ensemble: n_per_slab must be at least 1");

    Ensemble ens;
    ens.params = params;
    ens.geometry = geom;
    ens.seed = seed;
    ens.time = 0.0;
    ens.particles.reserve(static_cast<std::size_t>(2 * geom.M + 1) * n_per_slab);

    const double two_pi = 2.0 * std::numbers::pi;
    std::int64_t next_id = 0;
    for (int i = -geom.M; i <= geom.M; ++i) {
        const double w = slab_mass(params, i) / n_per_slab;
        for (int k = 0; k < n_per_slab; ++k, ++next_id) {
            SplitMix64 rng(seed, static_cast<std::uint64_t>(next_id));
            Particle p;
            p.id = next_id;
            p.weight = w;
            p.pos.x = i + rng.uniform();
            const double r = geom.A_bar * std::sqrt(rng.uniform());
            const double phi = two_pi * rng.uniform();
            p.pos.y = r * std::cos(phi);
            p.pos.z = r * std::sin(phi);
            do {
                p.vel = detail::gaussian_triple(rng, params.lambda);
            } while (!(norm(p.vel) < params.N_cutoff));
            ens.particles.push_back(p);
        }
    }
    return ens;
}

// Keeps exactly the particles with |v| < cutoff, preserving ids, order and
// weights.  Restriction composes: applying cutoffs N1 then N2 equals applying
// min(N1, N2) directly.
inline Ensemble restrict_to_cutoff(const Ensemble& ens, double cutoff) {
    if (!(cutoff > 0.0))
        throw std::invalid_argument("restrict_to_cutoff: cutoff must be positive");
    Ensemble out;
    out.params = ens.params;
    out.params.N_cutoff = std::min(ens.params.N_cutoff, cutoff);
    out.geometry = ens.geometry;
    out.seed = ens.seed;
    out.time = ens.time;
    out.particles.reserve(ens.particles.size());
    for (const Particle& p : ens.particles)
        if (norm(p.vel) < cutoff) out.particles.push_back(p);
    return out;
}

}  // namespace mirrorsim
