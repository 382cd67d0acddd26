#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <cstdlib>

#include "mirrorsim/initial_data.hpp"

using namespace mirrorsim;

namespace {
const Geometry kGeom{1.0, 0.6, 3.0, 16, 16};
}

TEST_CASE("slab masses decay like a power law") {
    InitialDataParams p;
    p.C1 = 2.0;
    p.alpha = 0.7;
    REQUIRE(slab_mass(p, 0) == 2.0);
    REQUIRE_THAT(slab_mass(p, 3), Catch::Matchers::WithinRel(2.0 * std::pow(3.0, -0.7), 1e-15));
    REQUIRE(slab_mass(p, -3) == slab_mass(p, 3));
    REQUIRE(slab_mass(p, 5) < slab_mass(p, 4));
}

TEST_CASE("parameter validation") {
    InitialDataParams p;
    REQUIRE_NOTHROW(validate(p));
    p.alpha = 0.5;   // at most 5/9 is too shallow
    REQUIRE_THROWS_AS(validate(p), std::invalid_argument);
    p.alpha = 0.7;
    p.lambda = -1.0;
    REQUIRE_THROWS_AS(validate(p), std::invalid_argument);
    p.lambda = 1.0;
    p.N_cutoff = 0.05;   // below 0.1/sqrt(lambda)
    REQUIRE_THROWS_AS(validate(p), std::invalid_argument);
}

TEST_CASE("sampler fills every slab with the right mass and support") {
    InitialDataParams params;
    params.N_cutoff = 4.0;
    const int n_per_slab = 32;
    const Ensemble ens = sample_ensemble(kGeom, params, n_per_slab, 7);

    REQUIRE(ens.particles.size() == static_cast<std::size_t>(33 * n_per_slab));
    for (std::size_t i = 0; i < ens.particles.size(); ++i)
        REQUIRE(ens.particles[i].id == static_cast<std::int64_t>(i));

    std::size_t idx = 0;
    for (int slab = -16; slab <= 16; ++slab) {
        double mass = 0.0;
        for (int k = 0; k < n_per_slab; ++k, ++idx) {
            const Particle& p = ens.particles[idx];
            REQUIRE(p.pos.x >= slab);
            REQUIRE(p.pos.x < slab + 1);
            REQUIRE(radial(p.pos) < kGeom.A_bar);
            REQUIRE(norm(p.vel) < params.N_cutoff);
            REQUIRE(p.weight > 0.0);
            mass += p.weight;
        }
        REQUIRE_THAT(mass, Catch::Matchers::WithinRel(slab_mass(params, slab), 1e-12));
    }
}

TEST_CASE("sampling is deterministic in the seed") {
    InitialDataParams params;
    const Ensemble a = sample_ensemble(kGeom, params, 16, 1234);
    const Ensemble b = sample_ensemble(kGeom, params, 16, 1234);
    REQUIRE(a.particles.size() == b.particles.size());
    for (std::size_t i = 0; i < a.particles.size(); ++i) {
        REQUIRE(a.particles[i].pos == b.particles[i].pos);
        REQUIRE(a.particles[i].vel == b.particles[i].vel);
        REQUIRE(a.particles[i].weight == b.particles[i].weight);
    }
    const Ensemble c = sample_ensemble(kGeom, params, 16, 1235);
    bool any_diff = false;
    for (std::size_t i = 0; i < a.particles.size(); ++i)
        any_diff = any_diff || !(a.particles[i].pos == c.particles[i].pos);
    REQUIRE(any_diff);
}

TEST_CASE("per-particle streams couple the cutoffs") {
    // If a particle's accepted draw under the wide cutoff already fits under
    // the narrow one, the narrow sample must reproduce it bit for bit.
    InitialDataParams wide, narrow;
    wide.N_cutoff = 4.0;
    narrow.N_cutoff = 2.0;
    const Ensemble ew = sample_ensemble(kGeom, wide, 64, 42);
    const Ensemble en = sample_ensemble(kGeom, narrow, 64, 42);
    REQUIRE(ew.particles.size() == en.particles.size());
    std::size_t coupled = 0;
    for (std::size_t i = 0; i < ew.particles.size(); ++i) {
        REQUIRE(ew.particles[i].pos == en.particles[i].pos);
        if (norm(ew.particles[i].vel) < narrow.N_cutoff) {
            REQUIRE(ew.particles[i].vel == en.particles[i].vel);
            ++coupled;
        }
    }
    REQUIRE(coupled > ew.particles.size() / 2);
}

TEST_CASE("velocity moments match the Gaussian profile") {
    const Geometry geom{1.0, 0.6, 3.0, 30, 30};
    InitialDataParams params;
    params.lambda = 2.0;
    const int n_per_slab = 170;
    const Ensemble ens = sample_ensemble(geom, params, n_per_slab, 2718);
    const std::size_t n = ens.particles.size();
    REQUIRE(n >= 10000);

    const double expected = 1.0 / (2.0 * params.lambda);
    double m2[3] = {0.0, 0.0, 0.0};
    for (const Particle& p : ens.particles) {
        m2[0] += p.vel.x * p.vel.x;
        m2[1] += p.vel.y * p.vel.y;
        m2[2] += p.vel.z * p.vel.z;
    }
    // Var(v^2) = 2 sigma^4 for a centered Gaussian.
    const double three_se = 3.0 * expected * std::sqrt(2.0 / static_cast<double>(n));
    for (double& m : m2) {
        m /= static_cast<double>(n);
        REQUIRE(std::abs(m - expected) <= three_se);
    }
}

TEST_CASE("restriction keeps exactly the slow particles") {
    InitialDataParams params;
    const Ensemble base = sample_ensemble(kGeom, params, 32, 5);
    const Ensemble r2 = restrict_to_cutoff(base, 2.0);
    REQUIRE(r2.particles.size() < base.particles.size());
    REQUIRE(r2.params.N_cutoff == 2.0);
    std::size_t expected = 0;
    for (const Particle& p : base.particles)
        if (norm(p.vel) < 2.0) ++expected;
    REQUIRE(r2.particles.size() == expected);
    for (const Particle& p : r2.particles) REQUIRE(norm(p.vel) < 2.0);

    // Order and identity survive.
    std::size_t j = 0;
    for (const Particle& p : base.particles) {
        if (j < r2.particles.size() && r2.particles[j].id == p.id) {
            REQUIRE(r2.particles[j].pos == p.pos);
            REQUIRE(r2.particles[j].vel == p.vel);
            REQUIRE(r2.particles[j].weight == p.weight);
            ++j;
        }
    }
    REQUIRE(j == r2.particles.size());
}

TEST_CASE("restriction composes through the minimum") {
    InitialDataParams params;
    const Ensemble base = sample_ensemble(kGeom, params, 32, 6);
    const Ensemble a = restrict_to_cutoff(restrict_to_cutoff(base, 3.0), 1.5);
    const Ensemble b = restrict_to_cutoff(base, 1.5);
    REQUIRE(a.particles.size() == b.particles.size());
    REQUIRE(a.params.N_cutoff == b.params.N_cutoff);
    for (std::size_t i = 0; i < a.particles.size(); ++i) {
        REQUIRE(a.particles[i].id == b.particles[i].id);
        REQUIRE(a.particles[i].vel == b.particles[i].vel);
    }
    // Widening is a no-op.
    const Ensemble c = restrict_to_cutoff(b, 10.0);
    REQUIRE(c.particles.size() == b.particles.size());
    REQUIRE(c.params.N_cutoff == 1.5);
}

TEST_CASE("restriction may empty the cloud") {
    InitialDataParams params;
    const Ensemble base = sample_ensemble(kGeom, params, 4, 7);
    const Ensemble tiny = restrict_to_cutoff(base, 1e-6);
    REQUIRE(tiny.particles.empty());
}
