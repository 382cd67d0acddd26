#pragma once

#include <cstdint>
#include <stdexcept>
#include <vector>

#include "mirrorsim/dynamics.hpp"
#include "mirrorsim/initial_data.hpp"
#include "mirrorsim/particle.hpp"

namespace mirrorsim {

// Sup gaps between two cutoff runs over the particles present in both:
// delta for positions, eta for velocities, sigma their sum.
struct GaugeRow {
    double t = 0.0;
    double delta = 0.0;
    double eta = 0.0;
    double sigma = 0.0;
};

struct ConvergenceResult {
    double N = 0.0;
    double N_prime = 0.0;
    std::size_t matched = 0;
    std::vector<GaugeRow> rows;   // leading row is t=0, identically zero
};

// Evolves the base cloud restricted to cutoffs N and N' independently and
// tracks the gauges at each recorded time.  Symmetric in (N, N'); the
// matched set is the particles below the smaller cutoff, which both runs
// start with in identical states.
inline ConvergenceResult run_pair(const Ensemble& base, double N, double N_prime,
                                  const FieldConfig& fcfg, const StepConfig& scfg,
                                  unsigned workers = 1) {
    if (!(N > 0.0) || !(N_prime > 0.0))
        throw std::invalid_argument("run_pair: cutoffs must be positive");
    ConvergenceResult out;
    out.N = std::min(N, N_prime);
    out.N_prime = std::max(N, N_prime);
    if (!(base.params.N_cutoff >= out.N_prime))
        throw std::invalid_argument("run_pair: base ensemble is narrower than the larger cutoff");

    const Ensemble low = restrict_to_cutoff(base, out.N);
    const Ensemble high = restrict_to_cutoff(base, out.N_prime);
    if (low.particles.size() < 10)
        throw std::invalid_argument("run_pair: fewer than 10 particles below the smaller cutoff");

    const TrajectoryRecord rec_low = run(low, fcfg, scfg, workers);
    const TrajectoryRecord rec_high = run(high, fcfg, scfg, workers);

    // Both id lists are subsequences of the base order; match by one pass.
    std::vector<std::pair<std::size_t, std::size_t>> pairs;
    pairs.reserve(rec_low.size());
    std::size_t j = 0;
    for (std::size_t i = 0; i < rec_low.size(); ++i) {
        while (j < rec_high.size() && rec_high.ids[j] != rec_low.ids[i]) ++j;
        if (j == rec_high.size()) break;
        pairs.emplace_back(i, j);
        ++j;
    }
    out.matched = pairs.size();
    if (out.matched < 10)
        throw std::invalid_argument("run_pair: fewer than 10 matched particles");

    out.rows.push_back(GaugeRow{});   // identical initial states
    if (rec_low.samples.size() != rec_high.samples.size())
        throw std::logic_error("run_pair: sample streams differ in length");
    for (std::size_t k = 0; k < rec_low.samples.size(); ++k) {
        const TrajectorySample& a = rec_low.samples[k];
        const TrajectorySample& b = rec_high.samples[k];
        GaugeRow row;
        row.t = a.t;
        for (const auto& [ia, ib] : pairs) {
            row.delta = std::max(row.delta, norm(a.pos[ia] - b.pos[ib]));
            row.eta = std::max(row.eta, norm(a.vel[ia] - b.vel[ib]));
        }
        row.sigma = row.delta + row.eta;
        out.rows.push_back(row);
    }
    return out;
}

// Largest relative velocity change and displacement along a trajectory,
// both scaled by 1 + |v(0)|.
struct VelocityGrowth {
    double velocity_ratio = 0.0;
    double displacement_ratio = 0.0;
};

inline VelocityGrowth velocity_growth_check(const TrajectoryRecord& rec) {
    VelocityGrowth g;
    for (const TrajectorySample& s : rec.samples) {
        for (std::size_t i = 0; i < rec.size(); ++i) {
            const double scale = 1.0 + norm(rec.vel0[i]);
            g.velocity_ratio = std::max(g.velocity_ratio, norm(s.vel[i] - rec.vel0[i]) / scale);
            g.displacement_ratio = std::max(g.displacement_ratio, norm(s.pos[i] - rec.pos0[i]) / scale);
        }
    }
    return g;
}

}  // namespace mirrorsim
