#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <numbers>
#include <stdexcept>
#include <vector>

#include "mirrorsim/dynamics.hpp"
#include "mirrorsim/field.hpp"
#include "mirrorsim/parallel.hpp"
#include "mirrorsim/particle.hpp"

namespace mirrorsim {

// Axial window profile: 1 on [0,1], quintic smoothstep down to 0 on [1,2].
// Twice continuously differentiable, slope bounded by 15/8.
inline double mollifier_eval(double a) {
    if (!(a >= 0.0))
        throw std::invalid_argument("mollifier_eval: argument must be >= 0");
    if (a <= 1.0) return 1.0;
    if (a >= 2.0) return 0.0;
    const double u = a - 1.0;
    const double s = ((6.0 * u - 15.0) * u + 10.0) * u * u * u;
    return 1.0 - s;
}

inline double mollifier_deriv(double a) {
    if (!(a >= 0.0))
        throw std::invalid_argument("mollifier_deriv: argument must be >= 0");
    if (a <= 1.0 || a >= 2.0) return 0.0;
    const double u = a - 1.0;
    const double uu = u * (1.0 - u);
    return -30.0 * uu * uu;
}

// Per-particle interaction potentials p_i = sum_{j != i} w_j / sqrt(d^2 + eps^2).
// They do not depend on the window, so one O(n^2) pass serves every
// (mu, R) evaluation.  Same exclusion and ordering conventions as the field.
inline std::vector<double> interaction_potentials(const Ensemble& ens, const FieldConfig& cfg,
                                                  unsigned workers = 1) {
    validate(cfg);
    const std::size_t n = ens.particles.size();
    std::vector<double> out(n, 0.0);
    if (n == 0) return out;
    const double eps_sq = cfg.softening * cfg.softening;
    const detail::SourceArrays src = detail::SourceArrays::from(ens.particles);
    parallel_chunks(n, workers == 0 ? 1 : workers, [&](unsigned, std::size_t begin, std::size_t end) {
        std::vector<double> wts(src.w);
        for (std::size_t i = begin; i < end; ++i) {
            const double xi = src.x[i], yi = src.y[i], zi = src.z[i];
            double acc = 0.0;
            if (eps_sq > 0.0) {
                const double saved = wts[i];
                wts[i] = 0.0;
#pragma omp simd reduction(+ : acc)
                for (std::size_t j = 0; j < n; ++j) {
                    const double dx = xi - src.x[j];
                    const double dy = yi - src.y[j];
                    const double dz = zi - src.z[j];
                    const double d2 = dx * dx + dy * dy + dz * dz + eps_sq;
                    acc += wts[j] / std::sqrt(d2);
                }
                wts[i] = saved;
            } else {
                for (std::size_t j = 0; j < n; ++j) {
                    if (j == i) continue;
                    const double dx = xi - src.x[j];
                    const double dy = yi - src.y[j];
                    const double dz = zi - src.z[j];
                    const double d2 = dx * dx + dy * dy + dz * dz;
                    if (d2 == 0.0) continue;
                    acc += src.w[j] / std::sqrt(d2);
                }
            }
            out[i] = acc;
        }
    });
    return out;
}

// Windowed energy W(mu, R): kinetic plus interaction energy weighted by the
// mollifier in |x_1 - mu| / R.  `potentials` must come from
// interaction_potentials on the same ensemble.
inline double local_energy(const Ensemble& ens, double mu, double R,
                           const std::vector<double>& potentials) {
    if (!(R > 0.0))
        throw std::invalid_argument("local_energy: R must be positive");
    if (potentials.size() != ens.particles.size())
        throw std::invalid_argument("local_energy: potentials do not match the ensemble");
    double acc = 0.0;
    for (std::size_t i = 0; i < ens.particles.size(); ++i) {
        const Particle& p = ens.particles[i];
        const double phi = mollifier_eval(std::abs(p.pos.x - mu) / R);
        if (phi == 0.0) continue;
        acc += 0.5 * p.weight * phi * (norm_sq(p.vel) + potentials[i]);
    }
    return acc;
}

inline double local_energy(const Ensemble& ens, double mu, double R, const FieldConfig& cfg,
                           unsigned workers = 1) {
    return local_energy(ens, mu, R, interaction_potentials(ens, cfg, workers));
}

// Sweep of W(mu, R) over a center grid covering [-L - 2R, L + 2R] and its
// floored maximum Q(R) = max(1, sup_mu W).
struct LocalEnergyReport {
    double R = 0.0;
    double mu_spacing = 0.0;
    std::vector<double> mu;
    std::vector<double> W;
    double Q = 1.0;
};

inline LocalEnergyReport q_of_r(const Ensemble& ens, double R, double mu_spacing,
                                const std::vector<double>& potentials) {
    if (!(R > 0.0))
        throw std::invalid_argument("q_of_r: R must be positive");
    if (!(mu_spacing > 0.0 && mu_spacing <= 0.5 * R))
        throw std::invalid_argument("q_of_r: mu_spacing must lie in (0, R/2]");
    LocalEnergyReport rep;
    rep.R = R;
    rep.mu_spacing = mu_spacing;
    const double span = ens.geometry.L + 2.0 * R;
    const std::int64_t k_min = static_cast<std::int64_t>(std::ceil(-span / mu_spacing));
    const std::int64_t k_max = static_cast<std::int64_t>(std::floor(span / mu_spacing));
    double q = 1.0;
    for (std::int64_t k = k_min; k <= k_max; ++k) {
        const double mu = static_cast<double>(k) * mu_spacing;
        const double w = local_energy(ens, mu, R, potentials);
        rep.mu.push_back(mu);
        rep.W.push_back(w);
        q = std::max(q, w);
    }
    rep.Q = q;
    return rep;
}

inline LocalEnergyReport q_of_r(const Ensemble& ens, double R, const FieldConfig& cfg,
                                double mu_spacing, unsigned workers = 1) {
    return q_of_r(ens, R, mu_spacing, interaction_potentials(ens, cfg, workers));
}

// Doubling the window must not beat the patch count: W(mu, R') stays below
// (2 ceil(R'/R) + 1) * Q(R).
struct CoveringCheck {
    double wide_energy = 0.0;
    double narrow_Q = 0.0;
    int patches = 0;
    double ratio = 0.0;
    bool pass = false;
};

inline CoveringCheck covering_check(const Ensemble& ens, double mu, double R, double R_prime,
                                    const FieldConfig& cfg, unsigned workers = 1) {
    if (!(R > 0.0 && R_prime >= R))
        throw std::invalid_argument("covering_check: need R' >= R > 0");
    const std::vector<double> pot = interaction_potentials(ens, cfg, workers);
    CoveringCheck out;
    out.wide_energy = local_energy(ens, mu, R_prime, pot);
    out.narrow_Q = q_of_r(ens, R, 0.5 * R, pot).Q;
    out.patches = 2 * static_cast<int>(std::ceil(R_prime / R)) + 1;
    out.ratio = out.wide_energy / (out.patches * out.narrow_Q);
    out.pass = out.ratio <= 1.0;
    return out;
}

// Mass per occupied axial slab [i, i+1).
inline std::map<int, double> slab_masses(const Ensemble& ens) {
    std::map<int, double> m;
    for (const Particle& p : ens.particles)
        m[detail::slab_of(p.pos.x)] += p.weight;
    return m;
}

// Smallest constant C with m_i <= C log(1 + |i|) / |i|^alpha over |i| >= 2,
// and the slab where it is attained.
struct DecayFit {
    double C = 0.0;
    int worst_slab = 0;
};

inline DecayFit decay_fit(const std::map<int, double>& masses, double alpha) {
    DecayFit fit;
    for (const auto& [i, m] : masses) {
        if (std::abs(i) < 2 || m <= 0.0) continue;
        const double ai = std::abs(i);
        const double c = m * std::pow(ai, alpha) / std::log1p(ai);
        if (c > fit.C) {
            fit.C = c;
            fit.worst_slab = i;
        }
    }
    return fit;
}

// Axial bins of width cell_size crossed with polar cells of comparable area:
// rings of width cell_size, each split into sectors so that a cell's area is
// about cell_size^2.  Density is mass / exact cell volume.
struct DensityHistogram {
    double cell_size = 0.0;
    double x_min = 0.0;
    int n_axial = 0;
    std::vector<double> ring_lo, ring_hi;    // radial bands
    std::vector<int> sectors;                // per ring
    std::vector<std::size_t> ring_offset;    // into the transverse cell list
    std::vector<double> cell_area;           // per transverse cell
    std::vector<double> mass;                // axial-major [axial][transverse]
    double binned_mass = 0.0;

    std::size_t transverse_cells() const { return cell_area.size(); }
    std::size_t cell_count() const { return mass.size(); }
    double volume(std::size_t transverse) const { return cell_area[transverse] * cell_size; }
    double density(std::size_t axial, std::size_t transverse) const {
        return mass[axial * transverse_cells() + transverse] / volume(transverse);
    }
    double axial_center(std::size_t axial) const {
        return x_min + (static_cast<double>(axial) + 0.5) * cell_size;
    }
};

inline DensityHistogram density_histogram(const Ensemble& ens, double cell_size) {
    if (!(cell_size > 0.0))
        throw std::invalid_argument("density_histogram: cell_size must be positive");
    DensityHistogram h;
    h.cell_size = cell_size;
    h.x_min = -static_cast<double>(ens.geometry.L);
    const double span = 2.0 * ens.geometry.L;
    h.n_axial = std::max(1, static_cast<int>(std::ceil(span / cell_size - 1e-12)));

    const double A = ens.geometry.A;
    const int n_rings = std::max(1, static_cast<int>(std::ceil(A / cell_size - 1e-12)));
    const double two_pi = 2.0 * std::numbers::pi;
    for (int k = 0; k < n_rings; ++k) {
        const double lo = k * cell_size;
        const double hi = std::min(A, (k + 1) * cell_size);
        const double mid = 0.5 * (lo + hi);
        const int nsec = std::max(1, static_cast<int>(std::llround(two_pi * mid * (hi - lo) /
                                                                   (cell_size * cell_size))));
        h.ring_lo.push_back(lo);
        h.ring_hi.push_back(hi);
        h.sectors.push_back(nsec);
        h.ring_offset.push_back(h.cell_area.size());
        const double band_area = std::numbers::pi * (hi * hi - lo * lo) / nsec;
        for (int s = 0; s < nsec; ++s) h.cell_area.push_back(band_area);
    }
    h.ring_offset.push_back(h.cell_area.size());

    h.mass.assign(static_cast<std::size_t>(h.n_axial) * h.transverse_cells(), 0.0);
    for (const Particle& p : ens.particles) {
        const double ax = (p.pos.x - h.x_min) / cell_size;
        if (ax < 0.0 || ax >= h.n_axial) continue;
        const double r = radial(p.pos);
        if (r >= A) continue;
        int ring = std::min(static_cast<int>(r / cell_size), n_rings - 1);
        if (r < h.ring_lo[ring]) --ring;          // guards the float boundary
        double ang = std::atan2(p.pos.z, p.pos.y);
        if (ang < 0.0) ang += two_pi;
        int sec = std::min(static_cast<int>(ang / (two_pi / h.sectors[ring])), h.sectors[ring] - 1);
        const std::size_t cell = static_cast<std::size_t>(ax) * h.transverse_cells() +
                                 h.ring_offset[ring] + sec;
        h.mass[cell] += p.weight;
        h.binned_mass += p.weight;
    }
    return h;
}

// Sum of density^(5/3) * volume over the cells whose axial center lies in
// [mu - R, mu + R], and its ratio to a windowed energy W.
struct Lp53Check {
    double lp_sum = 0.0;
    double ratio = 0.0;
};

inline Lp53Check lp53_check(const DensityHistogram& h, double mu, double R, double W) {
    if (!(R > 0.0))
        throw std::invalid_argument("lp53_check: R must be positive");
    if (!(W > 0.0))
        throw std::invalid_argument("lp53_check: W must be positive");
    Lp53Check out;
    for (int a = 0; a < h.n_axial; ++a) {
        if (std::abs(h.axial_center(a) - mu) > R) continue;
        for (std::size_t tcell = 0; tcell < h.transverse_cells(); ++tcell) {
            const double rho = h.density(a, tcell);
            if (rho <= 0.0) continue;
            out.lp_sum += std::pow(rho, 5.0 / 3.0) * h.volume(tcell);
        }
    }
    out.ratio = out.lp_sum / W;
    return out;
}

// Field amplitude against the envelope bound V^(4/3) Q^(1/3), per recorded
// time.
struct FieldScalingRow {
    double t = 0.0;
    double sup_field = 0.0;
    double v_max = 0.0;
    double Q = 1.0;
    double bound_ratio = 0.0;
};

inline std::vector<FieldScalingRow> field_scaling_report(const TrajectoryRecord& rec,
                                                         const FieldConfig& cfg,
                                                         double mu_spacing = 2.0,
                                                         unsigned workers = 1) {
    std::vector<FieldScalingRow> rows;
    rows.reserve(rec.samples.size());
    for (std::size_t k = 0; k < rec.samples.size(); ++k) {
        const TrajectorySample& s = rec.samples[k];
        FieldScalingRow row;
        row.t = s.t;
        for (const Vec3& e : s.field) row.sup_field = std::max(row.sup_field, norm(e));
        row.v_max = s.v_max;
        const Ensemble snap = snapshot_at(rec, k);
        const double R = s.r_bound;
        row.Q = q_of_r(snap, R, cfg, std::min(mu_spacing, 0.5 * R), workers).Q;
        row.bound_ratio = row.sup_field /
                          (std::pow(row.v_max, 4.0 / 3.0) * std::cbrt(row.Q));
        rows.push_back(row);
    }
    return rows;
}

// Trapezoid average of |E| along one particle's recorded samples inside
// [t, t + delta].
inline double time_averaged_field(const TrajectoryRecord& rec, std::int64_t id, double t,
                                  double delta) {
    if (!(delta > 0.0))
        throw std::invalid_argument("time_averaged_field: delta must be positive");
    const std::size_t i = rec.index_of(id);
    const double tol = 1e-9 * std::max(1.0, std::abs(t) + delta);
    std::vector<std::size_t> in_window;
    for (std::size_t k = 0; k < rec.samples.size(); ++k) {
        const double tk = rec.samples[k].t;
        if (tk >= t - tol && tk <= t + delta + tol) in_window.push_back(k);
    }
    if (in_window.size() < 2)
        throw std::invalid_argument(
            "time_averaged_field: window covers fewer than two recorded samples");
    double acc = 0.0;
    for (std::size_t m = 0; m + 1 < in_window.size(); ++m) {
        const TrajectorySample& a = rec.samples[in_window[m]];
        const TrajectorySample& b = rec.samples[in_window[m + 1]];
        acc += 0.5 * (norm(a.field[i]) + norm(b.field[i])) * (b.t - a.t);
    }
    const double span = rec.samples[in_window.back()].t - rec.samples[in_window.front()].t;
    return acc / span;
}

}  // namespace mirrorsim
