#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <stdexcept>
#include <vector>

#include "mirrorsim/parallel.hpp"
#include "mirrorsim/particle.hpp"

namespace mirrorsim {

enum class FieldMethod { direct, hybrid };

struct FieldConfig {
    // Plummer softening length; 0 means the bare kernel.
    double softening = 0.0;
    // Hybrid mode: slabs within this axial distance of the evaluation point
    // are summed directly, the rest are collapsed to monopoles.
    double near_radius = 4.0;
    FieldMethod method = FieldMethod::direct;
};

inline void validate(const FieldConfig& cfg) {
    if (!(cfg.softening >= 0.0))
        throw std::invalid_argument("field: softening must be >= 0");
    if (cfg.method == FieldMethod::hybrid && !(cfg.near_radius >= 1.0))
        throw std::invalid_argument("field: near_radius must be >= 1");
}

// Counters filled in by the evaluation routines.
struct FieldStats {
    // Unsoftened evaluations that met a source at distance exactly 0; the
    // pair convention is a zero contribution, counted here.
    std::uint64_t coincident_pairs = 0;
};

namespace detail {

// Structure-of-arrays copy of the particle cloud; the inner loops read these.
struct SourceArrays {
    std::vector<double> x, y, z, w;

    std::size_t size() const { return x.size(); }

    static SourceArrays from(const std::vector<Particle>& particles) {
        SourceArrays s;
        const std::size_t n = particles.size();
        s.x.resize(n); s.y.resize(n); s.z.resize(n); s.w.resize(n);
        for (std::size_t j = 0; j < n; ++j) {
            s.x[j] = particles[j].pos.x;
            s.y[j] = particles[j].pos.y;
            s.z[j] = particles[j].pos.z;
            s.w[j] = particles[j].weight;
        }
        return s;
    }
};

// Softened Coulomb sum over [begin, end).  With eps_sq > 0 a source sitting
// exactly at the target contributes 0, so self-interaction is excluded by
// zeroing that source's weight rather than branching; the loop stays
// vectorizable.  Summation order is fixed by the array order.
inline Vec3 coulomb_sum(const double* sx, const double* sy, const double* sz, const double* sw,
                        std::size_t begin, std::size_t end,
                        double xi, double yi, double zi, double eps_sq) {
    double ax = 0.0, ay = 0.0, az = 0.0;
#pragma omp simd reduction(+ : ax, ay, az)
    for (std::size_t j = begin; j < end; ++j) {
        const double dx = xi - sx[j];
        const double dy = yi - sy[j];
        const double dz = zi - sz[j];
        const double d2 = dx * dx + dy * dy + dz * dz + eps_sq;
        const double f = sw[j] / (d2 * std::sqrt(d2));
        ax += dx * f;
        ay += dy * f;
        az += dz * f;
    }
    return {ax, ay, az};
}

// Bare-kernel variant: must guard against zero distance.  skip < 0 means no
// source is excluded.
inline Vec3 coulomb_sum_bare(const double* sx, const double* sy, const double* sz, const double* sw,
                             std::size_t begin, std::size_t end,
                             double xi, double yi, double zi,
                             std::ptrdiff_t skip, std::uint64_t& coincident) {
    double ax = 0.0, ay = 0.0, az = 0.0;
    for (std::size_t j = begin; j < end; ++j) {
        if (static_cast<std::ptrdiff_t>(j) == skip) continue;
        const double dx = xi - sx[j];
        const double dy = yi - sy[j];
        const double dz = zi - sz[j];
        const double d2 = dx * dx + dy * dy + dz * dz;
        if (d2 == 0.0) {
            ++coincident;
            continue;
        }
        const double f = sw[j] / (d2 * std::sqrt(d2));
        ax += dx * f;
        ay += dy * f;
        az += dz * f;
    }
    return {ax, ay, az};
}

// Axial slab of index s covers [s, s+1).
inline int slab_of(double x1) { return static_cast<int>(std::floor(x1)); }

// Sources grouped by slab (slab-major, original order within a slab) plus
// per-slab monopoles: total weight at the weight-averaged position.
struct SlabPartition {
    int first_slab = 0;
    std::vector<std::size_t> offsets;     // offsets[k]..offsets[k+1) = slab first_slab+k
    SourceArrays sorted;
    std::vector<std::size_t> original;    // sorted position -> original index
    std::vector<std::size_t> position;    // original index -> sorted position
    std::vector<double> slab_weight;
    std::vector<Vec3> slab_centroid;

    int slab_count() const { return static_cast<int>(offsets.size()) - 1; }
};

inline SlabPartition build_slab_partition(const std::vector<Particle>& particles) {
    SlabPartition part;
    const std::size_t n = particles.size();
    if (n == 0) {
        part.offsets = {0};
        return part;
    }
    int lo = slab_of(particles[0].pos.x), hi = lo;
    for (const Particle& p : particles) {
        lo = std::min(lo, slab_of(p.pos.x));
        hi = std::max(hi, slab_of(p.pos.x));
    }
    part.first_slab = lo;
    const int nslabs = hi - lo + 1;
    std::vector<std::size_t> counts(nslabs, 0);
    for (const Particle& p : particles) ++counts[slab_of(p.pos.x) - lo];
    part.offsets.assign(nslabs + 1, 0);
    for (int k = 0; k < nslabs; ++k) part.offsets[k + 1] = part.offsets[k] + counts[k];

    part.sorted.x.resize(n); part.sorted.y.resize(n);
    part.sorted.z.resize(n); part.sorted.w.resize(n);
    part.original.resize(n);
    part.position.resize(n);
    std::vector<std::size_t> cursor(part.offsets.begin(), part.offsets.end() - 1);
    for (std::size_t j = 0; j < n; ++j) {
        const std::size_t dst = cursor[slab_of(particles[j].pos.x) - lo]++;
        part.sorted.x[dst] = particles[j].pos.x;
        part.sorted.y[dst] = particles[j].pos.y;
        part.sorted.z[dst] = particles[j].pos.z;
        part.sorted.w[dst] = particles[j].weight;
        part.original[dst] = j;
        part.position[j] = dst;
    }

    part.slab_weight.assign(nslabs, 0.0);
    part.slab_centroid.assign(nslabs, Vec3{});
    for (int k = 0; k < nslabs; ++k) {
        double W = 0.0;
        Vec3 c{};
        for (std::size_t j = part.offsets[k]; j < part.offsets[k + 1]; ++j) {
            W += part.sorted.w[j];
            c += part.sorted.w[j] * Vec3{part.sorted.x[j], part.sorted.y[j], part.sorted.z[j]};
        }
        part.slab_weight[k] = W;
        if (W > 0.0) c *= 1.0 / W;
        part.slab_centroid[k] = c;
    }
    return part;
}

inline void recompute_slab_aggregate(SlabPartition& part, int k) {
    double W = 0.0;
    Vec3 c{};
    for (std::size_t j = part.offsets[k]; j < part.offsets[k + 1]; ++j) {
        W += part.sorted.w[j];
        c += part.sorted.w[j] * Vec3{part.sorted.x[j], part.sorted.y[j], part.sorted.z[j]};
    }
    part.slab_weight[k] = W;
    if (W > 0.0) c *= 1.0 / W;
    part.slab_centroid[k] = c;
}

// Near range for evaluation point x1: slabs whose interval lies within
// near_radius of it.  Returns [lo, hi] in partition-local slab numbers,
// clamped; possibly empty (lo > hi).
inline std::pair<int, int> near_slab_range(const SlabPartition& part, double x1, double near_radius) {
    const int lo = static_cast<int>(std::ceil(x1 - near_radius - 1.0));
    const int hi = static_cast<int>(std::floor(x1 + near_radius));
    return {std::max(lo - part.first_slab, 0),
            std::min(hi - part.first_slab, part.slab_count() - 1)};
}

inline Vec3 hybrid_eval(const SlabPartition& part, const SourceArrays& sorted_src,
                        double xi, double yi, double zi,
                        double eps_sq, double near_radius,
                        std::ptrdiff_t skip_sorted, std::uint64_t& coincident) {
    const auto [klo, khi] = near_slab_range(part, xi, near_radius);
    Vec3 e{};
    if (klo <= khi) {
        const std::size_t b = part.offsets[klo], en = part.offsets[khi + 1];
        if (eps_sq > 0.0)
            e = coulomb_sum(sorted_src.x.data(), sorted_src.y.data(), sorted_src.z.data(),
                            sorted_src.w.data(), b, en, xi, yi, zi, eps_sq);
        else
            e = coulomb_sum_bare(sorted_src.x.data(), sorted_src.y.data(), sorted_src.z.data(),
                                 sorted_src.w.data(), b, en, xi, yi, zi, skip_sorted, coincident);
    }
    for (int k = 0; k < part.slab_count(); ++k) {
        if (k >= klo && k <= khi) continue;
        const double W = part.slab_weight[k];
        if (W == 0.0) continue;
        const double dx = xi - part.slab_centroid[k].x;
        const double dy = yi - part.slab_centroid[k].y;
        const double dz = zi - part.slab_centroid[k].z;
        const double d2 = dx * dx + dy * dy + dz * dz + eps_sq;
        const double f = W / (d2 * std::sqrt(d2));
        e += Vec3{dx * f, dy * f, dz * f};
    }
    return e;
}

}  // namespace detail

// E(x) from all particles (minus exclude_id, if given), softened Coulomb
// kernel, fixed summation order.
inline Vec3 field_at(const Ensemble& ens, const Vec3& at, const FieldConfig& cfg,
                     std::optional<std::int64_t> exclude_id = std::nullopt,
                     FieldStats* stats = nullptr) {
    validate(cfg);
    const std::size_t n = ens.particles.size();
    std::uint64_t coincident = 0;
    Vec3 e{};
    const double eps_sq = cfg.softening * cfg.softening;

    std::ptrdiff_t exclude_index = -1;
    if (exclude_id) {
        for (std::size_t j = 0; j < n; ++j)
            if (ens.particles[j].id == *exclude_id) { exclude_index = static_cast<std::ptrdiff_t>(j); break; }
    }

    if (cfg.method == FieldMethod::direct) {
        detail::SourceArrays src = detail::SourceArrays::from(ens.particles);
        if (eps_sq > 0.0) {
            if (exclude_index >= 0) src.w[exclude_index] = 0.0;
            e = detail::coulomb_sum(src.x.data(), src.y.data(), src.z.data(), src.w.data(),
                                    0, n, at.x, at.y, at.z, eps_sq);
        } else {
            e = detail::coulomb_sum_bare(src.x.data(), src.y.data(), src.z.data(), src.w.data(),
                                         0, n, at.x, at.y, at.z, exclude_index, coincident);
        }
    } else {
        detail::SlabPartition part = detail::build_slab_partition(ens.particles);
        std::ptrdiff_t skip_sorted = -1;
        if (exclude_index >= 0) {
            skip_sorted = static_cast<std::ptrdiff_t>(part.position[exclude_index]);
            part.sorted.w[skip_sorted] = 0.0;
            detail::recompute_slab_aggregate(
                part, detail::slab_of(ens.particles[exclude_index].pos.x) - part.first_slab);
        }
        e = detail::hybrid_eval(part, part.sorted, at.x, at.y, at.z, eps_sq,
                                cfg.near_radius, skip_sorted, coincident);
    }
    if (stats) stats->coincident_pairs += coincident;
    return e;
}

// E at every particle position, excluding self-interaction.  Element i is
// bit-identical to field_at(pos_i, exclude=id_i) and independent of the
// worker count: each target is summed in full by a single worker running the
// same kernel as the serial path.
inline std::vector<Vec3> field_all(const Ensemble& ens, const FieldConfig& cfg,
                                   unsigned workers = 1, FieldStats* stats = nullptr) {
    validate(cfg);
    const std::size_t n = ens.particles.size();
    std::vector<Vec3> out(n);
    if (n == 0) return out;
    const double eps_sq = cfg.softening * cfg.softening;
    const unsigned used = workers == 0 ? 1 : workers;
    std::vector<std::uint64_t> coincident(used, 0);

    if (cfg.method == FieldMethod::direct) {
        const detail::SourceArrays src = detail::SourceArrays::from(ens.particles);
        parallel_chunks(n, used, [&](unsigned w, std::size_t begin, std::size_t end) {
            std::vector<double> wts(src.w);
            for (std::size_t i = begin; i < end; ++i) {
                if (eps_sq > 0.0) {
                    const double saved = wts[i];
                    wts[i] = 0.0;
                    out[i] = detail::coulomb_sum(src.x.data(), src.y.data(), src.z.data(), wts.data(),
                                                 0, n, src.x[i], src.y[i], src.z[i], eps_sq);
                    wts[i] = saved;
                } else {
                    out[i] = detail::coulomb_sum_bare(src.x.data(), src.y.data(), src.z.data(),
                                                      wts.data(), 0, n, src.x[i], src.y[i], src.z[i],
                                                      static_cast<std::ptrdiff_t>(i), coincident[w]);
                }
            }
        });
    } else {
        const detail::SlabPartition part = detail::build_slab_partition(ens.particles);
        parallel_chunks(n, used, [&](unsigned w, std::size_t begin, std::size_t end) {
            detail::SourceArrays wrk = part.sorted;
            for (std::size_t i = begin; i < end; ++i) {
                const std::size_t pos = part.position[i];
                if (eps_sq > 0.0) {
                    const double saved = wrk.w[pos];
                    wrk.w[pos] = 0.0;
                    out[i] = detail::hybrid_eval(part, wrk, wrk.x[pos], wrk.y[pos], wrk.z[pos],
                                                 eps_sq, cfg.near_radius, -1, coincident[w]);
                    wrk.w[pos] = saved;
                } else {
                    out[i] = detail::hybrid_eval(part, wrk, wrk.x[pos], wrk.y[pos], wrk.z[pos],
                                                 eps_sq, cfg.near_radius,
                                                 static_cast<std::ptrdiff_t>(pos), coincident[w]);
                }
            }
        });
    }
    if (stats)
        for (std::uint64_t c : coincident) stats->coincident_pairs += c;
    return out;
}

// Modulus d (1 + |ln d|) for d < 1, d otherwise: the scale against which the
// field's continuity is measured.
inline double quasi_lipschitz_modulus(double d) {
    if (!(d > 0.0))
        throw std::invalid_argument("quasi_lipschitz_modulus: d must be positive");
    return d >= 1.0 ? d : d * (1.0 + std::abs(std::log(d)));
}

// |E(x) - E(y)| / modulus(|x - y|); the probe pair must be distinct.
inline double quasi_lipschitz_ratio(const Ensemble& ens, const Vec3& x, const Vec3& y,
                                    const FieldConfig& cfg) {
    const double d = norm(x - y);
    if (d == 0.0)
        throw std::invalid_argument("quasi_lipschitz_ratio: probe points coincide");
    const Vec3 ex = field_at(ens, x, cfg);
    const Vec3 ey = field_at(ens, y, cfg);
    return norm(ex - ey) / quasi_lipschitz_modulus(d);
}

// Mean distance to the nearest other particle; the default softening is a
// fifth of it.  Degenerate clouds (n < 2) get 0.
inline double mean_nearest_neighbor_spacing(const Ensemble& ens, unsigned workers = 1) {
    const std::size_t n = ens.particles.size();
    if (n < 2) return 0.0;
    const detail::SourceArrays src = detail::SourceArrays::from(ens.particles);
    std::vector<double> nearest(n);
    parallel_for(n, workers == 0 ? 1 : workers, [&](std::size_t i) {
        double best = std::numeric_limits<double>::infinity();
        for (std::size_t j = 0; j < n; ++j) {
            if (j == i) continue;
            const double dx = src.x[i] - src.x[j];
            const double dy = src.y[i] - src.y[j];
            const double dz = src.z[i] - src.z[j];
            const double d2 = dx * dx + dy * dy + dz * dz;
            best = std::min(best, d2);
        }
        nearest[i] = std::sqrt(best);
    });
    double sum = 0.0;
    for (double d : nearest) sum += d;
    return sum / static_cast<double>(n);
}

inline double default_softening(const Ensemble& ens, unsigned workers = 1) {
    return 0.2 * mean_nearest_neighbor_spacing(ens, workers);
}

}  // namespace mirrorsim
