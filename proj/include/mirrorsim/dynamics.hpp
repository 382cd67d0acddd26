#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

#include "mirrorsim/field.hpp"
#include "mirrorsim/geometry.hpp"
#include "mirrorsim/parallel.hpp"
#include "mirrorsim/particle.hpp"

namespace mirrorsim {

struct StepConfig {
    double dt = 1e-3;
    double t_end = 10.0;
    // Record a sample every this many steps (the final step is always
    // recorded).
    int record_every = 100;
    // Floor C4 of the running speed envelope.
    double max_speed_floor = 1.0;
    bool electric_kicks = true;
    bool magnetic_rotation = true;
};

inline void validate(const StepConfig& cfg) {
    if (!(cfg.dt > 0.0))
        throw std::invalid_argument("stepping: dt must be positive");
    if (!(cfg.t_end >= 0.0))
        throw std::invalid_argument("stepping: t_end must be >= 0");
    if (cfg.record_every < 1)
        throw std::invalid_argument("stepping: record_every must be >= 1");
    if (!(cfg.max_speed_floor > 0.0))
        throw std::invalid_argument("stepping: max_speed_floor must be positive");
}

// A particle reached the wall (or left the cylinder) during a step.
struct ConfinementLoss : std::runtime_error {
    ConfinementLoss(std::int64_t id_, double time_, double radius_)
        : std::runtime_error("confinement loss: particle " + std::to_string(id_) +
                             " reached radius " + std::to_string(radius_) +
                             " at t=" + std::to_string(time_)),
          id(id_), time(time_), radius(radius_) {}
    std::int64_t id;
    double time;
    double radius;
};

struct NumericalFailure : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Rotation of the transverse velocity by the magnetic field over one
// interval: the axial component is untouched, (v_y, v_z) turns by angle
// b*dt.  Exact isometry for any angle.
inline Vec3 rotate_velocity(const Vec3& v, double b, double dt) {
    const double angle = b * dt;
    const double c = std::cos(angle);
    const double s = std::sin(angle);
    return {v.x, v.y * c + v.z * s, -v.y * s + v.z * c};
}

// State of the cloud at one recorded time, plus the per-particle running
// integrals of V.E (work) and x_2 E_3 - x_3 E_2 (torque) from t=0.
struct TrajectorySample {
    double t = 0.0;
    std::int64_t step = 0;
    std::vector<Vec3> pos;
    std::vector<Vec3> vel;
    std::vector<Vec3> field;      // E at pos, the field that closed this step
    std::vector<double> work;
    std::vector<double> torque;
    double v_max = 0.0;           // running speed envelope max(C4, sup |V|)
    double r_bound = 0.0;         // 1 + integral of the envelope
};

struct TrajectoryRecord {
    std::vector<std::int64_t> ids;
    std::vector<double> weights;
    std::vector<Vec3> pos0;
    std::vector<Vec3> vel0;
    Geometry geometry;
    InitialDataParams params;
    std::uint64_t seed = 0;
    StepConfig stepping;
    std::vector<TrajectorySample> samples;
    double v_max_final = 0.0;
    double r_bound_final = 0.0;

    std::size_t size() const { return ids.size(); }

    std::size_t index_of(std::int64_t id) const {
        for (std::size_t i = 0; i < ids.size(); ++i)
            if (ids[i] == id) return i;
        throw std::invalid_argument("trajectory: no particle with id " + std::to_string(id));
    }
};

// Rebuilds the ensemble as of sample k.
inline Ensemble snapshot_at(const TrajectoryRecord& rec, std::size_t k) {
    if (k >= rec.samples.size())
        throw std::out_of_range("snapshot_at: no such sample");
    Ensemble ens;
    ens.geometry = rec.geometry;
    ens.params = rec.params;
    ens.seed = rec.seed;
    ens.time = rec.samples[k].t;
    ens.particles.resize(rec.size());
    for (std::size_t i = 0; i < rec.size(); ++i) {
        ens.particles[i].id = rec.ids[i];
        ens.particles[i].pos = rec.samples[k].pos[i];
        ens.particles[i].vel = rec.samples[k].vel[i];
        ens.particles[i].weight = rec.weights[i];
    }
    return ens;
}

// |V(t)|^2 - |v(0)|^2 - 2 * work integral, which vanishes along exact
// trajectories; the discrete version decays like dt^2.
inline double work_energy_residual(const TrajectoryRecord& rec, std::size_t sample, std::size_t i) {
    const TrajectorySample& s = rec.samples.at(sample);
    return std::abs(norm_sq(s.vel[i]) - norm_sq(rec.vel0[i]) - 2.0 * s.work[i]);
}

// The confinement identity: half the change of H(r^2) minus the change of
// the angular term V_2 X_3 - V_3 X_2 minus the torque integral.  Zero along
// exact trajectories; its boundedness is what pins particles off the wall.
inline double confinement_residual(const TrajectoryRecord& rec, std::size_t sample, std::size_t i) {
    const TrajectorySample& s = rec.samples.at(sample);
    const auto angular = [](const Vec3& x, const Vec3& v) { return v.y * x.z - v.z * x.y; };
    const double dH = eval_H(rec.geometry, radial_sq(s.pos[i])) -
                      eval_H(rec.geometry, radial_sq(rec.pos0[i]));
    const double dA = angular(s.pos[i], s.vel[i]) - angular(rec.pos0[i], rec.vel0[i]);
    return std::abs(0.5 * dH - dA - s.torque[i]);
}

inline double max_work_energy_residual(const TrajectoryRecord& rec, std::size_t sample) {
    double worst = 0.0;
    for (std::size_t i = 0; i < rec.size(); ++i)
        worst = std::max(worst, work_energy_residual(rec, sample, i));
    return worst;
}

inline double max_confinement_residual(const TrajectoryRecord& rec, std::size_t sample) {
    double worst = 0.0;
    for (std::size_t i = 0; i < rec.size(); ++i)
        worst = std::max(worst, confinement_residual(rec, sample, i));
    return worst;
}

namespace detail {

struct WallHit {
    std::size_t index = std::numeric_limits<std::size_t>::max();
    double radius = 0.0;
};

}  // namespace detail

// Advances the cloud to t_end with Strang splitting: half electric kick,
// half free drift, exact magnetic rotation with the strength frozen at the
// midpoint position, half drift, half kick with the re-evaluated field.  The
// closing field of one step opens the next, so each step costs one field
// evaluation per particle.  Wide rotation angles (b*dt > pi/4) are subcycled
// into equal exact sub-rotations.
//
// Work and torque integrals advance by dt times the product of step-averaged
// velocity/position with the averaged endpoint fields, which keeps their
// discretization error at the same dt^2 order as the trajectory itself.
//
// Throws ConfinementLoss when a particle's radius reaches A (smallest such
// particle index reported), NumericalFailure on non-finite state.
inline TrajectoryRecord run(const Ensemble& start, const FieldConfig& fcfg, const StepConfig& scfg,
                            unsigned workers = 1) {
    validate(start.geometry);
    validate(fcfg);
    validate(scfg);
    const std::size_t n = start.particles.size();
    const unsigned used = workers == 0 ? 1 : workers;
    const double A_sq = start.geometry.A * start.geometry.A;

    TrajectoryRecord rec;
    rec.geometry = start.geometry;
    rec.params = start.params;
    rec.seed = start.seed;
    rec.stepping = scfg;
    rec.ids.resize(n);
    rec.weights.resize(n);
    rec.pos0.resize(n);
    rec.vel0.resize(n);

    std::vector<Vec3> pos(n), vel(n);
    for (std::size_t i = 0; i < n; ++i) {
        const Particle& p = start.particles[i];
        rec.ids[i] = p.id;
        rec.weights[i] = p.weight;
        rec.pos0[i] = p.pos;
        rec.vel0[i] = p.vel;
        pos[i] = p.pos;
        vel[i] = p.vel;
        if (radial_sq(p.pos) >= A_sq)
            throw ConfinementLoss(p.id, start.time, radial(p.pos));
    }

    double v_max = scfg.max_speed_floor;
    for (std::size_t i = 0; i < n; ++i) v_max = std::max(v_max, norm(vel[i]));
    double r_bound = 1.0;

    const std::int64_t nsteps = std::llround(scfg.t_end / scfg.dt);
    rec.samples.reserve(nsteps > 0 ? static_cast<std::size_t>(nsteps / scfg.record_every + 2) : 0);

    // Scratch ensemble handed to the field solver; only positions change.
    Ensemble field_ens = start;
    const auto eval_fields = [&](const std::vector<Vec3>& at) {
        for (std::size_t i = 0; i < n; ++i) field_ens.particles[i].pos = at[i];
        return field_all(field_ens, fcfg, used);
    };

    std::vector<Vec3> fields(n), new_fields(n);
    if (scfg.electric_kicks && nsteps > 0) fields = eval_fields(pos);

    std::vector<double> work(n, 0.0), torque(n, 0.0);
    std::vector<Vec3> new_pos(n), mid_vel(n);
    std::vector<detail::WallHit> hits(used);
    std::vector<double> worker_vmax(used, 0.0);
    const double half = 0.5 * scfg.dt;
    const double sub_limit = std::numbers::pi / 4.0;

    for (std::int64_t step = 1; step <= nsteps; ++step) {
        r_bound += scfg.dt * v_max;

        for (auto& h : hits) h = detail::WallHit{};
        parallel_chunks(n, used, [&](unsigned w, std::size_t begin, std::size_t end) {
            for (std::size_t i = begin; i < end; ++i) {
                Vec3 v = vel[i];
                if (scfg.electric_kicks) v += half * fields[i];
                Vec3 x = pos[i] + half * v;
                const double mid_r_sq = radial_sq(x);
                if (mid_r_sq >= A_sq) {
                    if (hits[w].index > i) hits[w] = {i, std::sqrt(mid_r_sq)};
                    continue;
                }
                if (scfg.magnetic_rotation) {
                    const double b = eval_h(start.geometry, mid_r_sq);
                    const double angle = std::abs(b * scfg.dt);
                    if (angle > sub_limit) {
                        const int cycles = static_cast<int>(std::ceil(angle / sub_limit));
                        const double sub_dt = scfg.dt / cycles;
                        for (int c = 0; c < cycles; ++c) v = rotate_velocity(v, b, sub_dt);
                    } else {
                        v = rotate_velocity(v, b, scfg.dt);
                    }
                }
                x += half * v;
                const double new_r_sq = radial_sq(x);
                if (new_r_sq >= A_sq) {
                    if (hits[w].index > i) hits[w] = {i, std::sqrt(new_r_sq)};
                    continue;
                }
                new_pos[i] = x;
                mid_vel[i] = v;
            }
        });
        {
            detail::WallHit worst;
            for (const auto& h : hits)
                if (h.index < worst.index) worst = h;
            if (worst.index != std::numeric_limits<std::size_t>::max())
                throw ConfinementLoss(rec.ids[worst.index],
                                      static_cast<double>(step) * scfg.dt, worst.radius);
        }

        if (scfg.electric_kicks) new_fields = eval_fields(new_pos);

        parallel_chunks(n, used, [&](unsigned w, std::size_t begin, std::size_t end) {
            double local_vmax = 0.0;
            for (std::size_t i = begin; i < end; ++i) {
                Vec3 v = mid_vel[i];
                if (scfg.electric_kicks) v += half * new_fields[i];
                const Vec3 vbar = 0.5 * (vel[i] + v);
                const Vec3 ebar = 0.5 * (fields[i] + new_fields[i]);
                const Vec3 xbar = 0.5 * (pos[i] + new_pos[i]);
                work[i] += scfg.dt * dot(vbar, ebar);
                torque[i] += scfg.dt * (xbar.y * ebar.z - xbar.z * ebar.y);
                pos[i] = new_pos[i];
                vel[i] = v;
                local_vmax = std::max(local_vmax, norm(v));
            }
            worker_vmax[w] = local_vmax;
        });
        for (unsigned w = 0; w < used; ++w) v_max = std::max(v_max, worker_vmax[w]);
        if (scfg.electric_kicks) fields.swap(new_fields);

        if (step % scfg.record_every == 0 || step == nsteps) {
            const double t = static_cast<double>(step) * scfg.dt;
            for (std::size_t i = 0; i < n; ++i)
                if (!std::isfinite(norm_sq(pos[i])) || !std::isfinite(norm_sq(vel[i])))
                    throw NumericalFailure("non-finite state for particle " +
                                           std::to_string(rec.ids[i]) + " at t=" +
                                           std::to_string(t));
            TrajectorySample s;
            s.t = t;
            s.step = step;
            s.pos = pos;
            s.vel = vel;
            s.field = fields;
            s.work = work;
            s.torque = torque;
            s.v_max = v_max;
            s.r_bound = r_bound;
            rec.samples.push_back(std::move(s));
        }
    }

    rec.v_max_final = v_max;
    rec.r_bound_final = r_bound;
    return rec;
}

}  // namespace mirrorsim
