#pragma once

#include <algorithm>
#include <string>
#include <vector>

#include "mirrorsim/config.hpp"
#include "mirrorsim/diagnostics.hpp"
#include "mirrorsim/dynamics.hpp"
#include "mirrorsim/ensemble_io.hpp"
#include "mirrorsim/field.hpp"
#include "mirrorsim/initial_data.hpp"

namespace mirrorsim {

// Fills in the derived softening when the config left it automatic.
inline FieldConfig resolve_field_config(const RunConfig& cfg, const Ensemble& ens,
                                        unsigned workers = 1) {
    FieldConfig f = cfg.field;
    if (cfg.softening_auto) f.softening = default_softening(ens, workers);
    validate(f);
    return f;
}

struct RunOutputs {
    Ensemble initial;
    FieldConfig field;        // resolved
    TrajectoryRecord record;
    std::vector<DiagRow> diag;
};

// One diagnostics row per recorded sample.  Q is evaluated at radius R(t) on
// the evolved cloud and referenced against the initial cloud at the same
// radius.
inline std::vector<DiagRow> diagnostics_rows(const TrajectoryRecord& rec, const Ensemble& initial,
                                             const FieldConfig& fcfg, double mu_spacing,
                                             unsigned workers = 1) {
    std::vector<DiagRow> rows;
    rows.reserve(rec.samples.size());
    const std::vector<double> pot0 = interaction_potentials(initial, fcfg, workers);
    for (std::size_t k = 0; k < rec.samples.size(); ++k) {
        const TrajectorySample& s = rec.samples[k];
        DiagRow row;
        row.t = s.t;
        row.v_max = s.v_max;
        row.r_bound = s.r_bound;
        for (const Vec3& e : s.field) row.sup_field = std::max(row.sup_field, norm(e));
        const Ensemble snap = snapshot_at(rec, k);
        const double spacing = std::min(mu_spacing, 0.5 * s.r_bound);
        row.Q = q_of_r(snap, s.r_bound, fcfg, spacing, workers).Q;
        const double Q0 = q_of_r(initial, s.r_bound, spacing, pot0).Q;
        row.Q_ratio = row.Q / Q0;
        double margin = rec.geometry.A;
        for (const Vec3& x : s.pos) margin = std::min(margin, rec.geometry.A - radial(x));
        row.min_margin = margin;
        row.work_res = max_work_energy_residual(rec, k);
        row.conf_res = max_confinement_residual(rec, k);
        row.decay_C = decay_fit(slab_masses(snap), rec.params.alpha).C;
        rows.push_back(row);
    }
    return rows;
}

// Samples the configured cloud, evolves it, and derives the diagnostics
// stream.  Deterministic for a fixed config, independent of worker count.
inline RunOutputs run_with_diagnostics(const RunConfig& cfg, unsigned workers = 1) {
    RunOutputs out;
    out.initial = sample_ensemble(cfg.geometry, cfg.initial, cfg.n_per_slab, cfg.seed);
    out.field = resolve_field_config(cfg, out.initial, workers);
    out.record = run(out.initial, out.field, cfg.stepping, workers);
    out.diag = diagnostics_rows(out.record, out.initial, out.field, cfg.diagnostics.mu_spacing,
                                workers);
    return out;
}

}  // namespace mirrorsim
