// Command-line front end: run, converge, diagnose, selftest.
//
// Exit codes: 0 success, 2 configuration error, 3 runtime failure
// (confinement loss, numerical blow-up, I/O), 4 selftest failure.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <random>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "mirrorsim/config.hpp"
#include "mirrorsim/convergence.hpp"
#include "mirrorsim/diagnostics.hpp"
#include "mirrorsim/driver.hpp"
#include "mirrorsim/dynamics.hpp"
#include "mirrorsim/ensemble_io.hpp"
#include "mirrorsim/field.hpp"
#include "mirrorsim/geometry.hpp"
#include "mirrorsim/initial_data.hpp"

namespace {

using namespace mirrorsim;

struct CommonArgs {
    std::string config_path;
    std::vector<std::string> overrides;
    unsigned workers = 1;
    std::string output_dir;   // overrides the config when non-empty
};

void add_common(CLI::App* cmd, CommonArgs& args, bool config_required = true) {
    auto* opt = cmd->add_option("-c,--config", args.config_path, "JSON configuration file");
    if (config_required) opt->required();
    cmd->add_option("--set", args.overrides,
                    "Override a config value, e.g. --set stepping.dt=5e-4 (repeatable)");
    cmd->add_option("-j,--workers", args.workers, "Worker threads (default 1)");
    cmd->add_option("-o,--output", args.output_dir, "Output directory (overrides the config)");
}

RunConfig load(const CommonArgs& args) {
    RunConfig cfg = load_config(args.config_path, args.overrides);
    if (!args.output_dir.empty()) cfg.output_dir = args.output_dir;
    return cfg;
}

int cmd_run(const CommonArgs& args) {
    const RunConfig cfg = load(args);
    std::filesystem::create_directories(cfg.output_dir);

    RunOutputs out = run_with_diagnostics(cfg, args.workers);
    std::printf("particles: %zu   softening: %s   dt: %s   t_end: %s\n",
                out.initial.particles.size(), format_double(out.field.softening).c_str(),
                format_double(cfg.stepping.dt).c_str(), format_double(cfg.stepping.t_end).c_str());

    write_ensemble_csv(cfg.output_dir + "/snap_0.csv", out.initial);
    for (std::size_t k = 0; k < out.record.samples.size(); ++k) {
        const Ensemble snap = snapshot_at(out.record, k);
        write_ensemble_csv(cfg.output_dir + "/snap_" +
                               std::to_string(out.record.samples[k].step) + ".csv",
                           snap);
    }
    write_diag_csv(cfg.output_dir + "/diag.csv", out.diag);

    if (!out.diag.empty()) {
        const DiagRow& last = out.diag.back();
        std::printf("final: t=%s Vmax=%s R=%s supE=%s Q=%s margin=%s\n",
                    format_double(last.t).c_str(), format_double(last.v_max).c_str(),
                    format_double(last.r_bound).c_str(), format_double(last.sup_field).c_str(),
                    format_double(last.Q).c_str(), format_double(last.min_margin).c_str());
        std::printf("worst residuals at t_end: work=%s confinement=%s\n",
                    format_double(last.work_res).c_str(), format_double(last.conf_res).c_str());
    }
    for (const auto& [t, delta] : cfg.diagnostics.average_windows) {
        double worst = 0.0;
        for (std::int64_t id : out.record.ids)
            worst = std::max(worst, time_averaged_field(out.record, id, t, delta));
        std::printf("avg |E| over [%s, %s]: max over particles %s\n", format_double(t).c_str(),
                    format_double(t + delta).c_str(), format_double(worst).c_str());
    }
    std::printf("wrote %s/diag.csv and %zu snapshots\n", cfg.output_dir.c_str(),
                out.record.samples.size() + 1);
    return 0;
}

int cmd_converge(const CommonArgs& args, const std::string& cutoffs) {
    const RunConfig cfg = load(args);
    double n1 = 0.0, n2 = 0.0;
    if (std::sscanf(cutoffs.c_str(), "%lf,%lf", &n1, &n2) != 2)
        throw ConfigError("config error: --cutoffs expects 'N,Nprime' (got '" + cutoffs + "')");

    std::filesystem::create_directories(cfg.output_dir);
    const Ensemble base = sample_ensemble(cfg.geometry, cfg.initial, cfg.n_per_slab, cfg.seed);
    const FieldConfig fcfg = resolve_field_config(cfg, base, args.workers);
    const ConvergenceResult res = run_pair(base, n1, n2, fcfg, cfg.stepping, args.workers);
    write_conv_csv(cfg.output_dir + "/conv.csv", res);

    const GaugeRow& last = res.rows.back();
    std::printf("cutoffs (%s, %s): matched %zu particles\n", format_double(res.N).c_str(),
                format_double(res.N_prime).c_str(), res.matched);
    std::printf("final gauges: delta=%s eta=%s sigma=%s\n", format_double(last.delta).c_str(),
                format_double(last.eta).c_str(), format_double(last.sigma).c_str());
    std::printf("wrote %s/conv.csv\n", cfg.output_dir.c_str());
    return 0;
}

int cmd_diagnose(const CommonArgs& args, std::string snapshot) {
    const RunConfig cfg = load(args);
    if (snapshot.empty()) snapshot = cfg.output_dir + "/snap_0.csv";
    Ensemble ens;
    try {
        ens = read_ensemble_csv(snapshot, cfg.geometry, cfg.initial);
    } catch (const std::runtime_error& e) {
        throw ConfigError(std::string("config error: ") + e.what());
    }
    const FieldConfig fcfg = resolve_field_config(cfg, ens, args.workers);
    std::printf("snapshot: %s   particles: %zu   softening: %s\n", snapshot.c_str(),
                ens.particles.size(), format_double(fcfg.softening).c_str());

    const std::vector<double> pot = interaction_potentials(ens, fcfg, args.workers);
    std::printf("windowed energy by radius:\n");
    for (double R : cfg.diagnostics.R_list) {
        const double spacing = std::min(cfg.diagnostics.mu_spacing, 0.5 * R);
        const LocalEnergyReport rep = q_of_r(ens, R, spacing, pot);
        std::printf("  R=%-8s Q=%s\n", format_double(R).c_str(), format_double(rep.Q).c_str());
    }

    const DecayFit fit = decay_fit(slab_masses(ens), cfg.initial.alpha);
    std::printf("slab decay: C=%s worst slab i=%d\n", format_double(fit.C).c_str(),
                fit.worst_slab);

    const DensityHistogram hist = density_histogram(ens, cfg.diagnostics.cell_size);
    double max_density = 0.0;
    for (int a = 0; a < hist.n_axial; ++a)
        for (std::size_t tc = 0; tc < hist.transverse_cells(); ++tc)
            max_density = std::max(max_density, hist.density(a, tc));
    std::printf("histogram: cell=%s binned mass=%s peak density=%s\n",
                format_double(hist.cell_size).c_str(), format_double(hist.binned_mass).c_str(),
                format_double(max_density).c_str());

    if (!cfg.diagnostics.R_list.empty()) {
        const double R = cfg.diagnostics.R_list.front();
        const double W = local_energy(ens, 0.0, R, pot);
        if (W > 0.0) {
            const Lp53Check lp = lp53_check(hist, 0.0, R, W);
            std::printf("density L^{5/3} over [-%s, %s]: sum=%s ratio to W=%s\n",
                        format_double(R).c_str(), format_double(R).c_str(),
                        format_double(lp.lp_sum).c_str(), format_double(lp.ratio).c_str());
        }
        if (cfg.diagnostics.R_list.size() >= 2) {
            const CoveringCheck cc = covering_check(ens, 0.0, R, cfg.diagnostics.R_list[1], fcfg,
                                                    args.workers);
            std::printf("covering check R=%s R'=%s: ratio=%s %s\n", format_double(R).c_str(),
                        format_double(cfg.diagnostics.R_list[1]).c_str(),
                        format_double(cc.ratio).c_str(), cc.pass ? "pass" : "FAIL");
        }
    }

    // Field continuity spot check over a few random probe pairs.
    if (ens.particles.size() >= 2) {
        std::mt19937_64 gen(cfg.seed);
        std::uniform_real_distribution<double> ax(-static_cast<double>(cfg.geometry.M),
                                                  static_cast<double>(cfg.geometry.M) + 1.0);
        std::uniform_real_distribution<double> uni(0.0, 1.0);
        double worst = 0.0;
        for (int k = 0; k < 64; ++k) {
            const double r = cfg.geometry.A_bar * std::sqrt(uni(gen));
            const double phi = 2.0 * std::numbers::pi * uni(gen);
            const Vec3 x{ax(gen), r * std::cos(phi), r * std::sin(phi)};
            const double d = std::pow(10.0, -3.0 * uni(gen));
            const double cth = 2.0 * uni(gen) - 1.0;
            const double sth = std::sqrt(std::max(0.0, 1.0 - cth * cth));
            const double ph2 = 2.0 * std::numbers::pi * uni(gen);
            const Vec3 y = x + d * Vec3{cth, sth * std::cos(ph2), sth * std::sin(ph2)};
            worst = std::max(worst, quasi_lipschitz_ratio(ens, x, y, fcfg));
        }
        std::printf("field continuity: worst |dE|/psi(d) over 64 probe pairs = %s\n",
                    format_double(worst).c_str());
    }
    return 0;
}

bool report(const char* name, bool ok, const std::string& detail = "") {
    if (ok)
        std::printf("PASS %s\n", name);
    else
        std::printf("FAIL %s%s%s\n", name, detail.empty() ? "" : ": ", detail.c_str());
    return ok;
}

int cmd_selftest() {
    bool all = true;

    {
        // d/du H(u) must reproduce h(u) across the domain.
        const Geometry g{1.3, 0.8, 2.6, 4, 4};
        double worst = 0.0;
        const double top = 0.95 * g.A * g.A;
        for (int k = 0; k <= 200; ++k) {
            const double u = top * k / 200.0;
            const double d = 1e-6;
            const double fd = (eval_H(g, u + d) - eval_H(g, u - d)) / (2.0 * d);
            worst = std::max(worst, std::abs(fd - eval_h(g, u)) / eval_h(g, u));
        }
        all &= report("field-potential-consistency", worst < 1e-6,
                      "relative mismatch " + format_double(worst));
    }

    {
        // Pure magnetic stepping must conserve each particle's speed.
        const Geometry g;
        InitialDataParams params;
        const Ensemble ens = sample_ensemble(g, params, 8, 99);
        StepConfig scfg;
        scfg.dt = 1e-3;
        scfg.t_end = 2.0;
        scfg.record_every = 2000;
        scfg.electric_kicks = false;
        const TrajectoryRecord rec = run(ens, FieldConfig{}, scfg);
        double drift = 0.0;
        for (std::size_t i = 0; i < rec.size(); ++i) {
            const double v0 = norm(rec.vel0[i]);
            drift = std::max(drift, std::abs(norm(rec.samples.back().vel[i]) - v0) / v0);
        }
        all &= report("rotation-conserves-speed", drift <= 1e-12,
                      "relative drift " + format_double(drift));
    }

    {
        bool ok = mollifier_eval(0.5) == 1.0 && mollifier_eval(1.0) == 1.0 &&
                  mollifier_eval(2.0) == 0.0 && mollifier_eval(3.0) == 0.0;
        double min_slope = 0.0;
        for (int k = 0; k <= 1000; ++k)
            min_slope = std::min(min_slope, mollifier_deriv(1.0 + k / 1000.0));
        ok = ok && std::abs(min_slope + 1.875) < 1e-12;
        // The numeric slope must match the analytic one.
        for (int k = 1; k < 40 && ok; ++k) {
            const double a = 1.0 + k / 20.0 * 0.475;
            const double d = 1e-6;
            const double fd = (mollifier_eval(a + d) - mollifier_eval(a - d)) / (2.0 * d);
            ok = std::abs(fd - mollifier_deriv(a)) < 1e-6;
        }
        all &= report("mollifier-profile", ok, "min slope " + format_double(min_slope));
    }

    {
        // Equal-weight two-body fields must be exactly opposite.
        Ensemble ens;
        ens.particles.push_back({0, {0.2, 0.1, -0.3}, {}, 0.7});
        ens.particles.push_back({1, {-0.5, 0.3, 0.2}, {}, 0.7});
        FieldConfig fcfg;
        fcfg.softening = 0.05;
        const Vec3 e0 = field_at(ens, ens.particles[0].pos, fcfg, 0);
        const Vec3 e1 = field_at(ens, ens.particles[1].pos, fcfg, 1);
        all &= report("two-body-antisymmetry", e0 == -e1);
    }

    return all ? 0 : 4;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Weighted-particle simulator for magnetically confined plasma columns"};
    app.require_subcommand(1);

    CommonArgs run_args, conv_args, diag_args;
    std::string cutoffs = "2,4";
    std::string snapshot;

    CLI::App* run_cmd = app.add_subcommand("run", "Sample, evolve, and write diagnostics");
    add_common(run_cmd, run_args);

    CLI::App* conv_cmd =
        app.add_subcommand("converge", "Evolve a cutoff pair and write the gap gauges");
    add_common(conv_cmd, conv_args);
    conv_cmd->add_option("--cutoffs", cutoffs, "Pair 'N,Nprime' (default 2,4)");

    CLI::App* diag_cmd = app.add_subcommand("diagnose", "Analyze a written snapshot");
    add_common(diag_cmd, diag_args);
    diag_cmd->add_option("--snapshot", snapshot, "Snapshot CSV (default <output_dir>/snap_0.csv)");

    CLI::App* self_cmd = app.add_subcommand("selftest", "Run built-in consistency checks");
    (void)self_cmd;

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e);
        app.exit(e);
        return 2;
    }

    try {
        if (run_cmd->parsed()) return cmd_run(run_args);
        if (conv_cmd->parsed()) return cmd_converge(conv_args, cutoffs);
        if (diag_cmd->parsed()) return cmd_diagnose(diag_args, snapshot);
        if (self_cmd->parsed()) return cmd_selftest();
    } catch (const ConfigError& e) {
        std::cerr << e.what() << "\n";
        return 2;
    } catch (const std::invalid_argument& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const ConfinementLoss& e) {
        std::cerr << "runtime failure: " << e.what() << "\n";
        return 3;
    } catch (const NumericalFailure& e) {
        std::cerr << "runtime failure: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "runtime failure: " << e.what() << "\n";
        return 3;
    }
    return 0;
}
