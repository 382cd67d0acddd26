#pragma once

#include <charconv>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "mirrorsim/convergence.hpp"
#include "mirrorsim/particle.hpp"

namespace mirrorsim {

// 17 significant digits: enough for binary64 round trips, so written
// snapshots reload bit-identically.
inline std::string format_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

inline constexpr const char* kEnsembleHeader = "id,x1,x2,x3,v1,v2,v3,w";

inline void write_ensemble_csv(std::ostream& os, const Ensemble& ens) {
    os << "# particle snapshot at t=" << format_double(ens.time)
       << "; weights in column w; positions x, velocities v\n";
    os << kEnsembleHeader << "\n";
    for (const Particle& p : ens.particles) {
        os << p.id << ',' << format_double(p.pos.x) << ',' << format_double(p.pos.y) << ','
           << format_double(p.pos.z) << ',' << format_double(p.vel.x) << ','
           << format_double(p.vel.y) << ',' << format_double(p.vel.z) << ','
           << format_double(p.weight) << "\n";
    }
}

inline void write_ensemble_csv(const std::string& path, const Ensemble& ens) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot open " + path + " for writing");
    write_ensemble_csv(os, ens);
    if (!os) throw std::runtime_error("write to " + path + " failed");
}

namespace detail {

inline double parse_double_field(const std::string& field, const std::string& context) {
    double v = 0.0;
    const char* first = field.data();
    const char* last = field.data() + field.size();
    auto [ptr, ec] = std::from_chars(first, last, v);
    if (ec != std::errc{} || ptr != last)
        throw std::runtime_error("malformed number '" + field + "' in " + context);
    return v;
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            fields.push_back(cur);
            cur.clear();
        } else {
            cur.push_back(c);
        }
    }
    fields.push_back(cur);
    return fields;
}

}  // namespace detail

// Reads a snapshot written by write_ensemble_csv.  Geometry and sampling
// parameters are not stored in the file and must be supplied.
inline Ensemble read_ensemble_csv(std::istream& is, const Geometry& geom,
                                  const InitialDataParams& params, const std::string& context) {
    Ensemble ens;
    ens.geometry = geom;
    ens.params = params;
    std::string line;
    bool header_seen = false;
    std::size_t line_no = 0;
    while (std::getline(is, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line[0] == '#') continue;
        if (!header_seen) {
            if (line != kEnsembleHeader)
                throw std::runtime_error(context + ": unexpected header '" + line + "'");
            header_seen = true;
            continue;
        }
        const auto fields = detail::split_csv_line(line);
        if (fields.size() != 8)
            throw std::runtime_error(context + " line " + std::to_string(line_no) +
                                     ": expected 8 fields, got " + std::to_string(fields.size()));
        const std::string ctx = context + " line " + std::to_string(line_no);
        Particle p;
        p.id = static_cast<std::int64_t>(detail::parse_double_field(fields[0], ctx));
        p.pos = {detail::parse_double_field(fields[1], ctx),
                 detail::parse_double_field(fields[2], ctx),
                 detail::parse_double_field(fields[3], ctx)};
        p.vel = {detail::parse_double_field(fields[4], ctx),
                 detail::parse_double_field(fields[5], ctx),
                 detail::parse_double_field(fields[6], ctx)};
        p.weight = detail::parse_double_field(fields[7], ctx);
        ens.particles.push_back(p);
    }
    if (!header_seen)
        throw std::runtime_error(context + ": no header row found");
    return ens;
}

inline Ensemble read_ensemble_csv(const std::string& path, const Geometry& geom,
                                  const InitialDataParams& params) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("cannot open " + path);
    return read_ensemble_csv(is, geom, params, path);
}

// One row of the per-record diagnostics stream.
struct DiagRow {
    double t = 0.0;
    double v_max = 0.0;        // running speed envelope
    double r_bound = 0.0;      // window radius R(t)
    double sup_field = 0.0;    // sup over particles of |E|
    double Q = 1.0;            // Q(R(t)) on the current snapshot
    double Q_ratio = 1.0;      // against Q(R(t)) on the initial snapshot
    double min_margin = 0.0;   // min over particles of A - r
    double work_res = 0.0;     // worst work-energy residual
    double conf_res = 0.0;     // worst confinement residual
    double decay_C = 0.0;      // slab decay constant of the current snapshot
};

inline constexpr const char* kDiagHeader =
    "t,Vmax,Rt,supE,Q,Qratio,minMargin,workRes,confRes,C3fit";

inline void write_diag_csv(std::ostream& os, const std::vector<DiagRow>& rows) {
    os << "# per-record diagnostics; columns: time, speed envelope, window radius, "
          "sup |E|, windowed energy max, its ratio to t=0, wall margin, "
          "work-energy and confinement residuals, slab decay constant\n";
    os << kDiagHeader << "\n";
    for (const DiagRow& r : rows) {
        os << format_double(r.t) << ',' << format_double(r.v_max) << ','
           << format_double(r.r_bound) << ',' << format_double(r.sup_field) << ','
           << format_double(r.Q) << ',' << format_double(r.Q_ratio) << ','
           << format_double(r.min_margin) << ',' << format_double(r.work_res) << ','
           << format_double(r.conf_res) << ',' << format_double(r.decay_C) << "\n";
    }
}

inline void write_diag_csv(const std::string& path, const std::vector<DiagRow>& rows) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot open " + path + " for writing");
    write_diag_csv(os, rows);
    if (!os) throw std::runtime_error("write to " + path + " failed");
}

inline constexpr const char* kConvHeader = "t,delta,eta,sigma,N,Nprime,matched";

inline void write_conv_csv(std::ostream& os, const ConvergenceResult& res) {
    os << "# cutoff-pair gauges; columns: time, sup position gap, sup velocity gap, "
          "their sum, the two cutoffs, matched particle count\n";
    os << kConvHeader << "\n";
    for (const GaugeRow& r : res.rows) {
        os << format_double(r.t) << ',' << format_double(r.delta) << ','
           << format_double(r.eta) << ',' << format_double(r.sigma) << ','
           << format_double(res.N) << ',' << format_double(res.N_prime) << ','
           << res.matched << "\n";
    }
}

inline void write_conv_csv(const std::string& path, const ConvergenceResult& res) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot open " + path + " for writing");
    write_conv_csv(os, res);
    if (!os) throw std::runtime_error("write to " + path + " failed");
}

}  // namespace mirrorsim
