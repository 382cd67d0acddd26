#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <numbers>
#include <sstream>

#include "mirrorsim/config.hpp"
#include "mirrorsim/ensemble_io.hpp"
#include "mirrorsim/initial_data.hpp"
#include "mirrorsim/rng.hpp"

using namespace mirrorsim;
using nlohmann::json;

TEST_CASE("full config parses into every field") {
    const json root = json::parse(R"({
      "geometry": {"A": 1.5, "A_bar": 0.9, "theta": 2.5, "L": 8, "M": 4},
      "initial": {"C0": 2.0, "lambda": 0.5, "C1": 1.5, "alpha": 0.8,
                  "N_cutoff": 6.0, "n_per_slab": 12, "seed": 99},
      "field": {"softening": 0.1, "near_radius": 6.0, "method": "hybrid"},
      "stepping": {"dt": 0.002, "t_end": 4.0, "record_every": 50,
                   "max_speed_floor": 2.0, "electric_kicks": true,
                   "magnetic_rotation": false},
      "diagnostics": {"mu_spacing": 1.0, "cell_size": 0.5, "R_list": [2.0, 4.0],
                      "average_windows": [[0.0, 1.0], [2.0, 0.5]]},
      "output_dir": "results"
    })");
    const RunConfig cfg = parse_config(root);
    REQUIRE(cfg.geometry.A == 1.5);
    REQUIRE(cfg.geometry.A_bar == 0.9);
    REQUIRE(cfg.geometry.theta == 2.5);
    REQUIRE(cfg.geometry.L == 8);
    REQUIRE(cfg.geometry.M == 4);
    REQUIRE(cfg.initial.C0 == 2.0);
    REQUIRE(cfg.initial.lambda == 0.5);
    REQUIRE(cfg.initial.C1 == 1.5);
    REQUIRE(cfg.initial.alpha == 0.8);
    REQUIRE(cfg.initial.N_cutoff == 6.0);
    REQUIRE(cfg.n_per_slab == 12);
    REQUIRE(cfg.seed == 99);
    REQUIRE(cfg.field.softening == 0.1);
    REQUIRE_FALSE(cfg.softening_auto);
    REQUIRE(cfg.field.near_radius == 6.0);
    REQUIRE(cfg.field.method == FieldMethod::hybrid);
    REQUIRE(cfg.stepping.dt == 0.002);
    REQUIRE(cfg.stepping.t_end == 4.0);
    REQUIRE(cfg.stepping.record_every == 50);
    REQUIRE(cfg.stepping.max_speed_floor == 2.0);
    REQUIRE(cfg.stepping.electric_kicks);
    REQUIRE_FALSE(cfg.stepping.magnetic_rotation);
    REQUIRE(cfg.diagnostics.mu_spacing == 1.0);
    REQUIRE(cfg.diagnostics.cell_size == 0.5);
    REQUIRE(cfg.diagnostics.R_list == std::vector<double>{2.0, 4.0});
    REQUIRE(cfg.diagnostics.average_windows.size() == 2);
    REQUIRE(cfg.diagnostics.average_windows[1] == std::pair<double, double>{2.0, 0.5});
    REQUIRE(cfg.output_dir == "results");
}

TEST_CASE("empty config yields the defaults") {
    const RunConfig cfg = parse_config(json::object());
    REQUIRE(cfg.geometry.A == 1.0);
    REQUIRE(cfg.geometry.A_bar == 0.6);
    REQUIRE(cfg.geometry.theta == 3.0);
    REQUIRE(cfg.geometry.L == 16);
    REQUIRE(cfg.geometry.M == 16);
    REQUIRE(cfg.initial.lambda == 1.0);
    REQUIRE(cfg.initial.alpha == 0.7);
    REQUIRE(std::isinf(cfg.initial.N_cutoff));
    REQUIRE(cfg.n_per_slab == 64);
    REQUIRE(cfg.seed == 2027);
    REQUIRE(cfg.softening_auto);
    REQUIRE(cfg.field.method == FieldMethod::direct);
    REQUIRE(cfg.stepping.dt == 1e-3);
    REQUIRE(cfg.stepping.t_end == 10.0);
    REQUIRE(cfg.stepping.record_every == 100);
    REQUIRE(cfg.stepping.max_speed_floor == 1.0);
    REQUIRE(cfg.diagnostics.R_list == std::vector<double>{4.0, 8.0, 16.0, 32.0, 64.0});
    REQUIRE(cfg.output_dir == "out");
}

TEST_CASE("unknown keys are rejected with their path") {
    auto expect_config_error = [](const char* text, const char* needle) {
        try {
            parse_config(json::parse(text));
            FAIL("expected ConfigError");
        } catch (const ConfigError& e) {
            REQUIRE_THAT(e.what(), Catch::Matchers::ContainsSubstring(needle));
        }
    };
    expect_config_error(R"({"geomtry": {}})", "geomtry");
    expect_config_error(R"({"geometry": {"radius": 1.0}})", "geometry.radius");
    expect_config_error(R"({"initial": {"beta": 1.0}})", "initial.beta");
    expect_config_error(R"({"field": {"eps": 0.1}})", "field.eps");
    expect_config_error(R"({"stepping": {"steps": 10}})", "stepping.steps");
    expect_config_error(R"({"diagnostics": {"bins": 3}})", "diagnostics.bins");
}

TEST_CASE("wrong types and bad values are config errors") {
    auto bad = [](const char* text) {
        REQUIRE_THROWS_AS(parse_config(json::parse(text)), ConfigError);
    };
    bad(R"([1, 2])");                                         // not an object
    bad(R"({"geometry": {"A": "one"}})");                     // number expected
    bad(R"({"geometry": {"L": 2.5}})");                       // integer expected
    bad(R"({"stepping": {"electric_kicks": 1}})");            // boolean expected
    bad(R"({"output_dir": 7})");                              // string expected
    bad(R"({"field": {"method": "tree"}})");                  // unknown method
    bad(R"({"initial": {"seed": -3}})");                      // negative seed
    bad(R"({"geometry": {"theta": 2.0}})");                   // needs theta > 2
    bad(R"({"geometry": {"A_bar": 0.4}})");                   // needs A/2 < A_bar < A
    bad(R"({"initial": {"alpha": 0.5}})");                    // needs alpha > 5/9
    bad(R"({"initial": {"lambda": 1.0, "N_cutoff": 0.05}})"); // cutoff below 0.1/sqrt(lambda)
    bad(R"({"initial": {"n_per_slab": 0}})");
    bad(R"({"field": {"softening": -0.1}})");
    bad(R"({"stepping": {"dt": 0.0}})");
    bad(R"({"stepping": {"record_every": 0}})");
    bad(R"({"diagnostics": {"mu_spacing": 0.0}})");
    bad(R"({"diagnostics": {"cell_size": -1.0}})");
    bad(R"({"diagnostics": {"R_list": []}})");
    bad(R"({"diagnostics": {"R_list": [4.0, -8.0]}})");
    bad(R"({"diagnostics": {"average_windows": [[1.0]]}})");
    bad(R"({"diagnostics": {"average_windows": [[1.0, -0.5]]}})");
}

TEST_CASE("null values request the derived defaults") {
    const RunConfig a = parse_config(json::parse(R"({"initial": {"N_cutoff": null}})"));
    REQUIRE(std::isinf(a.initial.N_cutoff));
    const RunConfig b = parse_config(json::parse(R"({"field": {"softening": null}})"));
    REQUIRE(b.softening_auto);
}

TEST_CASE("overrides rewrite nested keys") {
    json root = json::object();
    apply_override(root, "stepping.dt=0.0005");
    apply_override(root, "stepping.electric_kicks=false");
    apply_override(root, "field.method=hybrid");
    apply_override(root, "output_dir=elsewhere");
    apply_override(root, "diagnostics.R_list=[2.0,4.0]");
    apply_override(root, "initial.N_cutoff=null");
    const RunConfig cfg = parse_config(root);
    REQUIRE(cfg.stepping.dt == 0.0005);
    REQUIRE_FALSE(cfg.stepping.electric_kicks);
    REQUIRE(cfg.field.method == FieldMethod::hybrid);
    REQUIRE(cfg.output_dir == "elsewhere");
    REQUIRE(cfg.diagnostics.R_list == std::vector<double>{2.0, 4.0});
    REQUIRE(std::isinf(cfg.initial.N_cutoff));

    // Overrides land on top of what the file supplied.
    json base = json::parse(R"({"stepping": {"dt": 0.01, "t_end": 2.0}})");
    apply_override(base, "stepping.dt=0.002");
    const RunConfig over = parse_config(base);
    REQUIRE(over.stepping.dt == 0.002);
    REQUIRE(over.stepping.t_end == 2.0);

    REQUIRE_THROWS_AS(apply_override(root, "no_equals_here"), ConfigError);
    REQUIRE_THROWS_AS(apply_override(root, "=5"), ConfigError);
    REQUIRE_THROWS_AS(apply_override(root, "a..b=1"), ConfigError);
}

TEST_CASE("config files load with overrides") {
    namespace fs = std::filesystem;
    const fs::path dir = fs::temp_directory_path() / "mirrorsim_cfg_test";
    fs::create_directories(dir);
    const fs::path good = dir / "good.json";
    {
        std::ofstream os(good);
        os << R"({"stepping": {"t_end": 1.0}, "initial": {"seed": 5}})";
    }
    const RunConfig cfg = load_config(good.string(), {"stepping.t_end=2.5"});
    REQUIRE(cfg.stepping.t_end == 2.5);
    REQUIRE(cfg.seed == 5);

    REQUIRE_THROWS_AS(load_config((dir / "absent.json").string()), ConfigError);

    const fs::path bad = dir / "bad.json";
    {
        std::ofstream os(bad);
        os << "{ not json";
    }
    REQUIRE_THROWS_AS(load_config(bad.string()), ConfigError);
    fs::remove_all(dir);
}

TEST_CASE("doubles survive the 17-digit round trip") {
    const double cases[] = {0.0,
                            -0.0,
                            1.0 / 3.0,
                            std::numbers::pi,
                            0.1 + 0.2,
                            1e308,
                            5e-324,
                            -2.2250738585072014e-308,
                            123456789.123456789};
    for (double v : cases) {
        const std::string s = format_double(v);
        const double back = detail::parse_double_field(s, "test");
        REQUIRE(std::signbit(back) == std::signbit(v));
        REQUIRE(back == v);
    }
}

TEST_CASE("ensemble snapshots round trip bitwise") {
    const Geometry geom{1.0, 0.6, 3.0, 4, 4};
    InitialDataParams params;
    Ensemble ens = sample_ensemble(geom, params, 16, 31);
    ens.time = 1.0 / 7.0;
    // Smuggle in awkward values.
    ens.particles[0].vel = {-0.0, 5e-324, -1e308};
    ens.particles[1].pos.y = std::numbers::pi * 1e-10;

    std::stringstream ss;
    write_ensemble_csv(ss, ens);
    const Ensemble back = read_ensemble_csv(ss, geom, params, "roundtrip");
    REQUIRE(back.particles.size() == ens.particles.size());
    for (std::size_t i = 0; i < ens.particles.size(); ++i) {
        const Particle& a = ens.particles[i];
        const Particle& b = back.particles[i];
        REQUIRE(a.id == b.id);
        REQUIRE(a.pos == b.pos);
        REQUIRE(a.vel == b.vel);
        REQUIRE(a.weight == b.weight);
    }
    REQUIRE(std::signbit(back.particles[0].vel.x));
}

TEST_CASE("snapshot reader rejects malformed input") {
    const Geometry geom;
    const InitialDataParams params;
    auto read_text = [&](const std::string& text) {
        std::stringstream ss(text);
        return read_ensemble_csv(ss, geom, params, "test");
    };
    REQUIRE_THROWS_AS(read_text(""), std::runtime_error);
    REQUIRE_THROWS_AS(read_text("# only a comment\n"), std::runtime_error);
    REQUIRE_THROWS_AS(read_text("id,x1,x2\n"), std::runtime_error);
    const std::string header = std::string(kEnsembleHeader) + "\n";
    REQUIRE_THROWS_AS(read_text(header + "0,1,2\n"), std::runtime_error);
    REQUIRE_THROWS_AS(read_text(header + "0,1,2,3,4,5,six,7\n"), std::runtime_error);
    REQUIRE(read_text(header).particles.empty());
    // Comments, blank lines, and CRLF endings are tolerated.
    const Ensemble ok = read_text("# note\r\n" + header + "\n7,1,0,0,0,0,0,0.5\r\n");
    REQUIRE(ok.particles.size() == 1);
    REQUIRE(ok.particles[0].id == 7);
    REQUIRE(ok.particles[0].weight == 0.5);
}

TEST_CASE("diagnostic and gauge writers emit their schema") {
    std::vector<DiagRow> rows(2);
    rows[0].t = 0.1;
    rows[0].v_max = 2.0;
    rows[1].t = 0.2;
    rows[1].decay_C = 3.5;
    std::stringstream ds;
    write_diag_csv(ds, rows);
    std::string line;
    REQUIRE(std::getline(ds, line));
    REQUIRE(line[0] == '#');
    REQUIRE(std::getline(ds, line));
    REQUIRE(line == kDiagHeader);
    REQUIRE(std::getline(ds, line));
    REQUIRE_THAT(line, Catch::Matchers::StartsWith("0.1") && Catch::Matchers::ContainsSubstring(",2,"));
    REQUIRE(std::getline(ds, line));
    REQUIRE_THAT(line, Catch::Matchers::EndsWith(",3.5"));
    REQUIRE_FALSE(std::getline(ds, line));

    ConvergenceResult res;
    res.N = 2.0;
    res.N_prime = 4.0;
    res.matched = 17;
    res.rows.push_back(GaugeRow{});
    res.rows.push_back(GaugeRow{0.5, 0.25, 0.125, 0.375});
    std::stringstream cs;
    write_conv_csv(cs, res);
    REQUIRE(std::getline(cs, line));
    REQUIRE(line[0] == '#');
    REQUIRE(std::getline(cs, line));
    REQUIRE(line == kConvHeader);
    REQUIRE(std::getline(cs, line));
    REQUIRE(line == "0,0,0,0,2,4,17");
    REQUIRE(std::getline(cs, line));
    REQUIRE(line == "0.5,0.25,0.125,0.375,2,4,17");
}
