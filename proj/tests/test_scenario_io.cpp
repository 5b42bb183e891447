// Scenario parsing, presets, record files, and CSV output.

#include <doctest.h>

#include <cstdio>
#include <fstream>
#include <sstream>

#include "focktraj/io.hpp"
#include "focktraj/scenario.hpp"
#include "test_common.hpp"

using namespace focktraj;

TEST_CASE("presets parse and build") {
    for (const auto& name : scenario_preset_names()) {
        const Scenario sc = load_scenario(name);
        CHECK(sc.system.dim == 2);
        const SimulationSetup setup = sc.setup();
        CHECK(setup.grid.n_steps() > 0);
    }
}

TEST_CASE("scenario parsing: explicit matrices and bath channels") {
    const char* text = R"json({
        "system": {
            "dim": 2,
            "scattering": [[[1,0],[0,0]],[[0,0],[1,0]]],
            "coupling": [[[0,0],[1.2,0]],[[0,0],[0,0]]],
            "hamiltonian": [[[0.5,0],[0,0]],[[0,0],[-0.5,0]]]
        },
        "packet": {"kind": "flat", "t_lo": 0.0, "t_hi": 2.0},
        "field": {"kind": "coherent", "alpha": [1.0, 0.5], "truncation": 4},
        "baths": [{"coupling": [[[0,0],[0.3,0]],[[0,0],[0,0]]], "mean_occupation": 0.2}],
        "initial_state": {"basis": 1},
        "detection": {"scheme": "homodyne", "phase": 0.7, "efficiency": 0.9,
                      "stepper": "euler", "noise": "gaussian"},
        "grid": {"t_start": 0.0, "t_end": 2.0},
        "observables": ["purity", "quadrature_current(0.7)"],
        "seed": 42
    })json";
    const Scenario sc = parse_scenario(Json::parse(text));
    CHECK(sc.system.dim == 2);
    CHECK(sc.baths.size() == 1);
    CHECK(sc.field.max_photons == 4);
    CHECK(sc.detection.scheme == Scheme::homodyne);
    CHECK(sc.detection.stepper == StepperMode::euler);
    CHECK(sc.initial_state(1, 1) == Complex{1.0, 0.0});
    CHECK(sc.seed == 42);
    // dt falls back to the default rule when omitted.
    const TimeGrid grid = sc.grid();
    CHECK(grid.dt > 0.0);
    CHECK(grid.dt <= 1e-3 / 1.44 * 1.0001);  // Gamma_eff = |L|^2 = 1.44
}

TEST_CASE("scenario parsing rejects malformed input") {
    CHECK_THROWS_AS(load_scenario("/nonexistent/path.json"), ValidationError);
    CHECK_THROWS_AS(parse_scenario(Json::parse(R"({"system": {"preset": "nope"},
        "packet": {"kind": "gaussian", "bandwidth_ratio": 1.0},
        "field": {"kind": "fock", "photons": 1},
        "grid": {"t_start": 0, "t_end": 1}})")),
                    ValidationError);
    // Binary outcomes demand unit efficiency.
    CHECK_THROWS_AS(parse_scenario(Json::parse(R"({
        "system": {"preset": "two_level_atom"},
        "packet": {"kind": "gaussian", "bandwidth_ratio": 1.0},
        "field": {"kind": "fock", "photons": 1},
        "detection": {"scheme": "homodyne", "noise": "binary", "efficiency": 0.5},
        "grid": {"t_start": 0, "t_end": 1}})")),
                    ValidationError);
}

TEST_CASE("record files round-trip at full precision") {
    TrajectoryRecord rec;
    rec.scheme = Scheme::heterodyne;
    rec.phase = 0.25;
    rec.efficiency = 0.75;
    rec.dt = 1e-3;
    rec.t_start = -4.0;
    rec.seed = 123456789;
    RandomStream rng(9);
    for (int i = 0; i < 200; ++i) {
        rec.entries.push_back({rng.normal() * 0.0316, rng.normal() * 0.0316});
    }
    std::stringstream buffer;
    write_record(buffer, rec);
    const TrajectoryRecord back = read_record(buffer);
    CHECK(back.scheme == rec.scheme);
    CHECK(back.phase == rec.phase);
    CHECK(back.efficiency == rec.efficiency);
    CHECK(back.dt == rec.dt);
    CHECK(back.t_start == rec.t_start);
    REQUIRE(back.seed.has_value());
    CHECK(*back.seed == *rec.seed);
    REQUIRE(back.entries.size() == rec.entries.size());
    for (std::size_t i = 0; i < rec.entries.size(); ++i) {
        CHECK(back.entries[i].a == rec.entries[i].a);  // bit-exact via %.17g
        CHECK(back.entries[i].b == rec.entries[i].b);
    }
}

TEST_CASE("series CSV is reproducible from the seed alone") {
    const Scenario sc = load_scenario("two-level-fock-n1");
    SimulationSetup setup = sc.setup();
    setup.grid.t_end = -2.0;  // short run
    const auto emit = [&] {
        RunOptions opts;
        opts.seed = sc.seed;
        opts.snapshot_stride = 50;
        const TrajectoryResult res = run_trajectory(setup, opts);
        std::ostringstream os;
        write_series_csv(os, res, sc.observables, setup);
        return os.str();
    };
    const std::string a = emit();
    const std::string b = emit();
    CHECK(a == b);
    CHECK(a.find("t,excited_population,bloch_x,bloch_y,bloch_z,photon_flux,trace,purity,"
                 "cumulative_counts") == 0);
}

TEST_CASE("replay after a field swap keeps the noise realization") {
    // Same homodyne record conditioned under two different truncations.
    Scenario sc = load_scenario("coherent-homodyne-trunc6");
    SimulationSetup setup = sc.setup();
    setup.grid = TimeGrid{-2.0, 0.0, 1e-3};
    RunOptions gen;
    gen.seed = 77;
    gen.snapshot_stride = 200;
    const TrajectoryResult original = run_trajectory(setup, gen);

    SimulationSetup swapped = setup;
    swapped.field = FieldState::coherent(Complex{std::sqrt(5.0), 0.0}, 10);
    RunOptions rep;
    rep.replay = &original.record;
    rep.snapshot_stride = 200;
    const TrajectoryResult other = run_trajectory(swapped, rep);
    CHECK(other.snapshots.size() == original.snapshots.size());
    // Different truncation, same record: nearby but not identical states.
    const double dist = trace_distance(reduced_state(original.snapshots.back(), setup.field),
                                       reduced_state(other.snapshots.back(), swapped.field));
    CHECK(dist > 0.0);
    CHECK(dist < 0.5);
}
