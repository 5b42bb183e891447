// focktraj — command-line front end: single trajectories, ensembles, record
// replay, unconditional integration, and the validation suites.

#include <cstdint>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "focktraj/ensemble.hpp"
#include "focktraj/integrator.hpp"
#include "focktraj/io.hpp"
#include "focktraj/scenario.hpp"
#include "focktraj/validate.hpp"

namespace {

using namespace focktraj;

struct CommonOverrides {
    std::optional<std::string> scheme;
    std::optional<double> eta;
    std::optional<std::uint64_t> seed;
    std::optional<double> dt;
    std::optional<std::string> stepper;
    std::optional<std::string> noise;
    std::vector<std::string> observables;
};

void apply_overrides(Scenario& sc, const CommonOverrides& ov) {
    if (ov.scheme) sc.detection.scheme = scheme_from_string(*ov.scheme);
    if (ov.eta) sc.detection.efficiency = *ov.eta;
    if (ov.seed) sc.seed = *ov.seed;
    if (ov.dt) sc.dt = *ov.dt;
    if (ov.stepper) {
        if (*ov.stepper == "kraus") sc.detection.stepper = StepperMode::kraus;
        else if (*ov.stepper == "euler") sc.detection.stepper = StepperMode::euler;
        else throw ValidationError("unknown stepper: " + *ov.stepper);
    }
    if (ov.noise) {
        if (*ov.noise == "gaussian") sc.detection.noise = QuadratureNoise::gaussian;
        else if (*ov.noise == "binary") sc.detection.noise = QuadratureNoise::binary;
        else throw ValidationError("unknown noise model: " + *ov.noise);
    }
    if (!ov.observables.empty()) {
        sc.observables.clear();
        for (const auto& name : ov.observables) {
            sc.observables.push_back(ObservableRequest::builtin(name));
        }
    }
    sc.detection.validate();
}

void add_common(CLI::App* cmd, CommonOverrides& ov) {
    cmd->add_option("--scheme", ov.scheme, "counting|homodyne|heterodyne");
    cmd->add_option("--eta", ov.eta, "detector efficiency in [0,1]");
    cmd->add_option("--seed", ov.seed, "RNG seed");
    cmd->add_option("--dt", ov.dt, "time step override");
    cmd->add_option("--stepper", ov.stepper, "kraus|euler");
    cmd->add_option("--noise", ov.noise, "gaussian|binary quadrature outcomes");
    cmd->add_option("--observables", ov.observables, "observable names")->delimiter(',');
}

int run_simulate(const std::string& scenario_arg, const CommonOverrides& ov,
                 const std::string& out_prefix, std::size_t stride) {
    Scenario sc = load_scenario(scenario_arg);
    apply_overrides(sc, ov);
    const SimulationSetup setup = sc.setup();
    RunOptions opts;
    opts.seed = sc.seed;
    opts.snapshot_stride = stride;
    const TrajectoryResult res = run_trajectory(setup, opts);
    write_series_csv_file(out_prefix + ".csv", res, sc.observables, setup);
    write_record_file(out_prefix + ".record", res.record);
    std::cerr << "wrote " << out_prefix << ".csv and " << out_prefix << ".record ("
              << res.record.entries.size() << " steps";
    if (sc.detection.scheme == Scheme::counting) {
        std::cerr << ", " << res.record.total_counts() << " counts";
    }
    std::cerr << ")\n";
    return exit_ok;
}

int run_ensemble_cmd(const std::string& scenario_arg, const CommonOverrides& ov,
                     const std::string& out_file, std::size_t n_traj, unsigned workers,
                     std::optional<std::uint64_t> base_seed, std::size_t stride) {
    Scenario sc = load_scenario(scenario_arg);
    apply_overrides(sc, ov);
    EnsembleOptions eo;
    eo.n_trajectories = n_traj;
    eo.base_seed = base_seed.value_or(sc.seed);
    eo.workers = workers;
    eo.snapshot_stride = stride;
    const EnsembleSummary summary = run_ensemble(sc.setup(), sc.observables, eo);
    write_ensemble_csv_file(out_file, summary);
    double mean_counts = 0.0;
    for (double c : summary.total_counts) mean_counts += c;
    if (!summary.total_counts.empty()) mean_counts /= double(summary.total_counts.size());
    std::cerr << "wrote " << out_file << " (" << n_traj << " trajectories";
    if (sc.detection.scheme == Scheme::counting) {
        std::cerr << ", mean total counts " << mean_counts;
    }
    std::cerr << ")\n";
    return exit_ok;
}

int run_replay(const std::string& record_file, const std::string& scenario_arg,
               const CommonOverrides& ov, const std::string& out_file, std::size_t stride) {
    Scenario sc = load_scenario(scenario_arg);
    apply_overrides(sc, ov);
    const TrajectoryRecord record = read_record_file(record_file);
    // The record pins the detection parameters; the scenario may swap the
    // field or system spec under the same noise realization.
    sc.detection.scheme = record.scheme;
    sc.detection.phase = record.phase;
    sc.detection.efficiency = record.efficiency;
    sc.dt = record.dt;
    const SimulationSetup setup = sc.setup();
    RunOptions opts;
    opts.replay = &record;
    opts.snapshot_stride = stride;
    const TrajectoryResult res = run_trajectory(setup, opts);
    write_series_csv_file(out_file, res, sc.observables, setup);
    std::cerr << "wrote " << out_file << "\n";
    return exit_ok;
}

int run_me(const std::string& scenario_arg, const CommonOverrides& ov,
           const std::string& out_file, std::size_t stride) {
    Scenario sc = load_scenario(scenario_arg);
    apply_overrides(sc, ov);
    const SimulationSetup setup = sc.setup();
    const TrajectoryResult res = run_unconditional(setup, stride);
    write_series_csv_file(out_file, res, sc.observables, setup);
    std::cerr << "wrote " << out_file << "\n";
    return exit_ok;
}

int run_validate(const std::string& scenario_arg, const CommonOverrides& ov,
                 std::vector<std::string> suites, std::size_t bins, std::size_t steps) {
    Scenario sc = load_scenario(scenario_arg);
    apply_overrides(sc, ov);
    if (suites.empty()) suites = {"invariants", "duality", "oracle", "statistics"};
    ValidationReport report;
    for (const auto& suite : suites) {
        if (suite == "invariants") validate_invariants(sc, report);
        else if (suite == "duality") validate_duality(sc, steps, report);
        else if (suite == "oracle") validate_oracle(sc, bins, report);
        else if (suite == "statistics") validate_statistics(sc, report);
        else throw ValidationError("unknown validation suite: " + suite);
    }
    report.print(std::cout);
    return report.all_pass() ? exit_ok : exit_numerical;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Quantum trajectories for systems driven by propagating Fock-state packets"};
    app.require_subcommand(1);

    CommonOverrides ov;
    std::string scenario_arg, record_file;
    std::string out_prefix = "trajectory", out_file = "series.csv";
    std::size_t stride = 10, n_traj = 100, bins = 8, steps = 100;
    unsigned workers = 1;
    std::optional<std::uint64_t> base_seed;
    std::vector<std::string> suites;
    std::string preset_dump;

    auto* sim = app.add_subcommand("simulate", "Run one conditional trajectory");
    sim->add_option("scenario", scenario_arg, "scenario file or preset name")->required();
    sim->add_option("--out", out_prefix, "output prefix (.csv and .record)");
    sim->add_option("--stride", stride, "snapshot stride");
    add_common(sim, ov);

    auto* ens = app.add_subcommand("ensemble", "Run an ensemble of trajectories");
    ens->add_option("scenario", scenario_arg)->required();
    ens->add_option("--n-traj", n_traj, "number of trajectories");
    ens->add_option("--workers", workers, "worker threads");
    ens->add_option("--base-seed", base_seed, "ensemble base seed");
    ens->add_option("--out", out_file, "summary CSV path");
    ens->add_option("--stride", stride, "snapshot stride");
    add_common(ens, ov);

    auto* rep = app.add_subcommand("replay", "Re-condition a stored record");
    rep->add_option("record", record_file, "record file")->required();
    rep->add_option("scenario", scenario_arg)->required();
    rep->add_option("--out", out_file, "output CSV path");
    rep->add_option("--stride", stride, "snapshot stride");
    add_common(rep, ov);

    auto* me = app.add_subcommand("me", "Integrate the unconditional master equation");
    me->add_option("scenario", scenario_arg)->required();
    me->add_option("--out", out_file, "output CSV path");
    me->add_option("--stride", stride, "snapshot stride");
    add_common(me, ov);

    auto* val = app.add_subcommand("validate", "Run cross-validation suites");
    val->add_option("scenario", scenario_arg)->required();
    val->add_option("--check", suites, "oracle|duality|invariants|statistics")->delimiter(',');
    val->add_option("--bins", bins, "oracle bin count");
    val->add_option("--steps", steps, "duality step count");
    add_common(val, ov);

    auto* pre = app.add_subcommand("presets", "List or dump built-in scenarios");
    pre->add_option("--dump", preset_dump, "print the named preset as JSON");

    CLI11_PARSE(app, argc, argv);

    try {
        if (sim->parsed()) return run_simulate(scenario_arg, ov, out_prefix, stride);
        if (ens->parsed()) {
            return run_ensemble_cmd(scenario_arg, ov, out_file, n_traj, workers, base_seed,
                                    stride);
        }
        if (rep->parsed()) return run_replay(record_file, scenario_arg, ov, out_file, stride);
        if (me->parsed()) return run_me(scenario_arg, ov, out_file, stride);
        if (val->parsed()) return run_validate(scenario_arg, ov, suites, bins, steps);
        if (pre->parsed()) {
            if (!preset_dump.empty()) {
                std::cout << focktraj::scenario_preset_json(preset_dump).dump(2) << "\n";
            } else {
                for (const auto& name : focktraj::scenario_preset_names()) {
                    std::cout << name << "\n";
                }
            }
            return focktraj::exit_ok;
        }
    } catch (const focktraj::InfeasibleRecordError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return focktraj::exit_infeasible_record;
    } catch (const focktraj::ValidationError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return focktraj::exit_validation;
    } catch (const focktraj::NumericalError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return focktraj::exit_numerical;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return focktraj::exit_validation;
    }
    return focktraj::exit_usage;
}
