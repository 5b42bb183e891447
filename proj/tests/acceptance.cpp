// Acceptance suite: one pass/fail line per criterion, nonzero exit on any
// failure. Every conditional run performed here feeds the step-invariant
// monitor (trace, Hermiticity, positivity), which is reported as its own
// criterion at the end together with the innovation statistics.
//
// Run with --regenerate-reference to rebuild the stored vacuum regression
// data from the independent raw-array stepper in test_common.hpp.

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "focktraj/ensemble.hpp"
#include "focktraj/integrator.hpp"
#include "focktraj/observables.hpp"
#include "focktraj/validate.hpp"
#include "test_common.hpp"

using namespace focktraj;

namespace {

#ifndef FOCKTRAJ_TEST_DATA_DIR
#define FOCKTRAJ_TEST_DATA_DIR "tests/data"
#endif

int failures = 0;

struct InvariantAggregate {
    double max_trace_deviation = 0.0;
    double min_reduced_eigenvalue = std::numeric_limits<double>::infinity();
    double max_hermiticity_defect = 0.0;
    std::size_t steps = 0;

    void merge(const InvariantReport& r) {
        max_trace_deviation = std::max(max_trace_deviation, r.max_trace_deviation);
        min_reduced_eigenvalue = std::min(min_reduced_eigenvalue, r.min_reduced_eigenvalue);
        max_hermiticity_defect = std::max(max_hermiticity_defect, r.max_hermiticity_defect);
        steps += r.steps_checked;
    }
} invariants;

std::vector<double> homodyne_innovations;

void report(int criterion, const std::string& what, bool pass, const std::string& detail) {
    std::cout << (pass ? "[PASS] " : "[FAIL] ") << "criterion " << criterion << ": " << what
              << " (" << detail << ")" << std::endl;
    if (!pass) ++failures;
}

SimulationSetup fock_counting_setup(int n_photons) {
    SimulationSetup s{two_level_atom(1.0, 0.0),
                      {},
                      make_gaussian_wavepacket(1.0, 0.0),
                      FieldState::fock(n_photons),
                      testutil::ket_g_proj(),
                      DetectionConfig{},
                      TimeGrid{-4.0, 12.0, 1e-3}};
    s.detection.scheme = Scheme::counting;
    return s;
}

// ---------------------------------------------------------------------------

void criterion_1_truncation_fractions() {
    const Complex alpha{std::sqrt(5.0), 0.0};
    const double f2 = coherent_captured_fraction(alpha, 2);
    const double f6 = coherent_captured_fraction(alpha, 6);
    const double f10 = coherent_captured_fraction(alpha, 10);
    const bool pass = std::abs(f2 - 0.04) <= 0.005 && std::abs(f6 - 0.62) <= 0.005 &&
                      std::abs(f10 - 0.97) <= 0.005;
    std::ostringstream os;
    os << "fractions " << f2 << ", " << f6 << ", " << f10 << " vs 0.04, 0.62, 0.97 +- 0.005";
    report(1, "coherent-state truncation captures the stated photon fractions", pass, os.str());
}

void criterion_2_exact_counts() {
    bool pass = true;
    std::ostringstream os;
    for (int n_photons : {1, 2}) {
        const SimulationSetup s = fock_counting_setup(n_photons);
        EnsembleOptions opts;
        opts.n_trajectories = 500;
        opts.base_seed = 2000 + n_photons;
        opts.workers = 8;
        opts.snapshot_stride = 16000;
        const EnsembleSummary summary = run_ensemble(s, {}, opts);
        invariants.merge(summary.invariants);
        std::size_t off = 0;
        for (double c : summary.total_counts) {
            if (c != static_cast<double>(n_photons)) ++off;
        }
        os << "N=" << n_photons << ": " << 500 - off << "/500 trajectories with exactly "
           << n_photons << " counts; ";
        pass = pass && off == 0;
    }
    report(2, "every perfect-detection trajectory records exactly N counts", pass, os.str());
}

void criterion_3_ensemble_convergence() {
    const SimulationSetup s = fock_counting_setup(1);
    std::vector<ObservableRequest> obs = {ObservableRequest::builtin("excited_population")};
    EnsembleOptions opts;
    opts.n_trajectories = 1000;
    opts.base_seed = 31;
    opts.workers = 8;
    opts.snapshot_stride = 20;
    const EnsembleSummary summary = run_ensemble(s, obs, opts);
    invariants.merge(summary.invariants);

    const TrajectoryResult me = run_unconditional(s, 20);
    double worst = 0.0;
    for (std::size_t i = 0; i < summary.times.size(); ++i) {
        const double pe = reduced_state(me.snapshots[i], s.field)(1, 1).real();
        worst = std::max(worst, std::abs(summary.mean[i][0] - pe));
    }

    double mean_counts = 0.0, var_counts = 0.0;
    for (double c : summary.total_counts) mean_counts += c;
    mean_counts /= 1000.0;
    for (double c : summary.total_counts) {
        var_counts += (c - mean_counts) * (c - mean_counts);
    }
    var_counts /= 999.0;
    const double se = std::sqrt(var_counts / 1000.0);
    const bool counts_ok = std::abs(mean_counts - 1.0) <= 3.0 * se + 1e-12;

    std::ostringstream os;
    os << "max_t |mean P_e - ME P_e| = " << worst << " (<= 0.05); mean counts = " << mean_counts
       << " +- " << se;
    report(3, "1000-trajectory counting ensemble converges to the master equation",
           worst <= 0.05 && counts_ok, os.str());
}

void criterion_4_oracle_equivalence() {
    const SystemOperators sys = two_level_atom(0.5, 0.0);
    const WavePacket packet = make_flat_wavepacket(0.0, 1.0);
    const FieldState field = FieldState::fock(1);
    const Matrix rho0 = testutil::ket_g_proj();
    bool pass = true;
    std::ostringstream os;
    for (Scheme scheme : {Scheme::counting, Scheme::homodyne}) {
        const OracleComparison coarse = compare_oracle_with_ladder(
            sys, packet, field, rho0, 0.0, 1.0, 8, scheme, 0.0, 24, 4001);
        const OracleComparison fine = compare_oracle_with_ladder(
            sys, packet, field, rho0, 0.0, 1.0, 16, scheme, 0.0, 24, 4002);
        const double ratio = coarse.worst_trace_distance /
                             std::max(fine.worst_trace_distance, 1e-300);
        os << to_string(scheme) << ": distance " << coarse.worst_trace_distance << " (ratio "
           << ratio << "); ";
        pass = pass && coarse.worst_trace_distance <= 0.02 && ratio >= 1.5 && ratio <= 3.0;
    }
    report(4, "8-bin joint-state oracle matches per-record within 0.02, order-1 refinement",
           pass, os.str());
}

void criterion_5_picture_duality() {
    RandomStream rng(55);
    const std::vector<Matrix> probes = {Matrix::Identity(2, 2), pauli::sigma_x(),
                                        pauli::sigma_y(), pauli::sigma_z()};
    double worst = 0.0;
    for (int draw = 0; draw < 10; ++draw) {
        const double gamma = 0.5 + rng.uniform();
        const double detuning = rng.uniform() - 0.5;
        const double phase = rng.uniform();
        for (Scheme scheme : {Scheme::counting, Scheme::homodyne}) {
            for (int n_photons : {1, 2}) {
                SimulationSetup s{two_level_atom(gamma, detuning),
                                  {},
                                  make_gaussian_wavepacket(1.0, 0.0),
                                  FieldState::fock(n_photons),
                                  testutil::random_density(rng, 2),
                                  DetectionConfig{},
                                  TimeGrid{-1.0, 1.0, 1e-3}};
                s.detection.scheme = scheme;
                s.detection.phase = phase;
                const DualityResult r = run_duality_check(s, 100, 500 + draw, probes);
                worst = std::max({worst, r.worst_defect, r.worst_probability_gap});
            }
        }
    }
    std::ostringstream os;
    os << "worst |Tr[rho0 pi_mn[X]] - Tr[X rho_nm]| = " << worst << " over 10 draws x 2 "
       << "schemes x N in {1,2}, X in {I, sx, sy, sz}";
    report(5, "Heisenberg filter duality holds at 1e-8 along shared records", worst <= 1e-8,
           os.str());
}

void criterion_7_purity() {
    // Truncated coherent input under homodyne stays pure.
    SimulationSetup coh{two_level_atom(1.0, 0.0),
                        {},
                        make_gaussian_wavepacket(1.0, 0.0),
                        FieldState::coherent(Complex{1.0, 0.0}, 8),
                        testutil::ket_g_proj(),
                        DetectionConfig{},
                        TimeGrid{-4.0, 12.0, 1e-3}};
    coh.detection.scheme = Scheme::homodyne;
    RunOptions opts;
    opts.seed = 71;
    opts.snapshot_stride = 10;
    opts.collect_innovations = true;
    const TrajectoryResult traj = run_trajectory(coh, opts);
    invariants.merge(traj.invariants);
    homodyne_innovations = traj.innovations;
    double min_purity = 1.0;
    for (const auto& h : traj.snapshots) {
        min_purity = std::min(min_purity, purity(h, coh.field));
    }

    // Fock input under counting: a purity dip with full recovery.
    const SimulationSetup fock = fock_counting_setup(1);
    RunOptions fopts;
    fopts.seed = 72;
    fopts.snapshot_stride = 10;
    const TrajectoryResult ftraj = run_trajectory(fock, fopts);
    invariants.merge(ftraj.invariants);
    double dip = 1.0;
    for (const auto& h : ftraj.snapshots) dip = std::min(dip, purity(h, fock.field));
    const double final_purity = purity(ftraj.snapshots.back(), fock.field);

    const bool pass = min_purity >= 1.0 - 1e-2 && dip < 0.99 && final_purity >= 0.999;
    std::ostringstream os;
    os << "coherent homodyne min purity = " << min_purity << " (>= 0.99); Fock counting dip = "
       << dip << " (< 0.99), final = " << final_purity << " (>= 0.999)";
    report(7, "coherent-state trajectory stays pure; Fock trajectory dips and recovers", pass,
           os.str());
}

void criterion_8_jump_up() {
    // Search replayed single-click records of the N = 2 scenario for a
    // detection that raises the excitation probability.
    const SimulationSetup s = fock_counting_setup(2);
    const TrajectoryEngine engine(s.system, s.baths, s.packet, s.field, s.detection, s.grid);
    bool found = false;
    double before = 0.0, after = 0.0, at_time = 0.0;
    for (std::size_t k = 200; k < 6000 && !found; k += 200) {
        TrajectoryRecord rec;
        rec.scheme = Scheme::counting;
        rec.dt = s.grid.dt;
        rec.t_start = s.grid.t_start;
        rec.entries.assign(k + 1, StepEntry{0.0, 0.0});
        rec.entries[k].a = 1.0;
        OutcomeSource src(rec);
        HierarchyState h = init_hierarchy(s.initial_state, 2, s.grid.t_start);
        try {
            for (std::size_t i = 0; i <= k; ++i) {
                if (i == k) before = reduced_state(h, s.field)(1, 1).real();
                engine.step(h, i, src);
            }
        } catch (const InfeasibleRecordError&) {
            continue;
        }
        after = reduced_state(h, s.field)(1, 1).real();
        if (after > before) {
            found = true;
            at_time = s.grid.time_at(k);
        }
    }
    std::ostringstream os;
    os << "detection at t = " << at_time << " raises P_e from " << before << " to " << after;
    report(8, "an N = 2 count exists that strictly raises the excitation",
           found && after > before, os.str());
}

// ---------------------------------------------------------------------------
// Vacuum regression: the ladder at N = 0 against the stored output of the
// independent raw-array stepper, under the stored record.

struct VacuumCase {
    const char* name;
    Scheme scheme;
    double gamma;
    double detuning;
    double phase;
    std::uint64_t seed;
};

const VacuumCase vacuum_cases[] = {
    {"vacuum_counting", Scheme::counting, 1.0, 0.3, 0.0, 5},
    {"vacuum_homodyne", Scheme::homodyne, 0.8, 0.2, 0.4, 17},
};

SimulationSetup vacuum_setup(const VacuumCase& vc) {
    SimulationSetup s{two_level_atom(vc.gamma, vc.detuning),
                      {},
                      make_gaussian_wavepacket(1.0, 0.0),
                      FieldState::fock(0),
                      Matrix::Zero(2, 2),
                      DetectionConfig{},
                      TimeGrid{-1.0, 3.0, 1e-3}};
    s.initial_state = Matrix(2, 2);
    s.initial_state << 0.6, Complex{0.3, 0.1}, Complex{0.3, -0.1}, 0.4;
    s.detection.scheme = vc.scheme;
    s.detection.phase = vc.phase;
    s.detection.stepper = StepperMode::euler;  // the reference is first-order
    return s;
}

void regenerate_reference() {
    for (const auto& vc : vacuum_cases) {
        const SimulationSetup s = vacuum_setup(vc);
        RunOptions opts;
        opts.seed = vc.seed;
        opts.snapshot_stride = 1;
        const TrajectoryResult res = run_trajectory(s, opts);
        write_record_file(std::string(FOCKTRAJ_TEST_DATA_DIR) + "/" + vc.name + ".record",
                          res.record);

        testutil::VacuumQubitReference ref(vc.gamma, vc.detuning);
        ref.set_state(s.initial_state(0, 0), s.initial_state(0, 1), s.initial_state(1, 0),
                      s.initial_state(1, 1));
        std::ofstream out(std::string(FOCKTRAJ_TEST_DATA_DIR) + "/" + vc.name + "_states.csv");
        out << "step,gg_re,gg_im,ge_re,ge_im,eg_re,eg_im,ee_re,ee_im\n";
        out.precision(17);
        for (std::size_t i = 0; i < res.record.entries.size(); ++i) {
            if (vc.scheme == Scheme::counting) {
                ref.step_counting(s.grid.dt, res.record.entries[i].a != 0.0);
            } else {
                ref.step_homodyne(s.grid.dt, vc.phase, res.record.entries[i].a);
            }
            out << i;
            for (const auto& row : ref.rho) {
                for (const auto& v : row) out << ',' << v.real() << ',' << v.imag();
            }
            out << '\n';
        }
        std::cout << "regenerated " << vc.name << " reference\n";
    }
}

void criterion_9_vacuum_regression() {
    bool pass = true;
    std::ostringstream os;
    for (const auto& vc : vacuum_cases) {
        const SimulationSetup s = vacuum_setup(vc);
        TrajectoryRecord stored;
        try {
            stored = read_record_file(std::string(FOCKTRAJ_TEST_DATA_DIR) + "/" + vc.name +
                                      ".record");
        } catch (const std::exception& e) {
            report(9, "vacuum regression against the stored reference", false, e.what());
            return;
        }

        // The pinned seed must still reproduce the stored record.
        RunOptions gen;
        gen.seed = vc.seed;
        gen.snapshot_stride = 1;
        const TrajectoryResult res = run_trajectory(s, gen);
        invariants.merge(res.invariants);
        bool record_ok = res.record.entries.size() == stored.entries.size();
        for (std::size_t i = 0; record_ok && i < stored.entries.size(); ++i) {
            record_ok = res.record.entries[i].a == stored.entries[i].a;
        }

        std::ifstream in(std::string(FOCKTRAJ_TEST_DATA_DIR) + "/" + vc.name + "_states.csv");
        std::string line;
        std::getline(in, line);  // header
        double worst = 0.0;
        for (std::size_t i = 0; i < res.record.entries.size(); ++i) {
            if (!std::getline(in, line)) {
                record_ok = false;
                break;
            }
            std::replace(line.begin(), line.end(), ',', ' ');
            std::istringstream row(line);
            std::size_t step;
            double v[8];
            row >> step;
            for (double& x : v) row >> x;
            const Matrix rho = reduced_state(res.snapshots[i + 1], s.field);
            worst = std::max({worst, std::abs(rho(0, 0) - Complex{v[0], v[1]}),
                              std::abs(rho(0, 1) - Complex{v[2], v[3]}),
                              std::abs(rho(1, 0) - Complex{v[4], v[5]}),
                              std::abs(rho(1, 1) - Complex{v[6], v[7]})});
        }
        os << vc.name << ": record " << (record_ok ? "bit-identical" : "MISMATCH")
           << ", worst per-step deviation = " << worst << "; ";
        pass = pass && record_ok && worst <= 1e-8;
    }
    report(9, "N = 0 runs reproduce the stored vacuum reference within 1e-8 per step", pass,
           os.str());
}

void criterion_6_invariants() {
    double sum = 0.0, sumsq = 0.0;
    for (double v : homodyne_innovations) {
        sum += v;
        sumsq += v * v;
    }
    const double n = static_cast<double>(homodyne_innovations.size());
    const double mean = sum / n;
    const double var = (sumsq - n * mean * mean) / (n - 1.0);
    const double z = mean / std::sqrt(var / n);
    const double var_over_dt = var / 1e-3;

    const bool pass = invariants.max_trace_deviation <= 1e-8 &&
                      invariants.max_hermiticity_defect <= 1e-10 &&
                      invariants.min_reduced_eigenvalue >= -1e-8 && n >= 10000 &&
                      std::abs(z) <= 3.0 && var_over_dt >= 0.95 && var_over_dt <= 1.05;
    std::ostringstream os;
    os << invariants.steps << " monitored steps: max |trace-1| = "
       << invariants.max_trace_deviation
       << ", min eigenvalue = " << invariants.min_reduced_eigenvalue
       << ", max Hermiticity defect = " << invariants.max_hermiticity_defect
       << "; innovations (n = " << n << "): z = " << z << ", variance/dt = " << var_over_dt;
    report(6, "per-step invariants and innovation statistics", pass, os.str());
}

} // namespace

int main(int argc, char** argv) {
    if (argc > 1 && std::strcmp(argv[1], "--regenerate-reference") == 0) {
        regenerate_reference();
        return 0;
    }
    try {
        criterion_1_truncation_fractions();
        criterion_2_exact_counts();
        criterion_3_ensemble_convergence();
        criterion_4_oracle_equivalence();
        criterion_5_picture_duality();
        criterion_7_purity();
        criterion_8_jump_up();
        criterion_9_vacuum_regression();
        criterion_6_invariants();
    } catch (const std::exception& e) {
        std::cout << "[FAIL] acceptance suite aborted: " << e.what() << std::endl;
        return 1;
    }
    std::cout << (failures == 0 ? "all criteria passed" : "criteria failed") << std::endl;
    return failures == 0 ? 0 : 1;
}
