// validate.hpp — Cross-validation suites: invariants, picture duality,
// joint-state oracle comparison, and measurement-noise statistics

#pragma once

#include <cmath>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "focktraj/ensemble.hpp"
#include "focktraj/heisenberg.hpp"
#include "focktraj/integrator.hpp"
#include "focktraj/observables.hpp"
#include "focktraj/oracle.hpp"
#include "focktraj/scenario.hpp"

namespace focktraj {

struct CheckResult {
    std::string name;
    bool pass = false;
    std::string detail;
};

struct ValidationReport {
    std::vector<CheckResult> checks;

    bool all_pass() const {
        for (const auto& c : checks) {
            if (!c.pass) return false;
        }
        return true;
    }

    void add(const std::string& name, bool pass, const std::string& detail) {
        checks.push_back({name, pass, detail});
    }

    void print(std::ostream& out) const {
        for (const auto& c : checks) {
            out << (c.pass ? "[PASS] " : "[FAIL] ") << c.name << ": " << c.detail << "\n";
        }
    }
};

// ------------------------------ Picture duality -----------------------------

struct DualityResult {
    double worst_defect = 0.0;          // |Tr[rho0 pi_{m,n}[X]] - Tr[X rho_{n,m}]|
    double worst_pairing_defect = 0.0;  // |pi_{m,n}[X]^dag - pi_{n,m}[X^dag]|
    double worst_probability_gap = 0.0; // forward vs adjoint-side Pr(J) / K_phi
};

// Runs the scenario forward in literal first-order mode, then propagates the
// adjoint filter along the same record with the shared per-step scalars and
// measures the duality defect for every block and every probe operator.
inline DualityResult run_duality_check(const SimulationSetup& setup, std::size_t n_steps,
                                       std::uint64_t seed,
                                       const std::vector<Matrix>& probes) {
    SimulationSetup s = setup;
    s.detection.stepper = StepperMode::euler;
    s.grid.t_end = s.grid.t_start + static_cast<double>(n_steps) * s.grid.dt;

    std::vector<StepTrace> trace;
    RunOptions opts;
    opts.seed = seed;
    opts.snapshot_stride = 1;
    opts.monitor_invariants = false;
    opts.step_trace = &trace;
    const TrajectoryResult forward = run_trajectory(s, opts);

    const SystemCache cache(s.system, s.baths);
    const TrajectoryEngine engine(s.system, s.baths, s.packet, s.field, s.detection, s.grid);
    const AdjointEngine adj(cache, s.grid.dt, s.detection.efficiency);
    const int n_max = s.field.max_photons;
    AdjointHierarchy a = init_adjoint(Matrix::Identity(s.system.dim, s.system.dim), n_max,
                                      s.grid.t_start);

    DualityResult result;
    for (std::size_t i = 0; i < n_steps; ++i) {
        const Complex xi = engine.xi_at_step(i);
        const StepTrace& t = trace[i];
        switch (s.detection.scheme) {
            case Scheme::counting:
                adj.step_counting(a, xi, t.value.a, t.norm);
                break;
            case Scheme::homodyne:
                adj.step_homodyne(a, xi, s.detection.phase, t.y0, t.k0, t.norm);
                break;
            case Scheme::heterodyne:
                adj.step_heterodyne(a, xi, t.y0, t.y1, t.k0, t.k1, t.norm);
                break;
        }
        const HierarchyState& h = forward.snapshots[i + 1];
        for (const Matrix& x : probes) {
            for (int m = 0; m <= n_max; ++m) {
                for (int n = 0; n <= n_max; ++n) {
                    const Complex lhs = (s.initial_state * a.apply(m, n, x)).trace();
                    const Complex rhs = (x * h.blocks.block(n, m)).trace();
                    result.worst_defect = std::max(result.worst_defect, std::abs(lhs - rhs));
                    result.worst_pairing_defect = std::max(
                        result.worst_pairing_defect,
                        (a.apply(m, n, x).adjoint() - a.apply(n, m, x.adjoint())).norm());
                }
            }
        }
        // Probabilities recomputed on the adjoint side, against the forward run.
        if (i + 1 < n_steps) {
            const Complex xi_next = engine.xi_at_step(i + 1);
            if (s.detection.scheme == Scheme::counting) {
                const double lhs =
                    adj.jump_probability_from_adjoint(a, s.initial_state, s.field, xi_next);
                const double rhs = trace[i + 1].jump_probability;
                result.worst_probability_gap =
                    std::max(result.worst_probability_gap, std::abs(lhs - rhs));
            } else if (s.detection.scheme == Scheme::homodyne) {
                const double lhs = adj.expected_current_from_adjoint(a, s.initial_state, s.field,
                                                                     xi_next, s.detection.phase);
                const double rhs = trace[i + 1].k0;
                result.worst_probability_gap =
                    std::max(result.worst_probability_gap, std::abs(lhs - rhs));
            }
        }
    }
    return result;
}

// ------------------------------ Oracle comparison ---------------------------

struct OracleComparison {
    double worst_trace_distance = 0.0;
    double worst_probability_gap = 0.0;
    double dropped_weight = 0.0;
    std::size_t records = 0;
};

// Samples per-bin records from the exact joint-state engine and replays each
// on the ladder integrator stepping at the bin width; reports the worst
// per-bin reduced-state trace distance and outcome-probability gap.
inline OracleComparison compare_oracle_with_ladder(const SystemOperators& sys,
                                                   const WavePacket& packet,
                                                   const FieldState& field, const Matrix& rho0,
                                                   double t_start, double t_end,
                                                   std::size_t bins, Scheme scheme, double phase,
                                                   std::size_t n_records,
                                                   std::uint64_t base_seed) {
    // Refinement studies may halve the bin width past the default cap.
    JointOracle oracle(sys, packet, field, rho0, t_start, t_end, bins,
                       std::max<std::size_t>(bins, 14));

    DetectionConfig det;
    det.scheme = scheme;
    det.phase = phase;
    det.efficiency = 1.0;
    det.stepper = StepperMode::kraus;
    det.noise = QuadratureNoise::binary;
    TimeGrid grid{t_start, t_end, oracle.bin_width()};

    OracleComparison cmp;
    cmp.dropped_weight = oracle.dropped_weight();
    cmp.records = n_records;
    const TrajectoryEngine engine(sys, {}, packet, field, det, grid, /*max_step_action=*/10.0);
    for (std::size_t k = 0; k < n_records; ++k) {
        const OracleResult ores = oracle.sample(scheme, phase, derive_stream_seed(base_seed, k));
        OutcomeSource source(ores.record);
        HierarchyState h = init_hierarchy(rho0, field.max_photons, t_start);
        for (std::size_t i = 0; i < bins; ++i) {
            const StepOutcome out = engine.step(h, i, source);
            cmp.worst_probability_gap = std::max(cmp.worst_probability_gap,
                                                 std::abs(out.probability - ores.probabilities[i]));
            cmp.worst_trace_distance = std::max(
                cmp.worst_trace_distance,
                trace_distance(reduced_state(h, field), ores.states[i]));
        }
    }
    return cmp;
}

// ------------------------------ Statistics ----------------------------------

struct InnovationStats {
    std::size_t samples = 0;
    double mean = 0.0;
    double variance = 0.0;
    double z_score = 0.0;          // mean / (stddev / sqrt(n))
    double variance_over_dt = 0.0;
    double cross_correlation_z = 0.0;  // heterodyne only
};

inline InnovationStats innovation_statistics(const SimulationSetup& setup, std::size_t min_samples,
                                             std::uint64_t seed) {
    InnovationStats stats;
    std::vector<double> a, b;
    std::uint64_t stream = seed;
    while (a.size() < min_samples) {
        RunOptions opts;
        opts.seed = derive_stream_seed(seed, stream++);
        opts.snapshot_stride = setup.grid.n_steps();
        opts.monitor_invariants = false;
        opts.collect_innovations = true;
        const TrajectoryResult res = run_trajectory(setup, opts);
        if (setup.detection.scheme == Scheme::heterodyne) {
            for (std::size_t i = 0; i + 1 < res.innovations.size(); i += 2) {
                a.push_back(res.innovations[i]);
                b.push_back(res.innovations[i + 1]);
            }
        } else {
            a.insert(a.end(), res.innovations.begin(), res.innovations.end());
        }
    }
    const double n = static_cast<double>(a.size());
    double sum = 0.0, sumsq = 0.0;
    for (double v : a) {
        sum += v;
        sumsq += v * v;
    }
    stats.samples = a.size();
    stats.mean = sum / n;
    stats.variance = (sumsq - n * stats.mean * stats.mean) / (n - 1.0);
    stats.z_score = stats.mean / std::sqrt(stats.variance / n);
    stats.variance_over_dt = stats.variance / setup.grid.dt;
    if (!b.empty()) {
        double mb = 0.0;
        for (double v : b) mb += v;
        mb /= n;
        double cov = 0.0, vb = 0.0;
        for (std::size_t i = 0; i < b.size(); ++i) {
            cov += (a[i] - stats.mean) * (b[i] - mb);
            vb += (b[i] - mb) * (b[i] - mb);
        }
        cov /= (n - 1.0);
        vb /= (n - 1.0);
        const double corr = cov / std::sqrt(stats.variance * vb);
        stats.cross_correlation_z = corr * std::sqrt(n);
    }
    return stats;
}

// ------------------------------ Suites ---------------------------------------

inline void validate_invariants(const Scenario& scenario, ValidationReport& report) {
    SimulationSetup setup = scenario.setup();
    RunOptions opts;
    opts.seed = scenario.seed;
    opts.snapshot_stride = 1;
    opts.monitor_invariants = true;
    const TrajectoryResult res = run_trajectory(setup, opts);
    const auto& inv = res.invariants;
    {
        std::ostringstream os;
        os << "max |trace - 1| = " << inv.max_trace_deviation;
        report.add("invariants/trace", inv.max_trace_deviation <= 1e-8, os.str());
    }
    {
        std::ostringstream os;
        os << "min eigenvalue = " << inv.min_reduced_eigenvalue;
        report.add("invariants/positivity", inv.min_reduced_eigenvalue >= -1e-8, os.str());
    }
    {
        std::ostringstream os;
        os << "max Hermiticity defect = " << inv.max_hermiticity_defect;
        report.add("invariants/hermiticity", inv.max_hermiticity_defect <= 1e-10, os.str());
    }
    if (setup.field.is_pure_fock()) {
        // Tracelessness of the off-diagonal blocks is a property of the
        // unconditional drift (the coupling terms are commutators there);
        // conditioning legitimately feeds trace into them.
        const TrajectoryResult me = run_unconditional(setup, 16);
        double worst = 0.0;
        for (const auto& h : me.snapshots) {
            h.blocks.for_each_stored([&](int m, int n, const Matrix& rho) {
                if (m != n) worst = std::max(worst, std::abs(rho.trace()));
            });
        }
        std::ostringstream os;
        os << "max off-diagonal block trace = " << worst;
        report.add("invariants/offdiagonal-traceless", worst <= 1e-8, os.str());
    }
}

inline void validate_duality(const Scenario& scenario, std::size_t n_steps,
                             ValidationReport& report) {
    std::vector<Matrix> probes = {Matrix::Identity(scenario.system.dim, scenario.system.dim)};
    if (scenario.system.dim == 2) {
        probes.push_back(pauli::sigma_x());
        probes.push_back(pauli::sigma_y());
        probes.push_back(pauli::sigma_z());
    }
    for (Scheme scheme : {Scheme::counting, Scheme::homodyne}) {
        Scenario sc = scenario;
        sc.detection.scheme = scheme;
        sc.detection.noise = QuadratureNoise::gaussian;
        const DualityResult r = run_duality_check(sc.setup(), n_steps, scenario.seed, probes);
        std::ostringstream os;
        os << "worst defect = " << r.worst_defect
           << ", pairing = " << r.worst_pairing_defect
           << ", probability gap = " << r.worst_probability_gap;
        report.add("duality/" + to_string(scheme),
                   r.worst_defect <= 1e-8 && r.worst_pairing_defect <= 1e-10 &&
                       r.worst_probability_gap <= 1e-8,
                   os.str());
    }
}

inline void validate_oracle(const Scenario& scenario, std::size_t bins, ValidationReport& report) {
    const SimulationSetup setup = scenario.setup();
    for (Scheme scheme : {Scheme::counting, Scheme::homodyne}) {
        const OracleComparison coarse = compare_oracle_with_ladder(
            setup.system, setup.packet, setup.field, setup.initial_state, setup.grid.t_start,
            setup.grid.t_end, bins, scheme, scenario.detection.phase, 24, scenario.seed);
        const OracleComparison fine = compare_oracle_with_ladder(
            setup.system, setup.packet, setup.field, setup.initial_state, setup.grid.t_start,
            setup.grid.t_end, 2 * bins, scheme, scenario.detection.phase, 24, scenario.seed);
        const double ratio = coarse.worst_trace_distance /
                             std::max(fine.worst_trace_distance, 1e-300);
        std::ostringstream os;
        os << "worst distance = " << coarse.worst_trace_distance << " (x2 bins: "
           << fine.worst_trace_distance << ", ratio " << ratio
           << "), probability gap = " << coarse.worst_probability_gap;
        report.add("oracle/" + to_string(scheme),
                   coarse.worst_trace_distance <= 0.02 && ratio >= 1.5 && ratio <= 3.0, os.str());
    }
}

inline void validate_statistics(const Scenario& scenario, ValidationReport& report) {
    Scenario sc = scenario;
    sc.detection.scheme = Scheme::homodyne;
    sc.detection.noise = QuadratureNoise::gaussian;
    const InnovationStats hom = innovation_statistics(sc.setup(), 10000, scenario.seed);
    {
        std::ostringstream os;
        os << "n = " << hom.samples << ", z = " << hom.z_score
           << ", variance/dt = " << hom.variance_over_dt;
        report.add("statistics/homodyne-innovations",
                   std::abs(hom.z_score) <= 3.0 && hom.variance_over_dt >= 0.95 &&
                       hom.variance_over_dt <= 1.05,
                   os.str());
    }
    sc.detection.scheme = Scheme::heterodyne;
    const InnovationStats het = innovation_statistics(sc.setup(), 10000, scenario.seed + 1);
    {
        std::ostringstream os;
        os << "n = " << het.samples << ", cross-correlation z = " << het.cross_correlation_z;
        report.add("statistics/heterodyne-cross-correlation",
                   std::abs(het.cross_correlation_z) <= 3.0, os.str());
    }
}

} // namespace focktraj
