// Adjoint-picture filter: initialization, constancy, pairing, and the
// duality with the forward ladder along shared records.

#include <doctest.h>

#include <cmath>

#include "focktraj/heisenberg.hpp"
#include "focktraj/validate.hpp"
#include "test_common.hpp"

using namespace focktraj;

namespace {

SimulationSetup random_qubit_setup(RandomStream& rng, int n_photons, Scheme scheme) {
    const double gamma = 0.5 + rng.uniform();
    const double detuning = rng.uniform() - 0.5;
    SimulationSetup s{two_level_atom(gamma, detuning),
                      {},
                      make_gaussian_wavepacket(0.8 + 0.4 * rng.uniform(), 0.0),
                      FieldState::fock(n_photons),
                      testutil::random_density(rng, 2),
                      DetectionConfig{},
                      TimeGrid{-1.0, 1.0, 1e-3}};
    s.detection.scheme = scheme;
    s.detection.phase = scheme == Scheme::homodyne ? rng.uniform() : 0.0;
    return s;
}

} // namespace

TEST_CASE("initial adjoint blocks are delta_{m,n} X") {
    const AdjointHierarchy a = init_adjoint(pauli::sigma_z(), 1);
    CHECK((a.block(0, 0) - pauli::sigma_z()).norm() == 0.0);
    CHECK((a.block(1, 1) - pauli::sigma_z()).norm() == 0.0);
    CHECK(a.block(0, 1).norm() == 0.0);
    CHECK(a.block(-1, 0).norm() == 0.0);

    const AdjointHierarchy id = init_adjoint(Matrix::Identity(2, 2), 2);
    for (int m = 0; m <= 2; ++m) {
        CHECK((id.block(m, m) - Matrix::Identity(2, 2)).norm() == 0.0);
    }
}

TEST_CASE("duality holds exactly at the initial time") {
    RandomStream rng(41);
    const Matrix rho0 = testutil::random_density(rng, 2);
    const AdjointHierarchy a = init_adjoint(pauli::sigma_x(), 2);
    const HierarchyState h = init_hierarchy(rho0, 2);
    for (int m = 0; m <= 2; ++m) {
        for (int n = 0; n <= 2; ++n) {
            const Complex lhs = (rho0 * a.block(m, n)).trace();
            const Complex rhs = (pauli::sigma_x() * h.blocks.block(n, m)).trace();
            CHECK(std::abs(lhs - rhs) <= 1e-15);
        }
    }
}

TEST_CASE("uncoupled dark system keeps the filter constant") {
    const SystemCache dec(
        SystemOperators(Matrix::Identity(2, 2), Matrix::Zero(2, 2), Matrix::Zero(2, 2)));
    const AdjointEngine engine(dec, 1e-3, 1.0);
    AdjointHierarchy a = init_adjoint(pauli::sigma_z(), 1);
    for (int i = 0; i < 50; ++i) {
        engine.step_counting(a, Complex{0.0, 0.0}, 0.0, 1.0);
    }
    CHECK((a.block(0, 0) - pauli::sigma_z()).norm() <= 1e-12);
    CHECK((a.block(1, 1) - pauli::sigma_z()).norm() <= 1e-12);
    CHECK(a.block(0, 1).norm() <= 1e-12);
}

TEST_CASE("vacuum homodyne with zero innovations preserves the identity") {
    const SystemCache sys(two_level_atom(1.0, 0.0));
    const AdjointEngine engine(sys, 1e-3, 1.0);
    AdjointHierarchy a = init_adjoint(Matrix::Identity(2, 2), 0);
    for (int i = 0; i < 200; ++i) {
        engine.step_homodyne(a, Complex{0.0, 0.0}, 0.0, /*y=*/0.0, /*k=*/0.0, /*norm=*/1.0);
    }
    CHECK((a.block(0, 0) - Matrix::Identity(2, 2)).norm() <= 1e-10);
}

TEST_CASE("homodyne filter is unchanged by a 2 pi phase shift") {
    RandomStream rng(43);
    const SystemCache sys(two_level_atom(0.9, 0.1));
    const AdjointEngine engine(sys, 1e-3, 1.0);
    AdjointHierarchy a = init_adjoint(pauli::sigma_x(), 1);
    AdjointHierarchy b = a;
    for (int i = 0; i < 40; ++i) {
        const Complex xi{0.3 + 0.01 * i, 0.05};
        const double y = 0.03 * (rng.uniform() - 0.5);
        engine.step_homodyne(a, xi, 0.7, y, 0.2, 1.0);
        engine.step_homodyne(b, xi, 0.7 + 2.0 * M_PI, y, 0.2, 1.0);
    }
    for (int m = 0; m <= 1; ++m) {
        for (int n = 0; n <= 1; ++n) {
            CHECK((a.block(m, n) - b.block(m, n)).norm() <= 1e-10);
        }
    }
}

TEST_CASE("duality along counting and homodyne records at 1e-8") {
    RandomStream rng(2024);
    const std::vector<Matrix> probes = {Matrix::Identity(2, 2), pauli::sigma_x(),
                                        pauli::sigma_y(), pauli::sigma_z()};
    for (int draw = 0; draw < 3; ++draw) {
        for (Scheme scheme : {Scheme::counting, Scheme::homodyne}) {
            for (int n_photons : {1, 2}) {
                const SimulationSetup s = random_qubit_setup(rng, n_photons, scheme);
                const DualityResult r = run_duality_check(s, 100, 100 + draw, probes);
                CHECK(r.worst_defect <= 1e-8);
                CHECK(r.worst_pairing_defect <= 1e-10);
                CHECK(r.worst_probability_gap <= 1e-8);
            }
        }
    }
}

TEST_CASE("heterodyne duality via the composed conditioning terms") {
    RandomStream rng(77);
    const SimulationSetup s = random_qubit_setup(rng, 1, Scheme::heterodyne);
    const std::vector<Matrix> probes = {Matrix::Identity(2, 2), pauli::sigma_y()};
    const DualityResult r = run_duality_check(s, 100, 5, probes);
    CHECK(r.worst_defect <= 1e-8);
    CHECK(r.worst_pairing_defect <= 1e-10);
}

TEST_CASE("adjoint expectation: initial value and normalization duality") {
    RandomStream rng(51);
    const Matrix rho0 = testutil::random_density(rng, 2);
    const FieldState f = FieldState::coherent(Complex{0.9, 0.2}, 2);
    const AdjointHierarchy a = init_adjoint(pauli::sigma_z(), 2);
    const Complex e0 = adjoint_expectation(a, f, rho0);
    CHECK(std::abs(e0 - (rho0 * pauli::sigma_z()).trace()) <= 1e-14);

    // pi[I] keeps expectation one along a propagated record.
    SimulationSetup s = random_qubit_setup(rng, 2, Scheme::counting);
    s.field = f;
    s.initial_state = rho0;
    s.detection.stepper = StepperMode::euler;
    std::vector<StepTrace> trace;
    RunOptions opts;
    opts.seed = 8;
    opts.step_trace = &trace;
    opts.snapshot_stride = 100;
    run_trajectory(s, opts);

    const SystemCache cache(s.system, s.baths);
    const TrajectoryEngine engine(s.system, s.baths, s.packet, s.field, s.detection, s.grid);
    const AdjointEngine adj(cache, s.grid.dt, 1.0);
    AdjointHierarchy id = init_adjoint(Matrix::Identity(2, 2), 2);
    for (std::size_t i = 0; i < trace.size(); ++i) {
        adj.step_counting(id, engine.xi_at_step(i), trace[i].value.a, trace[i].norm);
        const Complex e = adjoint_expectation(id, f, rho0);
        CHECK(std::abs(e - Complex{1.0, 0.0}) <= 1e-8);
    }
}
