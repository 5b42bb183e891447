// Wave packets, field states, and the (S, L, H) factories.
//
// Quadrature oracles are computed here with composite Simpson rules that are
// independent of the WavePacket mass table; residual fractions of the
// Gaussian packet are checked against the complementary error function,
// w(t0 + u*sigma) = erfc(u/sqrt(2))/2 for the |xi|^2 density.

#include <doctest.h>

#include <cmath>

#include "focktraj/system_model.hpp"
#include "test_common.hpp"

using namespace focktraj;

TEST_CASE("gaussian wave packet is square-normalized and symmetric") {
    const WavePacket p = make_gaussian_wavepacket(1.0, 0.0);
    const double mass = testutil::simpson(
        [&](double t) { return std::norm(p.xi(t)); }, p.support_lo(), p.support_hi(), 8192);
    CHECK(std::abs(mass - 1.0) <= 1e-8);

    // Even about the center, maximal there.
    const double peak = std::abs(p.xi(0.0));
    for (double tau : {0.3, 1.1, 2.7, 5.0}) {
        CHECK(std::abs(p.xi(-tau) - p.xi(tau)) <= 1e-14);
        CHECK(std::abs(p.xi(tau)) <= peak);
    }
}

TEST_CASE("gaussian wave packet variance equals the inverse bandwidth squared") {
    for (double bw : {0.5, 1.0, 2.0}) {
        const WavePacket p = make_gaussian_wavepacket(bw, 0.7);
        const auto density = [&](double t) { return std::norm(p.xi(t)); };
        const double mean = testutil::simpson([&](double t) { return t * density(t); },
                                              p.support_lo(), p.support_hi(), 8192);
        const double second = testutil::simpson([&](double t) { return t * t * density(t); },
                                                p.support_lo(), p.support_hi(), 8192);
        const double var = second - mean * mean;
        CHECK(std::abs(var - 1.0 / (bw * bw)) <= 1e-6);
        CHECK(std::abs(p.duration() - 1.0 / bw) <= 1e-6);
    }
}

TEST_CASE("residual fraction: endpoints, center, and the erfc oracle") {
    const WavePacket p = make_gaussian_wavepacket(1.0, 0.0);
    CHECK(p.residual_fraction(p.support_lo() - 1.0) == 1.0);
    CHECK(p.residual_fraction(p.support_lo()) == 1.0);
    CHECK(p.residual_fraction(p.support_hi()) == 0.0);
    CHECK(std::abs(p.residual_fraction(0.0) - 0.5) <= 1e-8);
    CHECK(std::abs(p.residual_fraction(p.support_lo()) - p.residual_fraction(p.support_hi()) -
                   1.0) <= 1e-8);

    // One |xi|^2 standard deviation past the center.
    const double expected = 0.5 * std::erfc(1.0 / std::sqrt(2.0));
    CHECK(std::abs(p.residual_fraction(1.0) - expected) <= 1e-8);

    // Monotone non-increasing across the support.
    double prev = 1.0;
    for (int i = 0; i <= 200; ++i) {
        const double t = p.support_lo() + (p.support_hi() - p.support_lo()) * i / 200.0;
        const double w = p.residual_fraction(t);
        CHECK(w <= prev + 1e-12);
        prev = w;
    }
}

TEST_CASE("wave packet rejects bad parameters") {
    CHECK_THROWS_AS(make_gaussian_wavepacket(0.0, 0.0), ParameterError);
    CHECK_THROWS_AS(make_gaussian_wavepacket(-1.0, 0.0), ParameterError);
    CHECK_THROWS_AS(make_flat_wavepacket(1.0, 1.0), ParameterError);
    // Unnormalized envelope is rejected.
    CHECK_THROWS_AS(WavePacket([](double) { return Complex{1.0, 0.0}; }, 0.0, 2.0),
                    ValidationError);
}

TEST_CASE("coherent coefficients: vacuum limit, trace, and captured photons") {
    const FieldState vac = FieldState::coherent(Complex{0.0, 0.0}, 5);
    CHECK(std::abs(vac.coeffs(0, 0) - Complex{1.0, 0.0}) <= 1e-15);

    const FieldState one = FieldState::coherent(Complex{1.0, 0.0}, 8);
    CHECK(std::abs(one.coeffs.trace().real() - 1.0) <= 1e-12);

    // Photon capture fractions of the truncated expansions at |alpha|^2 = 5.
    const Complex alpha{std::sqrt(5.0), 0.0};
    CHECK(std::abs(coherent_captured_fraction(alpha, 2) - 0.04) <= 0.005);
    CHECK(std::abs(coherent_captured_fraction(alpha, 6) - 0.62) <= 0.005);
    CHECK(std::abs(coherent_captured_fraction(alpha, 10) - 0.97) <= 0.005);
}

TEST_CASE("field states are Hermitian, positive, unit trace") {
    RandomStream rng(42);
    for (int trial = 0; trial < 10; ++trial) {
        const FieldState f = FieldState::custom(testutil::random_density(rng, 4));
        CHECK(hermiticity_defect(f.coeffs) <= 1e-10);
        CHECK(min_eigenvalue(f.coeffs) >= -1e-10);
        CHECK(std::abs(f.coeffs.trace().real() - 1.0) <= 1e-10);
    }
    const FieldState fock = FieldState::fock(3);
    CHECK(fock.coeffs(3, 3) == Complex{1.0, 0.0});
    CHECK(fock.is_pure_fock());
    CHECK(fock.mean_photons() == 3.0);

    Matrix bad = Matrix::Zero(3, 3);
    bad(0, 0) = 2.0;
    CHECK_THROWS_AS(FieldState::custom(bad), ValidationError);
}

TEST_CASE("two-level atom operators") {
    const SystemOperators sys = two_level_atom(1.0, 0.0);
    CHECK(sys.scattering.isApprox(Matrix::Identity(2, 2)));
    CHECK(sys.hamiltonian.norm() == 0.0);
    CHECK(std::abs(sys.coupling(0, 1) - Complex{1.0, 0.0}) <= 1e-15);
    CHECK(std::abs(sys.coupling(1, 0)) == 0.0);
    CHECK(std::abs(sys.coupling(0, 0)) == 0.0);

    const SystemOperators strong = two_level_atom(4.0, 0.0);
    const Matrix ldl = strong.coupling.adjoint() * strong.coupling;
    CHECK((ldl - 4.0 * testutil::ket_e_proj()).norm() <= 1e-12);

    CHECK_THROWS_AS(two_level_atom(0.0, 0.0), ParameterError);
    CHECK_THROWS_AS(two_level_atom(-2.0, 1.0), ParameterError);
}

TEST_CASE("system operator invariants are enforced") {
    Matrix not_unitary = 2.0 * Matrix::Identity(2, 2);
    CHECK_THROWS_AS(SystemOperators(not_unitary, testutil::sigma_minus(), Matrix::Zero(2, 2)),
                    ValidationError);
    Matrix not_hermitian = Matrix::Zero(2, 2);
    not_hermitian(0, 1) = 1.0;
    CHECK_THROWS_AS(
        SystemOperators(Matrix::Identity(2, 2), testutil::sigma_minus(), not_hermitian),
        ValidationError);
}

TEST_CASE("bath channel validation") {
    CHECK_THROWS_AS(BathChannel(testutil::sigma_minus(), -0.1), ParameterError);
    const BathChannel b(testutil::sigma_minus(), 0.5);
    CHECK(b.mean_occupation == 0.5);
}
