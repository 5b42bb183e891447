// generators.hpp — Superoperators, probabilities, and currents of the coupled
// Fock-ladder equations of motion
//
// Everything here is a pure function of the current ladder. The conventions
// are those of hierarchy.hpp: block (m-1, n) with m = 0 is the zero matrix,
// and only the upper triangle is produced because every generator preserves
// the pairing d(rho_{m,n}) = d(rho_{n,m})^dagger.

#pragma once

#include <cmath>
#include <vector>

#include "focktraj/hierarchy.hpp"
#include "focktraj/linalg.hpp"
#include "focktraj/system_model.hpp"

namespace focktraj {

inline Matrix lindblad(const Matrix& l, const Matrix& rho) {
    const Matrix ldl = l.adjoint() * l;
    return l * rho * l.adjoint() - 0.5 * (ldl * rho + rho * ldl);
}

// Adjoint (Heisenberg-picture) dissipator acting on an observable.
inline Matrix lindblad_adjoint(const Matrix& l, const Matrix& x) {
    const Matrix ldl = l.adjoint() * l;
    return l.adjoint() * x * l - 0.5 * (ldl * x + x * ldl);
}

// Products of (S, L, H) and the bath operators reused in every step.
struct SystemCache {
    Matrix s, l, h;
    Matrix sd, ld;
    Matrix ldl;  // L^dag L
    Matrix lds;  // L^dag S
    Matrix sdl;  // S^dag L
    double lindblad_norm = 0.0;  // largest eigenvalue of L^dag L

    struct Bath {
        Matrix l, ld, ldl, lld;
        double nbar = 0.0;
    };
    std::vector<Bath> baths;

    // Non-Hermitian drift -iH - (1/2) L^dag L - (1/2) sum_b [(nbar+1) Lb^dag Lb
    // + nbar Lb Lb^dag]; the generator of the no-click evolution.
    Matrix drift;

    SystemCache() = default;

    SystemCache(const SystemOperators& sys, const std::vector<BathChannel>& bath_channels = {}) {
        sys.validate();
        s = sys.scattering;
        l = sys.coupling;
        h = sys.hamiltonian;
        sd = s.adjoint();
        ld = l.adjoint();
        ldl = ld * l;
        lds = ld * s;
        sdl = sd * l;
        Eigen::SelfAdjointEigenSolver<Matrix> es(ldl, Eigen::EigenvaluesOnly);
        lindblad_norm = es.eigenvalues().maxCoeff();
        drift = -ci * h - 0.5 * ldl;
        for (const auto& ch : bath_channels) {
            if (ch.coupling.rows() != s.rows()) {
                throw ValidationError("SystemCache: bath coupling dimension mismatch");
            }
            Bath b;
            b.l = ch.coupling;
            b.ld = ch.coupling.adjoint();
            b.ldl = b.ld * b.l;
            b.lld = b.l * b.ld;
            b.nbar = ch.mean_occupation;
            drift -= 0.5 * ((b.nbar + 1.0) * b.ldl + b.nbar * b.lld);
            baths.push_back(std::move(b));
        }
    }

    Eigen::Index dim() const { return s.rows(); }

    // Thermal decay and incoherent driving terms added to a block derivative.
    Matrix bath_dissipators(const Matrix& rho) const {
        Matrix out = Matrix::Zero(rho.rows(), rho.cols());
        for (const auto& b : baths) {
            out += (b.nbar + 1.0) * (b.l * rho * b.ld - 0.5 * (b.ldl * rho + rho * b.ldl));
            out += b.nbar * (b.ld * rho * b.l - 0.5 * (b.lld * rho + rho * b.lld));
        }
        return out;
    }
};

// Drift generator of the unconditional evolution, block by block, including
// the unmonitored bath channels.
inline HierarchyDerivative unconditional_generator(const HierarchyBlocks& blocks,
                                                   const SystemCache& sys, Complex xi) {
    HierarchyDerivative d(blocks.n_max(), blocks.dim());
    const double xi2 = std::norm(xi);
    for (int n = 0; n <= blocks.n_max(); ++n) {
        for (int m = 0; m <= n; ++m) {
            const Matrix& rho = blocks.stored(m, n);
            Matrix out = -ci * (sys.h * rho - rho * sys.h) + lindblad(sys.l, rho);
            if (m > 0) {
                const Matrix lower = blocks.block(m - 1, n);
                const Matrix sr = sys.s * lower;
                out += std::sqrt(double(m)) * xi * (sr * sys.ld - sys.ld * sr);
            }
            if (n > 0) {
                const Matrix lower = blocks.block(m, n - 1);
                const Matrix rs = lower * sys.sd;
                out += std::sqrt(double(n)) * std::conj(xi) * (sys.l * rs - rs * sys.l);
            }
            if (m > 0 && n > 0) {
                const Matrix lower = blocks.block(m - 1, n - 1);
                out += std::sqrt(double(m) * double(n)) * xi2 *
                       (sys.s * lower * sys.sd - lower);
            }
            if (!sys.baths.empty()) out += sys.bath_dissipators(rho);
            d.stored(m, n) = std::move(out);
        }
    }
    return d;
}

// Rate of photon arrivals at the detector: the field-weighted trace of the
// click operators. Equal to Pr(J)/dt for a perfect detector.
inline double photon_flux_rate(const HierarchyBlocks& blocks, const SystemCache& sys,
                               Complex xi, const FieldState& field) {
    Complex acc{0.0, 0.0};
    for (int m = 0; m <= field.max_photons; ++m) {
        for (int n = 0; n <= field.max_photons; ++n) {
            const Complex c = field.coeffs(m, n);
            if (c == Complex{0.0, 0.0}) continue;
            Complex tr = (sys.ldl * blocks.block(m, n)).trace();
            if (m > 0) {
                tr += std::sqrt(double(m)) * xi * (sys.lds * blocks.block(m - 1, n)).trace();
            }
            if (n > 0) {
                tr += std::sqrt(double(n)) * std::conj(xi) *
                      (sys.sdl * blocks.block(m, n - 1)).trace();
            }
            if (m > 0 && n > 0) {
                tr += std::sqrt(double(m) * double(n)) * std::norm(xi) *
                      blocks.block(m - 1, n - 1).trace();
            }
            acc += c * tr;
        }
    }
    if (std::abs(acc.imag()) > 1e-8 * std::max(1.0, std::abs(acc.real()))) {
        throw NumericalError("photon_flux_rate: imaginary residue exceeds tolerance");
    }
    return acc.real();
}

// Probability of a photon count in [t, t+dt). Values outside
// [-1e-12, 1+1e-12] indicate a misconfigured step size; roundoff inside that
// band is clamped.
inline double jump_probability(const HierarchyBlocks& blocks, const SystemCache& sys,
                               Complex xi, const FieldState& field, double dt) {
    if (!(dt > 0.0)) throw ParameterError("jump_probability: dt must be positive");
    const double p = dt * photon_flux_rate(blocks, sys, xi, field);
    if (p < -1e-12 || p > 1.0 + 1e-12) {
        throw StepSizeError("jump_probability: probability outside [0,1]; reduce dt");
    }
    return std::min(std::max(p, 0.0), 1.0);
}

// Unnormalized post-click blocks (the operator content; the caller supplies
// dt and the shared normalization).
inline HierarchyDerivative jump_update(const HierarchyBlocks& blocks, const SystemCache& sys,
                                       Complex xi) {
    HierarchyDerivative d(blocks.n_max(), blocks.dim());
    const double xi2 = std::norm(xi);
    for (int n = 0; n <= blocks.n_max(); ++n) {
        for (int m = 0; m <= n; ++m) {
            Matrix out = sys.l * blocks.stored(m, n) * sys.ld;
            if (m > 0) {
                out += std::sqrt(double(m)) * xi * (sys.s * blocks.block(m - 1, n) * sys.ld);
            }
            if (n > 0) {
                out += std::sqrt(double(n)) * std::conj(xi) *
                       (sys.l * blocks.block(m, n - 1) * sys.sd);
            }
            if (m > 0 && n > 0) {
                out += std::sqrt(double(m) * double(n)) * xi2 *
                       (sys.s * blocks.block(m - 1, n - 1) * sys.sd);
            }
            d.stored(m, n) = std::move(out);
        }
    }
    return d;
}

// Unnormalized no-click blocks after one step of width dt (bath channels are
// not included here; they belong to the deterministic drift the integrator
// adds).
inline HierarchyDerivative no_jump_update(const HierarchyBlocks& blocks, const SystemCache& sys,
                                          Complex xi, double dt) {
    if (!(dt > 0.0)) throw ParameterError("no_jump_update: dt must be positive");
    HierarchyDerivative d(blocks.n_max(), blocks.dim());
    const double xi2 = std::norm(xi);
    for (int n = 0; n <= blocks.n_max(); ++n) {
        for (int m = 0; m <= n; ++m) {
            const Matrix& rho = blocks.stored(m, n);
            Matrix incr = -ci * (sys.h * rho - rho * sys.h) -
                          0.5 * (sys.ldl * rho + rho * sys.ldl);
            if (m > 0) {
                incr -= std::sqrt(double(m)) * xi * (sys.lds * blocks.block(m - 1, n));
            }
            if (n > 0) {
                incr -= std::sqrt(double(n)) * std::conj(xi) *
                        (blocks.block(m, n - 1) * sys.sdl);
            }
            if (m > 0 && n > 0) {
                incr -= std::sqrt(double(m) * double(n)) * xi2 * blocks.block(m - 1, n - 1);
            }
            d.stored(m, n) = rho + dt * incr;
        }
    }
    return d;
}

// Expected quadrature current K_phi at local-oscillator phase phi.
inline double expected_current(const HierarchyBlocks& blocks, const SystemCache& sys,
                               Complex xi, double phi, const FieldState& field) {
    const Complex em = std::exp(-ci * phi);
    const Complex ep = std::conj(em);
    Complex acc{0.0, 0.0};
    for (int m = 0; m <= field.max_photons; ++m) {
        for (int n = 0; n <= field.max_photons; ++n) {
            const Complex c = field.coeffs(m, n);
            if (c == Complex{0.0, 0.0}) continue;
            const Matrix rho = blocks.block(m, n);
            Complex tr = em * (sys.l * rho).trace() + ep * (sys.ld * rho).trace();
            if (m > 0) {
                tr += em * std::sqrt(double(m)) * xi * (sys.s * blocks.block(m - 1, n)).trace();
            }
            if (n > 0) {
                tr += ep * std::sqrt(double(n)) * std::conj(xi) *
                      (sys.sd * blocks.block(m, n - 1)).trace();
            }
            acc += c * tr;
        }
    }
    if (std::abs(acc.imag()) > 1e-8) {
        throw NumericalError("expected_current: imaginary residue exceeds tolerance");
    }
    return acc.real();
}

// Wiseman-type conditioning map for homodyne detection at phase phi,
// including the -K_phi rho counterterm.
inline HierarchyDerivative homodyne_map(const HierarchyBlocks& blocks, const SystemCache& sys,
                                        Complex xi, double phi, double k_phi) {
    HierarchyDerivative d(blocks.n_max(), blocks.dim());
    const Complex em = std::exp(-ci * phi);
    const Complex ep = std::conj(em);
    for (int n = 0; n <= blocks.n_max(); ++n) {
        for (int m = 0; m <= n; ++m) {
            const Matrix& rho = blocks.stored(m, n);
            Matrix out = em * (sys.l * rho) + ep * (rho * sys.ld) - k_phi * rho;
            if (m > 0) {
                out += em * std::sqrt(double(m)) * xi * (sys.s * blocks.block(m - 1, n));
            }
            if (n > 0) {
                out += ep * std::sqrt(double(n)) * std::conj(xi) *
                       (blocks.block(m, n - 1) * sys.sd);
            }
            d.stored(m, n) = std::move(out);
        }
    }
    return d;
}

inline HierarchyDerivative homodyne_map(const HierarchyBlocks& blocks, const SystemCache& sys,
                                        Complex xi, double phi, const FieldState& field) {
    return homodyne_map(blocks, sys, xi, phi, expected_current(blocks, sys, xi, phi, field));
}

} // namespace focktraj
