// heisenberg.hpp — Adjoint-picture conditional filter pi_{m,n}[X]
//
// The adjoint equations for a tracked operator X couple to the filter applied
// to transformed arguments (L^dag X L, S^dag X L, ...), so a fixed family of
// d x d blocks does not close. Each block is therefore stored as the full
// d^2 x d^2 superoperator Pi_{m,n}: X -> pi_{m,n}[X] in column-stacking
// convention; pi_{m,n}[X] for the tracked X is a cheap materialized view.
//
// Steps consume the per-step scalars (outcome, currents, shared
// normalization) produced by the paired Schroedinger-picture run in literal
// first-order mode, which makes the duality
//     Tr[rho_0 pi_{m,n}[X]] = Tr[X rho_{n,m}]
// hold to roundoff rather than to O(dt). Probabilities can also be recomputed
// from the Pi blocks themselves to test those expressions independently.

#pragma once

#include <cmath>
#include <vector>

#include "focktraj/generators.hpp"
#include "focktraj/integrator.hpp"
#include "focktraj/linalg.hpp"

namespace focktraj {

struct AdjointHierarchy {
    double time = 0.0;
    int n_max = 0;
    Eigen::Index dim = 0;
    Matrix tracked;              // the operator X whose filter is of interest
    std::vector<Matrix> superops;  // (n_max+1)^2 blocks, each dim^2 x dim^2

    Matrix& superop(int m, int n) { return superops[idx(m, n)]; }
    const Matrix& superop(int m, int n) const { return superops[idx(m, n)]; }

    // pi_{m,n}[Y]; negative indices give the zero operator.
    Matrix apply(int m, int n, const Matrix& y) const {
        if (m < 0 || n < 0) return Matrix::Zero(dim, dim);
        return unvec(superops[idx(m, n)] * vec(y), dim);
    }

    // pi_{m,n}[X] for the tracked operator.
    Matrix block(int m, int n) const { return apply(m, n, tracked); }

  private:
    std::size_t idx(int m, int n) const {
        return static_cast<std::size_t>(m) * static_cast<std::size_t>(n_max + 1) +
               static_cast<std::size_t>(n);
    }
};

// pi_{m,n}[X](t0) = delta_{m,n} X for every X: diagonal identity superops.
inline AdjointHierarchy init_adjoint(const Matrix& x, int n_max, double t0 = 0.0) {
    if (n_max < 0) throw ParameterError("init_adjoint: n_max must be >= 0");
    if (x.rows() != x.cols() || x.rows() == 0) {
        throw ValidationError("init_adjoint: tracked operator must be square");
    }
    AdjointHierarchy a;
    a.time = t0;
    a.n_max = n_max;
    a.dim = x.rows();
    a.tracked = x;
    const Eigen::Index d2 = a.dim * a.dim;
    a.superops.assign(static_cast<std::size_t>((n_max + 1) * (n_max + 1)),
                      Matrix::Zero(d2, d2));
    for (int m = 0; m <= n_max; ++m) a.superop(m, m) = Matrix::Identity(d2, d2);
    return a;
}

// E[X | record] = Tr[rho_0 sum_{m,n} c*_{m,n} pi_{m,n}[X]].
inline Complex adjoint_expectation(const AdjointHierarchy& a, const FieldState& field,
                                   const Matrix& rho0) {
    if (field.max_photons > a.n_max) {
        throw ValidationError("adjoint_expectation: field needs more ladder levels than tracked");
    }
    Matrix pi = Matrix::Zero(a.dim, a.dim);
    for (int m = 0; m <= field.max_photons; ++m) {
        for (int n = 0; n <= field.max_photons; ++n) {
            const Complex c = std::conj(field.coeffs(m, n));
            if (c != Complex{0.0, 0.0}) pi += c * a.block(m, n);
        }
    }
    return (rho0 * pi).trace();
}

// Constant argument-transformation superoperators shared by all steps.
class AdjointEngine {
  public:
    AdjointEngine(const SystemCache& sys, double dt, double efficiency)
        : sys_(&sys), dt_(dt), eta_(efficiency), d2_(sys.dim() * sys.dim()) {
        const Matrix id_s = Matrix::Identity(sys.dim(), sys.dim());
        const Matrix id2 = Matrix::Identity(d2_, d2_);
        // X -> i [H, X]
        com_h_ = ci * (sandwich_superop(sys.h, id_s) - sandwich_superop(id_s, sys.h));
        // X -> (1/2) {L^dag L, X}
        anti_ldl_ = 0.5 * (sandwich_superop(sys.ldl, id_s) + sandwich_superop(id_s, sys.ldl));
        ld_dot_l_ = sandwich_superop(sys.ld, sys.l);      // L^dag X L
        ld_dot_s_ = sandwich_superop(sys.ld, sys.s);      // L^dag X S
        sd_dot_l_ = sandwich_superop(sys.sd, sys.l);      // S^dag X L
        sd_dot_s_ = sandwich_superop(sys.sd, sys.s);      // S^dag X S
        dot_lds_ = sandwich_superop(id_s, sys.lds);       // X L^dag S
        sdl_dot_ = sandwich_superop(sys.sdl, id_s);       // S^dag L X
        dot_l_ = sandwich_superop(id_s, sys.l);           // X L
        ld_dot_ = sandwich_superop(sys.ld, id_s);         // L^dag X
        dot_s_ = sandwich_superop(id_s, sys.s);           // X S
        sd_dot_ = sandwich_superop(sys.sd, id_s);         // S^dag X

        bath_adjoint_ = Matrix::Zero(d2_, d2_);
        for (const auto& b : sys.baths) {
            const Matrix up = sandwich_superop(b.ld, b.l) -
                              0.5 * (sandwich_superop(b.ldl, id_s) + sandwich_superop(id_s, b.ldl));
            const Matrix down = sandwich_superop(b.l, b.ld) -
                                0.5 * (sandwich_superop(b.lld, id_s) + sandwich_superop(id_s, b.lld));
            bath_adjoint_ += (b.nbar + 1.0) * up + b.nbar * down;
        }

        // Counting, no-click branch.
        pc_t0_ = id2 + dt_ * (com_h_ - anti_ldl_ + bath_adjoint_) +
                 (1.0 - eta_) * dt_ * ld_dot_l_;
        pc_tr_ = dt_ * (-dot_lds_ + (1.0 - eta_) * ld_dot_s_);
        pc_tl_ = dt_ * (-sdl_dot_ + (1.0 - eta_) * sd_dot_l_);
        pc_td_ = dt_ * (-id2 + (1.0 - eta_) * sd_dot_s_);

        // Diffusive drift (adjoint of the unconditional generator).
        k_t0_ = com_h_ + ld_dot_l_ - anti_ldl_ + bath_adjoint_;
        k_tr_ = ld_dot_s_ - dot_lds_;  // [L^dag, X] S
        k_tl_ = sd_dot_l_ - sdl_dot_;  // S^dag [X, L]
        k_td_ = sd_dot_s_ - id2;
    }

    // dN and the shared normalization come from the paired forward step.
    void step_counting(AdjointHierarchy& a, Complex xi, double dn, double norm) const {
        if (dn == 1.0) {
            compose(a, xi, ld_dot_l_, ld_dot_s_, sd_dot_l_, sd_dot_s_, norm);
        } else {
            compose(a, xi, pc_t0_, pc_tr_, pc_tl_, pc_td_, norm);
        }
        a.time += dt_;
    }

    // y is the conditioning weight the forward step applied (its innovation),
    // k_phi the expected current it used.
    void step_homodyne(AdjointHierarchy& a, Complex xi, double phi, double y, double k_phi,
                       double norm) const {
        const Matrix id2 = Matrix::Identity(d2_, d2_);
        const Complex em = std::exp(-ci * phi);
        const Complex ep = std::conj(em);
        const double g = std::sqrt(eta_) * y;
        const Matrix m0 = id2 + dt_ * k_t0_ + g * (em * dot_l_ + ep * ld_dot_ - k_phi * id2);
        const Matrix mr = dt_ * k_tr_ + g * em * dot_s_;
        const Matrix ml = dt_ * k_tl_ + g * ep * sd_dot_;
        const Matrix md = dt_ * k_td_;
        compose(a, xi, m0, mr, ml, md, norm);
        a.time += dt_;
    }

    // Two orthogonal quadratures with 1/sqrt(2) weights.
    void step_heterodyne(AdjointHierarchy& a, Complex xi, double y0, double y1, double k0,
                         double k1, double norm) const {
        const Matrix id2 = Matrix::Identity(d2_, d2_);
        const double w = std::sqrt(eta_) / std::sqrt(2.0);
        // phi = 0 and phi = pi/2 conditioning terms.
        Matrix m0 = id2 + dt_ * k_t0_;
        m0 += (w * y0) * (dot_l_ + ld_dot_ - k0 * id2);
        m0 += (w * y1) * (-ci * dot_l_ + ci * ld_dot_ - k1 * id2);
        Matrix mr = dt_ * k_tr_;
        mr += (w * y0) * dot_s_ + (w * y1) * (-ci * dot_s_);
        Matrix ml = dt_ * k_tl_;
        ml += (w * y0) * sd_dot_ + (w * y1) * (ci * sd_dot_);
        const Matrix md = dt_ * k_td_;
        compose(a, xi, m0, mr, ml, md, norm);
        a.time += dt_;
    }

    // Photon-count probability recomputed from the Pi blocks (the adjoint-
    // picture expression), for cross-checking against the forward engine.
    double jump_probability_from_adjoint(const AdjointHierarchy& a, const Matrix& rho0,
                                         const FieldState& field, Complex xi) const {
        Complex acc{0.0, 0.0};
        const Matrix id_s = Matrix::Identity(a.dim, a.dim);
        for (int m = 0; m <= field.max_photons; ++m) {
            for (int n = 0; n <= field.max_photons; ++n) {
                const Complex c = std::conj(field.coeffs(m, n));
                if (c == Complex{0.0, 0.0}) continue;
                Matrix term = a.apply(m, n, sys_->ldl);
                if (n > 0) {
                    term += std::sqrt(double(n)) * xi * a.apply(m, n - 1, sys_->lds);
                }
                if (m > 0) {
                    term += std::sqrt(double(m)) * std::conj(xi) * a.apply(m - 1, n, sys_->sdl);
                }
                if (m > 0 && n > 0) {
                    term += std::sqrt(double(m) * double(n)) * std::norm(xi) *
                            a.apply(m - 1, n - 1, id_s);
                }
                acc += c * (rho0 * term).trace();
            }
        }
        return dt_ * acc.real();
    }

    double expected_current_from_adjoint(const AdjointHierarchy& a, const Matrix& rho0,
                                         const FieldState& field, Complex xi, double phi) const {
        const Complex em = std::exp(-ci * phi);
        const Complex ep = std::conj(em);
        Complex acc{0.0, 0.0};
        for (int m = 0; m <= field.max_photons; ++m) {
            for (int n = 0; n <= field.max_photons; ++n) {
                const Complex c = std::conj(field.coeffs(m, n));
                if (c == Complex{0.0, 0.0}) continue;
                Matrix term = a.apply(m, n, em * sys_->l + ep * sys_->ld);
                if (n > 0) {
                    term += em * std::sqrt(double(n)) * xi * a.apply(m, n - 1, sys_->s);
                }
                if (m > 0) {
                    term += ep * std::sqrt(double(m)) * std::conj(xi) * a.apply(m - 1, n, sys_->sd);
                }
                acc += c * (rho0 * term).trace();
            }
        }
        return acc.real();
    }

  private:
    // Pi'_{m,n} = [Pi_{m,n} T0 + sqrt(n) xi Pi_{m,n-1} TR
    //              + sqrt(m) xi* Pi_{m-1,n} TL
    //              + sqrt(mn) |xi|^2 Pi_{m-1,n-1} TD] / norm
    void compose(AdjointHierarchy& a, Complex xi, const Matrix& t0, const Matrix& tr,
                 const Matrix& tl, const Matrix& td, double norm) const {
        const int nn = a.n_max;
        std::vector<Matrix> next(a.superops.size());
        for (int m = 0; m <= nn; ++m) {
            for (int n = 0; n <= nn; ++n) {
                Matrix acc = a.superop(m, n) * t0;
                if (n > 0) acc += std::sqrt(double(n)) * xi * (a.superop(m, n - 1) * tr);
                if (m > 0) acc += std::sqrt(double(m)) * std::conj(xi) * (a.superop(m - 1, n) * tl);
                if (m > 0 && n > 0) {
                    acc += std::sqrt(double(m) * double(n)) * std::norm(xi) *
                           (a.superop(m - 1, n - 1) * td);
                }
                next[static_cast<std::size_t>(m) * (nn + 1) + n] = acc / norm;
            }
        }
        a.superops = std::move(next);
    }

    const SystemCache* sys_;
    double dt_;
    double eta_;
    Eigen::Index d2_;
    Matrix com_h_, anti_ldl_, bath_adjoint_;
    Matrix ld_dot_l_, ld_dot_s_, sd_dot_l_, sd_dot_s_, dot_lds_, sdl_dot_;
    Matrix dot_l_, ld_dot_, dot_s_, sd_dot_;
    Matrix pc_t0_, pc_tr_, pc_tl_, pc_td_;
    Matrix k_t0_, k_tr_, k_tl_, k_td_;
};

} // namespace focktraj
