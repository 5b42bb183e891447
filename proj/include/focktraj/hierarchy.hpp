// hierarchy.hpp — Ladder of density-matrix-like operators rho_{m,n}
//
// Only the upper triangle m <= n is stored; the lower triangle is
// reconstructed as the adjoint, which makes the Hermiticity pairing
// rho_{m,n} = rho_{n,m}^dagger structural. Any access with a negative index
// yields the zero matrix so the coupled equations never branch on the ladder
// boundary.

#pragma once

#include <utility>
#include <vector>

#include "focktraj/linalg.hpp"
#include "focktraj/system_model.hpp"

namespace focktraj {

class HierarchyBlocks {
  public:
    HierarchyBlocks() = default;

    HierarchyBlocks(int n_max, Eigen::Index dim)
        : n_max_(n_max), dim_(dim),
          data_(stored_count(n_max), Matrix::Zero(dim, dim)) {}

    int n_max() const { return n_max_; }
    Eigen::Index dim() const { return dim_; }
    std::size_t stored_count() const { return data_.size(); }

    static std::size_t stored_count(int n_max) {
        return static_cast<std::size_t>((n_max + 1) * (n_max + 2) / 2);
    }

    // Stored block, m <= n required.
    Matrix& stored(int m, int n) { return data_[tri_index(m, n)]; }
    const Matrix& stored(int m, int n) const { return data_[tri_index(m, n)]; }

    // Total accessor implementing the ladder conventions: negative indices
    // give zero, the lower triangle is the adjoint of the stored block.
    Matrix block(int m, int n) const {
        if (m < 0 || n < 0) return Matrix::Zero(dim_, dim_);
        if (m > n_max_ || n > n_max_) {
            throw ValidationError("HierarchyBlocks: index above the ladder top");
        }
        if (m <= n) return data_[tri_index(m, n)];
        return data_[tri_index(n, m)].adjoint();
    }

    HierarchyBlocks& operator+=(const HierarchyBlocks& other) {
        for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += other.data_[i];
        return *this;
    }

    HierarchyBlocks& operator*=(double s) {
        for (auto& b : data_) b *= s;
        return *this;
    }

    void add_scaled(const HierarchyBlocks& other, double s) {
        for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += s * other.data_[i];
    }

    void set_zero() {
        for (auto& b : data_) b.setZero();
    }

    template <typename Fn>
    void for_each_stored(Fn&& fn) const {
        for (int n = 0; n <= n_max_; ++n) {
            for (int m = 0; m <= n; ++m) fn(m, n, data_[tri_index(m, n)]);
        }
    }

  private:
    std::size_t tri_index(int m, int n) const {
        return static_cast<std::size_t>(n * (n + 1) / 2 + m);
    }

    int n_max_ = 0;
    Eigen::Index dim_ = 0;
    std::vector<Matrix> data_;
};

// Increment or time derivative of the ladder; same layout, same pairing.
using HierarchyDerivative = HierarchyBlocks;

struct HierarchyState {
    double time = 0.0;
    HierarchyBlocks blocks;

    int n_max() const { return blocks.n_max(); }
    Eigen::Index dim() const { return blocks.dim(); }
};

// Diagonal blocks start at the system state, off-diagonal blocks at zero.
inline HierarchyState init_hierarchy(const Matrix& rho0, int n_max, double t0 = 0.0) {
    if (n_max < 0) throw ParameterError("init_hierarchy: n_max must be >= 0");
    require_density_matrix(rho0, 1e-10, "init_hierarchy: initial state");
    HierarchyState h;
    h.time = t0;
    h.blocks = HierarchyBlocks(n_max, rho0.rows());
    for (int n = 0; n <= n_max; ++n) h.blocks.stored(n, n) = rho0;
    return h;
}

// Field-coefficient-weighted combination Sum_{m,n} c_{m,n} rho_{m,n}.
inline Matrix reduced_state(const HierarchyState& h, const FieldState& field) {
    if (field.max_photons > h.n_max()) {
        throw ValidationError("reduced_state: field needs more ladder levels than available");
    }
    if (field.is_pure_fock()) return h.blocks.block(field.max_photons, field.max_photons);
    Matrix rho = Matrix::Zero(h.dim(), h.dim());
    for (int n = 0; n <= field.max_photons; ++n) {
        rho += field.coeffs(n, n).real() * h.blocks.stored(n, n);
        for (int m = 0; m < n; ++m) {
            const Matrix term = field.coeffs(m, n) * h.blocks.stored(m, n);
            rho += term + term.adjoint();
        }
    }
    return rho;
}

// Trace of the reduced state without forming it.
inline double field_weighted_trace(const HierarchyBlocks& blocks, const FieldState& field) {
    double acc = 0.0;
    for (int n = 0; n <= field.max_photons; ++n) {
        acc += field.coeffs(n, n).real() * blocks.stored(n, n).trace().real();
        for (int m = 0; m < n; ++m) {
            acc += 2.0 * (field.coeffs(m, n) * blocks.stored(m, n).trace()).real();
        }
    }
    return acc;
}

} // namespace focktraj
