// observables.hpp — Conditional expectation values extracted from snapshots
//
// Observables are evaluated post hoc from stored ladder snapshots; nothing
// here feeds back into the stepping. Bloch components use the fixed basis
// ordering (|g>, |e>) and are defined for dimension 2 only.

#pragma once

#include <cmath>
#include <string>

#include "focktraj/generators.hpp"
#include "focktraj/hierarchy.hpp"
#include "focktraj/linalg.hpp"

namespace focktraj {

inline double expectation(const HierarchyState& h, const FieldState& field, const Matrix& x) {
    if (x.rows() != h.dim() || x.cols() != h.dim()) {
        throw ValidationError("expectation: operator dimension mismatch");
    }
    if (hermiticity_defect(x) > 1e-10) {
        throw ValidationError("expectation: operator is not Hermitian");
    }
    const Complex tr = (reduced_state(h, field) * x).trace();
    if (std::abs(tr.imag()) > 1e-8) {
        throw NumericalError("expectation: imaginary residue exceeds tolerance");
    }
    return tr.real();
}

inline double purity(const HierarchyState& h, const FieldState& field) {
    const Matrix rho = reduced_state(h, field);
    return (rho * rho).trace().real();
}

// Expected photon-arrival rate at the detector for the current snapshot;
// meaningful after any detection scheme.
inline double conditional_photon_flux(const HierarchyState& h, const SystemCache& sys,
                                      Complex xi, const FieldState& field) {
    return photon_flux_rate(h.blocks, sys, xi, field);
}

inline double conditional_quadrature(const HierarchyState& h, const SystemCache& sys,
                                     Complex xi, const FieldState& field, double phi) {
    return expected_current(h.blocks, sys, xi, phi, field);
}

namespace pauli {

inline Matrix sigma_x() {
    Matrix m = Matrix::Zero(2, 2);
    m(0, 1) = 1.0;
    m(1, 0) = 1.0;
    return m;
}

inline Matrix sigma_y() {
    Matrix m = Matrix::Zero(2, 2);
    m(0, 1) = ci;
    m(1, 0) = -ci;
    return m;
}

// sigma_z = |e><e| - |g><g| with ordering (|g>, |e>).
inline Matrix sigma_z() {
    Matrix m = Matrix::Zero(2, 2);
    m(0, 0) = -1.0;
    m(1, 1) = 1.0;
    return m;
}

} // namespace pauli

struct ObservableRequest {
    enum class Kind {
        matrix,
        bloch_x,
        bloch_y,
        bloch_z,
        excited_population,
        purity,
        photon_flux,
        quadrature_current,
        cumulative_counts,
    };

    Kind kind = Kind::purity;
    std::string name;
    Matrix matrix;      // kind == matrix only
    double phase = 0.0; // kind == quadrature_current only

    static ObservableRequest builtin(const std::string& spec) {
        ObservableRequest r;
        r.name = spec;
        if (spec == "bloch_x") r.kind = Kind::bloch_x;
        else if (spec == "bloch_y") r.kind = Kind::bloch_y;
        else if (spec == "bloch_z") r.kind = Kind::bloch_z;
        else if (spec == "excited_population") r.kind = Kind::excited_population;
        else if (spec == "purity") r.kind = Kind::purity;
        else if (spec == "photon_flux") r.kind = Kind::photon_flux;
        else if (spec == "cumulative_counts") r.kind = Kind::cumulative_counts;
        else if (spec.rfind("quadrature_current(", 0) == 0 && spec.back() == ')') {
            r.kind = Kind::quadrature_current;
            r.phase = std::stod(spec.substr(19, spec.size() - 20));
        } else {
            throw ValidationError("unknown observable: " + spec);
        }
        return r;
    }

    static ObservableRequest custom(std::string name, Matrix x) {
        if (hermiticity_defect(x) > 1e-10) {
            throw ValidationError("observable '" + name + "' must be Hermitian");
        }
        ObservableRequest r;
        r.kind = Kind::matrix;
        r.name = std::move(name);
        r.matrix = std::move(x);
        return r;
    }
};

inline double evaluate_observable(const ObservableRequest& req, const HierarchyState& h,
                                  const FieldState& field, const SystemCache& sys, Complex xi,
                                  double cumulative_counts) {
    const auto need_qubit = [&] {
        if (h.dim() != 2) {
            throw ValidationError("observable '" + req.name + "' is defined for dimension 2 only");
        }
    };
    switch (req.kind) {
        case ObservableRequest::Kind::matrix:
            return expectation(h, field, req.matrix);
        case ObservableRequest::Kind::bloch_x:
            need_qubit();
            return expectation(h, field, pauli::sigma_x());
        case ObservableRequest::Kind::bloch_y:
            need_qubit();
            return expectation(h, field, pauli::sigma_y());
        case ObservableRequest::Kind::bloch_z:
            need_qubit();
            return expectation(h, field, pauli::sigma_z());
        case ObservableRequest::Kind::excited_population:
            need_qubit();
            return reduced_state(h, field)(1, 1).real();
        case ObservableRequest::Kind::purity:
            return purity(h, field);
        case ObservableRequest::Kind::photon_flux:
            return conditional_photon_flux(h, sys, xi, field);
        case ObservableRequest::Kind::quadrature_current:
            return conditional_quadrature(h, sys, xi, field, req.phase);
        case ObservableRequest::Kind::cumulative_counts:
            return cumulative_counts;
    }
    throw ValidationError("unknown observable kind");
}

} // namespace focktraj
