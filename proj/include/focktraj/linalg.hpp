// linalg.hpp — Dense complex-matrix helpers used throughout the library

#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <complex>
#include <string>

#include "focktraj/errors.hpp"

namespace focktraj {

using Complex = std::complex<double>;
using Matrix = Eigen::MatrixXcd;
using Vector = Eigen::VectorXcd;

inline constexpr Complex ci{0.0, 1.0};

inline Matrix dagger(const Matrix& a) { return a.adjoint(); }

inline Matrix commutator(const Matrix& a, const Matrix& b) { return a * b - b * a; }

inline Matrix anticommutator(const Matrix& a, const Matrix& b) { return a * b + b * a; }

inline double hermiticity_defect(const Matrix& a) {
    return (a - a.adjoint()).norm();
}

inline double unitarity_defect(const Matrix& a) {
    return (a.adjoint() * a - Matrix::Identity(a.rows(), a.cols())).norm();
}

inline bool is_hermitian(const Matrix& a, double tol = 1e-10) {
    return hermiticity_defect(a) <= tol;
}

// Smallest eigenvalue of a (nearly) Hermitian matrix. Closed form for 2x2,
// solver otherwise; the matrix is symmetrized first so tiny anti-Hermitian
// roundoff does not feed the solver.
inline double min_eigenvalue(const Matrix& a) {
    if (a.rows() == 2) {
        const double m00 = a(0, 0).real();
        const double m11 = a(1, 1).real();
        const Complex off = 0.5 * (a(0, 1) + std::conj(a(1, 0)));
        const double h = 0.5 * (m00 - m11);
        return 0.5 * (m00 + m11) - std::sqrt(h * h + std::norm(off));
    }
    Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (a + a.adjoint()),
                                             Eigen::EigenvaluesOnly);
    return es.eigenvalues().minCoeff();
}

// Trace distance (1/2)||a - b||_1 between two Hermitian matrices.
inline double trace_distance(const Matrix& a, const Matrix& b) {
    Matrix d = a - b;
    d = 0.5 * (d + d.adjoint());
    Eigen::SelfAdjointEigenSolver<Matrix> es(d, Eigen::EigenvaluesOnly);
    return 0.5 * es.eigenvalues().cwiseAbs().sum();
}

// Validates that rho is a density matrix within the given tolerances.
inline void require_density_matrix(const Matrix& rho, double tol,
                                   const std::string& what) {
    if (rho.rows() != rho.cols() || rho.rows() == 0) {
        throw ValidationError(what + ": operator must be square and non-empty");
    }
    if (hermiticity_defect(rho) > tol) {
        throw ValidationError(what + ": operator is not Hermitian");
    }
    if (std::abs(rho.trace().real() - 1.0) > tol || std::abs(rho.trace().imag()) > tol) {
        throw ValidationError(what + ": trace differs from one");
    }
    if (min_eigenvalue(rho) < -tol) {
        throw ValidationError(what + ": operator has a negative eigenvalue");
    }
}

// Column-stacking vec / unvec and the superoperator matrix of X -> A X B.
// vec(A X B) = (B^T (x) A) vec(X).
inline Vector vec(const Matrix& x) {
    return Eigen::Map<const Vector>(x.data(), x.size());
}

inline Matrix unvec(const Vector& v, Eigen::Index d) {
    return Eigen::Map<const Matrix>(v.data(), d, d);
}

inline Matrix kron(const Matrix& a, const Matrix& b) {
    Matrix out(a.rows() * b.rows(), a.cols() * b.cols());
    for (Eigen::Index i = 0; i < a.rows(); ++i) {
        for (Eigen::Index j = 0; j < a.cols(); ++j) {
            out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
        }
    }
    return out;
}

// Superoperator matrix of the sandwich map X -> A X B.
inline Matrix sandwich_superop(const Matrix& a, const Matrix& b) {
    return kron(b.transpose(), a);
}

} // namespace focktraj
