// system_model.hpp — Physical scenario: (S, L, H) triple, wave packet, field state
//
// Conventions fixed here once and used everywhere else:
//   * photon-number indices run from 0,
//   * the two-level basis ordering is (|g>, |e>) = (index 0, index 1),
//   * hbar = 1, operators are given in the frame the user chose for H.

#pragma once

#include <cmath>
#include <functional>
#include <utility>
#include <vector>

#include "focktraj/errors.hpp"
#include "focktraj/linalg.hpp"

namespace focktraj {

// ------------------------------ (S, L, H) -----------------------------------

struct SystemOperators {
    Eigen::Index dim = 0;
    Matrix scattering;   // S, unitary
    Matrix coupling;     // L, units sqrt(rate)
    Matrix hamiltonian;  // H_sys, units rate

    SystemOperators() = default;

    SystemOperators(Matrix s, Matrix l, Matrix h)
        : dim(s.rows()), scattering(std::move(s)), coupling(std::move(l)),
          hamiltonian(std::move(h)) {
        validate();
    }

    void validate() const {
        if (dim <= 0 || scattering.rows() != dim || scattering.cols() != dim ||
            coupling.rows() != dim || coupling.cols() != dim ||
            hamiltonian.rows() != dim || hamiltonian.cols() != dim) {
            throw ValidationError("SystemOperators: S, L, H must be square with equal dimension");
        }
        if (unitarity_defect(scattering) > 1e-12) {
            throw ValidationError("SystemOperators: scattering operator is not unitary");
        }
        if (hermiticity_defect(hamiltonian) > 1e-12) {
            throw ValidationError("SystemOperators: Hamiltonian is not Hermitian");
        }
    }
};

// Two-level emitter coupled to the line: S = I, L = sqrt(Gamma) |g><e|,
// H = -Delta0 sigma_z with sigma_z = |e><e| - |g><g|.
inline SystemOperators two_level_atom(double decay_rate, double detuning) {
    if (!(decay_rate > 0.0)) {
        throw ParameterError("two_level_atom: decay rate must be positive");
    }
    Matrix s = Matrix::Identity(2, 2);
    Matrix l = Matrix::Zero(2, 2);
    l(0, 1) = std::sqrt(decay_rate);
    Matrix sz = Matrix::Zero(2, 2);
    sz(0, 0) = -1.0;
    sz(1, 1) = 1.0;
    return SystemOperators(std::move(s), std::move(l), -detuning * sz);
}

// ------------------------------ Wave packet ---------------------------------

// Square-normalized temporal envelope xi(t) with compact numerical support.
// The envelope outside [t_lo, t_hi] is treated as zero. A cumulative-mass
// table built by composite Simpson quadrature backs residual_fraction().
class WavePacket {
  public:
    using Envelope = std::function<Complex(double)>;

    WavePacket(Envelope envelope, double t_lo, double t_hi)
        : envelope_(std::move(envelope)), t_lo_(t_lo), t_hi_(t_hi) {
        if (!(t_lo_ < t_hi_)) {
            throw ParameterError("WavePacket: support interval is empty");
        }
        build_mass_table();
        if (std::abs(total_mass_ - 1.0) > 1e-8) {
            throw ValidationError("WavePacket: |xi|^2 does not integrate to one over the support");
        }
    }

    Complex xi(double t) const {
        if (t < t_lo_ || t > t_hi_) return Complex{0.0, 0.0};
        return envelope_(t);
    }

    double support_lo() const { return t_lo_; }
    double support_hi() const { return t_hi_; }

    // Standard deviation of |xi(t)|^2, i.e. the packet duration.
    double duration() const { return duration_; }

    // Fraction of the packet still to arrive after time t: the integral of
    // |xi|^2 over [t, infinity), evaluated by quadrature.
    double residual_fraction(double t) const {
        if (t <= t_lo_) return 1.0;
        if (t >= t_hi_) return 0.0;
        const double h2 = 2.0 * h_;
        auto idx = static_cast<std::size_t>((t - t_lo_) / h2);
        if (idx >= cum_.size() - 1) idx = cum_.size() - 2;
        const double x0 = t_lo_ + static_cast<double>(idx) * h2;
        // Simpson over the partial cell [x0, t].
        const double hh = 0.5 * (t - x0);
        const double part =
            hh / 3.0 *
            (density(x0) + 4.0 * density(x0 + hh) + density(t));
        double w = 1.0 - (cum_[idx] + part);
        if (w < 0.0) w = 0.0;
        if (w > 1.0) w = 1.0;
        return w;
    }

  private:
    double density(double t) const { return std::norm(xi(t)); }

    void build_mass_table() {
        // Cumulative mass at every second node; Simpson per node pair.
        const std::size_t pairs = 1 << 14;
        h_ = (t_hi_ - t_lo_) / static_cast<double>(2 * pairs);
        cum_.assign(pairs + 1, 0.0);
        double mean_acc = 0.0, second_acc = 0.0;
        for (std::size_t i = 0; i < pairs; ++i) {
            const double x0 = t_lo_ + static_cast<double>(2 * i) * h_;
            const double f0 = density(x0);
            const double f1 = density(x0 + h_);
            const double f2 = density(x0 + 2.0 * h_);
            cum_[i + 1] = cum_[i] + h_ / 3.0 * (f0 + 4.0 * f1 + f2);
            mean_acc += h_ / 3.0 * (f0 * x0 + 4.0 * f1 * (x0 + h_) + f2 * (x0 + 2.0 * h_));
            second_acc += h_ / 3.0 *
                          (f0 * x0 * x0 + 4.0 * f1 * (x0 + h_) * (x0 + h_) +
                           f2 * (x0 + 2.0 * h_) * (x0 + 2.0 * h_));
        }
        total_mass_ = cum_.back();
        const double var = second_acc - mean_acc * mean_acc;
        duration_ = var > 0.0 ? std::sqrt(var) : 0.0;
    }

    Envelope envelope_;
    double t_lo_, t_hi_;
    double h_ = 0.0;
    double total_mass_ = 0.0;
    double duration_ = 0.0;
    std::vector<double> cum_;
};

namespace detail {

// Half-width (in units of the |xi|^2 standard deviation) at which the
// two-sided Gaussian tail mass drops below `tail`.
inline double gaussian_cut_sigmas(double tail) {
    double lo = 1.0, hi = 12.0;
    for (int i = 0; i < 200; ++i) {
        const double mid = 0.5 * (lo + hi);
        (std::erfc(mid / std::sqrt(2.0)) > tail ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

} // namespace detail

// Gaussian envelope with dimensionless spectral bandwidth `bandwidth_ratio`;
// the variance of |xi(t)|^2 is bandwidth_ratio^-2. The infinite tails are cut
// where their total mass is below 1e-12 and the amplitude is rescaled so the
// truncated envelope stays square-normalized.
inline WavePacket make_gaussian_wavepacket(double bandwidth_ratio, double center) {
    if (!(bandwidth_ratio > 0.0)) {
        throw ParameterError("make_gaussian_wavepacket: bandwidth ratio must be positive");
    }
    constexpr double tail_mass = 1e-12;
    const double sigma = 1.0 / bandwidth_ratio;          // std dev of |xi|^2
    const double cut = detail::gaussian_cut_sigmas(tail_mass) * sigma;
    const double amp = std::pow(bandwidth_ratio * bandwidth_ratio / (2.0 * M_PI), 0.25) /
                       std::sqrt(1.0 - tail_mass);
    const double decay = 0.25 * bandwidth_ratio * bandwidth_ratio;
    auto envelope = [amp, decay, center](double t) {
        const double dt = t - center;
        return Complex{amp * std::exp(-decay * dt * dt), 0.0};
    };
    return WavePacket(envelope, center - cut, center + cut);
}

// Rectangular envelope, exactly normalized on [t_lo, t_hi].
inline WavePacket make_flat_wavepacket(double t_lo, double t_hi) {
    if (!(t_lo < t_hi)) {
        throw ParameterError("make_flat_wavepacket: need t_lo < t_hi");
    }
    const double amp = 1.0 / std::sqrt(t_hi - t_lo);
    return WavePacket([amp](double) { return Complex{amp, 0.0}; }, t_lo, t_hi);
}

// ------------------------------ Field state ---------------------------------

// Density matrix c_{m,n} of the input field in the Fock basis of the packet's
// temporal mode, truncated at max_photons.
struct FieldState {
    int max_photons = 0;
    Matrix coeffs;  // (N+1) x (N+1), Hermitian, PSD, unit trace

    static FieldState fock(int n_photons) {
        if (n_photons < 0) throw ParameterError("FieldState::fock: photon number must be >= 0");
        FieldState f;
        f.max_photons = n_photons;
        f.coeffs = Matrix::Zero(n_photons + 1, n_photons + 1);
        f.coeffs(n_photons, n_photons) = 1.0;
        return f;
    }

    // Truncated and renormalized coherent state with peak amplitude alpha0.
    static FieldState coherent(Complex alpha0, int truncation) {
        if (truncation < 0) throw ParameterError("FieldState::coherent: truncation must be >= 0");
        Vector v(truncation + 1);
        v(0) = std::exp(-0.5 * std::norm(alpha0));
        for (int n = 1; n <= truncation; ++n) {
            v(n) = v(n - 1) * alpha0 / std::sqrt(static_cast<double>(n));
        }
        v /= v.norm();
        FieldState f;
        f.max_photons = truncation;
        f.coeffs = v * v.adjoint();
        return f;
    }

    static FieldState custom(Matrix c) {
        FieldState f;
        f.max_photons = static_cast<int>(c.rows()) - 1;
        f.coeffs = std::move(c);
        f.validate();
        return f;
    }

    void validate() const {
        if (coeffs.rows() != coeffs.cols() || coeffs.rows() != max_photons + 1) {
            throw ValidationError("FieldState: coefficient matrix has wrong shape");
        }
        require_density_matrix(coeffs, 1e-10, "FieldState coefficients");
    }

    bool is_pure_fock() const {
        for (int m = 0; m <= max_photons; ++m) {
            for (int n = 0; n <= max_photons; ++n) {
                const double want = (m == n && m == max_photons) ? 1.0 : 0.0;
                if (std::abs(coeffs(m, n) - Complex{want, 0.0}) > 0.0) return false;
            }
        }
        return true;
    }

    double mean_photons() const {
        double acc = 0.0;
        for (int n = 0; n <= max_photons; ++n) acc += n * coeffs(n, n).real();
        return acc;
    }
};

// Fraction of the photons of an untruncated coherent state that the Fock
// expansion up to `truncation` accounts for.
inline double coherent_captured_fraction(Complex alpha0, int truncation) {
    const double nbar = std::norm(alpha0);
    if (nbar == 0.0) return 1.0;
    double p = std::exp(-nbar);  // Poisson weight at n = 0
    double captured = 0.0;
    for (int n = 1; n <= truncation; ++n) {
        p *= nbar / static_cast<double>(n);
        captured += n * p;
    }
    return captured / nbar;
}

// ------------------------------ Thermal bath --------------------------------

// Unmonitored linear bath channel: coupling operator and mean occupation.
struct BathChannel {
    Matrix coupling;        // L-tilde
    double mean_occupation; // <n> >= 0, dimensionless

    BathChannel(Matrix l, double nbar) : coupling(std::move(l)), mean_occupation(nbar) {
        if (!(mean_occupation >= 0.0)) {
            throw ParameterError("BathChannel: mean occupation must be >= 0");
        }
        if (coupling.rows() != coupling.cols() || coupling.rows() == 0) {
            throw ValidationError("BathChannel: coupling operator must be square");
        }
    }
};

} // namespace focktraj
