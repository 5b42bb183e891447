// oracle.hpp — Brute-force time-bin verification engine
//
// The field is discretized into B two-level bins (0 or 1 photon). The input
// Fock state is built by applying the binned creation operator N times with
// double occupations dropped (and the dropped weight tracked), the
// system-bin coupling is the first-order step operator restored to exact
// unitarity by polar decomposition, and each bin is measured destructively
// right after it interacts. The result is an independent conditional reduced
// state to hold the ladder equations against.
//
// A pure-state vector on system (x) bins is used when the detector is
// perfect; imperfect detection inserts a beamsplitter loss channel per bin,
// which mixes the state, so that path works on the joint density matrix and
// is intended for small B.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "focktraj/integrator.hpp"
#include "focktraj/linalg.hpp"
#include "focktraj/rng.hpp"
#include "focktraj/system_model.hpp"

namespace focktraj {

// ------------------------------ Binned field --------------------------------

struct BinnedField {
    std::size_t bin_count = 0;
    double bin_width = 0.0;
    double t_start = 0.0;
    std::vector<Complex> amplitudes;  // xi(t_i) sqrt(dt), renormalized
    double raw_mass = 0.0;            // sum |xi(t_i)|^2 dt before renormalization

    double time_at(std::size_t i) const { return t_start + static_cast<double>(i) * bin_width; }
};

// Left-endpoint samples over [t_start, t_end), renormalized to unit mass.
inline BinnedField make_binned_field(const WavePacket& packet, double t_start, double t_end,
                                     std::size_t bins) {
    if (bins == 0) throw ParameterError("make_binned_field: need at least one bin");
    if (!(t_start < t_end)) throw ParameterError("make_binned_field: empty window");
    BinnedField f;
    f.bin_count = bins;
    f.bin_width = (t_end - t_start) / static_cast<double>(bins);
    f.t_start = t_start;
    f.amplitudes.resize(bins);
    double mass = 0.0;
    for (std::size_t i = 0; i < bins; ++i) {
        f.amplitudes[i] = packet.xi(f.time_at(i)) * std::sqrt(f.bin_width);
        mass += std::norm(f.amplitudes[i]);
    }
    f.raw_mass = mass;
    if (!(mass > 0.0)) throw ValidationError("make_binned_field: window misses the packet");
    const double scale = 1.0 / std::sqrt(mass);
    for (auto& a : f.amplitudes) a *= scale;
    return f;
}

// ------------------------------ Binned Fock state ---------------------------

struct BinnedFock {
    Vector amplitudes;     // 2^B occupancy amplitudes, bin i at bit i
    double dropped_weight; // norm lost to >1 occupation per bin
};

// (sum_i alpha_i b_i^dag)^N / sqrt(N!) applied to vacuum with double
// occupations dropped, then renormalized.
inline BinnedFock build_binned_fock(const BinnedField& field, int n_photons,
                                    double dropped_tolerance = 1e-3) {
    const std::size_t bins = field.bin_count;
    if (n_photons < 0) throw ParameterError("build_binned_fock: photon number must be >= 0");
    if (static_cast<std::size_t>(n_photons) > bins) {
        throw ValidationError("build_binned_fock: more photons than bins");
    }
    if (bins > 24) throw ValidationError("build_binned_fock: bin register too large");
    const std::size_t dim = std::size_t{1} << bins;
    Vector v = Vector::Zero(dim);
    v(0) = 1.0;
    for (int k = 0; k < n_photons; ++k) {
        Vector next = Vector::Zero(dim);
        for (std::size_t mask = 0; mask < dim; ++mask) {
            if (v(mask) == Complex{0.0, 0.0}) continue;
            for (std::size_t i = 0; i < bins; ++i) {
                const std::size_t bit = std::size_t{1} << i;
                if (mask & bit) continue;  // drop double occupation
                next(mask | bit) += field.amplitudes[i] * v(mask);
            }
        }
        v = next / std::sqrt(static_cast<double>(k + 1));
    }
    BinnedFock out;
    out.dropped_weight = 1.0 - v.squaredNorm();
    if (n_photons >= 2 && out.dropped_weight > dropped_tolerance) {
        throw ResolutionError("build_binned_fock: dropped weight " +
                              std::to_string(out.dropped_weight) +
                              " exceeds tolerance; increase the bin count");
    }
    out.amplitudes = v / v.norm();
    return out;
}

// ------------------------------ Bin unitary ---------------------------------

// First-order step operator on system (x) one bin, restored to exact
// unitarity by polar decomposition (index = bin_occupation * d + system).
inline Matrix bin_unitary(const SystemCache& sys, double bin_width) {
    const Eigen::Index d = sys.dim();
    if (bin_width * sys.lindblad_norm > 0.5) {
        throw ResolutionError("bin_unitary: bin width too coarse for the coupling strength");
    }
    const double root = std::sqrt(bin_width);
    Matrix u = Matrix::Zero(2 * d, 2 * d);
    const Matrix drift = Matrix::Identity(d, d) - bin_width * (ci * sys.h + 0.5 * sys.ldl);
    u.block(0, 0, d, d) = drift;
    u.block(0, d, d, d) = -root * sys.lds;
    u.block(d, 0, d, d) = root * sys.l;
    u.block(d, d, d, d) = sys.s - bin_width * (ci * sys.h + 0.5 * sys.ldl);
    Eigen::JacobiSVD<Matrix> svd(u, Eigen::ComputeFullU | Eigen::ComputeFullV);
    if (svd.singularValues().minCoeff() < 0.5) {
        throw ResolutionError("bin_unitary: polar factor nearly singular; reduce the bin width");
    }
    return svd.matrixU() * svd.matrixV().adjoint();
}

// ------------------------------ Joint propagation ---------------------------

namespace detail {

// Kets of the per-bin measurement eigenstates (amplitude prefactor included
// for the heterodyne POVM).
inline void bin_measurement_kets(Scheme scheme, double phase, const StepEntry& outcome,
                                 double bin_width, Complex& c0, Complex& c1) {
    switch (scheme) {
        case Scheme::counting:
            if (outcome.a != 0.0 && outcome.a != 1.0) {
                throw ValidationError("oracle: counting outcome must be 0 or 1");
            }
            c0 = outcome.a == 0.0 ? 1.0 : 0.0;
            c1 = outcome.a == 0.0 ? 0.0 : 1.0;
            return;
        case Scheme::homodyne: {
            const double sign = outcome.a >= 0.0 ? 1.0 : -1.0;
            c0 = 1.0 / std::sqrt(2.0);
            c1 = sign * std::exp(ci * phase) / std::sqrt(2.0);
            return;
        }
        case Scheme::heterodyne: {
            const double s0 = outcome.a >= 0.0 ? 1.0 : -1.0;
            const double s1 = outcome.b >= 0.0 ? 1.0 : -1.0;
            // |s0, s1> = (|0> + (s0 + i s1)/sqrt(2) |1>)/sqrt(2), POVM weight 1/sqrt(2).
            const Complex q = (Complex{s0, 0.0} + ci * s1) / std::sqrt(2.0);
            c0 = 1.0 / 2.0;
            c1 = q / 2.0;
            return;
        }
    }
    (void)bin_width;
    throw ValidationError("oracle: unknown scheme");
}

} // namespace detail

struct OracleResult {
    std::vector<Matrix> states;          // reduced system state after each bin
    std::vector<double> probabilities;   // probability of each realized outcome
    TrajectoryRecord record;             // the outcomes consumed or sampled
    double dropped_weight = 0.0;
};

class JointOracle {
  public:
    JointOracle(const SystemOperators& sys, const WavePacket& packet, const FieldState& field,
                const Matrix& rho0, double t_start, double t_end, std::size_t bins,
                std::size_t bin_cap = 14, double dropped_tolerance = 1e-3)
        : sys_(sys, {}), bins_(bins), dim_(sys.scattering.rows()) {
        if (bins > bin_cap) {
            throw ValidationError("JointOracle: bin count exceeds the configured cap");
        }
        field_ = make_binned_field(packet, t_start, t_end, bins);
        unitary_ = bin_unitary(sys_, field_.bin_width);

        // Pure input field: a rank-one coefficient matrix.
        Eigen::SelfAdjointEigenSolver<Matrix> fs(field.coeffs);
        if (fs.eigenvalues().maxCoeff() < 1.0 - 1e-10) {
            throw ValidationError("JointOracle: field state must be pure");
        }
        Vector field_vec = fs.eigenvectors().col(fs.eigenvalues().size() - 1);
        // Pure initial system state.
        Eigen::SelfAdjointEigenSolver<Matrix> ss(rho0);
        if (ss.eigenvalues().maxCoeff() < 1.0 - 1e-10) {
            throw ValidationError("JointOracle: initial system state must be pure for the vector path");
        }
        const Vector sys_vec = ss.eigenvectors().col(ss.eigenvalues().size() - 1);

        // Superpose binned Fock states with the field amplitudes.
        const std::size_t fdim = std::size_t{1} << bins;
        Vector field_state = Vector::Zero(fdim);
        for (int n = 0; n <= field.max_photons; ++n) {
            if (std::abs(field_vec(n)) == 0.0) continue;
            const BinnedFock fock = build_binned_fock(field_, n, dropped_tolerance);
            dropped_weight_ = std::max(dropped_weight_, fock.dropped_weight);
            field_state += field_vec(n) * fock.amplitudes;
        }
        field_state /= field_state.norm();

        psi_ = Vector::Zero(static_cast<Eigen::Index>(fdim) * dim_);
        for (std::size_t mask = 0; mask < fdim; ++mask) {
            for (Eigen::Index s = 0; s < dim_; ++s) {
                psi_(static_cast<Eigen::Index>(mask) * dim_ + s) =
                    field_state(mask) * sys_vec(s);
            }
        }
    }

    const BinnedField& binned_field() const { return field_; }
    double dropped_weight() const { return dropped_weight_; }
    double bin_width() const { return field_.bin_width; }

    // Replay a per-bin record (entries sized like the bin count).
    OracleResult run(Scheme scheme, double phase, const TrajectoryRecord& record) {
        if (record.entries.size() < bins_) {
            throw ValidationError("JointOracle: record shorter than the bin count");
        }
        return propagate(scheme, phase, &record, nullptr);
    }

    // Sample outcomes from the exact per-bin probabilities.
    OracleResult sample(Scheme scheme, double phase, std::uint64_t seed) {
        RandomStream rng(seed);
        return propagate(scheme, phase, nullptr, &rng);
    }

    // No measurement at all: entangle with every bin, then trace the field
    // out; validates the deterministic ladder drift.
    std::vector<Matrix> run_unconditional() {
        Vector psi = psi_;
        std::vector<Matrix> states;
        states.push_back(reduced_density(psi, bins_));
        for (std::size_t i = 0; i < bins_; ++i) {
            apply_bin_unitary(psi, bins_, i);
            states.push_back(reduced_density(psi, bins_));
        }
        return states;
    }

  private:
    OracleResult propagate(Scheme scheme, double phase, const TrajectoryRecord* record,
                           RandomStream* rng) {
        OracleResult result;
        result.dropped_weight = dropped_weight_;
        result.record.scheme = scheme;
        result.record.phase = phase;
        result.record.dt = field_.bin_width;
        result.record.t_start = field_.t_start;
        const double root_dt = std::sqrt(field_.bin_width);

        Vector psi = psi_;
        std::size_t remaining = bins_;
        for (std::size_t i = 0; i < bins_; ++i) {
            apply_bin_unitary(psi, remaining, 0);

            StepEntry outcome;
            double prob = 0.0;
            if (record) {
                outcome = record->entries[i];
                Vector next = project_bin0(psi, remaining, scheme, phase, outcome);
                prob = next.squaredNorm();
                if (prob < 1e-14) {
                    throw InfeasibleRecordError(
                        "oracle: replayed outcome has (numerically) zero probability at bin " +
                        std::to_string(i));
                }
                psi = next / std::sqrt(prob);
            } else {
                // Enumerate this scheme's outcomes and draw one.
                std::vector<StepEntry> outcomes;
                if (scheme == Scheme::counting) {
                    outcomes = {StepEntry{0.0, 0.0}, StepEntry{1.0, 0.0}};
                } else if (scheme == Scheme::homodyne) {
                    outcomes = {StepEntry{root_dt, 0.0}, StepEntry{-root_dt, 0.0}};
                } else {
                    outcomes = {StepEntry{root_dt, root_dt}, StepEntry{root_dt, -root_dt},
                                StepEntry{-root_dt, root_dt}, StepEntry{-root_dt, -root_dt}};
                }
                std::vector<Vector> branches;
                std::vector<double> probs;
                double total = 0.0;
                for (const auto& o : outcomes) {
                    branches.push_back(project_bin0(psi, remaining, scheme, phase, o));
                    probs.push_back(branches.back().squaredNorm());
                    total += probs.back();
                }
                double u = rng->uniform() * total;
                std::size_t chosen = 0;
                for (; chosen + 1 < outcomes.size(); ++chosen) {
                    if (u < probs[chosen]) break;
                    u -= probs[chosen];
                }
                outcome = outcomes[chosen];
                prob = probs[chosen];
                psi = branches[chosen] / std::sqrt(prob);
            }
            remaining -= 1;
            result.record.entries.push_back(outcome);
            result.probabilities.push_back(prob);
            result.states.push_back(reduced_density(psi, remaining));
        }
        return result;
    }

    // U on (system (x) bin `bin`) inside a register of `bins` bins.
    void apply_bin_unitary(Vector& psi, std::size_t bins, std::size_t bin) const {
        const std::size_t fdim = std::size_t{1} << bins;
        const std::size_t bit = std::size_t{1} << bin;
        Vector local(2 * dim_);
        for (std::size_t mask = 0; mask < fdim; ++mask) {
            if (mask & bit) continue;
            const std::size_t lo = mask;
            const std::size_t hi = mask | bit;
            for (Eigen::Index s = 0; s < dim_; ++s) {
                local(s) = psi(static_cast<Eigen::Index>(lo) * dim_ + s);
                local(dim_ + s) = psi(static_cast<Eigen::Index>(hi) * dim_ + s);
            }
            local = (unitary_ * local).eval();
            for (Eigen::Index s = 0; s < dim_; ++s) {
                psi(static_cast<Eigen::Index>(lo) * dim_ + s) = local(s);
                psi(static_cast<Eigen::Index>(hi) * dim_ + s) = local(dim_ + s);
            }
        }
    }

    // <R|_bin0 psi: contracts bit 0, halving the register.
    Vector project_bin0(const Vector& psi, std::size_t bins, Scheme scheme, double phase,
                        const StepEntry& outcome) const {
        Complex c0, c1;
        detail::bin_measurement_kets(scheme, phase, outcome, field_.bin_width, c0, c1);
        const std::size_t half = std::size_t{1} << (bins - 1);
        Vector out(static_cast<Eigen::Index>(half) * dim_);
        for (std::size_t m = 0; m < half; ++m) {
            const std::size_t lo = m << 1;
            const std::size_t hi = lo | 1;
            for (Eigen::Index s = 0; s < dim_; ++s) {
                out(static_cast<Eigen::Index>(m) * dim_ + s) =
                    std::conj(c0) * psi(static_cast<Eigen::Index>(lo) * dim_ + s) +
                    std::conj(c1) * psi(static_cast<Eigen::Index>(hi) * dim_ + s);
            }
        }
        return out;
    }

    Matrix reduced_density(const Vector& psi, std::size_t bins) const {
        const std::size_t fdim = std::size_t{1} << bins;
        Matrix rho = Matrix::Zero(dim_, dim_);
        for (std::size_t mask = 0; mask < fdim; ++mask) {
            const auto base = static_cast<Eigen::Index>(mask) * dim_;
            for (Eigen::Index s = 0; s < dim_; ++s) {
                for (Eigen::Index r = 0; r < dim_; ++r) {
                    rho(s, r) += psi(base + s) * std::conj(psi(base + r));
                }
            }
        }
        const double tr = rho.trace().real();
        if (tr > 0.0) rho /= tr;
        return rho;
    }

    SystemCache sys_;
    std::size_t bins_;
    Eigen::Index dim_;
    BinnedField field_;
    Matrix unitary_;
    Vector psi_;
    double dropped_weight_ = 0.0;
};

// ------------------------------ Lossy-detector oracle -----------------------

// Counting with detector efficiency eta modelled as a beamsplitter of
// transmissivity sqrt(eta) in front of a perfect detector; the reflected
// port is traced out, so the joint state is propagated as a density matrix.
class LossyCountingOracle {
  public:
    LossyCountingOracle(const SystemOperators& sys, const WavePacket& packet,
                        const FieldState& field, const Matrix& rho0, double t_start,
                        double t_end, std::size_t bins, double eta,
                        double dropped_tolerance = 1e-3)
        : sys_(sys, {}), bins_(bins), dim_(sys.scattering.rows()), eta_(eta) {
        if (bins > 10) throw ValidationError("LossyCountingOracle: bin count too large");
        if (!(eta >= 0.0 && eta <= 1.0)) throw ParameterError("LossyCountingOracle: bad eta");
        field_ = make_binned_field(packet, t_start, t_end, bins);
        unitary_ = bin_unitary(sys_, field_.bin_width);
        Eigen::SelfAdjointEigenSolver<Matrix> fs(field.coeffs);
        if (fs.eigenvalues().maxCoeff() < 1.0 - 1e-10) {
            throw ValidationError("LossyCountingOracle: field state must be pure");
        }
        Vector field_vec = fs.eigenvectors().col(fs.eigenvalues().size() - 1);
        const std::size_t fdim = std::size_t{1} << bins;
        Vector field_state = Vector::Zero(fdim);
        for (int n = 0; n <= field.max_photons; ++n) {
            if (std::abs(field_vec(n)) == 0.0) continue;
            const BinnedFock fock = build_binned_fock(field_, n, dropped_tolerance);
            field_state += field_vec(n) * fock.amplitudes;
        }
        field_state /= field_state.norm();
        Vector psi = Vector::Zero(static_cast<Eigen::Index>(fdim) * dim_);
        // rho0 may be mixed: build the joint density matrix directly.
        rho_ = Matrix::Zero(psi.size(), psi.size());
        for (std::size_t mask = 0; mask < fdim; ++mask) {
            for (std::size_t mask2 = 0; mask2 < fdim; ++mask2) {
                const Complex f = field_state(mask) * std::conj(field_state(mask2));
                if (f == Complex{0.0, 0.0}) continue;
                for (Eigen::Index s = 0; s < dim_; ++s) {
                    for (Eigen::Index r = 0; r < dim_; ++r) {
                        rho_(static_cast<Eigen::Index>(mask) * dim_ + s,
                             static_cast<Eigen::Index>(mask2) * dim_ + r) = f * rho0(s, r);
                    }
                }
            }
        }
    }

    double bin_width() const { return field_.bin_width; }
    const BinnedField& binned_field() const { return field_; }

    OracleResult run(const TrajectoryRecord& record) {
        if (record.entries.size() < bins_) {
            throw ValidationError("LossyCountingOracle: record shorter than the bin count");
        }
        OracleResult result;
        result.record.scheme = Scheme::counting;
        result.record.dt = field_.bin_width;
        result.record.t_start = field_.t_start;
        Matrix rho = rho_;
        std::size_t remaining = bins_;
        for (std::size_t i = 0; i < bins_; ++i) {
            apply_unitary(rho, remaining);
            apply_loss(rho, remaining);
            const StepEntry outcome = record.entries[i];
            Matrix next = project(rho, remaining, outcome.a != 0.0);
            const double prob = next.trace().real();
            if (prob < 1e-14) {
                throw InfeasibleRecordError("lossy oracle: zero-probability outcome at bin " +
                                            std::to_string(i));
            }
            rho = next / prob;
            remaining -= 1;
            result.record.entries.push_back(outcome);
            result.probabilities.push_back(prob);
            result.states.push_back(partial_trace(rho, remaining));
        }
        return result;
    }

  private:
    void apply_unitary(Matrix& rho, std::size_t bins) const {
        const std::size_t fdim = std::size_t{1} << bins;
        const Eigen::Index n = rho.rows();
        // Left multiply by U on (sys (x) bin0), column by column, then the
        // adjoint from the right via the same kernel on rho^dagger.
        for (int pass = 0; pass < 2; ++pass) {
            for (Eigen::Index col = 0; col < n; ++col) {
                Vector column = rho.col(col);
                Vector local(2 * dim_);
                for (std::size_t mask = 0; mask < fdim; mask += 2) {
                    for (Eigen::Index s = 0; s < dim_; ++s) {
                        local(s) = column(static_cast<Eigen::Index>(mask) * dim_ + s);
                        local(dim_ + s) = column(static_cast<Eigen::Index>(mask | 1) * dim_ + s);
                    }
                    local = (unitary_ * local).eval();
                    for (Eigen::Index s = 0; s < dim_; ++s) {
                        column(static_cast<Eigen::Index>(mask) * dim_ + s) = local(s);
                        column(static_cast<Eigen::Index>(mask | 1) * dim_ + s) = local(dim_ + s);
                    }
                }
                rho.col(col) = column;
            }
            rho = rho.adjoint().eval();
        }
    }

    // rho -> K0 rho K0^dag + K1 rho K1^dag with K0 = |0><0| + sqrt(eta)|1><1|,
    // K1 = sqrt(1-eta)|0><1| acting on bin 0.
    void apply_loss(Matrix& rho, std::size_t bins) const {
        if (eta_ == 1.0) return;
        const std::size_t fdim = std::size_t{1} << bins;
        const Eigen::Index n = rho.rows();
        Matrix out = Matrix::Zero(n, n);
        const double root_eta = std::sqrt(eta_);
        const double root_loss = std::sqrt(1.0 - eta_);
        auto index = [&](std::size_t mask, Eigen::Index s) {
            return static_cast<Eigen::Index>(mask) * dim_ + s;
        };
        for (std::size_t m1 = 0; m1 < fdim; ++m1) {
            const double w1 = (m1 & 1) ? root_eta : 1.0;
            for (std::size_t m2 = 0; m2 < fdim; ++m2) {
                const double w2 = (m2 & 1) ? root_eta : 1.0;
                for (Eigen::Index s = 0; s < dim_; ++s) {
                    for (Eigen::Index r = 0; r < dim_; ++r) {
                        out(index(m1, s), index(m2, r)) +=
                            w1 * w2 * rho(index(m1, s), index(m2, r));
                        if ((m1 & 1) && (m2 & 1)) {
                            out(index(m1 & ~std::size_t{1}, s), index(m2 & ~std::size_t{1}, r)) +=
                                root_loss * root_loss * rho(index(m1, s), index(m2, r));
                        }
                    }
                }
            }
        }
        rho = std::move(out);
    }

    Matrix project(const Matrix& rho, std::size_t bins, bool click) const {
        const std::size_t half = std::size_t{1} << (bins - 1);
        const Eigen::Index n = static_cast<Eigen::Index>(half) * dim_;
        Matrix out(n, n);
        const std::size_t sel = click ? 1 : 0;
        for (std::size_t m1 = 0; m1 < half; ++m1) {
            for (std::size_t m2 = 0; m2 < half; ++m2) {
                for (Eigen::Index s = 0; s < dim_; ++s) {
                    for (Eigen::Index r = 0; r < dim_; ++r) {
                        out(static_cast<Eigen::Index>(m1) * dim_ + s,
                            static_cast<Eigen::Index>(m2) * dim_ + r) =
                            rho(static_cast<Eigen::Index>((m1 << 1) | sel) * dim_ + s,
                                static_cast<Eigen::Index>((m2 << 1) | sel) * dim_ + r);
                    }
                }
            }
        }
        return out;
    }

    Matrix partial_trace(const Matrix& rho, std::size_t bins) const {
        const std::size_t fdim = std::size_t{1} << bins;
        Matrix out = Matrix::Zero(dim_, dim_);
        for (std::size_t mask = 0; mask < fdim; ++mask) {
            for (Eigen::Index s = 0; s < dim_; ++s) {
                for (Eigen::Index r = 0; r < dim_; ++r) {
                    out(s, r) += rho(static_cast<Eigen::Index>(mask) * dim_ + s,
                                     static_cast<Eigen::Index>(mask) * dim_ + r);
                }
            }
        }
        const double tr = out.trace().real();
        if (tr > 0.0) out /= tr;
        return out;
    }

    SystemCache sys_;
    std::size_t bins_;
    Eigen::Index dim_;
    double eta_;
    BinnedField field_;
    Matrix unitary_;
    Matrix rho_;
};

} // namespace focktraj
