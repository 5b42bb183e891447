// integrator.hpp — Conditional and unconditional propagation of the ladder
//
// One trajectory is strictly sequential. Each conditioned step follows the
// same pattern: compute the outcome statistics from the current ladder,
// obtain the outcome (sampled or replayed), apply the corresponding update to
// every block, then renormalize all blocks by the shared field-weighted trace
// so the reduced state keeps unit trace.
//
// Two step realizations are provided:
//   * kraus — applies the one-step update in product (Kraus) form
//     A rho A^dag + cross terms, which agrees with the first-order expansion
//     to O(dt) while keeping the reduced state positive to much higher order;
//   * euler — the literal first-order update, retained because its exact
//     algebraic adjoint is what the Heisenberg-picture filter implements and
//     because reference implementations are written in this form.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "focktraj/errors.hpp"
#include "focktraj/generators.hpp"
#include "focktraj/hierarchy.hpp"
#include "focktraj/linalg.hpp"
#include "focktraj/rng.hpp"
#include "focktraj/system_model.hpp"

namespace focktraj {

// ------------------------------ Configuration -------------------------------

enum class Scheme { counting, homodyne, heterodyne };

enum class StepperMode { kraus, euler };

// Outcome model for the quadrature schemes: Gaussian increments (diffusive
// limit) or the two-outcome +-sqrt(dt) model.
enum class QuadratureNoise { gaussian, binary };

inline std::string to_string(Scheme s) {
    switch (s) {
        case Scheme::counting: return "counting";
        case Scheme::homodyne: return "homodyne";
        case Scheme::heterodyne: return "heterodyne";
    }
    return "?";
}

inline Scheme scheme_from_string(const std::string& s) {
    if (s == "counting") return Scheme::counting;
    if (s == "homodyne") return Scheme::homodyne;
    if (s == "heterodyne") return Scheme::heterodyne;
    throw ValidationError("unknown detection scheme: " + s);
}

struct DetectionConfig {
    Scheme scheme = Scheme::counting;
    double phase = 0.0;       // local-oscillator phase (homodyne)
    double efficiency = 1.0;  // eta in [0, 1]
    StepperMode stepper = StepperMode::kraus;
    QuadratureNoise noise = QuadratureNoise::gaussian;

    void validate() const {
        if (!(efficiency >= 0.0 && efficiency <= 1.0)) {
            throw ValidationError("DetectionConfig: efficiency must lie in [0, 1]");
        }
        if (noise == QuadratureNoise::binary && efficiency != 1.0) {
            throw ValidationError("DetectionConfig: binary outcomes require unit efficiency");
        }
    }
};

struct TimeGrid {
    double t_start = 0.0;
    double t_end = 0.0;
    double dt = 0.0;

    void validate() const {
        if (!(t_start < t_end)) throw ValidationError("TimeGrid: need t_start < t_end");
        if (!(dt > 0.0)) throw ValidationError("TimeGrid: need dt > 0");
    }

    std::size_t n_steps() const {
        return static_cast<std::size_t>(std::llround((t_end - t_start) / dt));
    }

    double time_at(std::size_t i) const { return t_start + static_cast<double>(i) * dt; }
};

// ------------------------------ Records -------------------------------------

// Raw per-step outcome. counting: a = dN in {0,1}. homodyne: a = dJ_phi.
// heterodyne: (a, b) = (dJ_0, dJ_{pi/2}).
struct StepEntry {
    double a = 0.0;
    double b = 0.0;
};

struct TrajectoryRecord {
    Scheme scheme = Scheme::counting;
    double phase = 0.0;
    double efficiency = 1.0;
    double dt = 0.0;
    double t_start = 0.0;
    std::optional<std::uint64_t> seed;
    std::vector<StepEntry> entries;

    std::size_t total_counts() const {
        std::size_t acc = 0;
        if (scheme == Scheme::counting) {
            for (const auto& e : entries) acc += (e.a != 0.0) ? 1 : 0;
        }
        return acc;
    }
};

// Record files are plain text: '#'-prefixed header lines followed by one line
// per step with the outcome printed at 17 significant digits.
inline void write_record(std::ostream& out, const TrajectoryRecord& rec) {
    out << "# focktraj-record v1\n";
    out << "# scheme=" << to_string(rec.scheme) << "\n";
    out.precision(17);
    out << "# phase=" << rec.phase << "\n";
    out << "# eta=" << rec.efficiency << "\n";
    out << "# dt=" << rec.dt << "\n";
    out << "# t_start=" << rec.t_start << "\n";
    if (rec.seed) out << "# seed=" << *rec.seed << "\n";
    const bool two = rec.scheme == Scheme::heterodyne;
    for (std::size_t i = 0; i < rec.entries.size(); ++i) {
        out << i << ' ' << rec.entries[i].a;
        if (two) out << ' ' << rec.entries[i].b;
        out << '\n';
    }
}

inline void write_record_file(const std::string& path, const TrajectoryRecord& rec) {
    std::ofstream out(path);
    if (!out) throw ValidationError("cannot open record file for writing: " + path);
    write_record(out, rec);
}

inline TrajectoryRecord read_record(std::istream& in) {
    TrajectoryRecord rec;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        if (line[0] == '#') {
            const auto eq = line.find('=');
            if (eq == std::string::npos) continue;
            std::string key = line.substr(1, eq - 1);
            key.erase(0, key.find_first_not_of(" \t"));
            key.erase(key.find_last_not_of(" \t") + 1);
            const std::string value = line.substr(eq + 1);
            if (key == "scheme") rec.scheme = scheme_from_string(value);
            else if (key == "phase") rec.phase = std::stod(value);
            else if (key == "eta") rec.efficiency = std::stod(value);
            else if (key == "dt") rec.dt = std::stod(value);
            else if (key == "t_start") rec.t_start = std::stod(value);
            else if (key == "seed") rec.seed = std::stoull(value);
            continue;
        }
        std::istringstream row(line);
        std::size_t index = 0;
        StepEntry e;
        row >> index >> e.a;
        if (rec.scheme == Scheme::heterodyne) row >> e.b;
        if (row.fail()) throw ValidationError("malformed record line: " + line);
        if (index != rec.entries.size()) {
            throw ValidationError("record step indices are not contiguous");
        }
        rec.entries.push_back(e);
    }
    return rec;
}

inline TrajectoryRecord read_record_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open record file: " + path);
    return read_record(in);
}

// ------------------------------ Step outcome --------------------------------

struct StepOutcome {
    StepEntry value;
    double probability = 1.0;   // branch probability (counting / binary modes)
    double innovation_a = 0.0;  // outcome minus its conditional expectation
    double innovation_b = 0.0;  // second quadrature (heterodyne only)
};

// Per-step scalars shared with the Heisenberg-picture filter of a paired run.
struct StepTrace {
    StepEntry value;
    double jump_probability = 0.0;
    double k0 = 0.0;  // expected current, first quadrature
    double k1 = 0.0;  // expected current, second quadrature (heterodyne)
    double y0 = 0.0;  // conditioning weight actually applied
    double y1 = 0.0;
    double norm = 1.0;  // shared renormalization divisor
};

// ------------------------------ Outcome sources -----------------------------

// Either an RNG stream (generation) or a record (replay).
class OutcomeSource {
  public:
    explicit OutcomeSource(std::uint64_t seed) : rng_(seed), generating_(true) {}
    explicit OutcomeSource(const TrajectoryRecord& record)
        : rng_(0), record_(&record), generating_(false) {}

    bool generating() const { return generating_; }

    RandomStream& rng() {
        if (!generating_) throw ValidationError("OutcomeSource: replay source has no RNG");
        return rng_;
    }

    StepEntry replay_entry(std::size_t step) const {
        if (generating_ || record_ == nullptr) {
            throw ValidationError("OutcomeSource: not a replay source");
        }
        if (step >= record_->entries.size()) {
            throw ValidationError("OutcomeSource: record exhausted at step " + std::to_string(step));
        }
        return record_->entries[step];
    }

  private:
    RandomStream rng_;
    const TrajectoryRecord* record_ = nullptr;
    bool generating_;
};

// ------------------------------ Simulation setup ----------------------------

struct SimulationSetup {
    SystemOperators system;
    std::vector<BathChannel> baths;
    WavePacket packet;
    FieldState field;
    Matrix initial_state;
    DetectionConfig detection;
    TimeGrid grid;
};

// ------------------------------ Engine --------------------------------------

class TrajectoryEngine {
  public:
    TrajectoryEngine(const SystemOperators& sys, const std::vector<BathChannel>& baths,
                     const WavePacket& packet, const FieldState& field,
                     const DetectionConfig& detection, const TimeGrid& grid,
                     double max_step_action = 0.01)
        : sys_(sys, baths), packet_(&packet), field_(field), det_(detection), grid_(grid) {
        det_.validate();
        grid_.validate();
        field_.validate();
        grid_xi_.resize(grid_.n_steps());
        double max_xi2 = 0.0;
        for (std::size_t i = 0; i < grid_xi_.size(); ++i) {
            grid_xi_[i] = packet.xi(grid_.time_at(i));
            max_xi2 = std::max(max_xi2, std::norm(grid_xi_[i]));
        }
        const double action = grid_.dt * (sys_.lindblad_norm + field_.max_photons * max_xi2);
        if (action > max_step_action) {
            throw StepSizeError("step size too large: dt*(|L^dag L| + N*max|xi|^2) = " +
                                std::to_string(action) + " exceeds " +
                                std::to_string(max_step_action));
        }
    }

    const SystemCache& system_cache() const { return sys_; }
    const FieldState& field() const { return field_; }
    const TimeGrid& grid() const { return grid_; }
    const DetectionConfig& detection() const { return det_; }
    Complex xi_at_step(std::size_t i) const { return grid_xi_[i]; }

    // Advance one conditioned step. `step` indexes the grid; h.time must be
    // grid.time_at(step).
    StepOutcome step(HierarchyState& h, std::size_t step, OutcomeSource& source,
                     StepTrace* trace = nullptr) const {
        switch (det_.scheme) {
            case Scheme::counting: return step_counting(h, step, source, trace);
            case Scheme::homodyne: return step_homodyne(h, step, source, trace);
            case Scheme::heterodyne: return step_heterodyne(h, step, source, trace);
        }
        throw ValidationError("unknown scheme");
    }

    StepOutcome step_counting(HierarchyState& h, std::size_t step, OutcomeSource& source,
                              StepTrace* trace = nullptr) const {
        const Complex xi = grid_xi_[step];
        const double dt = grid_.dt;
        const double eta = det_.efficiency;
        const double prj = jump_probability(h.blocks, sys_, xi, field_, dt);

        double dn;
        if (source.generating()) {
            dn = source.rng().bernoulli(eta * prj) ? 1.0 : 0.0;
        } else {
            const StepEntry e = source.replay_entry(step);
            if (e.a != 0.0 && e.a != 1.0) {
                throw ValidationError("counting record outcome must be 0 or 1");
            }
            dn = e.a;
            if (dn == 1.0 && eta * prj < 1e-14) {
                throw InfeasibleRecordError("replayed count has (numerically) zero probability at step " +
                                            std::to_string(step));
            }
        }

        if (dn == 1.0) {
            h.blocks = jump_update(h.blocks, sys_, xi);
        } else if (det_.stepper == StepperMode::kraus) {
            const Matrix a = Matrix::Identity(sys_.dim(), sys_.dim()) + dt * sys_.drift;
            const Matrix b = -dt * sys_.lds;
            h.blocks = conditioned_blocks_kraus(h.blocks, xi, a, b, (1.0 - eta) * dt, dt);
        } else {
            HierarchyBlocks next = no_jump_update(h.blocks, sys_, xi, dt);
            if (eta < 1.0) next.add_scaled(jump_update(h.blocks, sys_, xi), (1.0 - eta) * dt);
            add_bath_terms(next, h.blocks, dt);
            h.blocks = std::move(next);
        }
        const double norm = renormalize(h.blocks, source.generating(), step);
        h.time = grid_.time_at(step + 1);

        StepOutcome out;
        out.value.a = dn;
        out.probability = (dn == 1.0) ? eta * prj : 1.0 - eta * prj;
        out.innovation_a = dn - eta * prj;
        if (trace) {
            trace->value = out.value;
            trace->jump_probability = prj;
            trace->norm = norm;
        }
        return out;
    }

    StepOutcome step_homodyne(HierarchyState& h, std::size_t step, OutcomeSource& source,
                              StepTrace* trace = nullptr) const {
        const Complex xi = grid_xi_[step];
        const double dt = grid_.dt;
        const double eta = det_.efficiency;
        const double k = expected_current(h.blocks, sys_, xi, det_.phase, field_);

        double dj = 0.0;
        double probability = 1.0;
        if (det_.noise == QuadratureNoise::gaussian) {
            if (source.generating()) {
                dj = dt * k + std::sqrt(dt) * source.rng().normal();
            } else {
                dj = source.replay_entry(step).a;
            }
            const double w = dj - dt * k;
            probability = std::exp(-0.5 * w * w / dt) / std::sqrt(2.0 * M_PI * dt);
        } else {
            const double p_plus = 0.5 * (1.0 + std::sqrt(dt) * k);
            if (p_plus < -1e-12 || p_plus > 1.0 + 1e-12) {
                throw StepSizeError("binary homodyne outcome probability outside [0,1]; reduce dt");
            }
            const double p = std::min(std::max(p_plus, 0.0), 1.0);
            if (source.generating()) {
                dj = source.rng().bernoulli(p) ? std::sqrt(dt) : -std::sqrt(dt);
            } else {
                dj = source.replay_entry(step).a;
                if (std::abs(std::abs(dj) - std::sqrt(dt)) > 1e-9 * std::sqrt(dt)) {
                    throw ValidationError("binary homodyne record outcome must be +-sqrt(dt)");
                }
                const double p_out = dj > 0.0 ? p : 1.0 - p;
                if (p_out < 1e-14) {
                    throw InfeasibleRecordError("replayed homodyne outcome has zero probability");
                }
            }
            probability = dj > 0.0 ? p : 1.0 - p;
        }
        const double innovation = dj - dt * k;

        if (det_.stepper == StepperMode::kraus) {
            // Conditioning weight: the raw outcome in binary mode (the exact
            // two-outcome operators), the innovation in the diffusive limit.
            const double y = det_.noise == QuadratureNoise::binary ? dj : innovation;
            const Complex g = std::sqrt(eta) * std::exp(-ci * det_.phase) * y;
            const Matrix a = Matrix::Identity(sys_.dim(), sys_.dim()) + dt * sys_.drift + g * sys_.l;
            const Matrix b = g * sys_.s - dt * sys_.lds;
            h.blocks = conditioned_blocks_kraus(h.blocks, xi, a, b, (1.0 - eta) * dt, dt);
            if (trace) trace->y0 = y;
        } else {
            HierarchyBlocks next = h.blocks;
            next.add_scaled(unconditional_generator(h.blocks, sys_, xi), dt);
            next.add_scaled(homodyne_map(h.blocks, sys_, xi, det_.phase, k),
                            std::sqrt(eta) * innovation);
            h.blocks = std::move(next);
            if (trace) trace->y0 = innovation;
        }
        const double norm = renormalize(h.blocks, source.generating(), step);
        h.time = grid_.time_at(step + 1);

        StepOutcome out;
        out.value.a = dj;
        out.probability = probability;
        out.innovation_a = innovation;
        if (trace) {
            trace->value = out.value;
            trace->k0 = k;
            trace->norm = norm;
        }
        return out;
    }

    StepOutcome step_heterodyne(HierarchyState& h, std::size_t step, OutcomeSource& source,
                                StepTrace* trace = nullptr) const {
        const Complex xi = grid_xi_[step];
        const double dt = grid_.dt;
        const double eta = det_.efficiency;
        const double k0 = expected_current(h.blocks, sys_, xi, 0.0, field_);
        const double k1 = expected_current(h.blocks, sys_, xi, 0.5 * M_PI, field_);
        const double root_half_dt = std::sqrt(0.5) * dt;

        double dj0 = 0.0, dj1 = 0.0;
        double probability = 1.0;
        if (det_.noise == QuadratureNoise::gaussian) {
            if (source.generating()) {
                dj0 = root_half_dt * k0 + std::sqrt(dt) * source.rng().normal();
                dj1 = root_half_dt * k1 + std::sqrt(dt) * source.rng().normal();
            } else {
                const StepEntry e = source.replay_entry(step);
                dj0 = e.a;
                dj1 = e.b;
            }
            const double w0 = dj0 - root_half_dt * k0;
            const double w1 = dj1 - root_half_dt * k1;
            probability = std::exp(-0.5 * (w0 * w0 + w1 * w1) / dt) / (2.0 * M_PI * dt);
        } else {
            // Four-outcome model with joint probabilities
            // (1/4)[1 + sqrt(dt/2)(s0 K_0 + s1 K_{pi/2})].
            double p[4];
            double total = 0.0;
            for (int c = 0; c < 4; ++c) {
                const double s0 = (c & 1) ? -1.0 : 1.0;
                const double s1 = (c & 2) ? -1.0 : 1.0;
                p[c] = 0.25 * (1.0 + std::sqrt(0.5 * dt) * (s0 * k0 + s1 * k1));
                if (p[c] < -1e-12) {
                    throw StepSizeError("heterodyne outcome probability outside [0,1]; reduce dt");
                }
                p[c] = std::max(p[c], 0.0);
                total += p[c];
            }
            int chosen = 0;
            if (source.generating()) {
                double u = source.rng().uniform() * total;
                for (chosen = 0; chosen < 3; ++chosen) {
                    if (u < p[chosen]) break;
                    u -= p[chosen];
                }
            } else {
                const StepEntry e = source.replay_entry(step);
                chosen = (e.a < 0.0 ? 1 : 0) | (e.b < 0.0 ? 2 : 0);
                if (p[chosen] < 1e-14) {
                    throw InfeasibleRecordError("replayed heterodyne outcome has zero probability");
                }
            }
            dj0 = ((chosen & 1) ? -1.0 : 1.0) * std::sqrt(dt);
            dj1 = ((chosen & 2) ? -1.0 : 1.0) * std::sqrt(dt);
            probability = p[chosen];
        }
        const double innov0 = dj0 - root_half_dt * k0;
        const double innov1 = dj1 - root_half_dt * k1;

        if (det_.stepper == StepperMode::kraus) {
            const double y0 = det_.noise == QuadratureNoise::binary ? dj0 : innov0;
            const double y1 = det_.noise == QuadratureNoise::binary ? dj1 : innov1;
            const Complex zeta_conj = (Complex{y0, 0.0} - ci * y1) / std::sqrt(2.0);
            const Complex g = std::sqrt(eta) * zeta_conj;
            const Matrix a = Matrix::Identity(sys_.dim(), sys_.dim()) + dt * sys_.drift + g * sys_.l;
            const Matrix b = g * sys_.s - dt * sys_.lds;
            h.blocks = conditioned_blocks_kraus(h.blocks, xi, a, b, (1.0 - eta) * dt, dt);
            if (trace) {
                trace->y0 = y0;
                trace->y1 = y1;
            }
        } else {
            HierarchyBlocks next = h.blocks;
            next.add_scaled(unconditional_generator(h.blocks, sys_, xi), dt);
            const double w = std::sqrt(eta) / std::sqrt(2.0);
            next.add_scaled(homodyne_map(h.blocks, sys_, xi, 0.0, k0), w * innov0);
            next.add_scaled(homodyne_map(h.blocks, sys_, xi, 0.5 * M_PI, k1), w * innov1);
            h.blocks = std::move(next);
            if (trace) {
                trace->y0 = innov0;
                trace->y1 = innov1;
            }
        }
        const double norm = renormalize(h.blocks, source.generating(), step);
        h.time = grid_.time_at(step + 1);

        StepOutcome out;
        out.value.a = dj0;
        out.value.b = dj1;
        out.probability = probability;
        out.innovation_a = innov0;
        out.innovation_b = innov1;
        if (trace) {
            trace->value = out.value;
            trace->k0 = k0;
            trace->k1 = k1;
            trace->norm = norm;
        }
        return out;
    }

    // One deterministic step of the unconditional master equation with a
    // classical fourth-order (RK4) rule on the coupled linear system.
    void step_unconditional(HierarchyState& h, std::size_t step) const {
        const double dt = grid_.dt;
        const double t = grid_.time_at(step);
        const auto rhs = [&](const HierarchyBlocks& blocks, double at) {
            return unconditional_generator(blocks, sys_, packet_->xi(at));
        };
        const HierarchyBlocks k1 = rhs(h.blocks, t);
        HierarchyBlocks tmp = h.blocks;
        tmp.add_scaled(k1, 0.5 * dt);
        const HierarchyBlocks k2 = rhs(tmp, t + 0.5 * dt);
        tmp = h.blocks;
        tmp.add_scaled(k2, 0.5 * dt);
        const HierarchyBlocks k3 = rhs(tmp, t + 0.5 * dt);
        tmp = h.blocks;
        tmp.add_scaled(k3, dt);
        const HierarchyBlocks k4 = rhs(tmp, t + dt);
        h.blocks.add_scaled(k1, dt / 6.0);
        h.blocks.add_scaled(k2, dt / 3.0);
        h.blocks.add_scaled(k3, dt / 3.0);
        h.blocks.add_scaled(k4, dt / 6.0);
        h.time = grid_.time_at(step + 1);
        const double wt = field_weighted_trace(h.blocks, field_);
        if (std::abs(wt - 1.0) > 1e-6) {
            throw StepSizeError("unconditional step: trace drift exceeds 1e-6; reduce dt");
        }
    }

  private:
    // Product-form conditioned update: the bilinear ladder map built from the
    // operator pair (A, B), plus the unmonitored click channel with weight
    // w_unmon, the photon-passage counterterm, and the thermal baths.
    HierarchyBlocks conditioned_blocks_kraus(const HierarchyBlocks& blocks, Complex xi,
                                             const Matrix& a, const Matrix& b,
                                             double w_unmon, double dt) const {
        HierarchyBlocks out(blocks.n_max(), blocks.dim());
        const Matrix ad = a.adjoint();
        const Matrix bd = b.adjoint();
        const double xi2 = std::norm(xi);
        for (int n = 0; n <= blocks.n_max(); ++n) {
            for (int m = 0; m <= n; ++m) {
                const Matrix& rho = blocks.stored(m, n);
                Matrix acc = a * rho * ad;
                if (m > 0) {
                    acc += std::sqrt(double(m)) * xi * (b * blocks.block(m - 1, n) * ad);
                }
                if (n > 0) {
                    acc += std::sqrt(double(n)) * std::conj(xi) *
                           (a * blocks.block(m, n - 1) * bd);
                }
                if (m > 0 && n > 0) {
                    const Matrix lower = blocks.block(m - 1, n - 1);
                    acc += std::sqrt(double(m) * double(n)) * xi2 *
                           (b * lower * bd - dt * lower);
                }
                if (w_unmon > 0.0) {
                    acc += w_unmon * (sys_.l * rho * sys_.ld);
                    if (m > 0) {
                        acc += w_unmon * std::sqrt(double(m)) * xi *
                               (sys_.s * blocks.block(m - 1, n) * sys_.ld);
                    }
                    if (n > 0) {
                        acc += w_unmon * std::sqrt(double(n)) * std::conj(xi) *
                               (sys_.l * blocks.block(m, n - 1) * sys_.sd);
                    }
                    if (m > 0 && n > 0) {
                        acc += w_unmon * std::sqrt(double(m) * double(n)) * xi2 *
                               (sys_.s * blocks.block(m - 1, n - 1) * sys_.sd);
                    }
                }
                for (const auto& bath : sys_.baths) {
                    acc += dt * (bath.nbar + 1.0) * (bath.l * rho * bath.ld);
                    acc += dt * bath.nbar * (bath.ld * rho * bath.l);
                }
                out.stored(m, n) = std::move(acc);
            }
        }
        return out;
    }

    // Bath dissipators for the literal-Euler no-click branch (full Lindblad
    // form; the drift halves are not part of no_jump_update).
    void add_bath_terms(HierarchyBlocks& next, const HierarchyBlocks& blocks, double dt) const {
        if (sys_.baths.empty()) return;
        for (int n = 0; n <= blocks.n_max(); ++n) {
            for (int m = 0; m <= n; ++m) {
                next.stored(m, n) += dt * sys_.bath_dissipators(blocks.stored(m, n));
            }
        }
    }

    double renormalize(HierarchyBlocks& blocks, bool generating, std::size_t step) const {
        const double wt = field_weighted_trace(blocks, field_);
        if (!(wt > 1e-14)) {
            if (generating) {
                throw NumericalError("conditioned state lost its norm at step " +
                                     std::to_string(step));
            }
            throw InfeasibleRecordError("replayed outcome has vanishing probability at step " +
                                        std::to_string(step));
        }
        blocks *= 1.0 / wt;
        // Re-pair: diagonal stored blocks are Hermitian by construction; strip
        // the floating-point skew so it cannot accumulate over long runs.
        for (int n = 0; n <= blocks.n_max(); ++n) {
            Matrix& d = blocks.stored(n, n);
            d = 0.5 * (d + d.adjoint()).eval();
        }
        return wt;
    }

    SystemCache sys_;
    const WavePacket* packet_;
    FieldState field_;
    DetectionConfig det_;
    TimeGrid grid_;
    std::vector<Complex> grid_xi_;
};

// ------------------------------ Whole trajectories --------------------------

struct RunOptions {
    const TrajectoryRecord* replay = nullptr;
    std::uint64_t seed = 0;
    std::size_t snapshot_stride = 1;
    bool monitor_invariants = true;
    bool collect_innovations = false;
    double max_step_action = 0.01;
    std::vector<StepTrace>* step_trace = nullptr;
};

struct InvariantReport {
    double max_trace_deviation = 0.0;
    double min_reduced_eigenvalue = std::numeric_limits<double>::infinity();
    double max_hermiticity_defect = 0.0;
    std::size_t steps_checked = 0;
};

struct TrajectoryResult {
    std::vector<double> times;
    std::vector<HierarchyState> snapshots;
    std::vector<double> cumulative_counts;  // aligned with snapshots
    TrajectoryRecord record;
    InvariantReport invariants;
    std::vector<double> innovations;  // flattened, when collected
};

inline TrajectoryResult run_trajectory(const SimulationSetup& setup, const RunOptions& opts = {}) {
    const TrajectoryEngine engine(setup.system, setup.baths, setup.packet, setup.field,
                                  setup.detection, setup.grid, opts.max_step_action);
    if (opts.replay) {
        const auto& r = *opts.replay;
        if (r.scheme != setup.detection.scheme ||
            std::abs(r.phase - setup.detection.phase) > 0.0 ||
            std::abs(r.efficiency - setup.detection.efficiency) > 0.0 ||
            std::abs(r.dt - setup.grid.dt) > 1e-15 * std::abs(setup.grid.dt) ||
            std::abs(r.t_start - setup.grid.t_start) > 1e-12) {
            throw ValidationError("record header does not match the scenario detection config");
        }
        if (r.entries.size() < setup.grid.n_steps()) {
            throw ValidationError("record is shorter than the simulation grid");
        }
    }

    OutcomeSource source = opts.replay ? OutcomeSource(*opts.replay) : OutcomeSource(opts.seed);

    TrajectoryResult result;
    result.record.scheme = setup.detection.scheme;
    result.record.phase = setup.detection.phase;
    result.record.efficiency = setup.detection.efficiency;
    result.record.dt = setup.grid.dt;
    result.record.t_start = setup.grid.t_start;
    if (!opts.replay) result.record.seed = opts.seed;

    HierarchyState h = init_hierarchy(setup.initial_state, setup.field.max_photons,
                                      setup.grid.t_start);

    const std::size_t n = setup.grid.n_steps();
    result.record.entries.reserve(n);
    double counts = 0.0;

    const auto snapshot = [&](const HierarchyState& state) {
        result.times.push_back(state.time);
        result.snapshots.push_back(state);
        result.cumulative_counts.push_back(counts);
    };
    snapshot(h);

    for (std::size_t i = 0; i < n; ++i) {
        StepTrace trace;
        const StepOutcome out =
            engine.step(h, i, source, opts.step_trace ? &trace : nullptr);
        if (opts.step_trace) opts.step_trace->push_back(trace);
        result.record.entries.push_back(out.value);
        if (setup.detection.scheme == Scheme::counting) counts += out.value.a;
        if (opts.collect_innovations) {
            result.innovations.push_back(out.innovation_a);
            if (setup.detection.scheme == Scheme::heterodyne) {
                result.innovations.push_back(out.innovation_b);
            }
        }
        if (opts.monitor_invariants) {
            auto& inv = result.invariants;
            const Matrix rho = reduced_state(h, setup.field);
            inv.max_trace_deviation =
                std::max(inv.max_trace_deviation, std::abs(rho.trace().real() - 1.0) +
                                                      std::abs(rho.trace().imag()));
            inv.min_reduced_eigenvalue =
                std::min(inv.min_reduced_eigenvalue, min_eigenvalue(rho));
            inv.max_hermiticity_defect =
                std::max(inv.max_hermiticity_defect, hermiticity_defect(rho));
            inv.steps_checked += 1;
        }
        if ((i + 1) % opts.snapshot_stride == 0 || i + 1 == n) snapshot(h);
    }
    return result;
}

// Deterministic integration of the unconditional master equation.
inline TrajectoryResult run_unconditional(const SimulationSetup& setup,
                                          std::size_t snapshot_stride = 1) {
    DetectionConfig det = setup.detection;  // scheme irrelevant here
    const TrajectoryEngine engine(setup.system, setup.baths, setup.packet, setup.field, det,
                                  setup.grid);
    HierarchyState h = init_hierarchy(setup.initial_state, setup.field.max_photons,
                                      setup.grid.t_start);
    TrajectoryResult result;
    const std::size_t n = setup.grid.n_steps();
    const auto snapshot = [&](const HierarchyState& state) {
        result.times.push_back(state.time);
        result.snapshots.push_back(state);
        result.cumulative_counts.push_back(0.0);
    };
    snapshot(h);
    for (std::size_t i = 0; i < n; ++i) {
        engine.step_unconditional(h, i);
        if ((i + 1) % snapshot_stride == 0 || i + 1 == n) snapshot(h);
    }
    return result;
}

} // namespace focktraj
