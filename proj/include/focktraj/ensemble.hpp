// ensemble.hpp — Seeded parallel Monte Carlo over trajectories
//
// Trajectory i always uses derive_stream_seed(base_seed, i), and partial sums
// are accumulated per fixed-size chunk of trajectory indices and merged in
// chunk order, so the summary is bit-identical for any worker count.

#pragma once

#include <atomic>
#include <cmath>
#include <cstdint>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include "focktraj/integrator.hpp"
#include "focktraj/observables.hpp"

namespace focktraj {

struct EnsembleOptions {
    std::size_t n_trajectories = 1;
    std::uint64_t base_seed = 0;
    unsigned workers = 1;
    std::size_t snapshot_stride = 1;
    bool monitor_invariants = true;
    double max_step_action = 0.01;
};

struct EnsembleSummary {
    std::vector<double> times;
    std::vector<std::string> columns;
    // rows: snapshot times, cols: observables
    std::vector<std::vector<double>> mean;
    std::vector<std::vector<double>> variance;
    std::vector<std::vector<double>> standard_error;
    std::vector<double> total_counts;  // one entry per trajectory (counting)
    InvariantReport invariants;
    std::size_t n_trajectories = 0;
};

inline EnsembleSummary run_ensemble(const SimulationSetup& setup,
                                    const std::vector<ObservableRequest>& observables,
                                    const EnsembleOptions& opts) {
    if (opts.n_trajectories < 1) {
        throw ParameterError("run_ensemble: need at least one trajectory");
    }
    const std::size_t n_traj = opts.n_trajectories;
    constexpr std::size_t chunk_size = 16;
    const std::size_t n_chunks = (n_traj + chunk_size - 1) / chunk_size;

    // Determine snapshot count from the grid.
    const std::size_t n_steps = setup.grid.n_steps();
    std::size_t n_snap = 1;
    for (std::size_t i = 0; i < n_steps; ++i) {
        if ((i + 1) % opts.snapshot_stride == 0 || i + 1 == n_steps) ++n_snap;
    }
    const std::size_t n_obs = observables.size();

    struct ChunkAccumulator {
        std::vector<double> sum, sumsq;  // n_snap * n_obs, row-major
        std::vector<double> counts;      // per trajectory in this chunk
        InvariantReport invariants;
        std::vector<double> times;
    };
    std::vector<ChunkAccumulator> chunks(n_chunks);

    const SystemCache shared_cache(setup.system, setup.baths);
    std::atomic<std::size_t> next_chunk{0};
    std::atomic<bool> failed{false};
    std::string failure_message;
    std::mutex failure_mutex;

    const auto worker_fn = [&]() {
        for (;;) {
            const std::size_t c = next_chunk.fetch_add(1);
            if (c >= n_chunks || failed.load()) return;
            auto& acc = chunks[c];
            acc.sum.assign(n_snap * n_obs, 0.0);
            acc.sumsq.assign(n_snap * n_obs, 0.0);
            const std::size_t lo = c * chunk_size;
            const std::size_t hi = std::min(lo + chunk_size, n_traj);
            try {
                for (std::size_t i = lo; i < hi; ++i) {
                    RunOptions ro;
                    ro.seed = derive_stream_seed(opts.base_seed, i);
                    ro.snapshot_stride = opts.snapshot_stride;
                    ro.monitor_invariants = opts.monitor_invariants;
                    ro.max_step_action = opts.max_step_action;
                    const TrajectoryResult res = run_trajectory(setup, ro);
                    if (acc.times.empty()) acc.times = res.times;
                    for (std::size_t s = 0; s < res.snapshots.size(); ++s) {
                        const Complex xi = setup.packet.xi(res.snapshots[s].time);
                        for (std::size_t o = 0; o < n_obs; ++o) {
                            const double v =
                                evaluate_observable(observables[o], res.snapshots[s],
                                                    setup.field, shared_cache, xi,
                                                    res.cumulative_counts[s]);
                            acc.sum[s * n_obs + o] += v;
                            acc.sumsq[s * n_obs + o] += v * v;
                        }
                    }
                    acc.counts.push_back(static_cast<double>(res.record.total_counts()));
                    auto& inv = acc.invariants;
                    inv.max_trace_deviation = std::max(inv.max_trace_deviation,
                                                       res.invariants.max_trace_deviation);
                    inv.min_reduced_eigenvalue = std::min(inv.min_reduced_eigenvalue,
                                                          res.invariants.min_reduced_eigenvalue);
                    inv.max_hermiticity_defect = std::max(inv.max_hermiticity_defect,
                                                          res.invariants.max_hermiticity_defect);
                    inv.steps_checked += res.invariants.steps_checked;
                }
            } catch (const std::exception& e) {
                std::lock_guard<std::mutex> lock(failure_mutex);
                failed.store(true);
                if (failure_message.empty()) failure_message = e.what();
                return;
            }
        }
    };

    const unsigned n_workers = std::max(1u, opts.workers);
    if (n_workers == 1) {
        worker_fn();
    } else {
        std::vector<std::thread> pool;
        pool.reserve(n_workers);
        for (unsigned w = 0; w < n_workers; ++w) pool.emplace_back(worker_fn);
        for (auto& t : pool) t.join();
    }
    if (failed.load()) throw NumericalError("run_ensemble: " + failure_message);

    // Ordered merge of the chunk partials.
    EnsembleSummary out;
    out.n_trajectories = n_traj;
    for (const auto& o : observables) out.columns.push_back(o.name);
    out.times = chunks.front().times;
    std::vector<double> sum(n_snap * n_obs, 0.0), sumsq(n_snap * n_obs, 0.0);
    for (const auto& acc : chunks) {
        for (std::size_t k = 0; k < sum.size(); ++k) {
            sum[k] += acc.sum[k];
            sumsq[k] += acc.sumsq[k];
        }
        out.total_counts.insert(out.total_counts.end(), acc.counts.begin(), acc.counts.end());
        out.invariants.max_trace_deviation = std::max(out.invariants.max_trace_deviation,
                                                      acc.invariants.max_trace_deviation);
        out.invariants.min_reduced_eigenvalue = std::min(out.invariants.min_reduced_eigenvalue,
                                                         acc.invariants.min_reduced_eigenvalue);
        out.invariants.max_hermiticity_defect = std::max(out.invariants.max_hermiticity_defect,
                                                         acc.invariants.max_hermiticity_defect);
        out.invariants.steps_checked += acc.invariants.steps_checked;
    }
    const double nt = static_cast<double>(n_traj);
    out.mean.assign(n_snap, std::vector<double>(n_obs, 0.0));
    out.variance.assign(n_snap, std::vector<double>(n_obs, 0.0));
    out.standard_error.assign(n_snap, std::vector<double>(n_obs, 0.0));
    for (std::size_t s = 0; s < n_snap; ++s) {
        for (std::size_t o = 0; o < n_obs; ++o) {
            const double m = sum[s * n_obs + o] / nt;
            out.mean[s][o] = m;
            double var = 0.0;
            if (n_traj > 1) {
                var = (sumsq[s * n_obs + o] - nt * m * m) / (nt - 1.0);
                var = std::max(var, 0.0);
            }
            out.variance[s][o] = var;
            out.standard_error[s][o] = std::sqrt(var / nt);
        }
    }
    return out;
}

} // namespace focktraj
