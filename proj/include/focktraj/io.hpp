// io.hpp — CSV emission and ladder snapshot serialization

#pragma once

#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "focktraj/ensemble.hpp"
#include "focktraj/hierarchy.hpp"
#include "focktraj/integrator.hpp"
#include "focktraj/observables.hpp"

namespace focktraj {

namespace detail {

inline std::string decimal17(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

} // namespace detail

// Column layout: t, the requested observables verbatim, then trace, purity,
// cumulative_counts.
inline void write_series_csv(std::ostream& out, const TrajectoryResult& res,
                             const std::vector<ObservableRequest>& observables,
                             const SimulationSetup& setup) {
    const SystemCache cache(setup.system, setup.baths);
    out << "t";
    for (const auto& o : observables) out << ',' << o.name;
    out << ",trace,purity,cumulative_counts\n";
    for (std::size_t s = 0; s < res.snapshots.size(); ++s) {
        const HierarchyState& h = res.snapshots[s];
        const Complex xi = setup.packet.xi(h.time);
        out << detail::decimal17(h.time);
        for (const auto& o : observables) {
            out << ',' << detail::decimal17(evaluate_observable(o, h, setup.field, cache, xi,
                                                                res.cumulative_counts[s]));
        }
        const Matrix rho = reduced_state(h, setup.field);
        out << ',' << detail::decimal17(rho.trace().real());
        out << ',' << detail::decimal17((rho * rho).trace().real());
        out << ',' << detail::decimal17(res.cumulative_counts[s]);
        out << '\n';
    }
}

inline void write_series_csv_file(const std::string& path, const TrajectoryResult& res,
                                  const std::vector<ObservableRequest>& observables,
                                  const SimulationSetup& setup) {
    std::ofstream out(path);
    if (!out) throw ValidationError("cannot open output file: " + path);
    write_series_csv(out, res, observables, setup);
}

inline void write_ensemble_csv(std::ostream& out, const EnsembleSummary& summary) {
    out << "t";
    for (const auto& c : summary.columns) {
        out << ",mean_" << c << ",var_" << c << ",stderr_" << c;
    }
    out << '\n';
    for (std::size_t s = 0; s < summary.times.size(); ++s) {
        out << detail::decimal17(summary.times[s]);
        for (std::size_t o = 0; o < summary.columns.size(); ++o) {
            out << ',' << detail::decimal17(summary.mean[s][o]);
            out << ',' << detail::decimal17(summary.variance[s][o]);
            out << ',' << detail::decimal17(summary.standard_error[s][o]);
        }
        out << '\n';
    }
}

inline void write_ensemble_csv_file(const std::string& path, const EnsembleSummary& summary) {
    std::ofstream out(path);
    if (!out) throw ValidationError("cannot open output file: " + path);
    write_ensemble_csv(out, summary);
}

// Flat snapshot of the ladder: time stamp plus one (m, n, row-major entries)
// item per stored block, for checkpointing and comparison dumps.
inline nlohmann::json snapshot_to_json(const HierarchyState& h) {
    nlohmann::json j;
    j["time"] = h.time;
    j["n_max"] = h.n_max();
    j["dim"] = h.dim();
    nlohmann::json blocks = nlohmann::json::array();
    h.blocks.for_each_stored([&](int m, int n, const Matrix& rho) {
        nlohmann::json entry;
        entry["m"] = m;
        entry["n"] = n;
        nlohmann::json re = nlohmann::json::array(), im = nlohmann::json::array();
        for (Eigen::Index r = 0; r < rho.rows(); ++r) {
            for (Eigen::Index c = 0; c < rho.cols(); ++c) {
                re.push_back(rho(r, c).real());
                im.push_back(rho(r, c).imag());
            }
        }
        entry["re"] = re;
        entry["im"] = im;
        blocks.push_back(entry);
    });
    j["blocks"] = blocks;
    return j;
}

inline HierarchyState snapshot_from_json(const nlohmann::json& j) {
    HierarchyState h;
    h.time = j.at("time").get<double>();
    const int n_max = j.at("n_max").get<int>();
    const auto dim = j.at("dim").get<Eigen::Index>();
    h.blocks = HierarchyBlocks(n_max, dim);
    for (const auto& entry : j.at("blocks")) {
        const int m = entry.at("m").get<int>();
        const int n = entry.at("n").get<int>();
        Matrix rho(dim, dim);
        const auto& re = entry.at("re");
        const auto& im = entry.at("im");
        for (Eigen::Index r = 0; r < dim; ++r) {
            for (Eigen::Index c = 0; c < dim; ++c) {
                const auto k = static_cast<std::size_t>(r * dim + c);
                rho(r, c) = Complex{re[k].get<double>(), im[k].get<double>()};
            }
        }
        h.blocks.stored(m, n) = rho;
    }
    return h;
}

} // namespace focktraj
