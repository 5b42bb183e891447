// scenario.hpp — Scenario files (JSON) and the built-in presets
//
// Complex matrices are nested arrays of [re, im] pairs. The packet, field,
// and system sections accept either explicit data or a preset name. dt is
// optional; when omitted it defaults to 1e-3 / max(|L^dag L|, 1/duration).

#pragma once

#include <cstdint>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "focktraj/ensemble.hpp"
#include "focktraj/integrator.hpp"
#include "focktraj/observables.hpp"
#include "focktraj/system_model.hpp"

namespace focktraj {

using Json = nlohmann::json;

namespace detail {

inline Matrix matrix_from_json(const Json& j) {
    if (!j.is_array() || j.empty()) throw ValidationError("matrix: expected a nested array");
    const auto rows = static_cast<Eigen::Index>(j.size());
    const auto cols = static_cast<Eigen::Index>(j[0].size());
    Matrix m(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r) {
        if (static_cast<Eigen::Index>(j[r].size()) != cols) {
            throw ValidationError("matrix: ragged rows");
        }
        for (Eigen::Index c = 0; c < cols; ++c) {
            const auto& e = j[r][c];
            if (!e.is_array() || e.size() != 2) {
                throw ValidationError("matrix: entries must be [re, im] pairs");
            }
            m(r, c) = Complex{e[0].get<double>(), e[1].get<double>()};
        }
    }
    return m;
}

inline Json matrix_to_json(const Matrix& m) {
    Json rows = Json::array();
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        Json row = Json::array();
        for (Eigen::Index c = 0; c < m.cols(); ++c) {
            row.push_back(Json::array({m(r, c).real(), m(r, c).imag()}));
        }
        rows.push_back(row);
    }
    return rows;
}

} // namespace detail

struct PacketSpec {
    std::string kind = "gaussian";
    double bandwidth_ratio = 1.0;
    double center = 0.0;
    double t_lo = 0.0, t_hi = 1.0;  // flat packet

    WavePacket build() const {
        if (kind == "gaussian") return make_gaussian_wavepacket(bandwidth_ratio, center);
        if (kind == "flat") return make_flat_wavepacket(t_lo, t_hi);
        throw ValidationError("unknown packet kind: " + kind);
    }
};

struct Scenario {
    SystemOperators system;
    std::vector<BathChannel> baths;
    PacketSpec packet_spec;
    FieldState field;
    Matrix initial_state;
    DetectionConfig detection;
    double t_start = 0.0, t_end = 0.0;
    std::optional<double> dt;
    std::vector<ObservableRequest> observables;
    std::uint64_t seed = 1;

    TimeGrid grid() const {
        TimeGrid g;
        g.t_start = t_start;
        g.t_end = t_end;
        if (dt) {
            g.dt = *dt;
        } else {
            Eigen::SelfAdjointEigenSolver<Matrix> es(system.coupling.adjoint() * system.coupling,
                                                     Eigen::EigenvaluesOnly);
            const double gamma_eff = es.eigenvalues().maxCoeff();
            const WavePacket p = packet_spec.build();
            const double bw = p.duration() > 0.0 ? 1.0 / p.duration() : 0.0;
            g.dt = 1e-3 / std::max({gamma_eff, bw, 1e-30});
        }
        g.validate();
        return g;
    }

    SimulationSetup setup() const {
        return SimulationSetup{system, baths, packet_spec.build(), field, initial_state,
                               detection, grid()};
    }
};

inline Scenario parse_scenario(const Json& j) {
    Scenario sc;

    const Json& sys = j.at("system");
    if (sys.contains("preset")) {
        const std::string preset = sys.at("preset").get<std::string>();
        if (preset != "two_level_atom") throw ValidationError("unknown system preset: " + preset);
        sc.system = two_level_atom(sys.value("decay_rate", 1.0), sys.value("detuning", 0.0));
    } else {
        sc.system = SystemOperators(detail::matrix_from_json(sys.at("scattering")),
                                    detail::matrix_from_json(sys.at("coupling")),
                                    detail::matrix_from_json(sys.at("hamiltonian")));
    }

    const Json& pk = j.at("packet");
    sc.packet_spec.kind = pk.value("kind", "gaussian");
    if (sc.packet_spec.kind == "gaussian") {
        sc.packet_spec.bandwidth_ratio = pk.at("bandwidth_ratio").get<double>();
        sc.packet_spec.center = pk.value("center", 0.0);
    } else if (sc.packet_spec.kind == "flat") {
        sc.packet_spec.t_lo = pk.at("t_lo").get<double>();
        sc.packet_spec.t_hi = pk.at("t_hi").get<double>();
    } else {
        throw ValidationError("unknown packet kind: " + sc.packet_spec.kind);
    }

    const Json& fd = j.at("field");
    const std::string fkind = fd.value("kind", "fock");
    if (fkind == "fock") {
        sc.field = FieldState::fock(fd.at("photons").get<int>());
    } else if (fkind == "coherent") {
        Complex alpha;
        if (fd.contains("alpha")) {
            alpha = Complex{fd.at("alpha")[0].get<double>(), fd.at("alpha")[1].get<double>()};
        } else {
            alpha = Complex{std::sqrt(fd.at("mean_photons").get<double>()), 0.0};
        }
        sc.field = FieldState::coherent(alpha, fd.at("truncation").get<int>());
    } else if (fkind == "custom-coeffs" || fkind == "custom") {
        sc.field = FieldState::custom(detail::matrix_from_json(fd.at("coeffs")));
    } else {
        throw ValidationError("unknown field kind: " + fkind);
    }

    if (j.contains("baths")) {
        for (const auto& b : j.at("baths")) {
            sc.baths.emplace_back(detail::matrix_from_json(b.at("coupling")),
                                  b.at("mean_occupation").get<double>());
        }
    }

    const Eigen::Index d = sc.system.dim;
    if (!j.contains("initial_state") || j.at("initial_state") == "ground") {
        sc.initial_state = Matrix::Zero(d, d);
        sc.initial_state(0, 0) = 1.0;
    } else if (j.at("initial_state").is_object() && j.at("initial_state").contains("basis")) {
        const auto k = j.at("initial_state").at("basis").get<Eigen::Index>();
        if (k < 0 || k >= d) throw ValidationError("initial_state: basis index out of range");
        sc.initial_state = Matrix::Zero(d, d);
        sc.initial_state(k, k) = 1.0;
    } else if (j.at("initial_state").is_object() && j.at("initial_state").contains("matrix")) {
        sc.initial_state = detail::matrix_from_json(j.at("initial_state").at("matrix"));
    } else {
        throw ValidationError("initial_state: expected \"ground\", {basis: k}, or {matrix: ...}");
    }
    require_density_matrix(sc.initial_state, 1e-10, "initial_state");

    if (j.contains("detection")) {
        const Json& det = j.at("detection");
        sc.detection.scheme = scheme_from_string(det.value("scheme", "counting"));
        sc.detection.phase = det.value("phase", 0.0);
        sc.detection.efficiency = det.value("efficiency", 1.0);
        const std::string stepper = det.value("stepper", "kraus");
        if (stepper == "kraus") sc.detection.stepper = StepperMode::kraus;
        else if (stepper == "euler") sc.detection.stepper = StepperMode::euler;
        else throw ValidationError("unknown stepper: " + stepper);
        const std::string noise = det.value("noise", "gaussian");
        if (noise == "gaussian") sc.detection.noise = QuadratureNoise::gaussian;
        else if (noise == "binary") sc.detection.noise = QuadratureNoise::binary;
        else throw ValidationError("unknown noise model: " + noise);
        sc.detection.validate();
    }

    const Json& grid = j.at("grid");
    sc.t_start = grid.at("t_start").get<double>();
    sc.t_end = grid.at("t_end").get<double>();
    if (grid.contains("dt")) sc.dt = grid.at("dt").get<double>();
    if (!(sc.t_start < sc.t_end)) throw ValidationError("grid: need t_start < t_end");

    if (j.contains("observables")) {
        for (const auto& o : j.at("observables")) {
            if (o.is_string()) {
                sc.observables.push_back(ObservableRequest::builtin(o.get<std::string>()));
            } else {
                sc.observables.push_back(ObservableRequest::custom(
                    o.at("name").get<std::string>(), detail::matrix_from_json(o.at("matrix"))));
            }
        }
    } else if (d == 2) {
        for (const char* name : {"excited_population", "bloch_x", "bloch_y", "bloch_z"}) {
            sc.observables.push_back(ObservableRequest::builtin(name));
        }
    }

    sc.seed = j.value("seed", std::uint64_t{1});
    return sc;
}

// ------------------------------ Presets --------------------------------------

// One-command reproductions of the stock experiments: a resonant two-level
// atom hit by Gaussian Fock packets, and truncated-coherent homodyne runs.
inline Json scenario_preset_json(const std::string& name) {
    const auto two_level_fock = [](int n) {
        return Json{
            {"system", {{"preset", "two_level_atom"}, {"decay_rate", 1.0}, {"detuning", 0.0}}},
            {"packet", {{"kind", "gaussian"}, {"bandwidth_ratio", 1.0}, {"center", 0.0}}},
            {"field", {{"kind", "fock"}, {"photons", n}}},
            {"initial_state", "ground"},
            {"detection", {{"scheme", "counting"}, {"efficiency", 1.0}}},
            {"grid", {{"t_start", -4.0}, {"t_end", 12.0}, {"dt", 1e-3}}},
            {"observables",
             {"excited_population", "bloch_x", "bloch_y", "bloch_z", "photon_flux"}},
            {"seed", 1},
        };
    };
    const auto coherent_homodyne = [](int trunc) {
        return Json{
            {"system", {{"preset", "two_level_atom"}, {"decay_rate", 1.0}, {"detuning", 0.0}}},
            {"packet", {{"kind", "gaussian"}, {"bandwidth_ratio", 1.0}, {"center", 0.0}}},
            {"field", {{"kind", "coherent"}, {"mean_photons", 5.0}, {"truncation", trunc}}},
            {"initial_state", "ground"},
            {"detection", {{"scheme", "homodyne"}, {"phase", 0.0}, {"efficiency", 1.0}}},
            {"grid", {{"t_start", -4.0}, {"t_end", 12.0}, {"dt", 1e-3}}},
            {"observables", {"excited_population", "bloch_x", "bloch_y", "bloch_z"}},
            {"seed", 1},
        };
    };
    // Gentle rectangular-packet scenario sized so the time-bin engine can
    // cover the whole packet with a handful of bins.
    if (name == "oracle-qubit") {
        return Json{
            {"system", {{"preset", "two_level_atom"}, {"decay_rate", 0.5}, {"detuning", 0.0}}},
            {"packet", {{"kind", "flat"}, {"t_lo", 0.0}, {"t_hi", 1.0}}},
            {"field", {{"kind", "fock"}, {"photons", 1}}},
            {"initial_state", "ground"},
            {"detection", {{"scheme", "counting"}, {"efficiency", 1.0}}},
            {"grid", {{"t_start", 0.0}, {"t_end", 1.0}, {"dt", 1e-3}}},
            {"observables", {"excited_population", "bloch_x", "bloch_z"}},
            {"seed", 7},
        };
    }
    if (name == "two-level-fock-n1") return two_level_fock(1);
    if (name == "two-level-fock-n2") return two_level_fock(2);
    if (name == "two-level-fock-n4") return two_level_fock(4);
    if (name == "coherent-homodyne-trunc2") return coherent_homodyne(2);
    if (name == "coherent-homodyne-trunc6") return coherent_homodyne(6);
    if (name == "coherent-homodyne-trunc10") return coherent_homodyne(10);
    if (name == "coherent-homodyne-exact") return coherent_homodyne(18);
    throw ValidationError("unknown preset: " + name);
}

inline std::vector<std::string> scenario_preset_names() {
    return {"two-level-fock-n1",        "two-level-fock-n2",
            "two-level-fock-n4",        "coherent-homodyne-trunc2",
            "coherent-homodyne-trunc6", "coherent-homodyne-trunc10",
            "coherent-homodyne-exact",  "oracle-qubit"};
}

// Accepts a preset name or a path to a JSON scenario file.
inline Scenario load_scenario(const std::string& name_or_path) {
    for (const auto& p : scenario_preset_names()) {
        if (p == name_or_path) return parse_scenario(scenario_preset_json(p));
    }
    std::ifstream in(name_or_path);
    if (!in) throw ValidationError("cannot open scenario file: " + name_or_path);
    Json j;
    try {
        in >> j;
    } catch (const std::exception& e) {
        throw ValidationError(std::string("scenario parse error: ") + e.what());
    }
    return parse_scenario(j);
}

} // namespace focktraj
