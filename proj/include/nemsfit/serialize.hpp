#pragma once

// JSON forms of the library's value types. SI units throughout; non-finite
// Q values are written as the string "inf".

#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "nemsfit/designkit.hpp"
#include "nemsfit/extract.hpp"
#include "nemsfit/fitkernel.hpp"
#include "nemsfit/mbvd.hpp"
#include "nemsfit/metrics.hpp"
#include "nemsfit/netparams.hpp"
#include "nemsfit/transduce.hpp"

namespace nemsfit::io {

using nlohmann::json;

inline constexpr const char* kModelTopology = "mbvd-series-rs/1";

inline json number(double v) {
    if (std::isfinite(v)) return v;
    if (std::isnan(v)) return "nan";
    return v > 0 ? "inf" : "-inf";
}

inline json number(const std::optional<double>& v) { return v ? number(*v) : json(nullptr); }

inline double read_number(const json& j) {
    if (j.is_string()) {
        const auto s = j.get<std::string>();
        if (s == "inf") return INFINITY;
        if (s == "-inf") return -INFINITY;
        if (s == "nan") return NAN;
        throw PreconditionError("json: unexpected string '" + s + "' where a number was expected");
    }
    return j.get<double>();
}

inline json complex_pair(cplx v) { return json::array({v.real(), v.imag()}); }

inline json network_to_json(const NetworkRecord& net) {
    json j;
    j["kind"] = net.kind == ParamKind::S ? "S" : "Y";
    j["z0_ohm"] = net.z0;
    j["freqs_hz"] = net.freqs;
    json mats = json::array();
    for (const auto& m : net.matrices)
        mats.push_back(json::array({complex_pair(m(0, 0)), complex_pair(m(0, 1)), complex_pair(m(1, 0)), complex_pair(m(1, 1))}));
    j["matrices"] = std::move(mats);
    return j;
}

inline json trace_to_json(const ComplexTrace& t) {
    json vals = json::array();
    for (const auto& v : t.values) vals.push_back(complex_pair(v));
    return {{"freqs_hz", t.freqs}, {"values_s", std::move(vals)}};
}

inline json model_to_json(const MbvdModel& m) {
    json br = json::array();
    for (const auto& b : m.branches)
        br.push_back({{"rm_ohm", b.rm}, {"lm_h", b.lm}, {"cm_f", b.cm}, {"fs_hz", b.fs()}, {"qm", number(b.qm())}});
    return {{"topology", kModelTopology}, {"c0_f", m.c0}, {"r0_ohm", m.r0}, {"rs_ohm", m.rs}, {"branches", std::move(br)}};
}

inline MbvdModel model_from_json(const json& j) {
    try {
        if (j.value("topology", std::string()) != kModelTopology)
            throw PreconditionError(std::string("model json: topology tag must be \"") + kModelTopology + "\"");
        MbvdModel m;
        m.c0 = j.at("c0_f").get<double>();
        m.r0 = j.value("r0_ohm", 0.0);
        m.rs = j.value("rs_ohm", 0.0);
        for (const auto& b : j.at("branches")) {
            MotionalBranch br;
            br.rm = b.at("rm_ohm").get<double>();
            br.lm = b.at("lm_h").get<double>();
            br.cm = b.at("cm_f").get<double>();
            m.branches.push_back(br);
        }
        m.validate();
        return m;
    } catch (const json::exception& e) {
        throw PreconditionError(std::string("model json: ") + e.what());
    }
}

inline json metrics_to_json(const ResonatorMetrics& m) {
    json br = json::array();
    for (const auto& b : m.branches) br.push_back({{"fs_hz", b.fs}, {"qm", number(b.qm)}, {"kt2", b.kt2}});
    json j{{"fs_hz", m.fs},          {"fp_hz", number(m.fp)},  {"fp_numeric_hz", number(m.fp_numeric)},
           {"qs", number(m.qs)},     {"qp", number(m.qp)},     {"qm", number(m.qm)},
           {"kt2", number(m.kt2)},   {"c0_f", m.c0},           {"fom", number(m.fom)},
           {"branches", std::move(br)}, {"complete", m.complete}};
    if (m.qs_raw) j["qs_raw"] = number(m.qs_raw);
    if (!m.note.empty()) j["note"] = m.note;
    return j;
}

inline json fit_to_json(const FitResult& r, bool with_trace) {
    json j{{"model", model_to_json(r.model)}, {"cost", r.cost},           {"iterations", r.iterations},
           {"converged", r.converged},        {"residual_rms", r.residual_rms}, {"dominant_branch", r.dominant},
           {"branch_count", r.branch_count}};
    json cov = json::array();
    for (Eigen::Index a = 0; a < r.covariance.rows(); ++a) {
        json row = json::array();
        for (Eigen::Index b = 0; b < r.covariance.cols(); ++b) row.push_back(number(r.covariance(a, b)));
        cov.push_back(std::move(row));
    }
    j["log_parameter_covariance"] = std::move(cov);
    if (with_trace) j["cost_trace"] = r.cost_trace;
    return j;
}

inline json candidates_to_json(const std::vector<ResonanceCandidate>& cs) {
    json a = json::array();
    for (const auto& c : cs)
        a.push_back({{"fs_est_hz", c.fs_est},
                     {"fp_est_hz", number(c.fp_est)},
                     {"prominence_db", c.prominence_db},
                     {"peak_index", c.peak_index},
                     {"span", {c.span_begin, c.span_end}}});
    return a;
}

inline json geometry_to_json(const DeviceGeometry& g) {
    return {{"lambda_m", g.lambda},       {"topology", to_string(g.topology)}, {"mode", to_string(g.mode)},
            {"n_elements", g.n_elements}, {"n_pairs", g.n_pairs},            {"aperture_m", g.aperture},
            {"coverage", g.coverage},     {"film_h_m", g.film_h},            {"metal_tm_m", g.metal_tm},
            {"angle_theta_deg", g.angle_theta}};
}

inline json plan_to_json(const std::vector<PlanEntry>& plan) {
    json a = json::array();
    for (const auto& e : plan) {
        json j{{"targets_hz", e.targets}};
        if (e.geometry) j["geometry"] = geometry_to_json(*e.geometry);
        json f = json::array();
        for (const auto& x : e.findings) f.push_back({{"rule", x.rule}, {"value_m", x.value}, {"limit_m", x.limit}});
        j["findings"] = std::move(f);
        if (!e.error.empty()) j["error"] = e.error;
        a.push_back(std::move(j));
    }
    return a;
}

inline json spectrum_to_json(const ModeSpectrum& s) {
    json modes = json::array();
    for (const auto& m : s.modes)
        modes.push_back({{"n", m.n}, {"kx_rad_per_m", m.kx}, {"f_hz", m.f}, {"eta", m.eta}, {"nodes", m.nodes}});
    return {{"plate_width_m", s.plate_width},
            {"design_frequency_hz", s.design_frequency},
            {"retained_before_renorm", s.retained_before_renorm},
            {"modes", std::move(modes)}};
}

inline ProcessRules rules_from_json(const json& j) {
    ProcessRules r;
    try {
        r.min_feature = j.value("min_feature_m", r.min_feature);
        r.min_gap = j.value("min_gap_m", r.min_gap);
        if (j.contains("lambda_range_m")) {
            r.lambda_min = j.at("lambda_range_m").at(0).get<double>();
            r.lambda_max = j.at("lambda_range_m").at(1).get<double>();
        }
    } catch (const json::exception& e) {
        throw PreconditionError(std::string("process rules json: ") + e.what());
    }
    r.validate();
    return r;
}

}  // namespace nemsfit::io
