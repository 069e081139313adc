#pragma once

// Multi-frequency device synthesis on a shared process: velocity calibration,
// fs prediction, lithography checks, bank planning and table reports.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "nemsfit/error.hpp"
#include "nemsfit/geometry.hpp"
#include "nemsfit/metrics.hpp"

namespace nemsfit {

struct ProcessRules {
    double min_feature = 100e-9;
    double min_gap = 100e-9;
    double lambda_min = 400e-9;
    double lambda_max = 1800e-9;

    void validate() const {
        if (!(min_feature > 0.0 && min_gap > 0.0 && lambda_min > 0.0 && lambda_max > 0.0))
            throw PreconditionError("process rules: all values must be positive");
        if (!(lambda_min <= lambda_max)) throw PreconditionError("process rules: lambda range is inverted");
    }
};

struct VelocityObservation {
    double lambda = 0.0;  // m
    double fs = 0.0;      // Hz
};

struct VelocityCalibration {
    double v_p = 0.0;     // m/s, median of fs·λ
    double spread = 0.0;  // (max − min) / median of fs·λ
};

namespace detail {

inline double median(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

inline std::vector<double> velocity_products(const std::vector<VelocityObservation>& obs) {
    std::vector<double> p;
    p.reserve(obs.size());
    for (const auto& o : obs) p.push_back(o.fs * o.lambda);
    return p;
}

}  // namespace detail

inline VelocityCalibration calibrate_velocity(const std::vector<VelocityObservation>& obs) {
    if (obs.empty()) throw PreconditionError("calibrate_velocity: no observations");
    const auto p = detail::velocity_products(obs);
    const double med = detail::median(p);
    const auto [lo, hi] = std::minmax_element(p.begin(), p.end());
    return {med, (*hi - *lo) / med};
}

/// Indices whose fs·λ exceeds `reference` by more than `threshold` (fraction).
inline std::vector<std::size_t> velocity_outliers(const std::vector<VelocityObservation>& obs, double reference,
                                                  double threshold = 0.15) {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < obs.size(); ++i)
        if (obs[i].fs * obs[i].lambda > reference * (1.0 + threshold)) out.push_back(i);
    return out;
}

inline double predict_fs(double lambda, double v_p) {
    if (!(lambda > 0.0) || !(v_p > 0.0)) throw PreconditionError("predict_fs: inputs must be positive");
    return v_p / lambda;
}

struct LithoFinding {
    std::string rule;     // which rule is violated
    double value = 0.0;   // offending dimension, m
    double limit = 0.0;   // rule limit, m
};

/// Lithography findings for one geometry; limits are inclusive.
inline std::vector<LithoFinding> check_lithography(const DeviceGeometry& g, const ProcessRules& rules) {
    g.validate();
    std::vector<LithoFinding> out;
    // Relative slack so that exactly-on-limit dimensions pass despite decimal rounding.
    auto below = [](double v, double limit) { return v < limit * (1.0 - 1e-9); };
    const double finger = g.coverage * g.lambda / 2.0;
    const double edge = g.coverage * g.lambda / 4.0;
    const double gap = (1.0 - g.coverage) * g.lambda / 2.0;
    if (below(finger, rules.min_feature)) out.push_back({"interior electrode width below min_feature", finger, rules.min_feature});
    if (g.topology == Topology::LVR && below(edge, rules.min_feature))
        out.push_back({"LVR edge electrode width below min_feature", edge, rules.min_feature});
    if (below(gap, rules.min_gap)) out.push_back({"electrode gap below min_gap", gap, rules.min_gap});
    if (below(g.lambda, rules.lambda_min)) out.push_back({"wavelength below lambda range", g.lambda, rules.lambda_min});
    if (g.lambda > rules.lambda_max * (1.0 + 1e-9)) out.push_back({"wavelength above lambda range", g.lambda, rules.lambda_max});
    return out;
}

/// LVR below `threshold_hz`, d-LVR at or above it.
struct TopologyPolicy {
    double threshold_hz = 0.0;
    Topology below = Topology::LVR;
    Topology above = Topology::DLVR;

    Topology choose(double f) const { return f < threshold_hz ? below : above; }
};

/// Fields every planned geometry starts from; λ and topology are filled per target.
struct GeometryTemplate {
    AcousticMode mode = AcousticMode::S0;
    int n_elements = 80;
    int n_pairs = 80;
    double aperture_lambdas = 10.0;
    double coverage = 0.5;
    double film_h = 100e-9;
    double metal_tm = 20e-9;
    double angle_theta = 30.0;
};

struct PlanEntry {
    std::vector<double> targets;           // Hz; several when merged
    std::optional<DeviceGeometry> geometry;
    std::vector<LithoFinding> findings;
    std::string error;                     // non-empty when this entry failed
};

/// One geometry per distinct target wavelength (λ = v_p/f rounded to 1 nm).
inline std::vector<PlanEntry> plan_bank(const std::vector<double>& targets, double v_p, const ProcessRules& rules,
                                        const TopologyPolicy& policy = {}, const GeometryTemplate& tmpl = {}) {
    if (!(v_p > 0.0)) throw PreconditionError("plan_bank: v_p must be positive");
    rules.validate();
    std::vector<PlanEntry> out;
    std::vector<long> lambdas_nm;
    for (double f : targets) {
        if (!(f > 0.0)) throw PreconditionError("plan_bank: targets must be positive");
        const long nm = std::lround(v_p / f * 1e9);
        if (auto it = std::find(lambdas_nm.begin(), lambdas_nm.end(), nm); it != lambdas_nm.end()) {
            out[static_cast<std::size_t>(it - lambdas_nm.begin())].targets.push_back(f);
            continue;
        }
        lambdas_nm.push_back(nm);
        PlanEntry e;
        e.targets.push_back(f);
        const double lam = static_cast<double>(nm) * 1e-9;
        if (lam < rules.lambda_min * (1.0 - 1e-9) || lam > rules.lambda_max * (1.0 + 1e-9)) {
            char buf[160];
            std::snprintf(buf, sizeof buf, "wavelength %ld nm outside process range [%.0f, %.0f] nm", nm,
                          rules.lambda_min * 1e9, rules.lambda_max * 1e9);
            e.error = buf;
            out.push_back(std::move(e));
            continue;
        }
        DeviceGeometry g;
        g.lambda = lam;
        g.topology = policy.choose(f);
        g.mode = tmpl.mode;
        g.n_elements = tmpl.n_elements;
        g.n_pairs = tmpl.n_pairs;
        g.aperture = tmpl.aperture_lambdas * lam;
        g.coverage = tmpl.coverage;
        g.film_h = tmpl.film_h;
        g.metal_tm = tmpl.metal_tm;
        g.angle_theta = tmpl.angle_theta;
        e.findings = check_lithography(g, rules);
        e.geometry = g;
        out.push_back(std::move(e));
    }
    return out;
}

struct TableReport {
    std::string markdown;
    std::string csv;
};

namespace detail {

inline std::string fmt(const char* f, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, v);
    return buf;
}

inline std::string fmt_q(double q) { return std::isfinite(q) ? fmt("%.0f", q) : "inf"; }

}  // namespace detail

/// Rows in input order: λ [nm], f_s [GHz], Q_s, Q_p, Q_m, k_t², C_0 [fF], FoM.
/// A geometry with λ = 0 (unknown) renders a dash in the λ column.
inline TableReport render_table(const std::vector<std::pair<DeviceGeometry, ResonatorMetrics>>& rows) {
    if (rows.empty()) throw PreconditionError("render_table: no rows");
    static const char* heads[] = {"λ [nm]", "f_s [GHz]", "Q_s", "Q_p", "Q_m", "k_t²", "C_0 [fF]", "FoM"};
    TableReport rep;
    std::ostringstream md, csv;
    md << '|';
    for (const char* h : heads) md << ' ' << h << " |";
    md << "\n|";
    for (std::size_t i = 0; i < std::size(heads); ++i) md << "---|";
    md << '\n';
    for (std::size_t i = 0; i < std::size(heads); ++i) csv << (i ? "," : "") << heads[i];
    csv << '\n';
    for (const auto& [g, m] : rows) {
        const std::vector<std::string> cells{
            g.lambda > 0.0 ? detail::fmt("%.0f", g.lambda * 1e9) : "-",
            detail::fmt("%.3f", m.fs * 1e-9),
            detail::fmt_q(m.qs),
            m.qp ? detail::fmt_q(*m.qp) : "-",
            detail::fmt_q(m.qm),
            m.kt2 ? detail::fmt("%.1f%%", *m.kt2 * 100.0) : "-",
            detail::fmt("%.1f", m.c0 * 1e15),
            m.fom ? (std::isfinite(*m.fom) ? detail::fmt("%.0f", *m.fom) : "inf") : "-",
        };
        md << '|';
        for (const auto& c : cells) md << ' ' << c << " |";
        md << '\n';
        for (std::size_t i = 0; i < cells.size(); ++i) csv << (i ? "," : "") << cells[i];
        csv << '\n';
    }
    rep.markdown = md.str();
    rep.csv = csv.str();
    return rep;
}

}  // namespace nemsfit
