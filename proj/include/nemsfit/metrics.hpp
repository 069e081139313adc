#pragma once

#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "nemsfit/error.hpp"
#include "nemsfit/mbvd.hpp"
#include "nemsfit/phase.hpp"

namespace nemsfit {

struct BranchReport {
    double fs = 0.0;
    double qm = 0.0;
    double kt2 = 0.0;
};

/// One row of a resonator report. fp-derived values are absent when the
/// analysis grid does not reach the parallel resonance.
struct ResonatorMetrics {
    double fs = 0.0;                   // Hz
    std::optional<double> fp;          // Hz, closed form of the dominant branch
    std::optional<double> fp_numeric;  // Hz, Im(Y_dev) = 0 cross-check
    double qs = 0.0;
    std::optional<double> qp;
    double qm = 0.0;
    std::optional<double> kt2;         // fraction
    double c0 = 0.0;                   // F
    std::optional<double> fom;
    std::optional<double> qs_raw;      // phase-slope Q of the raw data at fs
    std::vector<BranchReport> branches;
    bool complete = true;
    std::string note;
};

/// Odd-length grid centred exactly on f0, wide enough to resolve a resonance of quality `q_hint`.
inline std::vector<double> dense_grid_around(double f0, double q_hint, int points = 401) {
    double half = f0 / (2.0 * kQFloor);
    if (std::isfinite(q_hint) && q_hint > 0.0) half = std::min(half, 4.0 * f0 / q_hint);
    std::vector<double> g(static_cast<std::size_t>(points));
    const int mid = points / 2;
    for (int i = 0; i < points; ++i) g[static_cast<std::size_t>(i)] = f0 + half * (i - mid) / mid;
    g[static_cast<std::size_t>(mid)] = f0;
    return g;
}

/// Phase-slope Q of Y_dev at f (resonance) or Z_dev at f (antiresonance), on a dense
/// resynthesis of the model.
inline double model_phase_q(const MbvdModel& m, double f, double q_hint, bool impedance) {
    if (m.lossless()) return std::numeric_limits<double>::infinity();
    auto t = synthesize_admittance(m, dense_grid_around(f, q_hint));
    if (impedance) t = reciprocal(t);
    return q_from_phase_slope(t, f);
}

/// Standard resonator metrics of a model. `grid` is the analysis sweep; the
/// dominant fs must lie inside it, fp-derived values are flagged when it does not reach fp.
/// When `raw` is given, Q_s is also measured directly on it.
inline ResonatorMetrics metrics_from_model(const MbvdModel& model, const std::vector<double>& grid,
                                           const ComplexTrace* raw = nullptr) {
    model.validate();
    if (grid.empty()) throw PreconditionError("metrics_from_model: empty grid");
    const Resonances res = resonance_frequencies(model);
    const auto& dom = model.branches[res.dominant];

    ResonatorMetrics out;
    out.fs = res.fs[res.dominant];
    out.c0 = model.c0;
    out.qm = dom.qm();
    out.fp_numeric = res.fp_numeric;
    for (const auto& b : model.branches) out.branches.push_back({b.fs(), b.qm(), branch_kt2(b, model.c0)});
    if (out.fs < grid.front() || out.fs > grid.back())
        throw PreconditionError("metrics_from_model: grid does not contain the series resonance");

    out.qs = model_phase_q(model, out.fs, out.qm, false);
    if (raw) {
        try {
            out.qs_raw = q_from_phase_slope(*raw, out.fs);
        } catch (const Error&) {
            out.qs_raw.reset();
        }
    }

    if (res.fp > grid.back()) {
        out.complete = false;
        out.note = "grid does not reach fp";
        return out;
    }
    out.fp = res.fp;
    out.kt2 = kt2_from_frequencies(out.fs, res.fp);
    out.qp = model_phase_q(model, res.fp, out.qm, true);
    out.fom = out.qs * *out.kt2;
    return out;
}

}  // namespace nemsfit
