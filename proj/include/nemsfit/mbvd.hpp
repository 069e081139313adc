#pragma once

// Modified Butterworth-Van Dyke equivalent circuit.
//
//            rs
//   o----/\/\/---+-------------+---------- ... --+
//                |             |                 |
//               r0            rm_1              rm_k
//                |             |                 |
//               c0            lm_1              lm_k
//                |             |                 |
//                |            cm_1              cm_k
//   o------------+-------------+---------- ... --+
//
// Plain BVD is the r0 = rs = 0 special case.

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "nemsfit/error.hpp"
#include "nemsfit/netparams.hpp"

namespace nemsfit {

inline constexpr double kTwoPi = 2.0 * std::numbers::pi;
/// π²/8, the scale between the coupling fraction cm/(c0+cm) and k_t².
inline constexpr double kKt2Scale = std::numbers::pi * std::numbers::pi / 8.0;
/// Branches with smaller motional capacitance are treated as uncoupled.
inline constexpr double kMinMotionalCapacitance = 1e-21;

struct MotionalBranch {
    double rm = 0.0;  // Ω
    double lm = 0.0;  // H
    double cm = 0.0;  // F

    double fs() const { return 1.0 / (kTwoPi * std::sqrt(lm * cm)); }
    /// Unloaded mechanical Q, 2π fs lm / rm (infinite when lossless).
    double qm() const {
        return rm > 0.0 ? kTwoPi * fs() * lm / rm : std::numeric_limits<double>::infinity();
    }

    static MotionalBranch from_fs(double rm, double fs, double cm) {
        const double w = kTwoPi * fs;
        return {rm, 1.0 / (w * w * cm), cm};
    }
};

struct MbvdModel {
    double c0 = 0.0;  // F
    double r0 = 0.0;  // Ω, in series with c0
    double rs = 0.0;  // Ω, in series with everything
    std::vector<MotionalBranch> branches;

    void validate() const {
        if (!(c0 > 0.0)) throw PreconditionError("mbvd model: c0 must be positive");
        if (!(r0 >= 0.0) || !(rs >= 0.0)) throw PreconditionError("mbvd model: r0 and rs must be non-negative");
        for (std::size_t k = 0; k < branches.size(); ++k) {
            const auto& b = branches[k];
            if (!(b.rm >= 0.0) || !(b.lm > 0.0) || !(b.cm > 0.0))
                throw PreconditionError("mbvd model: branch " + std::to_string(k) + " has invalid R/L/C");
            if (k > 0 && !(b.fs() > branches[k - 1].fs()))
                throw PreconditionError("mbvd model: branch resonances not strictly increasing");
        }
    }

    void sort_branches() {
        std::stable_sort(branches.begin(), branches.end(),
                         [](const MotionalBranch& a, const MotionalBranch& b) { return a.fs() < b.fs(); });
    }

    bool lossless() const {
        return r0 == 0.0 && rs == 0.0 &&
               std::all_of(branches.begin(), branches.end(), [](const auto& b) { return b.rm == 0.0; });
    }
};

/// k_t² conventions. Only `PiSquaredOver8` is used by the reporting pipeline.
enum class Kt2Convention {
    PiSquaredOver8,  // (π²/8)(fp² − fs²)/fp²
    Ratio,           // (fp² − fs²)/fp²
    Ieee,            // (π/2)(fs/fp) / tan((π/2)(fs/fp))
};

inline double kt2_from_frequencies(double fs, double fp, Kt2Convention conv = Kt2Convention::PiSquaredOver8) {
    const double ratio = (fp * fp - fs * fs) / (fp * fp);
    switch (conv) {
        case Kt2Convention::PiSquaredOver8: return kKt2Scale * ratio;
        case Kt2Convention::Ratio: return ratio;
        case Kt2Convention::Ieee: {
            const double x = 0.5 * std::numbers::pi * fs / fp;
            return x / std::tan(x);
        }
    }
    return kKt2Scale * ratio;
}

/// Per-branch coupling (π²/8)·cm/(c0 + cm), no inter-branch correction.
inline double branch_kt2(const MotionalBranch& b, double c0) { return kKt2Scale * b.cm / (c0 + b.cm); }

/// Index of the branch with the largest motional capacitance.
inline std::size_t dominant_branch(const MbvdModel& m) {
    if (m.branches.empty()) throw PreconditionError("dominant_branch: model has no motional branch");
    std::size_t best = 0;
    for (std::size_t k = 1; k < m.branches.size(); ++k)
        if (m.branches[k].cm > m.branches[best].cm) best = k;
    return best;
}

namespace detail {

inline cplx static_admittance(const MbvdModel& m, double w) {
    const cplx jwc{0.0, w * m.c0};
    return jwc / (1.0 + jwc * m.r0);
}

inline cplx branch_admittance(const MotionalBranch& b, double w) {
    return 1.0 / cplx(b.rm, w * b.lm - 1.0 / (w * b.cm));
}

}  // namespace detail

/// Device admittance at one frequency (Hz).
inline cplx admittance(const MbvdModel& m, double f) {
    const double w = kTwoPi * f;
    cplx shunt = detail::static_admittance(m, w);
    for (const auto& b : m.branches) shunt += detail::branch_admittance(b, w);
    return shunt / (1.0 + m.rs * shunt);
}

inline ComplexTrace synthesize_admittance(const MbvdModel& m, std::span<const double> freqs) {
    ComplexTrace out{{freqs.begin(), freqs.end()}, {}};
    out.values.reserve(freqs.size());
    for (double f : freqs) {
        if (!(f > 0.0)) throw PreconditionError("synthesize_admittance: frequencies must be positive");
        out.values.push_back(admittance(m, f));
    }
    return out;
}

inline ComplexTrace synthesize_admittance(const MbvdModel& m, const std::vector<double>& freqs) {
    return synthesize_admittance(m, std::span<const double>(freqs));
}

/// Motional branch reproducing a reference (fs, Q_m, k_t², C_0) row.
inline MotionalBranch branch_from_metrics(double fs, double qm, double kt2, double c0) {
    if (!(fs > 0.0) || !(qm > 0.0) || !(c0 > 0.0) || !(kt2 > 0.0))
        throw PreconditionError("branch_from_metrics: fs, qm, kt2 and c0 must be positive");
    const double r = kt2 / kKt2Scale;
    if (r >= 1.0) throw PreconditionError("branch_from_metrics: k_t^2 * 8/pi^2 >= 1 is non-physical");
    const double cm = c0 * r / (1.0 - r);
    if (cm < kMinMotionalCapacitance)
        throw PreconditionError("branch_from_metrics: degenerate coupling (cm below 1e-21 F)");
    const double w = kTwoPi * fs;
    const double lm = 1.0 / (w * w * cm);
    return {w * lm / qm, lm, cm};
}

/// Series and parallel resonances of a model.
struct Resonances {
    std::vector<double> fs;             // per branch, closed form
    std::size_t dominant = 0;           // largest-cm branch
    double fp = 0.0;                    // dominant branch, fs·sqrt(1 + cm/c0)
    std::optional<double> fp_numeric;   // root of Im(Y_dev) = 0 above fs, if any
};

namespace detail {

// First upward zero crossing of Im(Y) in (lo, hi], refined by bisection.
inline std::optional<double> susceptance_root(const MbvdModel& m, double lo, double hi, int scan_points = 4001) {
    auto im = [&](double f) { return admittance(m, f).imag(); };
    double prev_f = lo;
    double prev = im(lo);
    for (int i = 1; i <= scan_points; ++i) {
        const double f = lo + (hi - lo) * i / scan_points;
        const double cur = im(f);
        if (std::isfinite(prev) && std::isfinite(cur) && prev < 0.0 && cur >= 0.0) {
            double a = prev_f, b = f;
            for (int it = 0; it < 200 && b - a > 1e-15 * b; ++it) {
                const double mid = 0.5 * (a + b);
                (im(mid) < 0.0 ? a : b) = mid;
            }
            return 0.5 * (a + b);
        }
        prev_f = f;
        prev = cur;
    }
    return std::nullopt;
}

}  // namespace detail

inline Resonances resonance_frequencies(const MbvdModel& m) {
    if (m.branches.empty()) throw PreconditionError("resonance_frequencies: model has no motional branch");
    Resonances r;
    for (const auto& b : m.branches) r.fs.push_back(b.fs());
    r.dominant = dominant_branch(m);
    const auto& d = m.branches[r.dominant];
    const double fs = r.fs[r.dominant];
    r.fp = fs * std::sqrt(1.0 + d.cm / m.c0);
    // Scan just above fs up to well past the closed-form estimate.
    const double lo = fs * (1.0 + 1e-9);
    const double hi = fs + 2.0 * (r.fp - fs);
    r.fp_numeric = detail::susceptance_root(m, lo, hi);
    return r;
}

}  // namespace nemsfit
