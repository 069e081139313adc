#pragma once

// Fit-free resonance analysis: peak detection, static capacitance and
// initial guesses for the MBVD fitter.

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "nemsfit/error.hpp"
#include "nemsfit/mbvd.hpp"
#include "nemsfit/netparams.hpp"
#include "nemsfit/phase.hpp"

namespace nemsfit {

inline constexpr double kDefaultProminenceDb = 3.0;
inline constexpr std::size_t kMinDetectPoints = 16;

struct ResonanceCandidate {
    double fs_est = 0.0;
    std::optional<double> fp_est;
    double prominence_db = 0.0;
    std::size_t peak_index = 0;
    std::size_t span_begin = 0;  // inclusive grid index
    std::size_t span_end = 0;    // inclusive grid index
};

namespace detail {

inline std::vector<double> magnitudes(const ComplexTrace& t) {
    std::vector<double> m;
    m.reserve(t.size());
    for (const auto& v : t.values) m.push_back(std::abs(v));
    return m;
}

// Topographic prominence of the interior maximum at i, in dB.
inline double prominence_db(const std::vector<double>& mag, std::size_t i) {
    double left = mag[i];
    for (std::size_t j = i; j-- > 0;) {
        if (mag[j] > mag[i]) break;
        left = std::min(left, mag[j]);
    }
    double right = mag[i];
    for (std::size_t j = i + 1; j < mag.size(); ++j) {
        if (mag[j] > mag[i]) break;
        right = std::min(right, mag[j]);
    }
    const double base = std::max(left, right);
    if (base <= 0.0) return std::numeric_limits<double>::infinity();
    return 20.0 * std::log10(mag[i] / base);
}

}  // namespace detail

/// Local maxima of |Y| whose prominence reaches `threshold_db`, ascending in frequency.
/// Each is paired with the |Y| minimum before the next detected peak as fp_est.
inline std::vector<ResonanceCandidate> detect_resonances(const ComplexTrace& trace,
                                                         double threshold_db = kDefaultProminenceDb) {
    if (trace.size() < kMinDetectPoints)
        throw PreconditionError("detect_resonances: trace needs at least 16 points");
    const auto mag = detail::magnitudes(trace);
    const std::size_t n = mag.size();

    std::vector<ResonanceCandidate> peaks;
    for (std::size_t i = 1; i + 1 < n; ++i) {
        // Plateaus report their lowest-frequency sample.
        if (!(mag[i] > mag[i - 1] && mag[i] >= mag[i + 1])) continue;
        const double p = detail::prominence_db(mag, i);
        if (p < threshold_db) continue;
        ResonanceCandidate c;
        c.peak_index = i;
        c.fs_est = trace.freqs[i];
        c.prominence_db = p;
        peaks.push_back(c);
    }

    for (std::size_t k = 0; k < peaks.size(); ++k) {
        auto& c = peaks[k];
        const std::size_t stop = k + 1 < peaks.size() ? peaks[k + 1].peak_index : n - 1;
        std::size_t jmin = c.peak_index;
        for (std::size_t j = c.peak_index + 1; j <= stop; ++j)
            if (mag[j] < mag[jmin]) jmin = j;
        if (jmin != c.peak_index && jmin != n - 1) c.fp_est = trace.freqs[jmin];

        double lo, hi;
        if (c.fp_est) {
            const double d = *c.fp_est - c.fs_est;
            lo = c.fs_est - d;
            hi = *c.fp_est + d;
        } else {
            // Half-prominence width on either side.
            const double half = mag[c.peak_index] / std::sqrt(2.0);
            std::size_t a = c.peak_index, b = c.peak_index;
            while (a > 0 && mag[a] > half) --a;
            while (b + 1 < n && mag[b] > half) ++b;
            const double w = std::max(trace.freqs[b] - trace.freqs[a], trace.freqs[1] - trace.freqs[0]);
            lo = c.fs_est - 3.0 * w;
            hi = c.fs_est + 3.0 * w;
        }
        c.span_begin = static_cast<std::size_t>(std::lower_bound(trace.freqs.begin(), trace.freqs.end(), lo) - trace.freqs.begin());
        c.span_end = static_cast<std::size_t>(std::upper_bound(trace.freqs.begin(), trace.freqs.end(), hi) - trace.freqs.begin());
        if (c.span_end > 0) --c.span_end;
        c.span_begin = std::min(c.span_begin, c.peak_index);
        c.span_end = std::max(c.span_end, c.peak_index);
    }
    return peaks;
}

/// Candidates ordered by decreasing prominence; equal prominences keep the lower frequency first.
inline std::vector<ResonanceCandidate> by_prominence(std::vector<ResonanceCandidate> c) {
    std::stable_sort(c.begin(), c.end(), [](const auto& a, const auto& b) { return a.prominence_db > b.prominence_db; });
    return c;
}

/// Static capacitance as the least-squares slope of Im(Y_dev) against ω over
/// grid points outside every exclusion span.
inline double c0_from_offresonance(const ComplexTrace& trace, std::span<const ResonanceCandidate> exclusion) {
    std::vector<bool> excluded(trace.size(), false);
    for (const auto& c : exclusion)
        for (std::size_t i = c.span_begin; i <= c.span_end && i < trace.size(); ++i) excluded[i] = true;
    const auto kept = static_cast<std::size_t>(std::count(excluded.begin(), excluded.end(), false));
    if (trace.empty() || kept * 10 < trace.size())
        throw PreconditionError("c0_from_offresonance: fewer than 10% of points outside resonances");

    double sxy = 0.0, sxx = 0.0;
    for (std::size_t i = 0; i < trace.size(); ++i) {
        if (excluded[i]) continue;
        const double w = kTwoPi * trace.freqs[i];
        sxy += w * trace.values[i].imag();
        sxx += w * w;
    }
    const double slope = sxy / sxx;
    if (!(slope > 0.0))
        throw PreconditionError("c0_from_offresonance: inductive background (slope " + std::to_string(slope) + " F)");
    return slope;
}

inline double c0_from_offresonance(const ComplexTrace& trace, const std::vector<ResonanceCandidate>& exclusion) {
    return c0_from_offresonance(trace, std::span<const ResonanceCandidate>(exclusion));
}

/// Seed one motional branch from a candidate. `background` is the admittance
/// already explained at the peak (static branch plus any fitted branches).
inline MotionalBranch seed_branch(const ComplexTrace& trace, const ResonanceCandidate& c, double c0, cplx background) {
    const double fs = c.fs_est;
    double cm = 0.05 * c0;
    if (c.fp_est && *c.fp_est > fs) {
        const double kt2 = kt2_from_frequencies(fs, *c.fp_est);
        const double r = kt2 / kKt2Scale;
        if (r > 0.0 && r < 1.0) cm = c0 * r / (1.0 - r);
    }
    const cplx motional = trace.values[c.peak_index] - background;
    double rm = std::abs(motional) > 0.0 ? 1.0 / std::abs(motional) : 1.0;
    if (!std::isfinite(rm) || rm <= 0.0) rm = 1.0;
    return MotionalBranch::from_fs(rm, fs, cm);
}

/// Starting model for the fitter: c0 from the off-resonance slope, one branch
/// per candidate, r0 = rs = 0.
inline MbvdModel initial_guess(const ComplexTrace& trace, const std::vector<ResonanceCandidate>& candidates) {
    if (candidates.empty()) throw PreconditionError("initial_guess: no resonance candidates");
    MbvdModel m;
    m.c0 = c0_from_offresonance(trace, candidates);
    for (const auto& c : candidates) {
        const double w = kTwoPi * c.fs_est;
        m.branches.push_back(seed_branch(trace, c, m.c0, cplx(0.0, w * m.c0)));
    }
    m.sort_branches();
    // Coincident seeds would break the strict ordering; nudge them apart.
    for (std::size_t k = 1; k < m.branches.size(); ++k) {
        if (!(m.branches[k].fs() > m.branches[k - 1].fs())) {
            auto& b = m.branches[k];
            b = MotionalBranch::from_fs(b.rm, m.branches[k - 1].fs() * (1.0 + 1e-6), b.cm);
        }
    }
    return m;
}

}  // namespace nemsfit
