#pragma once

// End-to-end analysis of one device admittance trace:
// detect -> seed -> select branch count -> metrics.

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "nemsfit/extract.hpp"
#include "nemsfit/fitkernel.hpp"
#include "nemsfit/metrics.hpp"
#include "nemsfit/netparams.hpp"

namespace nemsfit {

struct AnalysisOptions {
    double threshold_db = kDefaultProminenceDb;
    FitOptions fit;
    bool raw_q = false;  // also report Q_s measured on the raw trace
};

struct Analysis {
    std::vector<ResonanceCandidate> candidates;
    FitResult fit;
    ResonatorMetrics metrics;
};

inline Analysis analyze_trace(const ComplexTrace& trace, const AnalysisOptions& options = {}) {
    trace.validate();
    Analysis a;
    a.candidates = detect_resonances(trace, options.threshold_db);
    if (a.candidates.empty()) throw PreconditionError("no resonance above the prominence threshold");
    a.fit = select_branch_count(trace, a.candidates, options.fit);
    a.metrics = metrics_from_model(a.fit.model, trace.freqs, options.raw_q ? &trace : nullptr);
    return a;
}

/// Add complex white Gaussian noise whose RMS magnitude is `level_db` below
/// the median |value|. Deterministic for a given seed.
inline ComplexTrace add_complex_noise(const ComplexTrace& t, double level_db, std::uint64_t seed) {
    std::vector<double> mag;
    mag.reserve(t.size());
    for (const auto& v : t.values) mag.push_back(std::abs(v));
    std::nth_element(mag.begin(), mag.begin() + static_cast<std::ptrdiff_t>(mag.size() / 2), mag.end());
    const double sigma = mag[mag.size() / 2] * std::pow(10.0, level_db / 20.0) / std::sqrt(2.0);
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> n(0.0, sigma);
    ComplexTrace out = t;
    for (auto& v : out.values) {
        const double re = n(rng);
        const double im = n(rng);
        v += cplx(re, im);
    }
    return out;
}

}  // namespace nemsfit
