#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <vector>

#include "nemsfit/error.hpp"
#include "nemsfit/netparams.hpp"

namespace nemsfit {

/// Lowest Q considered resolvable; sets the window the phase-slope estimator needs.
inline constexpr double kQFloor = 10.0;

/// Unwrap phases by nearest-multiple-of-2π continuation from the first sample.
inline std::vector<double> unwrap_phase(const std::vector<cplx>& values) {
    std::vector<double> out;
    out.reserve(values.size());
    double offset = 0.0;
    for (std::size_t i = 0; i < values.size(); ++i) {
        const double raw = std::arg(values[i]);
        if (i > 0) {
            const double prev = out.back();
            offset += 2.0 * std::numbers::pi * std::round((prev - (raw + offset)) / (2.0 * std::numbers::pi));
        }
        out.push_back(raw + offset);
    }
    return out;
}

/// Index of the grid point closest to f.
inline std::size_t nearest_index(const std::vector<double>& freqs, double f) {
    auto it = std::lower_bound(freqs.begin(), freqs.end(), f);
    if (it == freqs.end()) return freqs.size() - 1;
    std::size_t i = static_cast<std::size_t>(it - freqs.begin());
    if (i > 0 && f - freqs[i - 1] < freqs[i] - f) --i;
    return i;
}

/// Q = (f0/2)·|dφ/df| from a 5-point least-squares slope of the unwrapped phase
/// around f0. Pass Y_dev to get Q_s at fs, Z_dev to get Q_p at fp.
///
/// A purely reactive stencil that jumps by π (a lossless pole or zero) yields
/// +infinity. Throws PhaseUnwrapError when the grid is too coarse to unwrap.
inline double q_from_phase_slope(const ComplexTrace& trace, double f0) {
    if (trace.size() < 5 || f0 < trace.freqs.front() || f0 > trace.freqs.back())
        throw PreconditionError("q_from_phase_slope: f0 outside the trace");
    const double half_window = f0 / (2.0 * kQFloor);
    const auto in_window = std::count_if(trace.freqs.begin(), trace.freqs.end(),
                                         [&](double f) { return std::abs(f - f0) <= half_window; });
    if (in_window < 5) throw PreconditionError("q_from_phase_slope: fewer than 5 points near f0");

    std::size_t c = nearest_index(trace.freqs, f0);
    c = std::clamp<std::size_t>(c, 2, trace.size() - 3);

    std::array<double, 5> f{}, phi{};
    std::array<cplx, 5> v{};
    for (int k = 0; k < 5; ++k) {
        f[k] = trace.freqs[c - 2 + k];
        v[k] = trace.values[c - 2 + k];
    }

    bool reactive = true;
    for (const auto& z : v) reactive = reactive && std::abs(z.real()) <= 1e-12 * std::abs(z);
    if (reactive) {
        for (int k = 1; k < 5; ++k)
            if (std::abs(std::arg(v[k]) - std::arg(v[k - 1])) > 0.5 * std::numbers::pi)
                return std::numeric_limits<double>::infinity();
    }

    std::vector<cplx> local(v.begin(), v.end());
    const auto unwrapped = unwrap_phase(local);
    for (int k = 0; k < 5; ++k) phi[k] = unwrapped[k];
    for (int k = 1; k < 5; ++k)
        if (std::abs(phi[k] - phi[k - 1]) > 0.5 * std::numbers::pi)
            throw PhaseUnwrapError("q_from_phase_slope: phase step above pi/2 near " + std::to_string(f0) +
                                   " Hz; densify the grid");

    double fm = 0.0, pm = 0.0;
    for (int k = 0; k < 5; ++k) {
        fm += f[k];
        pm += phi[k];
    }
    fm /= 5.0;
    pm /= 5.0;
    double sxy = 0.0, sxx = 0.0;
    for (int k = 0; k < 5; ++k) {
        sxy += (f[k] - fm) * (phi[k] - pm);
        sxx += (f[k] - fm) * (f[k] - fm);
    }
    return 0.5 * f0 * std::abs(sxy / sxx);
}

/// Elementwise reciprocal, e.g. Z_dev from Y_dev.
inline ComplexTrace reciprocal(const ComplexTrace& t) {
    ComplexTrace out{t.freqs, {}};
    out.values.reserve(t.size());
    for (const auto& v : t.values) out.values.push_back(1.0 / v);
    return out;
}

}  // namespace nemsfit
