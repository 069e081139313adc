#pragma once

// One-dimensional electrode-sampling model of lateral-mode transduction.
//
// A free-edge plate of width W supports standing waves u_n(x) = cos(nπx/W)
// with n displacement nodes. Each electrode contributes its polarity times
// the overlap of u_n with the metallized interval, so
//
//   eta_n ∝ ( Σ_e p_e ∫_{a_e}^{b_e} cos(nπx/W) dx )²
//
// normalized over n = 1..n_max. With dispersionless velocity v_p the modal
// frequency is f_n = n·v_p/(2W).

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>
#include <vector>

#include "nemsfit/error.hpp"
#include "nemsfit/geometry.hpp"
#include "nemsfit/mbvd.hpp"

namespace nemsfit {

struct Electrode {
    double left = 0.0;   // m
    double right = 0.0;  // m
    int polarity = 1;    // +1 / -1

    double center() const { return 0.5 * (left + right); }
    double width() const { return right - left; }
};

struct ElectrodeLayout {
    double plate_width = 0.0;
    std::vector<Electrode> electrodes;
    double lambda = 0.0;
    double coverage = 0.5;
    Topology topology = Topology::DLVR;

    /// Mode index whose wavelength matches the electrode pitch.
    int design_index() const { return static_cast<int>(std::lround(2.0 * plate_width / lambda)); }
};

struct PlateMode {
    int n = 0;
    double kx = 0.0;   // rad/m
    double f = 0.0;    // Hz
    double eta = 0.0;  // normalized coupling weight
    int nodes = 0;
};

struct ModeSpectrum {
    std::vector<PlateMode> modes;
    double plate_width = 0.0;
    double design_frequency = 0.0;  // v_p / λ
    double retained_before_renorm = 1.0;
};

struct CouplingOptions {
    bool delta_electrodes = false;  // point electrodes at the finger centres
    double prune_relative = 1e-12;
};

/// Electrode layout for LVR (half-width edge fingers, W = (N-1)λ/2) or
/// d-LVR (full fingers, outer centres λ/4 from the edges, W = Nλ/2).
inline ElectrodeLayout build_layout(const DeviceGeometry& g) {
    const int n = g.n_elements;
    const double lam = g.lambda;
    const double c = g.coverage;
    if (n < 2) throw PreconditionError("build_layout: N must be at least 2");
    if (!(lam > 0.0)) throw PreconditionError("build_layout: lambda must be positive");
    if (!(c > 0.0 && c < 1.0)) throw PreconditionError("build_layout: coverage must be in (0, 1)");

    ElectrodeLayout out;
    out.lambda = lam;
    out.coverage = c;
    out.topology = g.topology;
    const double half = c * lam / 4.0;  // half of a full finger width c·λ/2
    if (g.topology == Topology::LVR) {
        out.plate_width = (n - 1) * lam / 2.0;
        for (int i = 0; i < n; ++i) {
            const double xc = i * lam / 2.0;
            out.electrodes.push_back({std::max(0.0, xc - half), std::min(out.plate_width, xc + half), i % 2 ? -1 : 1});
        }
    } else {
        out.plate_width = n * lam / 2.0;
        for (int i = 0; i < n; ++i) {
            const double xc = lam / 4.0 + i * lam / 2.0;
            out.electrodes.push_back({xc - half, xc + half, i % 2 ? -1 : 1});
        }
    }
    return out;
}

/// Polarity-weighted overlap of cos(nπx/W) with the electrodes, closed form.
inline double electrode_overlap(const ElectrodeLayout& layout, int n, bool delta_electrodes = false) {
    const double k = n * std::numbers::pi / layout.plate_width;
    double sum = 0.0;
    for (const auto& e : layout.electrodes) {
        if (delta_electrodes)
            sum += e.polarity * e.width() * std::cos(k * e.center());
        else
            sum += e.polarity * (std::sin(k * e.right) - std::sin(k * e.left)) / k;
    }
    return sum;
}

inline ModeSpectrum mode_couplings(const ElectrodeLayout& layout, double v_p, int n_max,
                                   const CouplingOptions& opt = {}) {
    if (!(v_p > 0.0)) throw PreconditionError("mode_couplings: phase velocity must be positive");
    if (n_max < 2 * layout.design_index())
        throw PreconditionError("mode_couplings: n_max must be at least twice the design index " +
                                std::to_string(layout.design_index()));
    ModeSpectrum spec;
    spec.plate_width = layout.plate_width;
    spec.design_frequency = v_p / layout.lambda;

    std::vector<PlateMode> all;
    double total = 0.0, peak = 0.0;
    for (int n = 1; n <= n_max; ++n) {
        const double ov = electrode_overlap(layout, n, opt.delta_electrodes);
        PlateMode m;
        m.n = n;
        m.kx = n * std::numbers::pi / layout.plate_width;
        m.f = n * v_p / (2.0 * layout.plate_width);
        m.eta = ov * ov;
        m.nodes = n;
        total += m.eta;
        peak = std::max(peak, m.eta);
        all.push_back(m);
    }
    if (!(total > 0.0)) throw PreconditionError("mode_couplings: layout couples to no mode");

    double kept = 0.0;
    for (auto& m : all) {
        m.eta /= total;
        if (m.eta * total >= opt.prune_relative * peak) {
            kept += m.eta;
            spec.modes.push_back(m);
        }
    }
    spec.retained_before_renorm = kept;
    for (auto& m : spec.modes) m.eta /= kept;
    return spec;
}

/// Modes sorted by decreasing weight (ties: lower n first).
inline std::vector<PlateMode> ranked_modes(const ModeSpectrum& spec) {
    auto modes = spec.modes;
    std::stable_sort(modes.begin(), modes.end(), [](const auto& a, const auto& b) { return a.eta > b.eta; });
    return modes;
}

/// One motional branch per mode with k_t²_n = eta_n·kt2_total. Modes too weak
/// to form a branch above the motional-capacitance floor are dropped.
inline MbvdModel spectrum_to_mbvd(const ModeSpectrum& spec, double c0, double kt2_total, double q_assumed) {
    if (!(kt2_total > 0.0 && kt2_total < 1.0)) throw PreconditionError("spectrum_to_mbvd: kt2_total must be in (0, 1)");
    MbvdModel m;
    m.c0 = c0;
    for (const auto& mode : spec.modes) {
        const double kt2 = mode.eta * kt2_total;
        if (kt2 / kKt2Scale * c0 < kMinMotionalCapacitance) continue;
        m.branches.push_back(branch_from_metrics(mode.f, q_assumed, kt2, c0));
    }
    if (m.branches.empty()) throw PreconditionError("spectrum_to_mbvd: no mode strong enough to form a branch");
    m.sort_branches();
    return m;
}

struct SplitRow {
    int n_elements = 0;
    PlateMode first;   // largest weight
    PlateMode second;  // runner-up
    double offset = 0.0;  // |f_first − v_p/λ| / (v_p/λ)
};

/// Two strongest modes and the dominant-mode offset from v_p/λ for each N.
/// n_max is `n_max_multiple` times each layout's design index.
inline std::vector<SplitRow> split_study(const DeviceGeometry& base, const std::vector<int>& n_sweep, double v_p,
                                         int n_max_multiple = 4, const CouplingOptions& opt = {}) {
    if (n_sweep.empty()) throw PreconditionError("split_study: empty N sweep");
    if (!std::is_sorted(n_sweep.begin(), n_sweep.end()))
        throw PreconditionError("split_study: N sweep must be ascending");
    std::vector<SplitRow> rows;
    for (int n : n_sweep) {
        DeviceGeometry g = base;
        g.n_elements = n;
        const auto layout = build_layout(g);
        const auto spec = mode_couplings(layout, v_p, std::max(2, n_max_multiple) * std::max(1, layout.design_index()), opt);
        const auto ranked = ranked_modes(spec);
        SplitRow r;
        r.n_elements = n;
        r.first = ranked.at(0);
        if (ranked.size() > 1) r.second = ranked[1];
        r.offset = std::abs(r.first.f - spec.design_frequency) / spec.design_frequency;
        rows.push_back(r);
    }
    return rows;
}

}  // namespace nemsfit
