#pragma once

// Reference X-cut LN LVR / d-LVR device rows (S0 at YZ30°, SH0 at YZ10°)
// and helpers that turn a row into an equivalent-circuit model.

#include <array>
#include <cmath>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "nemsfit/geometry.hpp"
#include "nemsfit/mbvd.hpp"
#include "nemsfit/metrics.hpp"

namespace nemsfit {

struct ReferenceRow {
    char id;
    AcousticMode mode;
    Topology topology;
    double lambda_nm;
    double fs_ghz;
    double qs;
    double qp;
    double qm;
    double kt2_pct;
    double c0_ff;
    double fom;

    double fs() const { return fs_ghz * 1e9; }
    double kt2() const { return kt2_pct / 100.0; }
    double c0() const { return c0_ff * 1e-15; }
    double lambda() const { return lambda_nm * 1e-9; }
};

inline constexpr std::array<ReferenceRow, 22> kReferenceRows{{
    {'A', AcousticMode::S0, Topology::LVR, 1800, 2.99, 261, 549, 997, 18.4, 17.6, 48},
    {'B', AcousticMode::S0, Topology::LVR, 1200, 4.54, 288, 84, 316, 15.9, 28.2, 46},
    {'C', AcousticMode::S0, Topology::LVR, 900, 6.12, 234, 82, 247, 12.7, 23.8, 30},
    {'D', AcousticMode::S0, Topology::LVR, 720, 7.65, 187, 197, 230, 8.5, 50.7, 13},
    {'E', AcousticMode::S0, Topology::DLVR, 1800, 3.00, 316, 1383, 1318, 19.9, 93.6, 63},
    {'F', AcousticMode::S0, Topology::DLVR, 1200, 4.56, 321, 393, 505, 18.8, 89.8, 60},
    {'G', AcousticMode::S0, Topology::DLVR, 900, 6.15, 277, 297, 335, 16.0, 93.1, 44},
    {'H', AcousticMode::S0, Topology::DLVR, 720, 7.77, 259, 245, 230, 11.7, 79.7, 30},
    {'I', AcousticMode::S0, Topology::DLVR, 560, 9.74, 101, 100, 105, 6.9, 148, 7},
    {'J', AcousticMode::S0, Topology::DLVR, 480, 14.47, 105, 56, 121, 4.0, 31.4, 4},
    {'K', AcousticMode::S0, Topology::DLVR, 400, 16.21, 55, 56, 71, 5.8, 71.7, 3},
    {'L', AcousticMode::SH0, Topology::LVR, 1800, 1.87, 477, 588, 1143, 29.7, 51.4, 142},
    {'M', AcousticMode::SH0, Topology::LVR, 1200, 2.83, 301, 228, 548, 24.4, 28.2, 73},
    {'N', AcousticMode::SH0, Topology::LVR, 900, 3.84, 242, 750, 490, 19.5, 35.5, 58},
    {'O', AcousticMode::SH0, Topology::LVR, 720, 4.99, 158, 107, 196, 13.7, 24.0, 22},
    {'P', AcousticMode::SH0, Topology::DLVR, 1800, 1.87, 400, 481, 1750, 32.7, 99.2, 137},
    {'Q', AcousticMode::SH0, Topology::DLVR, 1200, 2.86, 262, 212, 1368, 29.3, 111.7, 77},
    {'R', AcousticMode::SH0, Topology::DLVR, 900, 3.92, 332, 1374, 1219, 23.7, 86.1, 78},
    {'S', AcousticMode::SH0, Topology::DLVR, 720, 5.00, 277, 335, 904, 20.1, 103.6, 56},
    {'T', AcousticMode::SH0, Topology::DLVR, 560, 6.50, 299, 488, 694, 14.0, 41.7, 42},
    {'U', AcousticMode::SH0, Topology::DLVR, 480, 7.57, 239, 199, 285, 11.1, 22.5, 27},
    {'V', AcousticMode::SH0, Topology::DLVR, 400, 8.98, 163, 244, 244, 9.2, 106.1, 15},
}};

inline const ReferenceRow& reference_row(char id) {
    for (const auto& r : kReferenceRows)
        if (r.id == id) return r;
    throw PreconditionError(std::string("unknown reference row '") + id + "'");
}

/// Listed FoM disagrees with Q_s·k_t² by more than ±1.5.
inline bool fom_inconsistent(const ReferenceRow& r) { return std::abs(r.qs * r.kt2() - r.fom) > 1.5; }

/// Single-branch BVD (r0 = rs = 0) carrying the row's fs, Q_m, k_t² and C_0.
inline MbvdModel bvd_from_row(const ReferenceRow& r) {
    MbvdModel m;
    m.c0 = r.c0();
    m.branches.push_back(branch_from_metrics(r.fs(), r.qm, r.kt2(), r.c0()));
    return m;
}

/// Row model with a series rs chosen so the phase-slope Q_s matches the row
/// Q_s. When Q_s is not below the rs = 0 value it cannot be reached and rs stays 0.
inline MbvdModel mbvd_from_row(const ReferenceRow& r) {
    MbvdModel m = bvd_from_row(r);
    const double fs = r.fs();
    auto qs_at = [&](double rs) {
        MbvdModel t = m;
        t.rs = rs;
        return model_phase_q(t, fs, t.branches[0].qm(), false);
    };
    if (!(qs_at(0.0) > r.qs)) return m;
    double lo = 0.0, hi = m.branches[0].rm;
    while (qs_at(hi) > r.qs) hi *= 2.0;
    for (int it = 0; it < 100; ++it) {
        const double mid = 0.5 * (lo + hi);
        (qs_at(mid) > r.qs ? lo : hi) = mid;
    }
    m.rs = 0.5 * (lo + hi);
    return m;
}

/// Sweep grid used for synthesized measurements: `points` samples over [0.8·fs, 1.2·fp].
inline std::vector<double> sweep_grid(double fs, double fp, int points = 1601) {
    std::vector<double> g(static_cast<std::size_t>(points));
    const double a = 0.8 * fs, b = 1.2 * fp;
    for (int i = 0; i < points; ++i) g[static_cast<std::size_t>(i)] = a + (b - a) * i / (points - 1);
    return g;
}

}  // namespace nemsfit
