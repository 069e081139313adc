#include <cmath>
#include <numbers>

#include <gtest/gtest.h>

#include "nemsfit/extract.hpp"
#include "nemsfit/transduce.hpp"
#include "support.hpp"

using namespace nemsfit;
using testsupport::rel;

namespace {

DeviceGeometry geom(Topology t, int n, double lambda = 1e-6, double c = 0.5) {
    DeviceGeometry g;
    g.topology = t;
    g.n_elements = n;
    g.lambda = lambda;
    g.coverage = c;
    g.aperture = 10 * lambda;
    return g;
}

// Composite Simpson on each electrode, independent of the closed form.
double overlap_simpson(const ElectrodeLayout& l, int n, int intervals = 10000) {
    const double k = n * std::numbers::pi / l.plate_width;
    double sum = 0.0;
    for (const auto& e : l.electrodes) {
        const double h = e.width() / intervals;
        double s = std::cos(k * e.left) + std::cos(k * e.right);
        for (int i = 1; i < intervals; ++i) s += (i % 2 ? 4.0 : 2.0) * std::cos(k * (e.left + i * h));
        sum += e.polarity * s * h / 3.0;
    }
    return sum;
}

double eta_of(const ModeSpectrum& s, int n) {
    for (const auto& m : s.modes)
        if (m.n == n) return m.eta;
    return 0.0;
}

}  // namespace

TEST(Layout, Dlvr) {
    const auto l = build_layout(geom(Topology::DLVR, 5));
    EXPECT_NEAR(l.plate_width, 2.5e-6, 1e-18);
    ASSERT_EQ(l.electrodes.size(), 5u);
    EXPECT_NEAR(l.electrodes[0].center(), 0.25e-6, 1e-18);
    EXPECT_NEAR(l.electrodes[4].center(), 2.25e-6, 1e-18);
    for (std::size_t i = 0; i < 5; ++i) {
        EXPECT_NEAR(l.electrodes[i].width(), 0.25e-6, 1e-18);
        EXPECT_EQ(l.electrodes[i].polarity, i % 2 ? -1 : 1);
    }
    EXPECT_EQ(l.design_index(), 5);
}

TEST(Layout, LvrHalfWidthEdges) {
    const auto l = build_layout(geom(Topology::LVR, 5));
    EXPECT_NEAR(l.plate_width, 2e-6, 1e-18);
    EXPECT_NEAR(l.electrodes.front().left, 0.0, 1e-18);
    EXPECT_NEAR(l.electrodes.front().width(), 0.125e-6, 1e-18);
    EXPECT_NEAR(l.electrodes.back().right, 2e-6, 1e-18);
    EXPECT_NEAR(l.electrodes.back().width(), 0.125e-6, 1e-18);
    EXPECT_NEAR(l.electrodes[2].width(), 0.25e-6, 1e-18);
    EXPECT_EQ(l.design_index(), 4);
}

TEST(Layout, Rejections) {
    EXPECT_THROW(build_layout(geom(Topology::DLVR, 1)), PreconditionError);
    EXPECT_THROW(build_layout(geom(Topology::DLVR, 5, 0.0)), PreconditionError);
    EXPECT_THROW(build_layout(geom(Topology::DLVR, 5, 1e-6, 1.0)), PreconditionError);
}

TEST(Coupling, DlvrFiveElementsSplitsAroundDesign) {
    const auto l = build_layout(geom(Topology::DLVR, 5));
    const auto s = mode_couplings(l, 5400, 20);
    const auto r = ranked_modes(s);
    ASSERT_GE(r.size(), 2u);
    const int a = std::min(r[0].n, r[1].n), b = std::max(r[0].n, r[1].n);
    EXPECT_EQ(a, 4);
    EXPECT_EQ(b, 6);
    // The design mode itself is suppressed by the polarity pattern.
    const double o4 = electrode_overlap(l, 4), o5 = electrode_overlap(l, 5);
    EXPECT_LT(o5 * o5, 1e-9 * o4 * o4);
    EXPECT_EQ(eta_of(s, 5), 0.0);
    EXPECT_NEAR(s.design_frequency, 5.4e9, 1.0);
    EXPECT_NEAR(r[0].f, r[0].n * 5400 / 5e-6, 1e-3);
}

TEST(Coupling, MatchesQuadrature) {
    for (auto t : {Topology::LVR, Topology::DLVR})
        for (int n_el : {3, 5, 8}) {
            const auto l = build_layout(geom(t, n_el, 1e-6, 0.37));
            double peak = 0.0;
            for (int n = 1; n <= 40; ++n) peak = std::max(peak, std::abs(electrode_overlap(l, n)));
            for (int n = 1; n <= 40; ++n)
                EXPECT_NEAR(electrode_overlap(l, n), overlap_simpson(l, n), 1e-8 * peak) << n_el << " n=" << n;
        }
}

TEST(Coupling, NormalizedAndPruningKeepsWeight) {
    const auto s = mode_couplings(build_layout(geom(Topology::DLVR, 12)), 5400, 96);
    double sum = 0.0;
    for (const auto& m : s.modes) sum += m.eta;
    EXPECT_NEAR(sum, 1.0, 1e-12);
    EXPECT_GE(s.retained_before_renorm, 0.999);
}

TEST(Coupling, ConvergesInNmax) {
    // The normalization tail falls off like 1/n_max.
    const auto l = build_layout(geom(Topology::DLVR, 5));
    const double ref = eta_of(mode_couplings(l, 5400, 16000), 4);
    double prev = 1.0;
    for (int n_max : {50, 100, 200, 400, 800}) {
        const double d = rel(eta_of(mode_couplings(l, 5400, n_max), 4), ref);
        EXPECT_LT(d, 0.6 * prev) << n_max;
        prev = d;
    }
    EXPECT_LT(prev, 5e-3);
}

TEST(Coupling, NmaxTooSmall) {
    EXPECT_THROW(mode_couplings(build_layout(geom(Topology::DLVR, 5)), 5400, 9), PreconditionError);
    EXPECT_THROW(mode_couplings(build_layout(geom(Topology::DLVR, 5)), 0.0, 20), PreconditionError);
}

TEST(Coupling, LvrSingleDominantMode) {
    const auto l = build_layout(geom(Topology::LVR, 5));
    const auto r = ranked_modes(mode_couplings(l, 5400, 16));
    EXPECT_EQ(r[0].n, 4);
    EXPECT_GT(r[0].eta, 0.85);
    EXPECT_LT(r[1].eta, 0.2 * r[0].eta);
    EXPECT_NEAR(r[0].f, 5.4e9, 1.0);
}

TEST(Coupling, ScaleInvariant) {
    const auto a = mode_couplings(build_layout(geom(Topology::DLVR, 7, 1e-6)), 5400, 28);
    const auto b = mode_couplings(build_layout(geom(Topology::DLVR, 7, 2e-6)), 5400, 28);
    ASSERT_EQ(a.modes.size(), b.modes.size());
    for (std::size_t i = 0; i < a.modes.size(); ++i) {
        EXPECT_NEAR(a.modes[i].eta, b.modes[i].eta, 1e-12);
        EXPECT_LT(rel(a.modes[i].f, 2 * b.modes[i].f), 1e-12);
    }
}

TEST(Coupling, ContinuousInCoverage) {
    const double a = eta_of(mode_couplings(build_layout(geom(Topology::DLVR, 5, 1e-6, 0.5)), 5400, 20), 4);
    const double b = eta_of(mode_couplings(build_layout(geom(Topology::DLVR, 5, 1e-6, 0.5 + 1e-6)), 5400, 20), 4);
    EXPECT_LT(std::abs(a - b), 1e-4);
}

TEST(Coupling, DeltaElectrodesAgreeForNarrowFingers) {
    const auto l = build_layout(geom(Topology::DLVR, 5, 1e-6, 0.01));
    const double full = electrode_overlap(l, 4), delta = electrode_overlap(l, 4, true);
    EXPECT_LT(rel(full, delta), 1e-3);
}

TEST(SpectrumToMbvd, LvrDominantBranch) {
    const auto s = mode_couplings(build_layout(geom(Topology::LVR, 5)), 5400, 16);
    const auto m = spectrum_to_mbvd(s, 50e-15, 0.2, 800);
    const auto d = m.branches[dominant_branch(m)];
    EXPECT_LT(rel(d.fs(), 5.4e9), 1e-12);
    EXPECT_LT(rel(branch_kt2(d, m.c0), eta_of(s, 4) * 0.2), 1e-9);
    EXPECT_THROW(spectrum_to_mbvd(s, 50e-15, 1.5, 800), PreconditionError);
}

TEST(SpectrumToMbvd, FiveElementSplitPeaks) {
    const auto s = mode_couplings(build_layout(geom(Topology::DLVR, 5)), 5400, 20);
    const auto m = spectrum_to_mbvd(s, 50e-15, 0.2, 500);
    std::vector<double> grid;
    for (int i = 0; i < 8001; ++i) grid.push_back(3e9 + 5e9 * i / 8000.0);
    const auto c = by_prominence(detect_resonances(synthesize_admittance(m, grid)));
    ASSERT_GE(c.size(), 2u);
    const double lo = std::min(c[0].fs_est, c[1].fs_est), hi = std::max(c[0].fs_est, c[1].fs_est);
    EXPECT_LT(rel(lo, 4.32e9), 0.01);
    EXPECT_LT(rel(hi, 6.48e9), 0.01);
}

TEST(SpectrumToMbvd, LargeArrayHasSideModes) {
    const auto s = mode_couplings(build_layout(geom(Topology::DLVR, 60)), 5400, 240);
    const auto r = ranked_modes(s);
    int above = 0;
    for (const auto& m : r)
        if (10 * std::log10(m.eta / r[0].eta) > -40) ++above;
    EXPECT_GT(above, 2);
}

TEST(SplitStudy, OffsetShrinksAsOneOverN) {
    const std::vector<int> ns{5, 10, 20, 40, 80};
    const auto rows = split_study(geom(Topology::DLVR, 5), ns, 5400);
    ASSERT_EQ(rows.size(), ns.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        EXPECT_NEAR(rows[i].offset, 1.0 / ns[i], 1e-12);
        if (i) {
            EXPECT_GE(rows[i - 1].offset / rows[i].offset, 1.3);
        }
    }
    const auto lvr = split_study(geom(Topology::LVR, 5), {5, 9, 17}, 5400);
    for (const auto& r : lvr) EXPECT_NEAR(r.offset, 0.0, 1e-12);
    EXPECT_THROW(split_study(geom(Topology::DLVR, 5), {10, 5}, 5400), PreconditionError);
    EXPECT_THROW(split_study(geom(Topology::DLVR, 5), {}, 5400), PreconditionError);
}
