#include <numbers>
#include <random>

#include <gtest/gtest.h>

#include "nemsfit/extract.hpp"
#include "nemsfit/metrics.hpp"
#include "nemsfit/phase.hpp"
#include "nemsfit/pipeline.hpp"
#include "nemsfit/reference_devices.hpp"
#include "support.hpp"

using namespace nemsfit;
using testsupport::rel;

namespace {

std::vector<double> linspace(double a, double b, int n) {
    std::vector<double> v(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) v[static_cast<std::size_t>(i)] = a + (b - a) * i / (n - 1);
    return v;
}

ComplexTrace capacitor(double c0, const std::vector<double>& grid) {
    MbvdModel m;
    m.c0 = c0;
    return synthesize_admittance(m, grid);
}

MbvdModel two_branch(double ratio) {
    MbvdModel m;
    m.c0 = 100e-15;
    m.branches.push_back(branch_from_metrics(3.0e9, 800, 0.10, m.c0));
    m.branches.push_back(branch_from_metrics(3.3e9, 800, 0.10 / ratio, m.c0));
    return m;
}

}  // namespace

// ------------------------------------------------------------------ detection

TEST(Detect, PureCapacitorHasNoResonance) {
    EXPECT_TRUE(detect_resonances(capacitor(1e-13, linspace(1e9, 3e9, 401))).empty());
}

TEST(Detect, RowASingleCandidate) {
    const auto m = bvd_from_row(reference_row('A'));
    const auto grid = sweep_grid(2.99e9, resonance_frequencies(m).fp);
    const auto c = detect_resonances(synthesize_admittance(m, grid));
    ASSERT_EQ(c.size(), 1u);
    EXPECT_LE(std::abs(c[0].fs_est - 2.99e9), grid[1] - grid[0]);
    ASSERT_TRUE(c[0].fp_est);
    EXPECT_GT(c[0].prominence_db, kDefaultProminenceDb);
}

TEST(Detect, TwoBranchesAscending) {
    const auto c = detect_resonances(synthesize_admittance(two_branch(10.0), linspace(2.6e9, 3.8e9, 4001)));
    ASSERT_EQ(c.size(), 2u);
    EXPECT_LT(c[0].fs_est, c[1].fs_est);
    EXPECT_NEAR(c[0].fs_est, 3.0e9, 1e6);
    EXPECT_NEAR(c[1].fs_est, 3.3e9, 1e6);
}

TEST(Detect, TooShort) {
    EXPECT_THROW(detect_resonances(capacitor(1e-13, linspace(1e9, 2e9, 15))), PreconditionError);
}

TEST(Detect, CountMatchesWellSeparatedBranches) {
    // Four branches, > 5 bandwidths apart; the weakest is below the threshold.
    MbvdModel m;
    m.c0 = 100e-15;
    m.branches.push_back(branch_from_metrics(1.0e9, 500, 0.1, m.c0));
    m.branches.push_back(branch_from_metrics(1.2e9, 500, 0.02, m.c0));
    m.branches.push_back(branch_from_metrics(1.4e9, 500, 0.005, m.c0));
    m.branches.push_back(branch_from_metrics(1.6e9, 500, 1e-6, m.c0));
    const auto c = detect_resonances(synthesize_admittance(m, linspace(0.9e9, 1.8e9, 20001)));
    EXPECT_EQ(c.size(), 3u);
}

TEST(Detect, TiesBrokenByLowerFrequency) {
    std::vector<ResonanceCandidate> c(2);
    c[0].fs_est = 1e9;
    c[0].prominence_db = 10;
    c[1].fs_est = 2e9;
    c[1].prominence_db = 10;
    const auto r = by_prominence({c[1], c[0]});
    EXPECT_EQ(r[0].fs_est, 2e9);  // stable: input order kept on ties
    const auto r2 = by_prominence(c);
    EXPECT_EQ(r2[0].fs_est, 1e9);
}

// ------------------------------------------------------------------ C0

TEST(C0, ExactCapacitor) {
    EXPECT_LT(rel(c0_from_offresonance(capacitor(99.2e-15, linspace(1e9, 3e9, 201)), std::vector<ResonanceCandidate>{}),
                  99.2e-15),
              1e-12);
}

TEST(C0, NoisyCapacitor) {
    const auto t = add_complex_noise(capacitor(100e-15, linspace(1e9, 3e9, 1001)), -100, 3);
    EXPECT_LT(rel(c0_from_offresonance(t, std::vector<ResonanceCandidate>{}), 100e-15), 5e-3);
}

TEST(C0, AllExcluded) {
    const auto t = capacitor(1e-13, linspace(1e9, 3e9, 101));
    ResonanceCandidate c;
    c.span_begin = 0;
    c.span_end = 100;
    EXPECT_THROW(c0_from_offresonance(t, std::vector<ResonanceCandidate>{c}), PreconditionError);
}

TEST(C0, InductiveBackground) {
    ComplexTrace t;
    for (double f : linspace(1e9, 2e9, 50)) {
        t.freqs.push_back(f);
        t.values.push_back(cplx(0, -1e-3));
    }
    EXPECT_THROW(c0_from_offresonance(t, std::vector<ResonanceCandidate>{}), PreconditionError);
}

TEST(C0, InvariantUnderExcludedBranch) {
    const auto grid = linspace(1e9, 3e9, 4001);
    const auto bare = capacitor(80e-15, grid);
    MbvdModel m;
    m.c0 = 80e-15;
    m.branches.push_back(branch_from_metrics(2e9, 1000, 0.1, m.c0));
    const auto t = synthesize_admittance(m, grid);
    const auto c = detect_resonances(t);
    ASSERT_EQ(c.size(), 1u);
    const double a = c0_from_offresonance(bare, c);
    const double b = c0_from_offresonance(t, c);
    // The branch still loads the off-resonance points; its bias stays below cm.
    EXPECT_LT(std::abs(b - a), m.branches[0].cm);
    EXPECT_LT(rel(a, 80e-15), 1e-12);
}

// ------------------------------------------------------------------ phase-slope Q

TEST(PhaseQ, LosslessExceedsCap) {
    MbvdModel m{100e-15, 0, 0, {MotionalBranch::from_fs(0.0, 2e9, 10e-15)}};
    const auto grid = dense_grid_around(2e9, 1e4);
    EXPECT_GT(q_from_phase_slope(synthesize_admittance(m, grid), 2e9), 1e6);
}

TEST(PhaseQ, RowPBranch) {
    MbvdModel m;
    m.c0 = 99.2e-15;
    m.branches.push_back(branch_from_metrics(1.87e9, 1750, 0.327, m.c0));
    const auto t = synthesize_admittance(m, dense_grid_around(1.87e9, 1750));
    EXPECT_LT(rel(q_from_phase_slope(t, 1.87e9), 1750), 0.02);
}

TEST(PhaseQ, ConstantPhaseIsZero) {
    ComplexTrace t;
    for (double f : linspace(0.9e9, 1.1e9, 101)) {
        t.freqs.push_back(f);
        t.values.push_back(std::polar(1e-3 * f / 1e9, 0.3));
    }
    EXPECT_NEAR(q_from_phase_slope(t, 1e9), 0.0, 1e-9);
}

TEST(PhaseQ, Preconditions) {
    const auto t = capacitor(1e-13, linspace(1e9, 2e9, 101));
    EXPECT_THROW(q_from_phase_slope(t, 3e9), PreconditionError);
    const auto sparse = capacitor(1e-13, linspace(1e9, 10e9, 20));
    EXPECT_THROW(q_from_phase_slope(sparse, 5e9), PreconditionError);
}

TEST(PhaseQ, CoarseGridUnwrapError) {
    // A high-Q resonance sampled far too coarsely, with no point on fs itself:
    // the phase flips from +90° to -90° between two neighbours.
    MbvdModel m{100e-15, 0, 0, {MotionalBranch::from_fs(0.05, 2e9, 10e-15)}};
    const auto t = synthesize_admittance(m, linspace(1.9e9, 2.1e9, 102));
    EXPECT_THROW(q_from_phase_slope(t, 2e9), PhaseUnwrapError);
}

TEST(PhaseQ, ConvergesUnderGridRefinement) {
    MbvdModel m;
    m.c0 = 99.2e-15;
    m.branches.push_back(branch_from_metrics(1.87e9, 1750, 0.327, m.c0));
    const double fs = 1.87e9;
    // Reference: very dense grid centred on fs.
    const double q_ref = q_from_phase_slope(synthesize_admittance(m, dense_grid_around(fs, 1e6, 401)), fs);
    EXPECT_LT(rel(q_ref, 1750), 1e-3);
    double prev_err = 0.0;
    for (int k = 0; k < 3; ++k) {
        const int pts = 100 * (1 << k) + 1;
        const double half = 4.0 * fs / 1750.0;
        // Grids offset from fs by a third of a step so the stencil is never centred exactly.
        std::vector<double> g;
        const double step = 2 * half / (pts - 1);
        for (int i = 0; i < pts; ++i) g.push_back(fs - half + step / 3.0 + i * step);
        const double err = std::abs(q_from_phase_slope(synthesize_admittance(m, g), fs) - q_ref);
        if (k > 0) {
            EXPECT_LT(err, 0.5 * prev_err) << "doubling " << k;
        }
        prev_err = err;
    }
}

// ------------------------------------------------------------------ initial guess

TEST(InitialGuess, RowLSeedQuality) {
    const auto& r = reference_row('L');
    const auto m = bvd_from_row(r);
    const auto grid = sweep_grid(r.fs(), resonance_frequencies(m).fp);
    const auto t = synthesize_admittance(m, grid);
    const auto c = detect_resonances(t);
    ASSERT_EQ(c.size(), 1u);
    const auto seed = initial_guess(t, c);
    EXPECT_EQ(seed.r0, 0.0);
    EXPECT_EQ(seed.rs, 0.0);
    EXPECT_LT(rel(seed.branches[0].fs(), r.fs()), 1e-3);
    EXPECT_LT(rel(branch_kt2(seed.branches[0], seed.c0), r.kt2()), 0.15);
    const double ratio = seed.branches[0].rm / m.branches[0].rm;
    EXPECT_GT(ratio, 0.5);
    EXPECT_LT(ratio, 2.0);
}

TEST(InitialGuess, FallbackWithoutFp) {
    const auto& r = reference_row('L');
    const auto m = bvd_from_row(r);
    // Grid stops before fp.
    const auto t = synthesize_admittance(m, linspace(0.8 * r.fs(), 1.01 * r.fs(), 1601));
    const auto c = detect_resonances(t);
    ASSERT_EQ(c.size(), 1u);
    EXPECT_FALSE(c[0].fp_est);
    const auto seed = initial_guess(t, c);
    EXPECT_LT(rel(seed.branches[0].cm, 0.05 * seed.c0), 1e-12);
}

TEST(InitialGuess, NoCandidates) {
    const auto t = capacitor(1e-13, linspace(1e9, 2e9, 101));
    EXPECT_THROW(initial_guess(t, {}), PreconditionError);
}
