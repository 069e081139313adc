#include <fstream>
#include <random>
#include <sstream>

#include <gtest/gtest.h>

#include "nemsfit/mbvd.hpp"
#include "nemsfit/netparams.hpp"
#include "nemsfit/serialize.hpp"
#include "nemsfit/touchstone.hpp"
#include "support.hpp"

using namespace nemsfit;
using testsupport::rel;

namespace {

Matrix2c mat(cplx a, cplx b, cplx c, cplx d) {
    Matrix2c m;
    m << a, b, c, d;
    return m;
}

NetworkRecord single(ParamKind kind, const Matrix2c& m, double z0 = 50.0) {
    NetworkRecord n;
    n.freqs = {1e9};
    n.matrices = {m};
    n.kind = kind;
    n.z0 = z0;
    return n;
}

double max_rel(const Matrix2c& a, const Matrix2c& b) {
    return (a - b).cwiseAbs().maxCoeff() / std::max(b.cwiseAbs().maxCoeff(), 1e-300);
}

// Random passive Y: symmetric part of G positive semidefinite plus arbitrary susceptance.
Matrix2c random_passive_y(std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    Eigen::Matrix2d a;
    a << u(rng), u(rng), u(rng), u(rng);
    const Eigen::Matrix2d g = (a * a.transpose()) * 0.02;
    Eigen::Matrix2d b;
    b << u(rng), u(rng), u(rng), u(rng);
    b *= 0.02;
    Matrix2c y;
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j) y(i, j) = cplx(g(i, j), b(i, j));
    return y;
}

std::string read(const std::string& p) {
    std::ifstream in(p);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

}  // namespace

// ------------------------------------------------------------------ parsing

TEST(Touchstone, ZeroMatrixRow) {
    const auto n = touchstone::parse("# GHZ S RI R 50\n1.0 0 0 0 0 0 0 0 0\n");
    ASSERT_EQ(n.size(), 1u);
    EXPECT_EQ(n.freqs[0], 1e9);
    EXPECT_EQ(n.z0, 50.0);
    EXPECT_EQ(n.kind, ParamKind::S);
    EXPECT_EQ(n.matrices[0].cwiseAbs().maxCoeff(), 0.0);
}

TEST(Touchstone, UnitMagnitudeZeroAngle) {
    const auto n = touchstone::parse("# GHZ S MA R 50\n1.0 1 0 1 0 1 0 1 0\n");
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j) EXPECT_EQ(n.matrices[0](i, j), cplx(1.0, 0.0));
}

TEST(Touchstone, DecibelHalfMagnitude) {
    const auto n = touchstone::parse(
        "# GHZ S DB R 50\n"
        "1.0 -100 0 -6.0206 0 -6.0206 0 -100 0\n"
        "1.1 -100 0 -6.0206 0 -6.0206 0 -100 0\n"
        "1.2 -100 0 -6.0206 0 -6.0206 0 -100 0\n");
    ASSERT_EQ(n.size(), 3u);
    for (const auto& m : n.matrices) EXPECT_NEAR(std::abs(m(1, 0)), 0.5, 1e-5);
}

TEST(Touchstone, DefaultOptionLineIsGhzMa50) {
    const auto n = touchstone::parse("2.5 1 90 0.5 0 0.5 0 1 0\n");
    EXPECT_EQ(n.freqs[0], 2.5e9);
    EXPECT_EQ(n.z0, 50.0);
    EXPECT_NEAR(n.matrices[0](0, 0).imag(), 1.0, 1e-15);
    EXPECT_NEAR(n.matrices[0](0, 0).real(), 0.0, 1e-15);
}

TEST(Touchstone, RowOrderIsS11S21S12S22) {
    const auto n = touchstone::parse("# HZ S RI R 50\n1 11 0 21 0 12 0 22 0\n");
    EXPECT_EQ(n.matrices[0](0, 0).real(), 11.0);
    EXPECT_EQ(n.matrices[0](1, 0).real(), 21.0);
    EXPECT_EQ(n.matrices[0](0, 1).real(), 12.0);
    EXPECT_EQ(n.matrices[0](1, 1).real(), 22.0);
}

TEST(Touchstone, UnitsCaseInsensitiveAndCommentsAndWrappedRows) {
    const auto n = touchstone::parse(
        "! header comment\n"
        "# mhz s ri r 75\n"
        "100 0.1 0 ! trailing comment\n"
        "  0.2 0 0.2 0\n"
        "  0.1 0\n"
        "200 0.1 0 0.2 0 0.2 0 0.1 0\n");
    ASSERT_EQ(n.size(), 2u);
    EXPECT_EQ(n.freqs[0], 100e6);
    EXPECT_EQ(n.z0, 75.0);
    EXPECT_EQ(n.matrices[0](1, 0).real(), 0.2);
}

TEST(Touchstone, KhzAndHzUnits) {
    EXPECT_EQ(touchstone::parse("# KHZ S RI R 50\n3 0 0 0 0 0 0 0 0\n").freqs[0], 3e3);
    EXPECT_EQ(touchstone::parse("# Hz S RI R 50\n3 0 0 0 0 0 0 0 0\n").freqs[0], 3.0);
}

TEST(Touchstone, MalformedOptionLineReportsLine) {
    try {
        touchstone::parse("! c\n# GHZ S XY R 50\n1 0 0 0 0 0 0 0 0\n");
        FAIL();
    } catch (const ParseError& e) {
        EXPECT_EQ(e.line(), 2u);
    }
    EXPECT_THROW(touchstone::parse("# GHZ Y RI R 50\n1 0 0 0 0 0 0 0 0\n"), ParseError);
    EXPECT_THROW(touchstone::parse("# GHZ S RI R\n1 0 0 0 0 0 0 0 0\n"), ParseError);
    EXPECT_THROW(touchstone::parse("# GHZ S RI R -5\n1 0 0 0 0 0 0 0 0\n"), ParseError);
}

TEST(Touchstone, NonMonotoneFrequenciesReportLine) {
    try {
        touchstone::parse("# GHZ S RI R 50\n2 0 0 0 0 0 0 0 0\n1 0 0 0 0 0 0 0 0\n");
        FAIL();
    } catch (const ParseError& e) {
        EXPECT_EQ(e.line(), 3u);
        EXPECT_NE(std::string(e.what()).find("non-monotone"), std::string::npos);
    }
}

TEST(Touchstone, WrongColumnCount) {
    try {
        touchstone::parse("# GHZ S RI R 50\n1 0 0 0 0 0 0 0 0 0 0\n");
        FAIL();
    } catch (const ParseError& e) {
        EXPECT_EQ(e.line(), 2u);
        EXPECT_NE(std::string(e.what()).find("column"), std::string::npos);
    }
    EXPECT_THROW(touchstone::parse("# GHZ S RI R 50\n1 0 0 0 0 0 0 0 0\n2 0 0 0 0\n"), ParseError);
}

TEST(Touchstone, UnsupportedPortCount) {
    EXPECT_THROW(touchstone::parse("# GHZ S RI R 50\n1 0.5 0\n2 0.5 0\n"), ParseError);
    EXPECT_THROW(touchstone::parse("# GHZ S RI R 50\n1 0 0 0 0 0 0 0 0\n", 4), ParseError);
    EXPECT_EQ(touchstone::ports_from_filename("dev.s1p"), 1);
    EXPECT_EQ(touchstone::ports_from_filename("DEV.S2P"), 2);
    EXPECT_FALSE(touchstone::ports_from_filename("dev.txt"));
}

TEST(Touchstone, EmptyInputIsAnError) { EXPECT_THROW(touchstone::parse(""), ParseError); }

TEST(Touchstone, NotANumber) {
    try {
        touchstone::parse("# GHZ S RI R 50\n1 0 0 zero 0 0 0 0 0\n");
        FAIL();
    } catch (const ParseError& e) {
        EXPECT_EQ(e.line(), 2u);
    }
}

TEST(Touchstone, FormatInvariance) {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> u(-0.9, 0.9);
    NetworkRecord net;
    for (int i = 0; i < 40; ++i) {
        net.freqs.push_back(1e9 + 1e7 * i);
        net.matrices.push_back(mat({u(rng), u(rng)}, {u(rng), u(rng)}, {u(rng), u(rng)}, {u(rng), u(rng)}));
    }
    for (auto fmt : {touchstone::Format::RI, touchstone::Format::MA, touchstone::Format::DB})
        for (auto unit : {touchstone::FreqUnit::Hz, touchstone::FreqUnit::GHz}) {
            const auto back = touchstone::parse(touchstone::write(net, fmt, unit));
            ASSERT_EQ(back.size(), net.size());
            for (std::size_t i = 0; i < net.size(); ++i) {
                EXPECT_LT(rel(back.freqs[i], net.freqs[i]), 1e-15);
                EXPECT_LT(max_rel(back.matrices[i], net.matrices[i]), 1e-9);
            }
        }
}

// ------------------------------------------------------------------ algebra

TEST(SToY, MatchedNetwork) {
    const auto y = s_to_y(single(ParamKind::S, Matrix2c::Zero()));
    EXPECT_EQ(y.kind, ParamKind::Y);
    EXPECT_LT(max_rel(y.matrices[0], mat(0.02, 0, 0, 0.02)), 1e-15);
}

TEST(SToY, Series100Ohm) {
    const auto y = s_to_y(single(ParamKind::S, mat(0.5, 0.5, 0.5, 0.5)));
    EXPECT_LT(max_rel(y.matrices[0], mat(0.01, -0.01, -0.01, 0.01)), 1e-14);
}

TEST(SToY, ShortCircuitIsSingular) {
    NetworkRecord n = single(ParamKind::S, mat(-1, 0, 0, -1));
    n.freqs = {2.5e9};
    try {
        s_to_y(n);
        FAIL();
    } catch (const SingularMatrixError& e) {
        EXPECT_EQ(e.frequency(), 2.5e9);
    }
}

TEST(SToY, RequiresSRecord) {
    EXPECT_THROW(s_to_y(single(ParamKind::Y, Matrix2c::Zero())), PreconditionError);
    EXPECT_THROW(y_to_s(single(ParamKind::S, Matrix2c::Zero())), PreconditionError);
}

TEST(YToS, Examples) {
    EXPECT_LT(y_to_s(single(ParamKind::Y, mat(0.02, 0, 0, 0.02))).matrices[0].cwiseAbs().maxCoeff(), 1e-16);
    EXPECT_LT(max_rel(y_to_s(single(ParamKind::Y, mat(0.01, -0.01, -0.01, 0.01))).matrices[0], mat(0.5, 0.5, 0.5, 0.5)),
              1e-14);
    EXPECT_THROW(y_to_s(single(ParamKind::Y, mat(-0.02, 0, 0, -0.02))), SingularMatrixError);
}

TEST(YToS, RoundTripRandomPassive) {
    std::mt19937_64 rng(2024);
    for (int k = 0; k < 100; ++k) {
        const Matrix2c y = random_passive_y(rng);
        const auto net = single(ParamKind::Y, y);
        const auto yy = s_to_y(y_to_s(net));
        EXPECT_LT(max_rel(yy.matrices[0], y), 1e-12) << "sample " << k;
        const auto s = y_to_s(net);
        const auto ss = y_to_s(s_to_y(s));
        EXPECT_LT(max_rel(ss.matrices[0], s.matrices[0]), 1e-12) << "sample " << k;
    }
}

TEST(YToS, ReciprocityPreserved) {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(-0.6, 0.6);
    for (int k = 0; k < 50; ++k) {
        const cplx s21(u(rng), u(rng));
        const auto y = s_to_y(single(ParamKind::S, mat({u(rng), u(rng)}, s21, s21, {u(rng), u(rng)})));
        EXPECT_LT(std::abs(y.matrices[0](0, 1) - y.matrices[0](1, 0)), 1e-12 * y.matrices[0].cwiseAbs().maxCoeff());
    }
}

TEST(ExtractY21, ConstantTrace) {
    NetworkRecord n;
    n.kind = ParamKind::Y;
    n.freqs = {1e9, 2e9, 3e9};
    n.matrices.assign(3, mat(0.01, -0.01, -0.01, 0.01));
    const auto t = extract_y21(n);
    ASSERT_EQ(t.size(), 3u);
    for (const auto& v : t.values) EXPECT_EQ(v, cplx(-0.01, 0.0));
}

TEST(ExtractY21, EmptyRecordGivesEmptyTrace) {
    NetworkRecord n;
    n.kind = ParamKind::Y;
    EXPECT_TRUE(extract_y21(n).empty());
}

TEST(Embedding, SeriesAndShunt) {
    NetworkRecord n = single(ParamKind::Y, mat(0.03, -0.01, -0.01, 0.02));
    EXPECT_EQ(device_admittance(n, Embedding::Series).values[0], cplx(0.01, 0));
    EXPECT_LT(rel(device_admittance(n, Embedding::Shunt).values[0], cplx(0.02, 0)), 1e-15);
}

TEST(Embedding, SeriesElementRoundTrip) {
    ComplexTrace t{{1e9, 2e9}, {cplx(1e-3, 2e-3), cplx(5e-4, -1e-3)}};
    const auto back = device_admittance(s_to_y(y_to_s(series_element_network(t))));
    for (std::size_t i = 0; i < t.size(); ++i) EXPECT_LT(rel(back.values[i], t.values[i]), 1e-12);
}

TEST(Golden, Y21MatchesStoredModel) {
    const auto net = touchstone::parse(read(testsupport::data("row_L.s2p")));
    const auto model = io::model_from_json(nlohmann::json::parse(read(testsupport::data("row_L_model.json"))));
    const auto y21 = extract_y21(s_to_y(net));
    const auto expect = synthesize_admittance(model, net.freqs);
    ASSERT_EQ(net.size(), 801u);
    for (std::size_t i = 0; i < net.size(); ++i) EXPECT_LT(rel(-y21.values[i], expect.values[i]), 1e-9);
}
