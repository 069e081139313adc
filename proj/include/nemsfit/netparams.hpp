#pragma once

#include <algorithm>
#include <complex>
#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "nemsfit/error.hpp"

namespace nemsfit {

using cplx = std::complex<double>;
using Matrix2c = Eigen::Matrix2cd;

enum class ParamKind { S, Y };

/// Frequency grid plus one 2x2 S or Y matrix per point.
///
/// Invariants: freqs strictly increasing and positive, one matrix per
/// frequency, z0 > 0. Use `validate()` after building one by hand.
struct NetworkRecord {
    std::vector<double> freqs;
    std::vector<Matrix2c> matrices;
    ParamKind kind = ParamKind::S;
    double z0 = 50.0;

    std::size_t size() const noexcept { return freqs.size(); }

    void validate() const {
        if (matrices.size() != freqs.size())
            throw PreconditionError("network record: " + std::to_string(matrices.size()) +
                                    " matrices for " + std::to_string(freqs.size()) + " frequencies");
        if (!(z0 > 0.0)) throw PreconditionError("network record: z0 must be positive");
        for (std::size_t i = 0; i < freqs.size(); ++i) {
            if (!(freqs[i] > 0.0)) throw PreconditionError("network record: non-positive frequency");
            if (i > 0 && !(freqs[i] > freqs[i - 1]))
                throw PreconditionError("network record: frequencies not strictly increasing");
        }
    }
};

/// Complex one-port quantity (admittance or impedance) sampled on a grid.
struct ComplexTrace {
    std::vector<double> freqs;
    std::vector<cplx> values;

    std::size_t size() const noexcept { return freqs.size(); }
    bool empty() const noexcept { return freqs.empty(); }

    void validate() const {
        if (values.size() != freqs.size())
            throw PreconditionError("complex trace: length mismatch");
        for (std::size_t i = 1; i < freqs.size(); ++i)
            if (!(freqs[i] > freqs[i - 1]))
                throw PreconditionError("complex trace: frequencies not strictly increasing");
    }
};

/// How the resonator sits between the two ports.
///
/// Series: the device is a through element, Y_dev = -Y21.
/// Shunt:  Y_dev = Y11 + Y21 (port-1 shunt branch of the pi equivalent).
enum class Embedding { Series, Shunt };

inline const char* to_string(Embedding e) { return e == Embedding::Series ? "series" : "shunt"; }

namespace detail {

// |det| below 1e-12 of the larger diagonal/antidiagonal product counts as singular.
inline bool nearly_singular(const Matrix2c& m) {
    const cplx det = m.determinant();
    const double scale = std::max(std::abs(m(0, 0) * m(1, 1)), std::abs(m(0, 1) * m(1, 0)));
    return det == cplx(0.0) || std::abs(det) <= 1e-12 * scale;
}

}  // namespace detail

/// Y = (1/z0) (I - S)(I + S)^-1 at every point.
inline NetworkRecord s_to_y(const NetworkRecord& net) {
    if (net.kind != ParamKind::S) throw PreconditionError("s_to_y: record is not S-parameters");
    NetworkRecord out{net.freqs, {}, ParamKind::Y, net.z0};
    out.matrices.reserve(net.size());
    const Matrix2c I = Matrix2c::Identity();
    for (std::size_t i = 0; i < net.size(); ++i) {
        const Matrix2c& s = net.matrices[i];
        const Matrix2c sum = I + s;
        if (detail::nearly_singular(sum)) throw SingularMatrixError(net.freqs[i], "s_to_y: (I + S) is singular");
        out.matrices.push_back((I - s) * sum.inverse() / net.z0);
    }
    return out;
}

/// S = (I - z0 Y)(I + z0 Y)^-1 at every point.
inline NetworkRecord y_to_s(const NetworkRecord& net) {
    if (net.kind != ParamKind::Y) throw PreconditionError("y_to_s: record is not Y-parameters");
    NetworkRecord out{net.freqs, {}, ParamKind::S, net.z0};
    out.matrices.reserve(net.size());
    const Matrix2c I = Matrix2c::Identity();
    for (std::size_t i = 0; i < net.size(); ++i) {
        const Matrix2c zy = net.z0 * net.matrices[i];
        const Matrix2c sum = I + zy;
        if (detail::nearly_singular(sum)) throw SingularMatrixError(net.freqs[i], "y_to_s: (I + z0 Y) is singular");
        out.matrices.push_back((I - zy) * sum.inverse());
    }
    return out;
}

/// Through admittance Y21 per frequency.
inline ComplexTrace extract_y21(const NetworkRecord& net) {
    if (net.kind != ParamKind::Y) throw PreconditionError("extract_y21: record is not Y-parameters");
    ComplexTrace out{net.freqs, {}};
    out.values.reserve(net.size());
    for (const auto& m : net.matrices) out.values.push_back(m(1, 0));
    return out;
}

/// One-port device admittance under the chosen embedding.
inline ComplexTrace device_admittance(const NetworkRecord& net, Embedding embedding = Embedding::Series) {
    if (net.kind != ParamKind::Y) throw PreconditionError("device_admittance: record is not Y-parameters");
    ComplexTrace out{net.freqs, {}};
    out.values.reserve(net.size());
    for (const auto& m : net.matrices)
        out.values.push_back(embedding == Embedding::Series ? -m(1, 0) : m(0, 0) + m(1, 0));
    return out;
}

/// Two-port Y record of a device admittance placed as a series through element.
inline NetworkRecord series_element_network(const ComplexTrace& ydev, double z0 = 50.0) {
    NetworkRecord out{ydev.freqs, {}, ParamKind::Y, z0};
    out.matrices.reserve(ydev.size());
    for (const cplx& y : ydev.values) {
        Matrix2c m;
        m << y, -y, -y, y;
        out.matrices.push_back(m);
    }
    return out;
}

}  // namespace nemsfit
