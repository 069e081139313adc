#pragma once

// Touchstone v1.0 two-port reader and writer.
//
// Data rows carry f, S11, S21, S12, S22 (note the v1.0 2-port ordering) as
// four number pairs in RI, MA (degrees) or DB (degrees) form. A row may be
// wrapped over several lines but every row starts on a fresh line.

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <istream>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "nemsfit/error.hpp"
#include "nemsfit/netparams.hpp"

namespace nemsfit::touchstone {

enum class Format { RI, MA, DB };
enum class FreqUnit { Hz, kHz, MHz, GHz };

inline double unit_scale(FreqUnit u) {
    switch (u) {
        case FreqUnit::Hz: return 1.0;
        case FreqUnit::kHz: return 1e3;
        case FreqUnit::MHz: return 1e6;
        case FreqUnit::GHz: return 1e9;
    }
    return 1.0;
}

inline const char* unit_name(FreqUnit u) {
    switch (u) {
        case FreqUnit::Hz: return "HZ";
        case FreqUnit::kHz: return "KHZ";
        case FreqUnit::MHz: return "MHZ";
        case FreqUnit::GHz: return "GHZ";
    }
    return "HZ";
}

inline const char* format_name(Format f) {
    switch (f) {
        case Format::RI: return "RI";
        case Format::MA: return "MA";
        case Format::DB: return "DB";
    }
    return "RI";
}

/// Option-line contents; the defaults are the v1.0 defaults (`# GHZ S MA R 50`).
struct Options {
    FreqUnit unit = FreqUnit::GHz;
    Format format = Format::MA;
    double z0 = 50.0;
};

namespace detail {

inline std::string upper(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return std::toupper(c); });
    return out;
}

inline std::vector<std::string_view> split_ws(std::string_view s) {
    std::vector<std::string_view> out;
    std::size_t i = 0;
    while (i < s.size()) {
        while (i < s.size() && std::isspace(static_cast<unsigned char>(s[i]))) ++i;
        std::size_t j = i;
        while (j < s.size() && !std::isspace(static_cast<unsigned char>(s[j]))) ++j;
        if (j > i) out.push_back(s.substr(i, j - i));
        i = j;
    }
    return out;
}

inline std::optional<double> to_double(std::string_view tok) {
    if (!tok.empty() && tok.front() == '+') tok.remove_prefix(1);
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (ec != std::errc() || ptr != tok.data() + tok.size()) return std::nullopt;
    return v;
}

inline Options parse_option_line(std::string_view body, std::size_t lineno) {
    Options opt;
    auto toks = split_ws(body);
    for (std::size_t i = 0; i < toks.size(); ++i) {
        const std::string t = upper(toks[i]);
        if (t == "HZ") opt.unit = FreqUnit::Hz;
        else if (t == "KHZ") opt.unit = FreqUnit::kHz;
        else if (t == "MHZ") opt.unit = FreqUnit::MHz;
        else if (t == "GHZ") opt.unit = FreqUnit::GHz;
        else if (t == "RI") opt.format = Format::RI;
        else if (t == "MA") opt.format = Format::MA;
        else if (t == "DB") opt.format = Format::DB;
        else if (t == "S") continue;
        else if (t == "Y" || t == "Z" || t == "H" || t == "G")
            throw ParseError(lineno, "malformed option line: parameter type '" + t + "' not supported (S only)");
        else if (t == "R") {
            if (i + 1 >= toks.size()) throw ParseError(lineno, "malformed option line: 'R' without impedance");
            auto z = to_double(toks[++i]);
            if (!z || !(*z > 0.0)) throw ParseError(lineno, "malformed option line: bad reference impedance");
            opt.z0 = *z;
        } else {
            throw ParseError(lineno, "malformed option line: unknown token '" + std::string(toks[i]) + "'");
        }
    }
    return opt;
}

inline cplx pair_to_complex(double a, double b, Format f) {
    constexpr double deg = std::numbers::pi / 180.0;
    switch (f) {
        case Format::RI: return {a, b};
        case Format::MA: return std::polar(a, b * deg);
        case Format::DB: return std::polar(std::pow(10.0, a / 20.0), b * deg);
    }
    return {a, b};
}

}  // namespace detail

/// Parse Touchstone v1.0 two-port text. `port_hint`, when known (e.g. from a
/// `.s1p` extension), must be 2.
inline NetworkRecord parse(std::istream& in, std::optional<int> port_hint = std::nullopt) {
    if (port_hint && *port_hint != 2)
        throw ParseError(0, "unsupported port count " + std::to_string(*port_hint) + " (only 2-port files)");

    Options opt;
    bool have_options = false;
    NetworkRecord net;
    net.kind = ParamKind::S;

    std::vector<double> row;
    std::size_t row_start = 0;
    // Every data line holding exactly 3 values means a 1-port file; wrapped
    // 2-port rows may also start with 3, so this is only decided at the end.
    bool all_three = true;
    std::size_t first_data = 0;
    std::size_t lineno = 0;
    std::string line;

    auto finish_row = [&]() {
        const double f = row[0] * unit_scale(opt.unit);
        if (!(f > 0.0)) throw ParseError(row_start, "non-positive frequency");
        if (!net.freqs.empty() && !(f > net.freqs.back()))
            throw ParseError(row_start, "non-monotone frequencies");
        Matrix2c m;
        m(0, 0) = detail::pair_to_complex(row[1], row[2], opt.format);
        m(1, 0) = detail::pair_to_complex(row[3], row[4], opt.format);
        m(0, 1) = detail::pair_to_complex(row[5], row[6], opt.format);
        m(1, 1) = detail::pair_to_complex(row[7], row[8], opt.format);
        net.freqs.push_back(f);
        net.matrices.push_back(m);
        row.clear();
    };

    while (std::getline(in, line)) {
        ++lineno;
        std::string_view sv(line);
        if (auto bang = sv.find('!'); bang != std::string_view::npos) sv = sv.substr(0, bang);
        auto first = sv.find_first_not_of(" \t\r");
        if (first == std::string_view::npos) continue;
        sv = sv.substr(first);

        if (sv.front() == '#') {
            // Only the first option line counts.
            if (!have_options) {
                if (!net.freqs.empty() || !row.empty())
                    throw ParseError(lineno, "malformed option line: appears after data");
                opt = detail::parse_option_line(sv.substr(1), lineno);
                have_options = true;
            }
            continue;
        }
        if (sv.front() == '[') throw ParseError(lineno, "Touchstone v2 keyword lines are not supported");

        auto toks = detail::split_ws(sv);
        if (row.empty()) row_start = lineno;
        if (!first_data) first_data = lineno;
        if (toks.size() != 3) all_three = false;
        for (auto tok : toks) {
            auto v = detail::to_double(tok);
            if (!v) throw ParseError(lineno, "not a number: '" + std::string(tok) + "'");
            row.push_back(*v);
        }
        if (row.size() > 9)
            throw ParseError(lineno, "wrong column count: " + std::to_string(row.size()) +
                                         " values in row (2-port rows have 9)");
        if (row.size() == 9) finish_row();
    }
    if (first_data && all_three)
        throw ParseError(first_data, "unsupported port count: data rows look like a 1-port file");
    if (!row.empty())
        throw ParseError(row_start, "wrong column count: incomplete row of " + std::to_string(row.size()) + " values");
    if (net.freqs.empty()) throw ParseError(lineno, "no network data");
    net.z0 = opt.z0;
    return net;
}

inline NetworkRecord parse(std::string_view text, std::optional<int> port_hint = std::nullopt) {
    std::istringstream in{std::string(text)};
    return parse(in, port_hint);
}

/// Port count implied by a `.sNp` file name, if it has one.
inline std::optional<int> ports_from_filename(std::string_view name) {
    auto dot = name.rfind('.');
    if (dot == std::string_view::npos || dot + 3 > name.size()) return std::nullopt;
    auto ext = detail::upper(name.substr(dot + 1));
    if (ext.size() < 3 || ext.front() != 'S' || ext.back() != 'P') return std::nullopt;
    int n = 0;
    auto [ptr, ec] = std::from_chars(ext.data() + 1, ext.data() + ext.size() - 1, n);
    if (ec != std::errc() || ptr != ext.data() + ext.size() - 1) return std::nullopt;
    return n;
}

/// Write an S record as Touchstone v1.0 with round-trip precision.
inline std::string write(const NetworkRecord& net, Format format = Format::RI, FreqUnit unit = FreqUnit::Hz) {
    if (net.kind != ParamKind::S) throw PreconditionError("touchstone::write: record is not S-parameters");
    constexpr double rad = 180.0 / std::numbers::pi;
    std::ostringstream os;
    os.precision(17);
    os << "! two-port S-parameters\n";
    os << "# " << unit_name(unit) << " S " << format_name(format) << " R " << net.z0 << "\n";
    auto put = [&](cplx v) {
        switch (format) {
            case Format::RI: os << ' ' << v.real() << ' ' << v.imag(); break;
            case Format::MA: os << ' ' << std::abs(v) << ' ' << std::arg(v) * rad; break;
            case Format::DB: os << ' ' << 20.0 * std::log10(std::abs(v)) << ' ' << std::arg(v) * rad; break;
        }
    };
    for (std::size_t i = 0; i < net.size(); ++i) {
        const auto& m = net.matrices[i];
        os << net.freqs[i] / unit_scale(unit);
        put(m(0, 0));
        put(m(1, 0));
        put(m(0, 1));
        put(m(1, 1));
        os << '\n';
    }
    return os.str();
}

}  // namespace nemsfit::touchstone
