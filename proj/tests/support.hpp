#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <string>

namespace testsupport {

inline double rel(double a, double b) { return std::abs(a - b) / std::max(std::abs(b), 1e-300); }

inline double rel(std::complex<double> a, std::complex<double> b) {
    return std::abs(a - b) / std::max(std::abs(b), 1e-300);
}

inline std::string data(const std::string& name) { return std::string(NEMSFIT_TEST_DATA) + "/" + name; }

}  // namespace testsupport
