#pragma once

// Levenberg-Marquardt fitting of MbvdModel to a complex admittance trace.
//
// Parameters live in log space, in this order:
//   ln c0, ln r0, ln rs, then per branch ln rm, ln fs, ln cm.
// Positivity is automatic; a resistance at exactly zero has a zero Jacobian
// column and stays frozen.

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "nemsfit/error.hpp"
#include "nemsfit/extract.hpp"
#include "nemsfit/mbvd.hpp"
#include "nemsfit/netparams.hpp"

namespace nemsfit {

enum class Weighting { Complex, LogMagPhase };

/// Natural-unit bound for one parameter; lo == hi freezes it.
struct Bound {
    double lo = 0.0;
    double hi = 0.0;
    bool frozen() const { return lo == hi; }
};

struct FitOptions {
    int max_iter = 200;
    double ftol = 1e-10;
    double xtol = 1e-10;
    Weighting weighting = Weighting::Complex;
    std::vector<Bound> bounds;    // empty: default_bounds(seed, free_parasitics)
    double lambda0 = 1e-3;
    bool free_parasitics = false; // fit r0 and rs (MBVD) instead of holding them at the seed
    int restarts = 0;             // extra deterministic perturbed seeds

    void validate() const {
        if (max_iter < 1) throw PreconditionError("fit options: max_iter must be >= 1");
        if (!(ftol > 0.0) || !(xtol > 0.0)) throw PreconditionError("fit options: tolerances must be positive");
        if (!(lambda0 > 0.0)) throw PreconditionError("fit options: lambda0 must be positive");
        for (const auto& b : bounds)
            if (!(b.lo <= b.hi)) throw PreconditionError("fit options: bound with lo > hi");
    }
};

struct FitResult {
    MbvdModel model;
    double cost = 0.0;
    int iterations = 0;
    bool converged = false;
    Eigen::MatrixXd covariance;       // log-parameter covariance
    double residual_rms = 0.0;
    std::vector<double> cost_trace;   // cost at the seed, then after every accepted step
    std::size_t dominant = 0;         // largest-cm branch of `model`
    int branch_count = 0;
};

inline std::size_t parameter_count(const MbvdModel& m) { return 3 + 3 * m.branches.size(); }

/// Natural-unit parameter values in fit order (c0, r0, rs, {rm, fs, cm}...).
inline std::vector<double> pack_parameters(const MbvdModel& m) {
    std::vector<double> p{m.c0, m.r0, m.rs};
    for (const auto& b : m.branches) {
        p.push_back(b.rm);
        p.push_back(b.fs());
        p.push_back(b.cm);
    }
    return p;
}

inline MbvdModel unpack_parameters(const std::vector<double>& p) {
    MbvdModel m;
    m.c0 = p[0];
    m.r0 = p[1];
    m.rs = p[2];
    for (std::size_t i = 3; i + 2 < p.size(); i += 3) m.branches.push_back(MotionalBranch::from_fs(p[i], p[i + 1], p[i + 2]));
    return m;
}

/// fs within ±10 % of the seed, c0 within ×/÷3, resistances in [1e-3, 1e6] Ω,
/// cm within ×/÷100. r0 and rs are pinned to the seed unless `free_parasitics`.
inline std::vector<Bound> default_bounds(const MbvdModel& seed, bool free_parasitics = false) {
    std::vector<Bound> b{{seed.c0 / 3.0, seed.c0 * 3.0}};
    if (free_parasitics) {
        b.push_back({1e-3, 1e6});
        b.push_back({1e-3, 1e6});
    } else {
        b.push_back({seed.r0, seed.r0});
        b.push_back({seed.rs, seed.rs});
    }
    for (const auto& br : seed.branches) {
        b.push_back({1e-3, 1e6});
        b.push_back({0.9 * br.fs(), 1.1 * br.fs()});
        b.push_back({br.cm / 100.0, br.cm * 100.0});
    }
    return b;
}

namespace detail {

inline double median_magnitude(const ComplexTrace& t) {
    std::vector<double> m;
    m.reserve(t.size());
    for (const auto& v : t.values) m.push_back(std::abs(v));
    auto mid = m.begin() + static_cast<std::ptrdiff_t>(m.size() / 2);
    std::nth_element(m.begin(), mid, m.end());
    double med = *mid;
    if (m.size() % 2 == 0) med = 0.5 * (med + *std::max_element(m.begin(), mid));
    return med > 0.0 ? med : 1.0;
}

inline double wrap_pi(double a) { return std::remainder(a, 2.0 * std::numbers::pi); }

// Trace-dependent pieces shared by residuals and Jacobian.
struct ResidualContext {
    const ComplexTrace* trace = nullptr;
    Weighting weighting = Weighting::Complex;
    double scale = 1.0;
    std::vector<std::size_t> points;

    ResidualContext(const ComplexTrace& t, Weighting w) : trace(&t), weighting(w) {
        if (t.empty()) throw PreconditionError("residuals: empty trace");
        scale = median_magnitude(t);
        for (std::size_t i = 0; i < t.size(); ++i)
            if (w == Weighting::Complex || std::abs(t.values[i]) > 0.0) points.push_back(i);
    }

    std::size_t dropped() const { return trace->size() - points.size(); }

    Eigen::VectorXd residuals(const MbvdModel& m) const {
        Eigen::VectorXd r(2 * static_cast<Eigen::Index>(points.size()));
        for (std::size_t k = 0; k < points.size(); ++k) {
            const std::size_t i = points[k];
            const cplx y = admittance(m, trace->freqs[i]);
            const cplx meas = trace->values[i];
            const auto row = 2 * static_cast<Eigen::Index>(k);
            if (weighting == Weighting::Complex) {
                const cplx d = (y - meas) / scale;
                r(row) = d.real();
                r(row + 1) = d.imag();
            } else {
                r(row) = std::log(std::abs(y)) - std::log(std::abs(meas));
                r(row + 1) = wrap_pi(std::arg(y) - std::arg(meas));
            }
        }
        return r;
    }

    Eigen::MatrixXd jacobian(const MbvdModel& m, const std::vector<Bound>* bounds) const {
        const std::size_t np = parameter_count(m);
        Eigen::MatrixXd J(2 * static_cast<Eigen::Index>(points.size()), static_cast<Eigen::Index>(np));
        std::vector<cplx> dy(np);
        std::vector<cplx> yb(m.branches.size());
        for (std::size_t k = 0; k < points.size(); ++k) {
            const double w = kTwoPi * trace->freqs[points[k]];
            const cplx jwc{0.0, w * m.c0};
            const cplx static_den = 1.0 + jwc * m.r0;
            const cplx ys = jwc / static_den;
            cplx s = ys;
            for (std::size_t b = 0; b < m.branches.size(); ++b) {
                yb[b] = branch_admittance(m.branches[b], w);
                s += yb[b];
            }
            const cplx den = 1.0 + m.rs * s;
            const cplx y = s / den;
            const cplx dyds = 1.0 / (den * den);

            dy[0] = dyds * ys / static_den;
            dy[1] = dyds * (-ys * ys) * m.r0;
            dy[2] = -y * y * m.rs;
            for (std::size_t b = 0; b < m.branches.size(); ++b) {
                const auto& br = m.branches[b];
                const cplx g = -yb[b] * yb[b] * dyds;
                dy[3 + 3 * b] = g * br.rm;
                dy[4 + 3 * b] = g * cplx(0.0, -2.0 * w * br.lm);
                dy[5 + 3 * b] = g * cplx(0.0, -w * br.lm + 1.0 / (w * br.cm));
            }
            const auto row = 2 * static_cast<Eigen::Index>(k);
            for (std::size_t p = 0; p < np; ++p) {
                const cplx d = weighting == Weighting::Complex ? dy[p] / scale : dy[p] / y;
                J(row, static_cast<Eigen::Index>(p)) = d.real();
                J(row + 1, static_cast<Eigen::Index>(p)) = d.imag();
            }
        }
        if (bounds)
            for (std::size_t p = 0; p < np && p < bounds->size(); ++p)
                if ((*bounds)[p].frozen()) J.col(static_cast<Eigen::Index>(p)).setZero();
        return J;
    }
};

}  // namespace detail

/// Residual vector, 2 entries per used point. Complex weighting is normalized
/// by the median |Y_meas|; log weighting drops |Y_meas| = 0 points.
inline Eigen::VectorXd residuals(const MbvdModel& model, const ComplexTrace& trace,
                                 Weighting weighting = Weighting::Complex) {
    return detail::ResidualContext(trace, weighting).residuals(model);
}

/// Analytic ∂residual/∂(log parameter). Columns of frozen parameters are zero.
inline Eigen::MatrixXd jacobian(const MbvdModel& model, const ComplexTrace& trace,
                                Weighting weighting = Weighting::Complex,
                                const std::vector<Bound>* bounds = nullptr) {
    return detail::ResidualContext(trace, weighting).jacobian(model, bounds);
}

namespace detail {

inline FitResult fit_once(const ComplexTrace& trace, const MbvdModel& seed, const FitOptions& opt) {
    const ResidualContext ctx(trace, opt.weighting);
    const std::size_t np = parameter_count(seed);
    const std::vector<Bound> bounds = opt.bounds.empty() ? default_bounds(seed, opt.free_parasitics) : opt.bounds;
    if (bounds.size() != np) throw PreconditionError("fit: bounds size does not match the model");

    std::vector<double> natural = pack_parameters(seed);
    std::vector<double> theta(np), lo(np), hi(np);
    std::vector<std::size_t> active;
    for (std::size_t p = 0; p < np; ++p) {
        natural[p] = std::clamp(natural[p], bounds[p].lo, bounds[p].hi);
        theta[p] = std::log(natural[p]);
        lo[p] = std::log(bounds[p].lo);
        hi[p] = std::log(bounds[p].hi);
        if (!bounds[p].frozen() && std::isfinite(theta[p])) active.push_back(p);
    }
    auto model_of = [&](const std::vector<double>& t) {
        std::vector<double> v(np);
        for (std::size_t p = 0; p < np; ++p) v[p] = std::exp(t[p]);
        return unpack_parameters(v);
    };

    FitResult res;
    res.model = model_of(theta);
    Eigen::VectorXd r = ctx.residuals(res.model);
    double cost = r.squaredNorm();
    if (!std::isfinite(cost)) throw FitError(0, "fit: non-finite cost at seed");
    res.cost_trace.push_back(cost);

    const auto na = static_cast<Eigen::Index>(active.size());
    double lambda = opt.lambda0;
    Eigen::MatrixXd Ja(r.size(), na);
    int it = 0;
    bool converged = cost == 0.0 || active.empty();
    while (!converged && it < opt.max_iter) {
        ++it;
        const Eigen::MatrixXd J = ctx.jacobian(res.model, nullptr);
        for (Eigen::Index a = 0; a < na; ++a) Ja.col(a) = J.col(static_cast<Eigen::Index>(active[static_cast<std::size_t>(a)]));
        const Eigen::MatrixXd H = Ja.transpose() * Ja;
        const Eigen::VectorXd g = Ja.transpose() * r;
        Eigen::VectorXd diag = H.diagonal();
        const double floor = std::max(diag.maxCoeff() * 1e-12, std::numeric_limits<double>::min());
        diag = diag.cwiseMax(floor);

        double theta_norm = 0.0;
        for (auto p : active) theta_norm += theta[p] * theta[p];
        theta_norm = std::sqrt(theta_norm);

        bool accepted = false;
        while (!accepted) {
            Eigen::MatrixXd A = H;
            A.diagonal() += lambda * diag;
            const Eigen::VectorXd delta = A.ldlt().solve(-g);
            std::vector<double> trial = theta;
            double step = 0.0;
            for (Eigen::Index a = 0; a < na; ++a) {
                const std::size_t p = active[static_cast<std::size_t>(a)];
                trial[p] = std::clamp(theta[p] + delta(a), lo[p], hi[p]);
                step += (trial[p] - theta[p]) * (trial[p] - theta[p]);
            }
            step = std::sqrt(step);
            if (step <= opt.xtol * (theta_norm + opt.xtol)) {
                converged = true;
                break;
            }
            const MbvdModel trial_model = model_of(trial);
            const Eigen::VectorXd tr = ctx.residuals(trial_model);
            const double tcost = tr.squaredNorm();
            if (std::isnan(tcost)) throw FitError(it, "fit: cost became NaN");
            if (tcost < cost) {
                const double decrease = cost - tcost;
                theta = std::move(trial);
                res.model = trial_model;
                r = tr;
                res.cost_trace.push_back(tcost);
                lambda = std::max(lambda / 3.0, 1e-12);
                accepted = true;
                if (decrease <= opt.ftol * cost || tcost == 0.0) converged = true;
                cost = tcost;
            } else {
                lambda *= 10.0;
                if (lambda > 1e20) {
                    // No descent direction left at working precision.
                    converged = true;
                    break;
                }
            }
        }
    }

    res.cost = cost;
    res.iterations = it;
    res.converged = converged;
    const auto m_rows = static_cast<double>(r.size());
    res.residual_rms = m_rows > 0 ? std::sqrt(cost / m_rows) : 0.0;

    res.covariance = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(np), static_cast<Eigen::Index>(np));
    if (na > 0) {
        const Eigen::MatrixXd J = ctx.jacobian(res.model, nullptr);
        for (Eigen::Index a = 0; a < na; ++a) Ja.col(a) = J.col(static_cast<Eigen::Index>(active[static_cast<std::size_t>(a)]));
        const double dof = std::max(1.0, m_rows - static_cast<double>(na));
        const Eigen::MatrixXd cov = (Ja.transpose() * Ja).completeOrthogonalDecomposition().pseudoInverse() * (cost / dof);
        for (Eigen::Index a = 0; a < na; ++a)
            for (Eigen::Index b = 0; b < na; ++b)
                res.covariance(static_cast<Eigen::Index>(active[static_cast<std::size_t>(a)]),
                               static_cast<Eigen::Index>(active[static_cast<std::size_t>(b)])) = cov(a, b);
    }

    // Keep the ordering invariant if two branches crossed during the fit.
    std::vector<std::size_t> order(res.model.branches.size());
    for (std::size_t k = 0; k < order.size(); ++k) order[k] = k;
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return res.model.branches[a].fs() < res.model.branches[b].fs(); });
    if (!std::is_sorted(order.begin(), order.end())) {
        MbvdModel sorted = res.model;
        Eigen::MatrixXd cov = res.covariance;
        std::vector<std::size_t> perm(np);
        for (std::size_t p = 0; p < 3; ++p) perm[p] = p;
        for (std::size_t k = 0; k < order.size(); ++k) {
            sorted.branches[k] = res.model.branches[order[k]];
            for (std::size_t j = 0; j < 3; ++j) perm[3 + 3 * k + j] = 3 + 3 * order[k] + j;
        }
        for (std::size_t a = 0; a < np; ++a)
            for (std::size_t b = 0; b < np; ++b)
                cov(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) =
                    res.covariance(static_cast<Eigen::Index>(perm[a]), static_cast<Eigen::Index>(perm[b]));
        res.model = std::move(sorted);
        res.covariance = std::move(cov);
    }
    res.branch_count = static_cast<int>(res.model.branches.size());
    if (!res.model.branches.empty()) res.dominant = dominant_branch(res.model);
    return res;
}

// Fixed multiplicative perturbations (c0, rm, fs, cm) for restarts.
inline constexpr double kRestartTable[][4] = {
    {1.00, 2.00, 1.000, 1.00}, {1.00, 0.50, 1.000, 1.00}, {1.10, 1.00, 1.002, 0.80},
    {0.90, 1.00, 0.998, 1.25}, {1.00, 1.50, 1.001, 1.50}, {1.00, 0.75, 0.999, 0.66},
};

}  // namespace detail

/// Levenberg-Marquardt fit of `seed` to `trace` (damping ×10 on reject, ÷3 on accept).
inline FitResult fit(const ComplexTrace& trace, const MbvdModel& seed, const FitOptions& options = {}) {
    options.validate();
    seed.validate();
    FitResult best = detail::fit_once(trace, seed, options);
    constexpr int table_size = static_cast<int>(std::size(detail::kRestartTable));
    for (int k = 0; k < options.restarts; ++k) {
        const auto& f = detail::kRestartTable[k % table_size];
        const double grow = 1.0 + 0.5 * (k / table_size);
        MbvdModel s = seed;
        s.c0 *= f[0];
        for (auto& b : s.branches) b = MotionalBranch::from_fs(b.rm * f[1] * grow, b.fs() * f[2], b.cm * f[3]);
        FitOptions o = options;
        if (o.bounds.empty()) o.bounds = default_bounds(seed, options.free_parasitics);
        try {
            FitResult r = detail::fit_once(trace, s, o);
            if (r.cost < best.cost) best = std::move(r);
        } catch (const FitError&) {
        }
    }
    return best;
}

/// Fit with 1..K branches, adding candidates in order of prominence, and keep
/// the smallest count after which one more branch improves the residual RMS by
/// less than 10 %.
inline FitResult select_branch_count(const ComplexTrace& trace, const std::vector<ResonanceCandidate>& candidates,
                                     const FitOptions& options = {}) {
    if (candidates.empty()) throw PreconditionError("select_branch_count: no resonance candidates");
    const auto ranked = by_prominence(candidates);
    FitOptions opt = options;
    opt.bounds.clear();

    const MbvdModel seed = initial_guess(trace, {ranked.front()});
    FitResult best = fit(trace, seed, opt);
    for (std::size_t k = 1; k < ranked.size(); ++k) {
        const auto& c = ranked[k];
        MbvdModel next = best.model;
        const cplx background = admittance(best.model, c.fs_est);
        const MotionalBranch nb = seed_branch(trace, c, next.c0, background);
        const bool clash = std::any_of(next.branches.begin(), next.branches.end(), [&](const auto& b) {
            return std::abs(b.fs() - nb.fs()) <= 1e-6 * nb.fs();
        });
        if (clash) continue;
        next.branches.push_back(nb);
        next.sort_branches();
        FitResult trial = fit(trace, next, opt);
        if (!(trial.residual_rms < 0.9 * best.residual_rms)) break;
        best = std::move(trial);
    }
    return best;
}

}  // namespace nemsfit
