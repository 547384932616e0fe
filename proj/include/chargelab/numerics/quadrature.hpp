#pragma once

#include <cmath>
#include <cstddef>
#include <utility>
#include <vector>

#include "chargelab/errors.hpp"

namespace chargelab {

/// Result of an adaptive quadrature: value and an error estimate that
/// bounds the accumulated local estimates.
struct QuadratureResult {
    double value = 0.0;
    double error = 0.0;
    int segments = 0;
};

namespace detail {

// Gauss-Kronrod 7-15 nodes and weights on [-1, 1].
inline constexpr double gk_x[8] = {
    0.9914553711208126, 0.9491079123427585, 0.8648644233597691,
    0.7415311855993944, 0.5860872354676911, 0.4058451513773972,
    0.2077849550078985, 0.0};
inline constexpr double gk_wk[8] = {
    0.0229353220105292, 0.0630920926299785, 0.1047900103222502,
    0.1406532597155259, 0.1690047266392679, 0.1903505780647854,
    0.2044329400752989, 0.2094821410847278};
inline constexpr double gk_wg[4] = {
    0.1294849661688697, 0.2797053914892767,
    0.3818300505051189, 0.4179591836734694};

template <class F>
std::pair<double, double> gk15(F&& f, double a, double b) {
    const double mid = 0.5 * (a + b);
    const double hl = 0.5 * (b - a);
    const double fc = f(mid);
    double kron = gk_wk[7] * fc;
    double gauss = gk_wg[3] * fc;
    for (int i = 0; i < 7; ++i) {
        const double dx = hl * gk_x[i];
        const double fsum = f(mid - dx) + f(mid + dx);
        kron += gk_wk[i] * fsum;
        if (i % 2 == 1) gauss += gk_wg[i / 2] * fsum;
    }
    kron *= hl;
    gauss *= hl;
    const double diff = std::abs(kron - gauss);
    // QUADPACK-style sharpened estimate; never below the raw difference
    // scaled roundoff floor.
    const double err = std::min(diff, 200.0 * diff * std::sqrt(std::max(diff, 1e-300)));
    return {kron, std::max(err, std::abs(kron) * 1e-15)};
}

} // namespace detail

/// Adaptive Gauss-Kronrod integration of f over [a, b]. Splits the worst
/// segment until the summed error estimate satisfies the tolerances.
template <class F>
QuadratureResult integrate_adaptive(F&& f, double a, double b,
                                    double abs_tol = 1e-12, double rel_tol = 1e-12,
                                    int max_segments = 2000) {
    struct Seg {
        double a, b, value, error;
    };
    auto [v0, e0] = detail::gk15(f, a, b);
    std::vector<Seg> segs{{a, b, v0, e0}};
    segs.reserve(64);
    for (;;) {
        double total = 0.0, err = 0.0;
        std::size_t worst = 0;
        for (std::size_t i = 0; i < segs.size(); ++i) {
            total += segs[i].value;
            err += segs[i].error;
            if (segs[i].error > segs[worst].error) worst = i;
        }
        if (err <= abs_tol || err <= rel_tol * std::abs(total) ||
            static_cast<int>(segs.size()) >= max_segments) {
            if (err > abs_tol && err > rel_tol * std::abs(total) &&
                static_cast<int>(segs.size()) >= max_segments)
                throw AccuracyError("integrate_adaptive: tolerance not reached after max segments");
            return {total, err, static_cast<int>(segs.size())};
        }
        const Seg s = segs[worst];
        const double mid = 0.5 * (s.a + s.b);
        auto [vl, el] = detail::gk15(f, s.a, mid);
        auto [vr, er] = detail::gk15(f, mid, s.b);
        segs[worst] = {s.a, mid, vl, el};
        segs.push_back({mid, s.b, vr, er});
    }
}

/// Nodes and weights of the n-point Gauss-Legendre rule on [-1, 1],
/// by Newton iteration on the Legendre recurrence.
inline void gauss_legendre(int n, std::vector<double>& x, std::vector<double>& w) {
    if (n < 1) throw ConfigError("gauss_legendre: order must be >= 1");
    x.assign(n, 0.0);
    w.assign(n, 0.0);
    const int m = (n + 1) / 2;
    for (int i = 0; i < m; ++i) {
        double z = std::cos(M_PI * (i + 0.75) / (n + 0.5));
        double pp = 0.0;
        for (int it = 0; it < 100; ++it) {
            double p0 = 1.0, p1 = 0.0;
            for (int j = 0; j < n; ++j) {
                const double p2 = p1;
                p1 = p0;
                p0 = ((2.0 * j + 1.0) * z * p1 - j * p2) / (j + 1.0);
            }
            pp = n * (z * p0 - p1) / (z * z - 1.0);
            const double dz = p0 / pp;
            z -= dz;
            if (std::abs(dz) < 1e-15) break;
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = w[n - 1 - i] = 2.0 / ((1.0 - z * z) * pp * pp);
    }
}

} // namespace chargelab
