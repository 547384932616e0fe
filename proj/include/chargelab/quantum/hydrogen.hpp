#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <string>
#include <vector>

#include "chargelab/born_infeld.hpp"
#include "chargelab/constants.hpp"
#include "chargelab/errors.hpp"

namespace chargelab {

struct SpectrumLine {
    int n = 0;
    int l = 0;
    double energy = 0.0;
    double error_estimate = 0.0;  // |E_h - E_h/2| / 3 from the extrapolation
};

/// Radial bound-state energies for one value of the field-strength
/// constant.  b = infinity selects the plain Coulomb potential.
struct SpectrumReport {
    double b = 0.0;
    int n_max = 0;
    int l_max = 0;
    double r_max = 0.0;
    double h = 0.0;
    std::vector<SpectrumLine> lines;
    std::vector<std::string> diagnostics;  // omitted/unconverged levels

    void validate() const {
        for (std::size_t i = 1; i < lines.size(); ++i)
            if (lines[i].l == lines[i - 1].l && !(lines[i].energy > lines[i - 1].energy))
                throw AccuracyError(
                    "SpectrumReport: energies not strictly increasing within fixed l");
    }
};

namespace detail {

// number of eigenvalues of the symmetric tridiagonal (diag, off) below x,
// by the Sturm sign-change count of the LDL^T pivots
inline int sturm_count(const std::vector<double>& diag, double off, double x) {
    int count = 0;
    // first pivot has no predecessor: off^2 / inf == 0 handles row 0
    double q = std::numeric_limits<double>::infinity();
    const double tiny = 1e-300;
    for (double d : diag) {
        q = (d - x) - off * off / q;
        if (q == 0.0) q = -tiny;
        if (q < 0.0) ++count;
    }
    return count;
}

// k-th smallest eigenvalue (k >= 1) by bisection on the Sturm count
inline double tridiag_eigenvalue(const std::vector<double>& diag, double off, int k) {
    double lo = std::numeric_limits<double>::infinity();
    double hi = -std::numeric_limits<double>::infinity();
    for (double d : diag) {
        lo = std::min(lo, d - 2.0 * std::abs(off));
        hi = std::max(hi, d + 2.0 * std::abs(off));
    }
    for (int it = 0; it < 200 && hi - lo > 1e-14 * (1.0 + std::abs(lo)); ++it) {
        const double mid = 0.5 * (lo + hi);
        if (sturm_count(diag, off, mid) >= k)
            hi = mid;
        else
            lo = mid;
    }
    return 0.5 * (lo + hi);
}

// lowest count eigenvalues of -hbar^2/(2m) u'' + W(r) u = E u on (0, r_max)
// with Dirichlet ends, second-order differences, spacing h
inline std::vector<double> radial_eigenvalues(const std::vector<double>& W,
                                              double h, double hbar, double m,
                                              int count) {
    const double kin = hbar * hbar / (2.0 * m * h * h);
    std::vector<double> diag(W.size());
    for (std::size_t i = 0; i < W.size(); ++i) diag[i] = 2.0 * kin + W[i];
    std::vector<double> ev(static_cast<std::size_t>(count));
    for (int k = 1; k <= count; ++k)
        ev[static_cast<std::size_t>(k - 1)] = tridiag_eigenvalue(diag, -kin, k);
    return ev;
}

}  // namespace detail

/// Electron potential energy at radius r around a unit-charge nucleus whose
/// field saturates at strength b: attractive, finite at the origin, and
/// asymptotically Coulombic.  b = infinity gives -e^2/r exactly.
inline double hydrogen_potential(const Constants& kc, double b, double r) {
    if (std::isinf(b)) return -kc.e * kc.e / r;
    return kc.e * born_potential(r, kc.e, b, -1);
}

/// Bound-state spectrum of the radial problem
///   -hbar^2/(2m) u'' + [hbar^2 l(l+1)/(2m r^2) + V(r)] u = E u
/// on a uniform grid, solved at h and h/2 and Richardson-extrapolated.
/// Levels whose extrapolation gap is not small are omitted with a
/// diagnostic instead of being reported at face value.
inline SpectrumReport hydrogen_spectrum(const Constants& kc, double b, int n_max,
                                        int l_max, double r_max = 0.0,
                                        double h = 0.0) {
    kc.validate();
    if (!(b > 0.0)) throw ConfigError("hydrogen_spectrum: b must be > 0 (may be inf)");
    if (n_max < 1) throw ConfigError("hydrogen_spectrum: n_max must be >= 1");
    if (l_max < 0 || l_max >= n_max)
        throw ConfigError("hydrogen_spectrum: need 0 <= l_max < n_max");
    const double a0 = kc.hbar * kc.hbar / (kc.m * kc.e * kc.e);  // Bohr radius
    if (r_max <= 0.0) r_max = 15.0 * n_max * a0;
    if (h <= 0.0) h = a0 / 200.0;

    SpectrumReport rep;
    rep.b = b;
    rep.n_max = n_max;
    rep.l_max = l_max;
    rep.r_max = r_max;
    rep.h = h;

    for (int l = 0; l <= l_max; ++l) {
        const int count = n_max - l;
        std::vector<std::vector<double>> pass;
        for (const double hh : {h, 0.5 * h}) {
            const int nn = static_cast<int>(std::lround(r_max / hh)) - 1;
            std::vector<double> W(static_cast<std::size_t>(nn));
            for (int i = 0; i < nn; ++i) {
                const double r = (i + 1) * hh;
                W[static_cast<std::size_t>(i)] =
                    kc.hbar * kc.hbar * l * (l + 1) / (2.0 * kc.m * r * r) +
                    hydrogen_potential(kc, b, r);
            }
            pass.push_back(detail::radial_eigenvalues(W, hh, kc.hbar, kc.m, count));
        }
        for (int k = 0; k < count; ++k) {
            const double Eh = pass[0][static_cast<std::size_t>(k)];
            const double Eh2 = pass[1][static_cast<std::size_t>(k)];
            SpectrumLine line;
            line.n = l + k + 1;
            line.l = l;
            line.energy = (4.0 * Eh2 - Eh) / 3.0;  // second-order extrapolation
            line.error_estimate = std::abs(Eh2 - Eh) / 3.0;
            if (line.error_estimate > 0.05 * std::max(std::abs(line.energy), 1e-3)) {
                rep.diagnostics.push_back(
                    "level n=" + std::to_string(line.n) + " l=" + std::to_string(l) +
                    " unconverged (gap " + std::to_string(line.error_estimate) + "), omitted");
                continue;
            }
            rep.lines.push_back(line);
        }
    }
    rep.validate();
    return rep;
}

/// Ground-state energy as a function of b (plus the b = infinity reference
/// appended last); the sweep the spectral-distortion verdict is read from.
inline std::vector<std::pair<double, double>> hydrogen_ground_sweep(
    const Constants& kc, const std::vector<double>& bs, double r_max = 0.0,
    double h = 0.0) {
    std::vector<std::pair<double, double>> out;
    out.reserve(bs.size() + 1);
    for (double b : bs) {
        const auto rep = hydrogen_spectrum(kc, b, 1, 0, r_max, h);
        if (rep.lines.empty())
            throw AccuracyError("hydrogen_ground_sweep: ground state did not converge");
        out.emplace_back(b, rep.lines.front().energy);
    }
    const auto coul = hydrogen_spectrum(
        kc, std::numeric_limits<double>::infinity(), 1, 0, r_max, h);
    out.emplace_back(std::numeric_limits<double>::infinity(), coul.lines.front().energy);
    return out;
}

}  // namespace chargelab
