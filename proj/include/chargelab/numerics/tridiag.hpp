#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include "chargelab/errors.hpp"

namespace chargelab {

/// Number of eigenvalues of the symmetric tridiagonal matrix
/// (diag d, off-diagonal e) strictly below x, by the Sturm sequence of
/// the shifted LDL^T pivots.
inline int sturm_count_below(const std::vector<double>& d, const std::vector<double>& e,
                             double x) {
    const std::size_t n = d.size();
    int count = 0;
    double q = d[0] - x;
    if (q < 0.0) ++count;
    for (std::size_t i = 1; i < n; ++i) {
        const double ei = e[i - 1];
        if (q == 0.0) q = 1e-300;  // graze: nudge off the pole
        q = d[i] - x - ei * ei / q;
        if (q < 0.0) ++count;
    }
    return count;
}

/// The k smallest eigenvalues (ascending) of the symmetric tridiagonal
/// matrix, each bisected to abs_tol within a Gershgorin bracket.
inline std::vector<double> tridiag_smallest_eigenvalues(const std::vector<double>& d,
                                                        const std::vector<double>& e, int k,
                                                        double abs_tol = 1e-12) {
    const std::size_t n = d.size();
    if (n == 0 || e.size() + 1 != n)
        throw ConfigError("tridiag_smallest_eigenvalues: size mismatch");
    if (k < 1 || static_cast<std::size_t>(k) > n)
        throw ConfigError("tridiag_smallest_eigenvalues: bad eigenvalue count");

    double lo = d[0], hi = d[0];
    for (std::size_t i = 0; i < n; ++i) {
        const double r = (i > 0 ? std::abs(e[i - 1]) : 0.0) + (i + 1 < n ? std::abs(e[i]) : 0.0);
        lo = std::min(lo, d[i] - r);
        hi = std::max(hi, d[i] + r);
    }

    std::vector<double> out(k);
    for (int j = 0; j < k; ++j) {
        double a = lo, b = hi;
        // smallest x with sturm_count_below(x) >= j+1
        while (b - a > abs_tol) {
            const double mid = 0.5 * (a + b);
            if (sturm_count_below(d, e, mid) >= j + 1)
                b = mid;
            else
                a = mid;
        }
        out[j] = 0.5 * (a + b);
    }
    return out;
}

} // namespace chargelab
