#pragma once

#include <cmath>
#include <cstddef>
#include <functional>

#include "chargelab/errors.hpp"

namespace chargelab {

namespace detail {

/// Cubic convolution through 4 equispaced samples f(-1), f(0), f(1), f(2)
/// evaluated at fractional position u in [0, 1]. Reproduces cubics'
/// little sibling: exact on quadratics, C1 across cells.
inline double cubic4(double fm1, double f0, double f1, double f2, double u) {
    const double c0 = f0;
    const double c1 = 0.5 * (f1 - fm1);
    const double c2 = fm1 - 2.5 * f0 + 2.0 * f1 - 0.5 * f2;
    const double c3 = 0.5 * (f2 - fm1) + 1.5 * (f0 - f1);
    return c0 + u * (c1 + u * (c2 + u * c3));
}

/// Resolve a query x on a uniform axis {x0 + i h, 0 <= i < n} into the
/// base index for a 4-point stencil and the fractional offset. The
/// stencil is clamped one cell inward at the edges (the interpolant
/// degrades gracefully there; callers who care keep away from edges).
inline void cubic_locate(double x, double x0, double h, std::size_t n, std::ptrdiff_t& i0,
                         double& u) {
    const double s = (x - x0) / h;
    if (!(s >= -1e-9 && s <= n - 1 + 1e-9))
        throw DomainError("cubic interpolation: query outside grid");
    std::ptrdiff_t i = static_cast<std::ptrdiff_t>(std::floor(s));
    if (i < 1) i = 1;
    if (i > static_cast<std::ptrdiff_t>(n) - 3) i = static_cast<std::ptrdiff_t>(n) - 3;
    i0 = i;
    u = s - i;
}

} // namespace detail

/// Tri-cubic interpolation of node samples f(i,j,k) on a uniform grid.
/// Accessor signature: double(std::size_t i, std::size_t j, std::size_t k).
template <class F>
double interp_cubic_3d(F&& f, double x, double y, double z, double x0, double y0, double z0,
                       double h, std::size_t nx, std::size_t ny, std::size_t nz) {
    if (nx < 4 || ny < 4 || nz < 4) throw ConfigError("interp_cubic_3d: grid too small");
    std::ptrdiff_t i0, j0, k0;
    double u, v, w;
    detail::cubic_locate(x, x0, h, nx, i0, u);
    detail::cubic_locate(y, y0, h, ny, j0, v);
    detail::cubic_locate(z, z0, h, nz, k0, w);
    double gz[4];
    for (int c = 0; c < 4; ++c) {
        double gy[4];
        for (int b = 0; b < 4; ++b) {
            const std::size_t j = j0 - 1 + b, k = k0 - 1 + c;
            gy[b] = detail::cubic4(f(i0 - 1, j, k), f(i0, j, k), f(i0 + 1, j, k),
                                   f(i0 + 2, j, k), u);
        }
        gz[c] = detail::cubic4(gy[0], gy[1], gy[2], gy[3], v);
    }
    return detail::cubic4(gz[0], gz[1], gz[2], gz[3], w);
}

template <class F>
double interp_cubic_2d(F&& f, double x, double y, double x0, double y0, double h,
                       std::size_t nx, std::size_t ny) {
    if (nx < 4 || ny < 4) throw ConfigError("interp_cubic_2d: grid too small");
    std::ptrdiff_t i0, j0;
    double u, v;
    detail::cubic_locate(x, x0, h, nx, i0, u);
    detail::cubic_locate(y, y0, h, ny, j0, v);
    double gy[4];
    for (int b = 0; b < 4; ++b) {
        const std::size_t j = j0 - 1 + b;
        gy[b] = detail::cubic4(f(i0 - 1, j, 0), f(i0, j, 0), f(i0 + 1, j, 0), f(i0 + 2, j, 0), u);
    }
    return detail::cubic4(gy[0], gy[1], gy[2], gy[3], v);
}

template <class F>
double interp_cubic_1d(F&& f, double x, double x0, double h, std::size_t nx) {
    if (nx < 4) throw ConfigError("interp_cubic_1d: grid too small");
    std::ptrdiff_t i0;
    double u;
    detail::cubic_locate(x, x0, h, nx, i0, u);
    return detail::cubic4(f(i0 - 1, 0, 0), f(i0, 0, 0), f(i0 + 1, 0, 0), f(i0 + 2, 0, 0), u);
}

} // namespace chargelab
