#pragma once

#include <cmath>

#include "chargelab/constants.hpp"
#include "chargelab/errors.hpp"
#include "chargelab/numerics/quadrature.hpp"
#include "chargelab/numerics/special.hpp"
#include "chargelab/vec3.hpp"

namespace chargelab {

/// Electric/magnetic field pair produced by the nonlinear aether law.
struct FieldPair {
    Vec3 E, H;
};

namespace detail {

/// zeta = (|B|^2+|D|^2)/b^2 + |B x D|^2/b^4; the law's square root is
/// sqrt(1 + zeta) >= 1.
inline double aether_zeta(const Vec3& B, const Vec3& D, double b) {
    const double b2 = b * b;
    return (norm2(B) + norm2(D)) / b2 + norm2(cross(B, D)) / (b2 * b2);
}

} // namespace detail

/// The constitutive map (B, D) -> (E, H): two quotients sharing the
/// denominator sqrt(1 + (|B|^2+|D|^2)/b^2 + |B x D|^2/b^4). Reduces to
/// the identity map in the weak-field limit.
inline FieldPair aether_map(const Vec3& B, const Vec3& D, double b) {
    const double b2 = b * b;
    const double denom = std::sqrt(1.0 + detail::aether_zeta(B, D, b));
    FieldPair out;
    out.E = (D - cross(B, cross(B, D)) / b2) / denom;
    out.H = (B - cross(D, cross(D, B)) / b2) / denom;
    return out;
}

/// Field energy per volume, (b^2/4pi)(sqrt(1+zeta) - 1), in the exact
/// cancellation-free form zeta/(1+sqrt(1+zeta)).
inline double field_energy_density(const Vec3& B, const Vec3& D, double b) {
    const double zeta = detail::aether_zeta(B, D, b);
    return b * b / (4.0 * M_PI) * zeta / (1.0 + std::sqrt(1.0 + zeta));
}

/// Displacement field of the static point defect at the origin,
/// q_sign * e * s/|s|^3 with the defect's own charge -e as default.
inline Vec3 born_displacement(const Vec3& s, double e, int q_sign = -1) {
    const double r2 = norm2(s);
    if (r2 == 0.0) throw SingularityError("born_displacement: s = 0");
    const double r = std::sqrt(r2);
    return q_sign * e / (r2 * r) * s;
}

/// Radial magnitude |D| = e/r^2 of the static solution.
inline double born_displacement_radial(double r, double e) {
    if (r <= 0.0) throw SingularityError("born_displacement_radial: r <= 0");
    return e / (r * r);
}

/// Length scale sqrt(e/b) below which the static solution saturates.
inline double born_radius(double e, double b) { return std::sqrt(e / b); }

/// Electrostatic potential of the static defect,
///   phi(r) = q_sign * sqrt(b e) * Int_{r sqrt(b/e)}^inf dx/sqrt(1+x^4),
/// finite at r = 0. The tail is folded onto [0,1] by x -> 1/x, which
/// maps the integrand onto itself, so only unit-interval quadratures
/// ever run.
inline double born_potential(double r, double e, double b, int q_sign = -1) {
    if (r < 0.0) throw ConfigError("born_potential: r must be >= 0");
    const double y = r * std::sqrt(b / e);
    auto f = [](double x) { return 1.0 / std::sqrt(1.0 + x * x * x * x); };
    double tail;  // Int_y^inf f
    if (y <= 1.0) {
        // F(0) = B(1/4,1/4)/4 minus the head
        const double head = y == 0.0 ? 0.0 : integrate_adaptive(f, 0.0, y, 1e-13, 1e-13).value;
        tail = 0.25 * beta_quarter_quarter() - head;
    } else {
        tail = integrate_adaptive(f, 0.0, 1.0 / y, 1e-13, 1e-13).value;
    }
    return q_sign * std::sqrt(b * e) * tail;
}

/// The field-strength constant fixed by equating the static solution's
/// field energy with m c^2: 36 B(1/4,1/4)^-2 m^2 c^4 / e^3.
inline double b_born(double m, double c, double e) {
    const double beta = beta_quarter_quarter();
    return 36.0 / (beta * beta) * m * m * c * c * c * c / (e * e * e);
}

/// Stress tensor (1/4pi)[E (x) D + H (x) B - (L + H.B) I] with E, H from the
/// aether law and L the Lagrangian density b^2(1 - (1+|B|^2/b^2)/sqrt(1+zeta)).
/// Only this isotropic part makes div(Theta) vanish away from sources, which
/// is what renders surface forces independent of the enclosing surface.  L is
/// evaluated in a rationalised form so the weak-field cancellation between
/// the two near-unit terms happens algebraically, not in floating point.
inline Mat3 stress_tensor(const Vec3& B, const Vec3& D, double b) {
    const FieldPair eh = aether_map(B, D, b);
    const double zeta = detail::aether_zeta(B, D, b);
    const double b2 = b * b;
    const double root = std::sqrt(1.0 + zeta);
    const Vec3 bxd = cross(B, D);
    const double num = (norm2(D) - norm2(B)) + (norm2(bxd) - norm2(B) * norm2(B)) / b2;
    const double lagrange_part = num / (root * (1.0 + norm2(B) / b2 + root));
    const double trace_part = lagrange_part + dot(eh.H, B);
    Mat3 theta = Mat3::outer(eh.E, D) + Mat3::outer(eh.H, B) - trace_part * Mat3::identity();
    // E (x) D + H (x) B is symmetric in exact arithmetic; enforce it to
    // rounding so downstream contractions see a symmetric tensor
    for (int i = 0; i < 3; ++i)
        for (int j = i + 1; j < 3; ++j) {
            const double avg = 0.5 * (theta.m[i][j] + theta.m[j][i]);
            theta.m[i][j] = theta.m[j][i] = avg;
        }
    return theta * (1.0 / (4.0 * M_PI));
}

} // namespace chargelab
