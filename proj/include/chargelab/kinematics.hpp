#pragma once

#include <cmath>
#include <string>

#include "chargelab/errors.hpp"
#include "chargelab/vec3.hpp"

namespace chargelab {

/// Lorentz factor of a velocity. Throws SuperluminalError for |v| >= c;
/// speeds are never clamped.
inline double gamma(const Vec3& v, double c) {
    const double beta2 = norm2(v) / (c * c);
    if (!(beta2 < 1.0))
        throw SuperluminalError("gamma: |v| = " + std::to_string(std::sqrt(norm2(v))) +
                                " >= c = " + std::to_string(c));
    return 1.0 / std::sqrt(1.0 - beta2);
}

/// Lorentz factor expressed through momentum, sqrt(1 + |P|^2 / (m c)^2).
/// Well defined for every finite P.
inline double gamma_of_momentum(const Vec3& P, double m, double c) {
    const double mc = m * c;
    return std::sqrt(1.0 + norm2(P) / (mc * mc));
}

/// v(P) = c P / sqrt(m^2 c^2 + |P|^2). Always strictly subluminal; at
/// extreme momenta the quotient can round onto c exactly, in which case
/// we back off one representable step (a representation fix for the
/// last ulp, not a physical clamp).
inline Vec3 velocity_of_momentum(const Vec3& P, double m, double c) {
    Vec3 v = c / std::sqrt(m * m * c * c + norm2(P)) * P;
    const double s = norm(v);
    if (s >= c) v *= std::nextafter(c, 0.0) / s;
    return v;
}

/// P(v) = m gamma(v) v. Throws SuperluminalError for |v| >= c.
inline Vec3 momentum_of_velocity(const Vec3& v, double m, double c) {
    return m * gamma(v, c) * v;
}

/// Phase-space state of one point defect.
struct ParticleState {
    double t = 0.0;
    Vec3 Q;  ///< position
    Vec3 P;  ///< momentum
};

} // namespace chargelab
