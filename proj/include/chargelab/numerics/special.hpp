#pragma once

#include <cmath>

namespace chargelab {

/// Euler Beta through log-Gamma, B(a,b) = Gamma(a)Gamma(b)/Gamma(a+b).
inline double euler_beta(double a, double b) {
    return std::exp(std::lgamma(a) + std::lgamma(b) - std::lgamma(a + b));
}

/// B(1/4, 1/4). Appears in every closed-form field constant of the
/// nonlinear static theory; kept as a function so all call sites share
/// one evaluation path.
inline double beta_quarter_quarter() { return euler_beta(0.25, 0.25); }

} // namespace chargelab
