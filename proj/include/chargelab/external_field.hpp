#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <random>

#include "chargelab/errors.hpp"
#include "chargelab/vec3.hpp"

namespace chargelab {

/// Field values and first derivatives at one spacetime point.
/// Gradient convention: grad.m[i][j] = dF_i/ds_j, so the convective
/// derivative along v is grad * v.
struct FieldJet {
    Vec3 E, B;
    Vec3 dEdt, dBdt;
    Mat3 gradE, gradB;
};

/// Prescribed external electromagnetic field: callbacks E(t,s), B(t,s),
/// optionally with analytic first derivatives. When the analytic jets are
/// absent, derivatives fall back to central differences with step h_fd.
/// Callbacks must be reentrant; Lipschitz continuity on the integration
/// domain is the caller's responsibility (see sampled_lipschitz).
struct ExternalField {
    std::function<Vec3(double, const Vec3&)> E, B;
    std::function<Vec3(double, const Vec3&)> dEdt, dBdt;
    std::function<Mat3(double, const Vec3&)> gradE, gradB;
    double h_fd = 0.0;  ///< > 0 enables finite-difference jets

    void validate() const {
        if (!E || !B) throw ConfigError("ExternalField: E and B callbacks are required");
    }
    bool has_analytic_derivatives() const {
        return static_cast<bool>(dEdt) && static_cast<bool>(dBdt) &&
               static_cast<bool>(gradE) && static_cast<bool>(gradB);
    }
    bool has_derivatives() const { return has_analytic_derivatives() || h_fd > 0.0; }

    FieldJet jet(double t, const Vec3& s) const {
        validate();
        FieldJet j;
        j.E = E(t, s);
        j.B = B(t, s);
        if (has_analytic_derivatives()) {
            j.dEdt = dEdt(t, s);
            j.dBdt = dBdt(t, s);
            j.gradE = gradE(t, s);
            j.gradB = gradB(t, s);
            return j;
        }
        if (!(h_fd > 0.0))
            throw ConfigError(
                "ExternalField: derivatives requested but neither analytic jets nor h_fd "
                "are set");
        const double h = h_fd;
        j.dEdt = (E(t + h, s) - E(t - h, s)) / (2.0 * h);
        j.dBdt = (B(t + h, s) - B(t - h, s)) / (2.0 * h);
        for (int a = 0; a < 3; ++a) {
            Vec3 dp{0, 0, 0};
            dp[a] = h;
            const Vec3 ecol = (E(t, s + dp) - E(t, s - dp)) / (2.0 * h);
            const Vec3 bcol = (B(t, s + dp) - B(t, s - dp)) / (2.0 * h);
            for (int i = 0; i < 3; ++i) {
                j.gradE.m[i][a] = ecol[i];
                j.gradB.m[i][a] = bcol[i];
            }
        }
        return j;
    }
};

/// Uniform static field with exact (zero) derivatives.
inline ExternalField uniform_field(const Vec3& E0, const Vec3& B0) {
    ExternalField f;
    f.E = [E0](double, const Vec3&) { return E0; };
    f.B = [B0](double, const Vec3&) { return B0; };
    auto zero_v = [](double, const Vec3&) { return Vec3{0, 0, 0}; };
    auto zero_m = [](double, const Vec3&) { return Mat3{}; };
    f.dEdt = zero_v;
    f.dBdt = zero_v;
    f.gradE = zero_m;
    f.gradB = zero_m;
    return f;
}

/// Crude audit of the user-asserted Lipschitz property: the maximum sampled
/// difference quotient of (E,B) over random point pairs in the box x [t0,t1].
inline double sampled_lipschitz(const ExternalField& f, const Vec3& lo, const Vec3& hi,
                                double t0, double t1, int nsamples = 1000,
                                std::uint64_t seed = 1) {
    f.validate();
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    auto point = [&] {
        return Vec3{lo.x + u01(rng) * (hi.x - lo.x), lo.y + u01(rng) * (hi.y - lo.y),
                    lo.z + u01(rng) * (hi.z - lo.z)};
    };
    double worst = 0.0;
    for (int i = 0; i < nsamples; ++i) {
        const double t = t0 + u01(rng) * (t1 - t0);
        const Vec3 a = point(), b = point();
        const double d = norm(a - b);
        if (d < 1e-12) continue;
        const double df = norm(f.E(t, a) - f.E(t, b)) + norm(f.B(t, a) - f.B(t, b));
        worst = std::max(worst, df / d);
    }
    return worst;
}

} // namespace chargelab
