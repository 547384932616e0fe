#pragma once

#include <cmath>
#include <string>

#include "chargelab/constants.hpp"
#include "chargelab/errors.hpp"
#include "chargelab/external_field.hpp"
#include "chargelab/kinematics.hpp"
#include "chargelab/trajectory.hpp"
#include "chargelab/vec3.hpp"

namespace chargelab {

namespace detail {

inline bool finite(const Vec3& v) {
    return std::isfinite(v.x) && std::isfinite(v.y) && std::isfinite(v.z);
}

/// Step count so that n uniform steps of <= dt land exactly on T.
inline int step_count(double dt, double T) {
    if (!(dt > 0.0) || !(T > 0.0))
        throw ConfigError("integrator: need dt > 0 and T > 0");
    return std::max(1, static_cast<int>(std::ceil(T / dt - 1e-9)));
}

} // namespace detail

/// Lorentz force on a test charge of sign q_sign (in units of e).
inline Vec3 lorentz_force(const Constants& k, const Vec3& E, const Vec3& B, const Vec3& v,
                          double q_sign) {
    return (q_sign * k.e) * (E + cross(v, B) / k.c);
}

/// Test-charge motion: RK4 on (Q, P) with dP/dt the Lorentz force and
/// dQ/dt = v(P). Global error O(dt^4); error_estimate is the Richardson
/// gap |Q(T) - Q_2dt(T)| / 15 from a double-step rerun. A field callback
/// failure or a non-finite state truncates the trajectory.
inline Trajectory integrate_lorentz(const Constants& k, const ParticleState& state0,
                                    const ExternalField& f, double dt, double T,
                                    double q_sign = -1.0) {
    f.validate();
    if (!detail::finite(state0.Q) || !detail::finite(state0.P))
        throw ConfigError("integrate_lorentz: non-finite initial state");
    const int nsteps = detail::step_count(dt, T);

    auto deriv = [&](double t, const Vec3& Q, const Vec3& P, Vec3& dQ, Vec3& dP) {
        dQ = velocity_of_momentum(P, k.m, k.c);
        dP = lorentz_force(k, f.E(t, Q), f.B(t, Q), dQ, q_sign);
    };
    auto run = [&](int n, double step, Trajectory* record) {
        Vec3 Q = state0.Q, P = state0.P;
        double t = state0.t;
        if (record) record->states.push_back({t, Q, P});
        for (int i = 0; i < n; ++i) {
            const double h = std::min(step, state0.t + T - t);
            Vec3 k1q, k1p, k2q, k2p, k3q, k3p, k4q, k4p;
            try {
                deriv(t, Q, P, k1q, k1p);
                deriv(t + h / 2, Q + h / 2 * k1q, P + h / 2 * k1p, k2q, k2p);
                deriv(t + h / 2, Q + h / 2 * k2q, P + h / 2 * k2p, k3q, k3p);
                deriv(t + h, Q + h * k3q, P + h * k3p, k4q, k4p);
            } catch (const std::exception&) {
                if (record) record->truncated = true;
                return ParticleState{t, Q, P};
            }
            Q += h / 6 * (k1q + 2.0 * k2q + 2.0 * k3q + k4q);
            P += h / 6 * (k1p + 2.0 * k2p + 2.0 * k3p + k4p);
            t += h;
            if (!detail::finite(Q) || !detail::finite(P)) {
                if (record) record->truncated = true;
                return ParticleState{t - h, record ? record->back().Q : Q,
                                     record ? record->back().P : P};
            }
            if (record) record->states.push_back({t, Q, P});
        }
        return ParticleState{t, Q, P};
    };

    Trajectory out;
    out.method = "lorentz-rk4";
    out.dt = dt;
    const ParticleState fine = run(nsteps, dt, &out);
    if (!out.truncated && nsteps >= 2) {
        const ParticleState coarse = run((nsteps + 1) / 2, 2.0 * dt, nullptr);
        out.error_estimate = norm(fine.Q - coarse.Q) / 15.0;
    }
    return out;
}

namespace detail {

/// Third time derivative solved from the third-order law of motion: with
/// M = I + gamma^2 v (x) v / c^2 and dP/dt = m gamma M a, the printed
/// equation rearranges to
///   Qddd = (3 c^3 / 2 e^2) gamma^-2 [m gamma a - M^-1 F_ext]
///          - 3 gamma^2 (v.a) a / c^2,
/// using M^-1 = I - v (x) v / c^2.
inline Vec3 ald_jerk(const Constants& k, double t, const Vec3& Q, const Vec3& V,
                     const Vec3& A, const ExternalField& f, double q_sign) {
    const double c2 = k.c * k.c;
    const double g = gamma(V, k.c);
    const Vec3 F = lorentz_force(k, f.E(t, Q), f.B(t, Q), V, q_sign);
    const Vec3 MinvF = F - dot(V, F) / c2 * V;
    const double pref = 3.0 * k.c * c2 / (2.0 * k.e * k.e);
    return pref / (g * g) * (k.m * g * A - MinvF) - 3.0 * g * g * dot(V, A) / c2 * A;
}

} // namespace detail

/// Third-order law of motion on the state (Q, v, a); a(0) must be
/// prescribed in addition to the usual data, and generic choices run away.
/// Blow-up (non-finite or superluminal state) truncates the trajectory and
/// sets the runaway flag. Momenta in the record are m gamma v; the
/// acceleration record holds a.
inline Trajectory integrate_ald(const Constants& k, const ParticleState& state0,
                                const Vec3& a0, const ExternalField& f, double dt, double T,
                                double q_sign = -1.0) {
    f.validate();
    const Vec3 V0 = velocity_of_momentum(state0.P, k.m, k.c);
    const int nsteps = detail::step_count(dt, T);

    Trajectory out;
    out.method = "ald-rk4";
    out.dt = dt;

    auto push = [&](double t, const Vec3& Q, const Vec3& V, const Vec3& A) {
        out.states.push_back({t, Q, momentum_of_velocity(V, k.m, k.c)});
        out.accelerations.push_back(A);
    };

    Vec3 Q = state0.Q, V = V0, A = a0;
    double t = state0.t;
    push(t, Q, V, A);
    for (int i = 0; i < nsteps; ++i) {
        const double h = std::min(dt, state0.t + T - t);
        Vec3 kq[4], kv[4], ka[4];
        bool ok = true;
        try {
            kq[0] = V;
            kv[0] = A;
            ka[0] = detail::ald_jerk(k, t, Q, V, A, f, q_sign);
            for (int s = 1; s < 4; ++s) {
                const double w = (s == 3) ? h : h / 2;
                const Vec3 Qs = Q + w * kq[s - 1], Vs = V + w * kv[s - 1],
                           As = A + w * ka[s - 1];
                kq[s] = Vs;
                kv[s] = As;
                ka[s] = detail::ald_jerk(k, t + w, Qs, Vs, As, f, q_sign);
            }
        } catch (const std::exception&) {
            ok = false;
        }
        if (ok) {
            Q += h / 6 * (kq[0] + 2.0 * kq[1] + 2.0 * kq[2] + kq[3]);
            V += h / 6 * (kv[0] + 2.0 * kv[1] + 2.0 * kv[2] + kv[3]);
            A += h / 6 * (ka[0] + 2.0 * ka[1] + 2.0 * ka[2] + ka[3]);
            t += h;
            ok = detail::finite(Q) && detail::finite(V) && detail::finite(A) &&
                 norm(V) < k.c;
        }
        if (!ok) {
            out.truncated = true;
            out.runaway = true;
            return out;
        }
        push(t, Q, V, A);
    }
    return out;
}

/// Effective second-order correction force obtained by the substitution
/// procedure: the acceleration is taken from the test-charge law,
/// a = M^-1 F / (m gamma); its total time derivative along that flow (with
/// a resubstituted) supplies the third derivative; both are inserted into
/// the radiation term of the third-order law. Requires field derivatives
/// (analytic or finite-difference).
inline Vec3 ll_reduce(const Constants& k, const ExternalField& f, const ParticleState& st,
                      double q_sign = -1.0) {
    if (!f.has_derivatives())
        throw ConfigError("ll_reduce: ExternalField must provide derivatives");
    const double c2 = k.c * k.c;
    const Vec3 V = velocity_of_momentum(st.P, k.m, k.c);
    const double g = gamma_of_momentum(st.P, k.m, k.c);
    const FieldJet jet = f.jet(st.t, st.Q);
    const double q = q_sign * k.e;

    const Vec3 F = q * (jet.E + cross(V, jet.B) / k.c);
    const Vec3 MinvF = F - dot(V, F) / c2 * V;
    const Vec3 A = MinvF / (k.m * g);

    // dF/dt along the substituted flow
    const Vec3 Fdot = q * (jet.dEdt + jet.gradE * V +
                           (cross(A, jet.B) + cross(V, jet.dBdt + jet.gradB * V)) / k.c);
    // d/dt of a = (1/ m gamma) (I - v (x) v / c^2) F, product rule with
    // d(1/gamma)/dt = -gamma (v.a)/c^2 and d(projector)/dt applied to F
    const Vec3 jerk = -g * g * dot(V, A) / c2 * A -
                      (dot(V, F) * A + dot(A, F) * V) / (k.m * g * c2) +
                      (Fdot - dot(V, Fdot) / c2 * V) / (k.m * g);

    const Vec3 inner = 3.0 * g * g * g * g * dot(V, A) / c2 * A + g * g * jerk;
    const Vec3 Minner = inner + g * g * dot(V, inner) / c2 * V;
    return 2.0 * k.e * k.e / (3.0 * k.c * c2) * Minner;
}

/// Reduced-order motion: RK4 on (Q, P) with the Lorentz force plus the
/// correction force of ll_reduce. Free of runaways; converges to the
/// test-charge trajectory as the coupling e^2/(m c^2) shrinks.
inline Trajectory integrate_ll(const Constants& k, const ParticleState& state0,
                               const ExternalField& f, double dt, double T,
                               double q_sign = -1.0) {
    f.validate();
    if (!f.has_derivatives())
        throw ConfigError("integrate_ll: ExternalField must provide derivatives");
    const int nsteps = detail::step_count(dt, T);

    auto deriv = [&](double t, const Vec3& Q, const Vec3& P, Vec3& dQ, Vec3& dP) {
        dQ = velocity_of_momentum(P, k.m, k.c);
        dP = lorentz_force(k, f.E(t, Q), f.B(t, Q), dQ, q_sign) +
             ll_reduce(k, f, {t, Q, P}, q_sign);
    };
    auto run = [&](int n, double step, Trajectory* record) {
        Vec3 Q = state0.Q, P = state0.P;
        double t = state0.t;
        if (record) record->states.push_back({t, Q, P});
        for (int i = 0; i < n; ++i) {
            const double h = std::min(step, state0.t + T - t);
            Vec3 k1q, k1p, k2q, k2p, k3q, k3p, k4q, k4p;
            try {
                deriv(t, Q, P, k1q, k1p);
                deriv(t + h / 2, Q + h / 2 * k1q, P + h / 2 * k1p, k2q, k2p);
                deriv(t + h / 2, Q + h / 2 * k2q, P + h / 2 * k2p, k3q, k3p);
                deriv(t + h, Q + h * k3q, P + h * k3p, k4q, k4p);
            } catch (const std::exception&) {
                if (record) record->truncated = true;
                return ParticleState{t, Q, P};
            }
            Q += h / 6 * (k1q + 2.0 * k2q + 2.0 * k3q + k4q);
            P += h / 6 * (k1p + 2.0 * k2p + 2.0 * k3p + k4p);
            t += h;
            if (!detail::finite(Q) || !detail::finite(P)) {
                if (record) record->truncated = true;
                return ParticleState{t - h, record ? record->back().Q : Q,
                                     record ? record->back().P : P};
            }
            if (record) record->states.push_back({t, Q, P});
        }
        return ParticleState{t, Q, P};
    };

    Trajectory out;
    out.method = "landau-lifshitz-rk4";
    out.dt = dt;
    const ParticleState fine = run(nsteps, dt, &out);
    if (!out.truncated && nsteps >= 2) {
        const ParticleState coarse = run((nsteps + 1) / 2, 2.0 * dt, nullptr);
        out.error_estimate = norm(fine.Q - coarse.Q) / 15.0;
    }
    return out;
}

} // namespace chargelab
