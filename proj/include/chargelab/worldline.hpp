#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "chargelab/constants.hpp"
#include "chargelab/errors.hpp"
#include "chargelab/kinematics.hpp"
#include "chargelab/numerics/cubic_spline.hpp"
#include "chargelab/vec3.hpp"

namespace chargelab {

/// Field evaluation this close to the source worldline (in active length
/// units) is treated as on the singularity.
inline constexpr double kSingularityRadius = 1e-9;

/// A prescribed point-charge trajectory. All implementations guarantee
/// strictly subluminal speeds on their domain (construction fails
/// otherwise) and expose a global speed bound for retardation brackets.
class Worldline {
  public:
    virtual ~Worldline() = default;

    virtual Vec3 position(double t) const = 0;
    virtual Vec3 velocity(double t) const = 0;
    virtual Vec3 acceleration(double t) const = 0;

    /// Supremum of |velocity| over the domain, strictly below c.
    virtual double speed_bound() const = 0;

    /// Time interval on which the worldline is defined.
    virtual double t_min() const { return -std::numeric_limits<double>::infinity(); }
    virtual double t_max() const { return std::numeric_limits<double>::infinity(); }
};

class RestWorldline final : public Worldline {
  public:
    explicit RestWorldline(Vec3 q0) : q0_(q0) {}
    Vec3 position(double) const override { return q0_; }
    Vec3 velocity(double) const override { return {}; }
    Vec3 acceleration(double) const override { return {}; }
    double speed_bound() const override { return 0.0; }

  private:
    Vec3 q0_;
};

class UniformWorldline final : public Worldline {
  public:
    UniformWorldline(Vec3 q0, Vec3 v, double c) : q0_(q0), v_(v) {
        if (!(norm(v) < c))
            throw SuperluminalError("UniformWorldline: |v| must be below c");
    }
    Vec3 position(double t) const override { return q0_ + t * v_; }
    Vec3 velocity(double) const override { return v_; }
    Vec3 acceleration(double) const override { return {}; }
    double speed_bound() const override { return norm(v_); }

  private:
    Vec3 q0_, v_;
};

class CircularWorldline final : public Worldline {
  public:
    /// Circle of given radius about `center` in the plane normal to
    /// `axis`, angular velocity omega, phase measured from the first
    /// in-plane basis vector.
    CircularWorldline(Vec3 center, double radius, double omega, double c,
                      Vec3 axis = {0, 0, 1}, double phase = 0.0)
        : center_(center), radius_(radius), omega_(omega), phase_(phase) {
        if (!(radius > 0.0)) throw ConfigError("CircularWorldline: radius must be > 0");
        if (!(std::abs(radius * omega) < c))
            throw SuperluminalError("CircularWorldline: |radius*omega| = " +
                                    std::to_string(std::abs(radius * omega)) + " >= c");
        const double an = norm(axis);
        if (!(an > 0.0)) throw ConfigError("CircularWorldline: zero axis");
        const Vec3 n = axis / an;
        // deterministic in-plane frame
        const Vec3 seed = std::abs(n.x) < 0.9 ? Vec3{1, 0, 0} : Vec3{0, 1, 0};
        e1_ = normalized(seed - dot(seed, n) * n);
        e2_ = cross(n, e1_);
    }

    Vec3 position(double t) const override {
        const double a = omega_ * t + phase_;
        return center_ + radius_ * (std::cos(a) * e1_ + std::sin(a) * e2_);
    }
    Vec3 velocity(double t) const override {
        const double a = omega_ * t + phase_;
        return radius_ * omega_ * (-std::sin(a) * e1_ + std::cos(a) * e2_);
    }
    Vec3 acceleration(double t) const override {
        const double a = omega_ * t + phase_;
        return -radius_ * omega_ * omega_ * (std::cos(a) * e1_ + std::sin(a) * e2_);
    }
    double speed_bound() const override { return std::abs(radius_ * omega_); }

  private:
    Vec3 center_, e1_, e2_;
    double radius_, omega_, phase_;
};

/// C2 trajectory through time-stamped samples (one natural cubic spline
/// per component). Subluminality is enforced at every knot and segment
/// midpoint at construction.
class SampledWorldline final : public Worldline {
  public:
    SampledWorldline(const std::vector<double>& t, const std::vector<Vec3>& q, double c) {
        if (t.size() != q.size()) throw ConfigError("SampledWorldline: size mismatch");
        std::vector<double> qx(q.size()), qy(q.size()), qz(q.size());
        for (std::size_t i = 0; i < q.size(); ++i) {
            qx[i] = q[i].x;
            qy[i] = q[i].y;
            qz[i] = q[i].z;
        }
        sx_ = CubicSpline(t, qx);
        sy_ = CubicSpline(t, qy);
        sz_ = CubicSpline(t, qz);
        speed_bound_ = 0.0;
        for (std::size_t i = 0; i + 1 < t.size(); ++i) {
            for (const double tc : {t[i], 0.5 * (t[i] + t[i + 1])}) {
                const double s = norm(velocity(tc));
                if (!(s < c))
                    throw SuperluminalError(
                        "SampledWorldline: speed " + std::to_string(s) + " >= c at t = " +
                        std::to_string(tc));
                speed_bound_ = std::max(speed_bound_, s);
            }
        }
        const double send = norm(velocity(t.back()));
        if (!(send < c)) throw SuperluminalError("SampledWorldline: speed >= c at final knot");
        speed_bound_ = std::max(speed_bound_, send);
    }

    Vec3 position(double t) const override {
        return {sx_.value(t), sy_.value(t), sz_.value(t)};
    }
    Vec3 velocity(double t) const override {
        return {sx_.derivative(t), sy_.derivative(t), sz_.derivative(t)};
    }
    Vec3 acceleration(double t) const override {
        return {sx_.second_derivative(t), sy_.second_derivative(t), sz_.second_derivative(t)};
    }
    double speed_bound() const override { return speed_bound_; }
    double t_min() const override { return sx_.t_front(); }
    double t_max() const override { return sx_.t_back(); }

  private:
    CubicSpline sx_, sy_, sz_;
    double speed_bound_ = 0.0;
};

/// Solves c (t - t') = |s - Q(t')| for the unique t' < t. The mismatch
/// f(t') = c(t - t') - |s - Q(t')| is strictly decreasing (speeds are
/// subluminal), so a bracket plus bisection is safe; Newton polishes the
/// root afterwards.
inline double retarded_time(const Worldline& wl, const Vec3& s, double t,
                            const Constants& consts) {
    const double c = consts.c;
    const double r_now = norm(s - wl.position(t));
    if (r_now == 0.0) return t;
    const double vb = wl.speed_bound();
    double lo = t - r_now / (c - vb);
    double hi = t;
    auto f = [&](double tp) { return c * (t - tp) - norm(s - wl.position(tp)); };
    if (lo < wl.t_min()) {
        // conservative bracket end fell off the sampled segment; the root
        // itself may still be inside it
        if (wl.t_min() <= t && f(wl.t_min()) >= 0.0)
            lo = wl.t_min();
        else
            throw DomainError("retarded_time: retardation reaches before the sampled "
                              "worldline begins");
    }
    // bisect to 1e-3 of the initial bracket
    const double coarse = 1e-3 * (hi - lo);
    while (hi - lo > coarse) {
        const double mid = 0.5 * (lo + hi);
        (f(mid) >= 0.0 ? lo : hi) = mid;
    }
    // Newton polish, safeguarded to stay inside [lo, hi]; one extra
    // quadratic step after the step-size test trips so the light-cone
    // residual lands at machine precision
    double tp = 0.5 * (lo + hi);
    const double tol = 1e-12 * std::max({1.0, std::abs(t), r_now / c});
    bool polished = false;
    for (int it = 0; it < 100; ++it) {
        const Vec3 rvec = s - wl.position(tp);
        const double r = norm(rvec);
        const double fv = c * (t - tp) - r;
        (fv >= 0.0 ? lo : hi) = tp;
        const double fp = -c + (r > 0.0 ? dot(rvec, wl.velocity(tp)) / r : -0.0);
        double tn = tp - fv / fp;
        if (!(tn >= lo && tn <= hi)) tn = 0.5 * (lo + hi);
        const double moved = std::abs(tn - tp);
        tp = tn;
        if (moved <= tol) {
            if (polished) return tp;
            polished = true;
        }
    }
    throw AccuracyError("retarded_time: Newton polish did not converge");
}

/// Retarded fields and the retardation geometry behind them.
struct FieldSample {
    Vec3 E, B;
    double t_ret = 0.0;
    Vec3 n;          ///< unit vector from retarded position to s
    double r = 0.0;  ///< retarded distance
};

/// Retarded electric and magnetic field of the moving defect at (t, s).
/// The defect carries charge q_sign * e with q_sign = -1 by default.
/// Throws SingularityError within kSingularityRadius of the worldline.
inline FieldSample lw_fields(const Worldline& wl, const Vec3& s, double t,
                             const Constants& consts, int q_sign = -1) {
    const double c = consts.c;
    const double tp = retarded_time(wl, s, t, consts);
    const Vec3 rvec = s - wl.position(tp);
    const double r = norm(rvec);
    if (r <= kSingularityRadius)
        throw SingularityError("lw_fields: evaluation point within " +
                               std::to_string(kSingularityRadius) + " of the worldline");
    const Vec3 n = rvec / r;
    const Vec3 beta = wl.velocity(tp) / c;
    const Vec3 adot = wl.acceleration(tp);
    const double g = gamma(wl.velocity(tp), c);
    const double kappa = 1.0 - dot(n, beta);  // > 0 for subluminal sources
    const double q = q_sign * consts.e;

    const Vec3 near_term = (n - beta) / (g * g * r * r);
    const Vec3 far_term = cross(n, cross(n - beta, adot)) / (c * c * r);
    FieldSample out;
    out.E = q / (kappa * kappa * kappa) * (near_term + far_term);
    out.B = cross(n, out.E);
    out.t_ret = tp;
    out.n = n;
    out.r = r;
    return out;
}

/// Discrete residuals of the four vacuum field equations at (t, s),
/// central differences with spatial step h and time step h/c. Away from
/// the worldline all four vanish as O(h^2).
struct MaxwellResiduals {
    double faraday = 0.0;  ///< |(1/c) dB/dt + curl E|
    double ampere = 0.0;   ///< |(1/c) dE/dt - curl B|
    double gauss_e = 0.0;  ///< |div E|
    double gauss_b = 0.0;  ///< |div B|
};

inline MaxwellResiduals maxwell_residuals(const Worldline& wl, const Vec3& s, double t,
                                          double h, const Constants& consts, int q_sign = -1) {
    const double c = consts.c;
    const double dt = h / c;
    auto F = [&](const Vec3& p, double tq) { return lw_fields(wl, p, tq, consts, q_sign); };

    const Vec3 ex{h, 0, 0}, ey{0, h, 0}, ez{0, 0, h};
    const FieldSample fxp = F(s + ex, t), fxm = F(s - ex, t);
    const FieldSample fyp = F(s + ey, t), fym = F(s - ey, t);
    const FieldSample fzp = F(s + ez, t), fzm = F(s - ez, t);
    const FieldSample ftp = F(s, t + dt), ftm = F(s, t - dt);

    auto curl = [&](auto take) {
        const Vec3 dX = (take(fxp) - take(fxm)) / (2 * h);
        const Vec3 dY = (take(fyp) - take(fym)) / (2 * h);
        const Vec3 dZ = (take(fzp) - take(fzm)) / (2 * h);
        return Vec3{dY.z - dZ.y, dZ.x - dX.z, dX.y - dY.x};
    };
    auto div = [&](auto take) {
        return (take(fxp).x - take(fxm).x + take(fyp).y - take(fym).y + take(fzp).z -
                take(fzm).z) /
               (2 * h);
    };
    auto takeE = [](const FieldSample& f) { return f.E; };
    auto takeB = [](const FieldSample& f) { return f.B; };

    const Vec3 dtE = (ftp.E - ftm.E) / (2 * dt);
    const Vec3 dtB = (ftp.B - ftm.B) / (2 * dt);

    MaxwellResiduals res;
    res.faraday = norm(dtB / c + curl(takeE));
    res.ampere = norm(dtE / c - curl(takeB));
    res.gauss_e = std::abs(div(takeE));
    res.gauss_b = std::abs(div(takeB));
    return res;
}

} // namespace chargelab
