#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "chargelab/constants.hpp"
#include "chargelab/errors.hpp"
#include "chargelab/hamilton_jacobi.hpp"
#include "chargelab/kinematics.hpp"
#include "chargelab/numerics/interp.hpp"
#include "chargelab/trajectory.hpp"
#include "chargelab/vec3.hpp"

namespace chargelab {

/// Sampled guiding data on a 1-D grid x time: velocity v(t, x) and the
/// quantum density rho(t, x) it was derived from.  The density rides along
/// so the trajectory integrator can detect wavefunction nodes, where the
/// guiding law degenerates.
struct BohmField {
    HjGrid grid;
    double t0 = 0.0;
    double dt = 0.0;
    int nt = 1;
    std::vector<double> v;
    std::vector<double> rho;

    double time(int j) const { return t0 + j * dt; }
    double& vat(int j, int i) {
        return v[static_cast<std::size_t>(j) * grid.nodes() + static_cast<std::size_t>(i)];
    }
    double vat(int j, int i) const {
        return v[static_cast<std::size_t>(j) * grid.nodes() + static_cast<std::size_t>(i)];
    }
    double& rhoat(int j, int i) {
        return rho[static_cast<std::size_t>(j) * grid.nodes() + static_cast<std::size_t>(i)];
    }
    double rhoat(int j, int i) const {
        return rho[static_cast<std::size_t>(j) * grid.nodes() + static_cast<std::size_t>(i)];
    }

    void validate() const {
        grid.validate();
        if (grid.dim != 1) throw ConfigError("BohmField: trajectories need a 1-D grid");
        if (nt < 1) throw ConfigError("BohmField: nt must be >= 1");
        if (nt > 1 && !(dt > 0.0)) throw ConfigError("BohmField: dt must be > 0");
        const std::size_t want = static_cast<std::size_t>(nt) * grid.nodes();
        if (v.size() != want || rho.size() != want)
            throw ConfigError("BohmField: sample storage does not match grid x time");
        for (double x : v)
            if (!std::isfinite(x)) throw ConfigError("BohmField: non-finite velocity sample");
        for (double x : rho)
            if (!std::isfinite(x)) throw ConfigError("BohmField: non-finite density sample");
    }
};

namespace detail {

// cubic interpolation of one stored slice at position x; grid is 1-D
inline double bohm_interp(const BohmField& f, const std::vector<double>& data,
                          int j, double x) {
    const HjGrid& g = f.grid;
    const std::size_t base = static_cast<std::size_t>(j) * g.nodes();
    return interp_cubic_1d(
        [&](int i, int, int) { return data[base + static_cast<std::size_t>(i)]; },
        x, g.origin.x, g.h, g.n[0]);
}

}  // namespace detail

/// Integrate dQ/dt = v(t, Q) through a sampled guiding field with RK4,
/// linear interpolation in time and cubic in space.  Near wavefunction
/// nodes (interpolated density under rho_floor) or where the sampled v
/// turns superluminal the step is halved; if that fails persistently the
/// trajectory is truncated rather than driven through the singularity.
inline Trajectory bohm_trajectory(const Constants& kc, const BohmField& f,
                                  double q0x, double dt, double T, double m,
                                  double rho_floor = 1e-10) {
    f.validate();
    if (!(dt > 0.0) || !(T > 0.0)) throw ConfigError("bohm_trajectory: dt and T must be > 0");
    if (!(m > 0.0)) throw ConfigError("bohm_trajectory: m must be > 0");
    if (!(rho_floor >= 0.0)) throw ConfigError("bohm_trajectory: rho_floor must be >= 0");
    const double t_end = f.t0 + T;
    if (f.nt > 1 && t_end > f.time(f.nt - 1) + 1e-12 * std::abs(f.dt))
        throw ConfigError("bohm_trajectory: field history does not cover the horizon");

    const HjGrid& g = f.grid;
    const double x_lo = g.origin.x + g.h;            // one-cell interior margin
    const double x_hi = g.origin.x + (g.n[0] - 2) * g.h;
    const double vcap = kc.c * (1.0 - 1e-12);

    // returns false outside the grid or the time range
    auto eval = [&](double t, double x, double& v, double& rho) {
        if (x < x_lo || x > x_hi) return false;
        if (f.nt == 1) {
            v = detail::bohm_interp(f, f.v, 0, x);
            rho = detail::bohm_interp(f, f.rho, 0, x);
            return true;
        }
        double s = (t - f.t0) / f.dt;
        s = std::clamp(s, 0.0, static_cast<double>(f.nt - 1));
        int j = std::min(static_cast<int>(s), f.nt - 2);
        const double w = s - j;
        v = (1.0 - w) * detail::bohm_interp(f, f.v, j, x) +
            w * detail::bohm_interp(f, f.v, j + 1, x);
        rho = (1.0 - w) * detail::bohm_interp(f, f.rho, j, x) +
              w * detail::bohm_interp(f, f.rho, j + 1, x);
        return true;
    };

    Trajectory tr;
    tr.method = "bohm";
    tr.dt = dt;

    double t = f.t0, x = q0x;
    double v0, rho0;
    if (!eval(t, x, v0, rho0) || rho0 < rho_floor || std::abs(v0) >= vcap)
        throw ConfigError("bohm_trajectory: start point is outside the guided region");
    auto record = [&](double tt, double xx, double vv) {
        tr.states.push_back(ParticleState{
            tt, Vec3{xx, 0.0, 0.0},
            momentum_of_velocity(Vec3{vv, 0.0, 0.0}, m, kc.c)});
    };
    record(t, x, v0);

    double step = dt;
    const double step_min = dt / 4096.0;
    while (t < t_end - 1e-12 * dt) {
        const double h = std::min(step, t_end - t);
        double k1, k2, k3, k4, rho, vend;
        bool ok = true, degenerate = false;
        double probe;
        auto stage = [&](double ts, double xs, double& ks) {
            if (!eval(ts, xs, ks, probe)) { ok = false; return; }
            if (probe < rho_floor || std::abs(ks) >= vcap) degenerate = true;
        };
        stage(t, x, k1);
        if (ok && !degenerate) stage(t + 0.5 * h, x + 0.5 * h * k1, k2);
        if (ok && !degenerate) stage(t + 0.5 * h, x + 0.5 * h * k2, k3);
        if (ok && !degenerate) stage(t + h, x + h * k3, k4);
        double xn = x;
        if (ok && !degenerate) {
            xn = x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
            if (!eval(t + h, xn, vend, rho) || rho < rho_floor ||
                std::abs(vend) >= vcap)
                degenerate = true;
        }
        if (!ok) {  // left the grid
            tr.truncated = true;
            break;
        }
        if (degenerate) {
            if (step <= step_min) {  // node is unavoidable at this resolution
                tr.truncated = true;
                break;
            }
            step *= 0.5;
            continue;
        }
        t += h;
        x = xn;
        record(t, x, vend);
        if (step < dt) step = std::min(dt, 2.0 * step);
    }
    return tr;
}

}  // namespace chargelab
