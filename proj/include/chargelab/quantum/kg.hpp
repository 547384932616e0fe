#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <vector>

#include "chargelab/constants.hpp"
#include "chargelab/errors.hpp"
#include "chargelab/hamilton_jacobi.hpp"
#include "chargelab/quantum/bohm.hpp"
#include "chargelab/vec3.hpp"

namespace chargelab {

/// Complex scalar field history on a 1-D grid with paired time
/// derivative storage (the evolution equation is second order in time)
/// and the total charge integral recorded per stored slice.
struct WaveFunction {
    HjGrid grid;
    double t0 = 0.0;
    double dt = 0.0;  // stored slice spacing
    int nt = 1;
    bool periodic = true;
    std::vector<std::complex<double>> psi;
    std::vector<std::complex<double>> dpsi_dt;
    std::vector<double> charge;
    double dt_internal = 0.0;
    double charge_drift_rate = 0.0;  // relative drift per unit time
    bool charge_flagged = false;

    double time(int j) const { return t0 + j * dt; }
    std::complex<double>& at(int j, int i) {
        return psi[static_cast<std::size_t>(j) * grid.nodes() + static_cast<std::size_t>(i)];
    }
    std::complex<double> at(int j, int i) const {
        return psi[static_cast<std::size_t>(j) * grid.nodes() + static_cast<std::size_t>(i)];
    }
    std::complex<double>& dat(int j, int i) {
        return dpsi_dt[static_cast<std::size_t>(j) * grid.nodes() + static_cast<std::size_t>(i)];
    }
    std::complex<double> dat(int j, int i) const {
        return dpsi_dt[static_cast<std::size_t>(j) * grid.nodes() + static_cast<std::size_t>(i)];
    }

    void validate() const {
        grid.validate();
        if (grid.dim != 1) throw ConfigError("WaveFunction: evolution is 1-D");
        if (nt < 1) throw ConfigError("WaveFunction: nt must be >= 1");
        if (nt > 1 && !(dt > 0.0)) throw ConfigError("WaveFunction: dt must be > 0");
        const std::size_t want = static_cast<std::size_t>(nt) * grid.nodes();
        if (psi.size() != want || dpsi_dt.size() != want)
            throw ConfigError("WaveFunction: storage does not match grid x time");
        for (const auto& z : psi)
            if (!std::isfinite(z.real()) || !std::isfinite(z.imag()))
                throw ConfigError("WaveFunction: non-finite sample");
    }
};

namespace detail {

struct KgSampledPots {
    std::vector<double> phi, Ax, Aprime, dphidt;
};

inline KgSampledPots kg_sample_pots(const HjGrid& g, const PotentialPair& pots,
                                    double t, double dt, bool periodic,
                                    bool with_time_derivative) {
    const int n = g.n[0];
    KgSampledPots s;
    s.phi.resize(n);
    s.Ax.resize(n);
    s.Aprime.resize(n);
    s.dphidt.assign(n, 0.0);
    for (int i = 0; i < n; ++i) {
        const Vec3 q = g.node(i, 0, 0);
        s.phi[static_cast<std::size_t>(i)] = pots.phi(t, q);
        s.Ax[static_cast<std::size_t>(i)] = pots.A(t, q).x;
        if (with_time_derivative)
            s.dphidt[static_cast<std::size_t>(i)] =
                (pots.phi(t + dt, q) - pots.phi(t - dt, q)) / (2.0 * dt);
    }
    for (int i = 0; i < n; ++i) {
        double am, ap;
        if (periodic) {
            am = s.Ax[static_cast<std::size_t>((i + n - 1) % n)];
            ap = s.Ax[static_cast<std::size_t>((i + 1) % n)];
        } else {
            am = s.Ax[static_cast<std::size_t>(std::max(i - 1, 0))];
            ap = s.Ax[static_cast<std::size_t>(std::min(i + 1, n - 1))];
        }
        s.Aprime[static_cast<std::size_t>(i)] = (ap - am) / (2.0 * g.h);
    }
    return s;
}

}  // namespace detail

/// Leapfrog evolution of the second-order wave equation
///   (i hbar (1/c) d_t + ec (1/c) phi)^2 psi
///     = m^2 c^2 psi + (-i hbar grad + ec (1/c) A)^2 psi
/// for the defect of charge sign q_sign (ec = -q_sign e).  The discrete
/// charge integral built from centred time differences is exactly
/// conserved when phi = 0 and drifts at scheme order otherwise; a drift
/// rate above charge_tolerance raises the flag on the returned history.
inline WaveFunction evolve_kg(const Constants& kc, const HjGrid& grid,
                              const std::vector<std::complex<double>>& psi0,
                              const std::vector<std::complex<double>>& dpsi_dt0,
                              const PotentialPair& pots, double dt, double T,
                              double q_sign = -1.0, bool periodic = true,
                              int store_stride = 1,
                              bool static_potentials = true,
                              double charge_tolerance = 1e-8) {
    kc.validate();
    grid.validate();
    pots.validate();
    if (grid.dim != 1) throw ConfigError("evolve_kg: grid must be 1-D");
    if (!(dt > 0.0) || !(T > 0.0)) throw ConfigError("evolve_kg: dt and T must be > 0");
    if (store_stride < 1) throw ConfigError("evolve_kg: store_stride must be >= 1");
    if (std::abs(q_sign) != 1.0) throw ConfigError("evolve_kg: q_sign must be +1 or -1");
    const int n = grid.n[0];
    if (psi0.size() != static_cast<std::size_t>(n) ||
        dpsi_dt0.size() != static_cast<std::size_t>(n))
        throw ConfigError("evolve_kg: initial data does not match the grid");
    for (int i = 0; i < n; ++i)
        if (!std::isfinite(psi0[static_cast<std::size_t>(i)].real()) ||
            !std::isfinite(psi0[static_cast<std::size_t>(i)].imag()) ||
            !std::isfinite(dpsi_dt0[static_cast<std::size_t>(i)].real()) ||
            !std::isfinite(dpsi_dt0[static_cast<std::size_t>(i)].imag()))
            throw ConfigError("evolve_kg: non-finite initial data");

    const double c = kc.c, hbar = kc.hbar, m = kc.m, h = grid.h;
    const double ec = -q_sign * kc.e;

    auto sample = [&](double t) {
        return detail::kg_sample_pots(grid, pots, t, dt, periodic, !static_potentials);
    };
    detail::KgSampledPots sp = sample(0.0);  // evolution starts at t = 0
    // resolution gate: the fastest leapfrog mode must stay well inside the
    // stability interval dt*omega <= 2
    double phimax = 0.0;
    for (double p : sp.phi) phimax = std::max(phimax, std::abs(p));
    const double omega_max =
        (c / hbar) * std::sqrt(m * m * c * c + 4.0 * hbar * hbar / (h * h)) +
        std::abs(ec) * phimax / hbar;
    if (!(dt * omega_max <= 1.8))
        throw ConfigError("evolve_kg: dt violates the leapfrog stability bound");

    int nsteps = std::max(1, static_cast<int>(std::ceil(T / dt - 1e-9)));
    nsteps = ((nsteps + store_stride - 1) / store_stride) * store_stride;

    WaveFunction w;
    w.grid = grid;
    w.t0 = 0.0;
    w.dt = dt * store_stride;
    w.nt = nsteps / store_stride + 1;
    w.periodic = periodic;
    w.dt_internal = dt;
    w.psi.resize(static_cast<std::size_t>(w.nt) * grid.nodes());
    w.dpsi_dt.resize(w.psi.size());
    w.charge.resize(static_cast<std::size_t>(w.nt));

    std::vector<std::complex<double>> prev(psi0), cur(psi0), next(static_cast<std::size_t>(n));
    const std::complex<double> iu{0.0, 1.0};

    auto wrap = [&](const std::vector<std::complex<double>>& f, int i) -> std::complex<double> {
        if (periodic) return f[static_cast<std::size_t>((i % n + n) % n)];
        if (i < 0 || i >= n) return {0.0, 0.0};
        return f[static_cast<std::size_t>(i)];
    };
    // F = (ec phi/hbar)^2 psi - (c/hbar)^2 (m^2c^2 psi + K psi)
    //     + i (ec dphi_dt/hbar) psi  with K = (-i hbar d_x + ec A/c)^2
    auto rhs = [&](const std::vector<std::complex<double>>& f, int i) {
        const std::size_t ui = static_cast<std::size_t>(i);
        const std::complex<double> fm = wrap(f, i - 1), f0 = f[ui], fp = wrap(f, i + 1);
        const std::complex<double> lap = (fp - 2.0 * f0 + fm) / (h * h);
        const std::complex<double> dx = (fp - fm) / (2.0 * h);
        const double a = ec * sp.Ax[ui] / c;
        const std::complex<double> K = -hbar * hbar * lap -
                                       iu * hbar * (ec * sp.Aprime[ui] / c * f0 + 2.0 * a * dx) +
                                       a * a * f0;
        const double gphi = ec * sp.phi[ui] / hbar;
        return gphi * gphi * f0 - (c * c / (hbar * hbar)) * (m * m * c * c * f0 + K) +
               iu * (ec * sp.dphidt[ui] / hbar) * f0;
    };

    auto store = [&](int slot, double t,
                     const std::vector<std::complex<double>>& f,
                     const std::vector<std::complex<double>>& chi) {
        const std::size_t base = static_cast<std::size_t>(slot) * grid.nodes();
        double q = 0.0;
        for (int i = 0; i < n; ++i) {
            const std::size_t ui = static_cast<std::size_t>(i);
            w.psi[base + ui] = f[ui];
            w.dpsi_dt[base + ui] = chi[ui];
            // rho_qu = Im(conj(psi) (-(hbar/mc^2) d_t + i ec phi/(mc^2)) psi)
            const std::complex<double> weighted =
                (-hbar / (m * c * c)) * chi[ui] +
                iu * (ec * sp.phi[ui] / (m * c * c)) * f[ui];
            q += std::imag(std::conj(f[ui]) * weighted);
        }
        w.charge[static_cast<std::size_t>(slot)] = q * h;
        (void)t;
    };

    // Taylor start: psi^1 = psi^0 + dt chi^0 + dt^2/2 (i g chi^0 + F(psi^0))
    store(0, 0.0, psi0, dpsi_dt0);
    for (int i = 0; i < n; ++i) {
        const std::size_t ui = static_cast<std::size_t>(i);
        const double gph = 2.0 * ec * sp.phi[ui] / hbar;
        cur[ui] = psi0[ui] + dt * dpsi_dt0[ui] +
                  0.5 * dt * dt * (iu * gph * dpsi_dt0[ui] + rhs(psi0, i));
    }
    if (!periodic) {
        cur[0] = 0.0;
        cur[static_cast<std::size_t>(n - 1)] = 0.0;
    }

    std::vector<std::complex<double>> chi(static_cast<std::size_t>(n));
    for (int step = 1; step <= nsteps; ++step) {
        if (!static_potentials) sp = sample(step * dt);
        for (int i = 0; i < n; ++i) {
            const std::size_t ui = static_cast<std::size_t>(i);
            const double half = 0.5 * dt * 2.0 * ec * sp.phi[ui] / hbar;  // g dt / 2
            const std::complex<double> num =
                2.0 * cur[ui] - (1.0 + iu * half) * prev[ui] + dt * dt * rhs(cur, i);
            next[ui] = num / (1.0 - iu * half);
        }
        if (!periodic) {
            next[0] = 0.0;
            next[static_cast<std::size_t>(n - 1)] = 0.0;
        }
        for (const auto& z : next)
            if (!std::isfinite(z.real()) || !std::isfinite(z.imag()))
                throw AccuracyError("evolve_kg: non-finite field, aborting");
        if (step % store_stride == 0) {
            for (int i = 0; i < n; ++i)
                chi[static_cast<std::size_t>(i)] =
                    (next[static_cast<std::size_t>(i)] - prev[static_cast<std::size_t>(i)]) /
                    (2.0 * dt);
            store(step / store_stride, step * dt, cur, chi);
        }
        std::swap(prev, cur);
        std::swap(cur, next);
    }
    // note: slice j holds psi at internal step j*stride with a centred chi,
    // except slice 0 which carries the supplied initial derivative

    const double q0 = w.charge[0];
    const double scale = std::max(std::abs(q0), 1e-300);
    for (int j = 1; j < w.nt; ++j) {
        const double rate =
            std::abs(w.charge[static_cast<std::size_t>(j)] - q0) / (scale * (w.time(j) - w.t0));
        w.charge_drift_rate = std::max(w.charge_drift_rate, rate);
    }
    w.charge_flagged = w.charge_drift_rate > charge_tolerance;
    return w;
}

/// Quantum density rho_qu = Im(conj(psi)(-(hbar/mc^2) d_t + i ec phi/(mc^2)) psi).
/// Positive for positive-frequency modes; its sign is the launch criterion
/// for trajectories.
inline double kg_density(const Constants& kc, std::complex<double> psi,
                         std::complex<double> dpsi_dt, double phi,
                         double q_sign = -1.0) {
    const double ec = -q_sign * kc.e;
    const std::complex<double> iu{0.0, 1.0};
    const std::complex<double> weighted =
        (-kc.hbar / (kc.m * kc.c * kc.c)) * dpsi_dt +
        iu * (ec * phi / (kc.m * kc.c * kc.c)) * psi;
    return std::imag(std::conj(psi) * weighted);
}

/// Guiding velocity v = c Im(conj(psi)(hbar d_x + i ec A/c) psi)
///                     / Im(conj(psi)(-hbar d_t / c + i ec phi/c) psi).
/// Throws DomainError at wavefunction nodes (|rho_qu| <= rho_floor).
inline double bohm_velocity_kg(const Constants& kc, std::complex<double> psi,
                               std::complex<double> dpsi_dt,
                               std::complex<double> dpsi_dx, double phi,
                               double Ax, double q_sign = -1.0,
                               double rho_floor = 0.0) {
    const double ec = -q_sign * kc.e;
    const std::complex<double> iu{0.0, 1.0};
    const double num = std::imag(std::conj(psi) *
                                 (kc.hbar * dpsi_dx + iu * (ec * Ax / kc.c) * psi));
    const double rho = kg_density(kc, psi, dpsi_dt, phi, q_sign);
    if (!(std::abs(rho) > rho_floor) || rho == 0.0)
        throw DomainError("bohm_velocity_kg: quantum density below floor (node)");
    // rho_qu = den/(m c) with den the printed denominator, so v = c num/den
    const double den = rho * kc.m * kc.c;
    return kc.c * num / den;
}

/// Sample guiding velocity and density on every stored slice of a history.
/// Nodes get v = 0 and carry their (tiny) density so the trajectory
/// integrator can steer around them.
inline BohmField bohm_velocity_kg(const Constants& kc, const WaveFunction& w,
                                  const PotentialPair& pots,
                                  double q_sign = -1.0) {
    w.validate();
    pots.validate();
    const int n = w.grid.n[0];
    BohmField f;
    f.grid = w.grid;
    f.t0 = w.t0;
    f.dt = w.dt;
    f.nt = w.nt;
    f.v.assign(static_cast<std::size_t>(w.nt) * w.grid.nodes(), 0.0);
    f.rho.assign(f.v.size(), 0.0);
    for (int j = 0; j < w.nt; ++j) {
        const double t = w.time(j);
        for (int i = 0; i < n; ++i) {
            const Vec3 q = w.grid.node(i, 0, 0);
            const double phi = pots.phi(t, q);
            const double Ax = pots.A(t, q).x;
            std::complex<double> fm, fp;
            if (w.periodic) {
                fm = w.at(j, (i + n - 1) % n);
                fp = w.at(j, (i + 1) % n);
            } else {
                fm = i > 0 ? w.at(j, i - 1) : std::complex<double>{0.0, 0.0};
                fp = i < n - 1 ? w.at(j, i + 1) : std::complex<double>{0.0, 0.0};
            }
            const std::complex<double> dx = (fp - fm) / (2.0 * w.grid.h);
            const double rho = kg_density(kc, w.at(j, i), w.dat(j, i), phi, q_sign);
            f.rhoat(j, i) = rho;
            try {
                f.vat(j, i) = bohm_velocity_kg(kc, w.at(j, i), w.dat(j, i), dx,
                                               phi, Ax, q_sign, 0.0);
            } catch (const DomainError&) {
                f.vat(j, i) = 0.0;  // exact node; density gate handles it
            }
        }
    }
    return f;
}

}  // namespace chargelab
