#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <cstddef>
#include <numbers>
#include <vector>

#include <unsupported/Eigen/FFT>

#include "chargelab/constants.hpp"
#include "chargelab/errors.hpp"
#include "chargelab/hamilton_jacobi.hpp"
#include "chargelab/quantum/bohm.hpp"
#include "chargelab/vec3.hpp"

namespace chargelab {

/// Two-component spinor history on a periodic 1-D grid (the 1+1
/// dimensional reduction uses alpha = sigma_1, beta = sigma_3), with the
/// total norm integral recorded per stored slice.
struct SpinorField {
    HjGrid grid;
    double t0 = 0.0;
    double dt = 0.0;
    int nt = 1;
    std::vector<std::complex<double>> up;
    std::vector<std::complex<double>> dn;
    std::vector<double> norm;
    double dt_internal = 0.0;
    double norm_drift_rate = 0.0;  // relative drift per unit time
    bool norm_flagged = false;

    double time(int j) const { return t0 + j * dt; }
    std::complex<double> upat(int j, int i) const {
        return up[static_cast<std::size_t>(j) * grid.nodes() + static_cast<std::size_t>(i)];
    }
    std::complex<double> dnat(int j, int i) const {
        return dn[static_cast<std::size_t>(j) * grid.nodes() + static_cast<std::size_t>(i)];
    }

    void validate() const {
        grid.validate();
        if (grid.dim != 1) throw ConfigError("SpinorField: evolution is 1-D");
        if (nt < 1) throw ConfigError("SpinorField: nt must be >= 1");
        if (nt > 1 && !(dt > 0.0)) throw ConfigError("SpinorField: dt must be > 0");
        const std::size_t want = static_cast<std::size_t>(nt) * grid.nodes();
        if (up.size() != want || dn.size() != want)
            throw ConfigError("SpinorField: storage does not match grid x time");
        for (const auto& z : up)
            if (!std::isfinite(z.real()) || !std::isfinite(z.imag()))
                throw ConfigError("SpinorField: non-finite sample");
        for (const auto& z : dn)
            if (!std::isfinite(z.real()) || !std::isfinite(z.imag()))
                throw ConfigError("SpinorField: non-finite sample");
    }
};

/// Strang split-step evolution of
///   i hbar (1/c) d_t psi = m c beta psi
///       + alpha (-i hbar d_x + ec A/c) psi - ec (1/c) phi psi
/// with beta = sigma_3, alpha = sigma_1, ec = -q_sign e.  The kinetic
/// factor is applied exactly per Fourier mode, the potential factor
/// exactly per node, so each step is unitary up to FFT rounding.  The dt
/// gate is an accuracy bound (split-step has no stability limit): the
/// fastest local phase must stay resolved.
inline SpinorField evolve_dirac(const Constants& kc, const HjGrid& grid,
                                const std::vector<std::complex<double>>& up0,
                                const std::vector<std::complex<double>>& dn0,
                                const PotentialPair& pots, double dt, double T,
                                double q_sign = -1.0, int store_stride = 1,
                                double norm_tolerance = 1e-10) {
    kc.validate();
    grid.validate();
    pots.validate();
    if (grid.dim != 1) throw ConfigError("evolve_dirac: grid must be 1-D");
    if (!(dt > 0.0) || !(T > 0.0)) throw ConfigError("evolve_dirac: dt and T must be > 0");
    if (store_stride < 1) throw ConfigError("evolve_dirac: store_stride must be >= 1");
    if (std::abs(q_sign) != 1.0) throw ConfigError("evolve_dirac: q_sign must be +1 or -1");
    const int n = grid.n[0];
    if (up0.size() != static_cast<std::size_t>(n) || dn0.size() != static_cast<std::size_t>(n))
        throw ConfigError("evolve_dirac: initial data does not match the grid");
    for (int i = 0; i < n; ++i)
        if (!std::isfinite(up0[static_cast<std::size_t>(i)].real()) ||
            !std::isfinite(up0[static_cast<std::size_t>(i)].imag()) ||
            !std::isfinite(dn0[static_cast<std::size_t>(i)].real()) ||
            !std::isfinite(dn0[static_cast<std::size_t>(i)].imag()))
            throw ConfigError("evolve_dirac: non-finite initial data");

    const double c = kc.c, hbar = kc.hbar, m = kc.m, h = grid.h;
    const double ec = -q_sign * kc.e;

    double phimax = 0.0, amax = 0.0;
    for (int i = 0; i < n; ++i) {
        const Vec3 q = grid.node(i, 0, 0);
        phimax = std::max(phimax, std::abs(pots.phi(0.0, q)));
        amax = std::max(amax, std::abs(pots.A(0.0, q).x));
    }
    if (!(dt * (m * c * c + std::abs(ec) * (phimax + amax)) / hbar <= std::numbers::pi))
        throw ConfigError("evolve_dirac: dt does not resolve the fastest local phase");

    int nsteps = std::max(1, static_cast<int>(std::ceil(T / dt - 1e-9)));
    nsteps = ((nsteps + store_stride - 1) / store_stride) * store_stride;

    SpinorField out;
    out.grid = grid;
    out.t0 = 0.0;
    out.dt = dt * store_stride;
    out.nt = nsteps / store_stride + 1;
    out.dt_internal = dt;
    out.up.resize(static_cast<std::size_t>(out.nt) * grid.nodes());
    out.dn.resize(out.up.size());
    out.norm.resize(static_cast<std::size_t>(out.nt));

    // kinetic phases per Fourier mode: exp(-i (m c^2 s3 + c hbar k s1) dt / hbar)
    const double L = n * h;
    std::vector<double> cosk(static_cast<std::size_t>(n)), sinc(static_cast<std::size_t>(n)),
        kgrid(static_cast<std::size_t>(n));
    for (int j = 0; j < n; ++j) {
        const int jj = j < n / 2 ? j : j - n;
        const double k = 2.0 * std::numbers::pi * jj / L;
        const double E = std::sqrt(m * m * c * c * c * c + c * c * hbar * hbar * k * k);
        kgrid[static_cast<std::size_t>(j)] = k;
        cosk[static_cast<std::size_t>(j)] = std::cos(E * dt / hbar);
        sinc[static_cast<std::size_t>(j)] = std::sin(E * dt / hbar) / E;
    }

    std::vector<std::complex<double>> u(up0), d(dn0), fu(static_cast<std::size_t>(n)),
        fd(static_cast<std::size_t>(n));
    Eigen::FFT<double> fft;

    auto half_potential = [&](double t) {
        for (int i = 0; i < n; ++i) {
            const std::size_t ui = static_cast<std::size_t>(i);
            const Vec3 q = grid.node(i, 0, 0);
            const double theta = ec * pots.A(t, q).x * 0.5 * dt / hbar;
            const std::complex<double> phase =
                std::exp(std::complex<double>{0.0, ec * pots.phi(t, q) * 0.5 * dt / hbar});
            const std::complex<double> cu = u[ui], cd = d[ui];
            const double cth = std::cos(theta), sth = std::sin(theta);
            u[ui] = phase * (cth * cu - std::complex<double>{0.0, sth} * cd);
            d[ui] = phase * (cth * cd - std::complex<double>{0.0, sth} * cu);
        }
    };
    auto kinetic = [&]() {
        fft.fwd(fu, u);
        fft.fwd(fd, d);
        for (int j = 0; j < n; ++j) {
            const std::size_t uj = static_cast<std::size_t>(j);
            const double cth = cosk[uj], s = sinc[uj];
            const double mc2 = m * c * c, ck = c * hbar * kgrid[uj];
            const std::complex<double> a = fu[uj], b = fd[uj];
            // U = cos I - i s (mc^2 s3 + c hbar k s1)
            fu[uj] = cth * a - std::complex<double>{0.0, s} * (mc2 * a + ck * b);
            fd[uj] = cth * b - std::complex<double>{0.0, s} * (ck * a - mc2 * b);
        }
        fft.inv(u, fu);
        fft.inv(d, fd);
    };

    auto store = [&](int slot) {
        const std::size_t base = static_cast<std::size_t>(slot) * grid.nodes();
        double nrm = 0.0;
        for (int i = 0; i < n; ++i) {
            const std::size_t ui = static_cast<std::size_t>(i);
            out.up[base + ui] = u[ui];
            out.dn[base + ui] = d[ui];
            nrm += std::norm(u[ui]) + std::norm(d[ui]);
        }
        out.norm[static_cast<std::size_t>(slot)] = nrm * h;
    };

    store(0);
    for (int step = 1; step <= nsteps; ++step) {
        const double tm = (step - 0.5) * dt;
        half_potential(tm);
        kinetic();
        half_potential(tm);
        for (const auto& z : u)
            if (!std::isfinite(z.real()) || !std::isfinite(z.imag()))
                throw AccuracyError("evolve_dirac: non-finite field, aborting");
        if (step % store_stride == 0) store(step / store_stride);
    }

    const double n0 = out.norm[0];
    const double scale = std::max(std::abs(n0), 1e-300);
    for (int j = 1; j < out.nt; ++j)
        out.norm_drift_rate = std::max(
            out.norm_drift_rate, std::abs(out.norm[static_cast<std::size_t>(j)] - n0) /
                                     (scale * (out.time(j) - out.t0)));
    out.norm_flagged = out.norm_drift_rate > norm_tolerance;
    return out;
}

/// Guiding velocity of the 1+1 dimensional law: v = c (psi+ s1 psi)/(psi+ psi).
/// |v| <= c always (Cauchy-Schwarz); throws DomainError at nodes.
inline double bohm_velocity_dirac(const Constants& kc, std::complex<double> up,
                                  std::complex<double> dn,
                                  double rho_floor = 0.0) {
    const double rho = std::norm(up) + std::norm(dn);
    if (!(rho > rho_floor) || rho == 0.0)
        throw DomainError("bohm_velocity_dirac: spinor density below floor (node)");
    return kc.c * 2.0 * std::real(std::conj(up) * dn) / rho;
}

/// Four-component version: v_i = c (psi+ alpha_i psi)/(psi+ psi) with the
/// standard alpha_i = offdiag(sigma_i, sigma_i); psi = (chi, eta) stacked.
inline Vec3 bohm_velocity_dirac(const Constants& kc,
                                const std::array<std::complex<double>, 4>& psi,
                                double rho_floor = 0.0) {
    const std::complex<double>&a = psi[0], &b = psi[1], &f = psi[2], &g = psi[3];
    const double rho = std::norm(a) + std::norm(b) + std::norm(f) + std::norm(g);
    if (!(rho > rho_floor) || rho == 0.0)
        throw DomainError("bohm_velocity_dirac: spinor density below floor (node)");
    // chi+ sigma_i eta for sigma_1, sigma_2, sigma_3
    const std::complex<double> s1 = std::conj(a) * g + std::conj(b) * f;
    const std::complex<double> s2 =
        std::complex<double>{0.0, -1.0} * std::conj(a) * g +
        std::complex<double>{0.0, 1.0} * std::conj(b) * f;
    const std::complex<double> s3 = std::conj(a) * f - std::conj(b) * g;
    return (kc.c * 2.0 / rho) *
           Vec3{std::real(s1), std::real(s2), std::real(s3)};
}

/// Sample the guiding field of a spinor history; rho = psi+ psi.
inline BohmField bohm_velocity_dirac(const Constants& kc, const SpinorField& s) {
    s.validate();
    BohmField f;
    f.grid = s.grid;
    f.t0 = s.t0;
    f.dt = s.dt;
    f.nt = s.nt;
    f.v.assign(static_cast<std::size_t>(s.nt) * s.grid.nodes(), 0.0);
    f.rho.assign(f.v.size(), 0.0);
    for (int j = 0; j < s.nt; ++j)
        for (int i = 0; i < s.grid.n[0]; ++i) {
            const std::complex<double> a = s.upat(j, i), b = s.dnat(j, i);
            const double rho = std::norm(a) + std::norm(b);
            f.rhoat(j, i) = rho;
            f.vat(j, i) = rho > 0.0 ? kc.c * 2.0 * std::real(std::conj(a) * b) / rho : 0.0;
        }
    return f;
}

}  // namespace chargelab
