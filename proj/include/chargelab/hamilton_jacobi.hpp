#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <random>
#include <utility>
#include <vector>

#include "chargelab/born_infeld.hpp"
#include "chargelab/constants.hpp"
#include "chargelab/errors.hpp"
#include "chargelab/field_integrals.hpp"
#include "chargelab/kinematics.hpp"
#include "chargelab/numerics/interp.hpp"
#include "chargelab/numerics/quadrature.hpp"
#include "chargelab/trajectory.hpp"
#include "chargelab/vec3.hpp"

namespace chargelab {

/// Scalar and vector potential samplers on configuration space. All
/// guidance formulas below are written for a defect of charge -e; a
/// positive charge enters through q_sign = +1, which flips the sign of
/// every explicit e (the printed forms carry +e for the -e defect).
/// The samplers are expected to be Lipschitz on the working domain;
/// sampled_lipschitz backs that up empirically.
struct PotentialPair {
    std::function<double(double, const Vec3&)> phi;
    std::function<Vec3(double, const Vec3&)> A;
    bool differentiable = true;

    void validate() const {
        if (!phi || !A) throw ConfigError("PotentialPair: phi and A callbacks are required");
    }
};

inline PotentialPair zero_potentials() {
    PotentialPair p;
    p.phi = [](double, const Vec3&) { return 0.0; };
    p.A = [](double, const Vec3&) { return Vec3{0, 0, 0}; };
    return p;
}

/// Empirical Lipschitz constant of the pair over a box: the largest
/// difference quotient of (phi, A) between random point pairs, spatial
/// and temporal displacements alike.
inline double sampled_lipschitz(const PotentialPair& p, const Vec3& lo, const Vec3& hi,
                                double t0, double t1, int nsamples = 1000,
                                std::uint64_t seed = 1) {
    p.validate();
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    auto point = [&] {
        return Vec3{lo.x + u01(rng) * (hi.x - lo.x), lo.y + u01(rng) * (hi.y - lo.y),
                    lo.z + u01(rng) * (hi.z - lo.z)};
    };
    double best = 0.0;
    for (int i = 0; i < nsamples; ++i) {
        const double ta = t0 + u01(rng) * (t1 - t0), tb = t0 + u01(rng) * (t1 - t0);
        const Vec3 qa = point(), qb = point();
        const double d2 = norm2(qb - qa) + (tb - ta) * (tb - ta);
        if (d2 == 0.0) continue;
        const double dphi = p.phi(tb, qb) - p.phi(ta, qa);
        const double dA = norm(p.A(tb, qb) - p.A(ta, qa));
        best = std::max(best, std::sqrt((dphi * dphi + dA * dA) / d2));
    }
    return best;
}

/// Gauge generator Upsilon(t, q) with analytic second derivatives. A
/// generator marked in_gauge must satisfy the wave equation
/// (1/c^2) d2t Upsilon = lap Upsilon, which preserves the potential
/// evolution system's gauge condition.
struct GaugeFunction {
    std::function<double(double, const Vec3&)> value;
    std::function<double(double, const Vec3&)> dvalue_dt;
    std::function<Vec3(double, const Vec3&)> gradient;
    std::function<double(double, const Vec3&)> d2value_dt2;
    std::function<double(double, const Vec3&)> laplacian;
    bool in_gauge = false;

    void validate() const {
        if (!value || !dvalue_dt || !gradient)
            throw ConfigError("GaugeFunction: value, dvalue_dt, gradient are required");
        if (in_gauge && (!d2value_dt2 || !laplacian))
            throw ConfigError("GaugeFunction: in_gauge needs analytic second derivatives");
    }

    double wave_residual(double t, const Vec3& q, double c) const {
        if (!d2value_dt2 || !laplacian)
            throw ConfigError("GaugeFunction: second derivatives not provided");
        return d2value_dt2(t, q) / (c * c) - laplacian(t, q);
    }

    /// Largest wave-equation residual over the sample set; throws if the
    /// in_gauge promise is broken (residual >= 1e-8).
    double check_in_gauge(double c, const std::vector<std::pair<double, Vec3>>& samples) const {
        validate();
        double worst = 0.0;
        for (const auto& [t, q] : samples) worst = std::max(worst, std::abs(wave_residual(t, q, c)));
        if (in_gauge && !(worst < 1e-8))
            throw ConfigError("GaugeFunction: marked in_gauge but wave residual >= 1e-8");
        return worst;
    }

    /// Same check on a default pseudo-random probe set in the unit box,
    /// t in [0, 2].
    double check_in_gauge(double c) const {
        std::mt19937_64 rng(314159);
        std::uniform_real_distribution<double> us(-1.0, 1.0), ut(0.0, 2.0);
        std::vector<std::pair<double, Vec3>> samples;
        samples.reserve(256);
        for (int i = 0; i < 256; ++i)
            samples.emplace_back(ut(rng), Vec3{us(rng), us(rng), us(rng)});
        return check_in_gauge(c, samples);
    }
};

/// Uniform configuration grid with 1, 2, or 3 active axes. Inactive
/// axes have a single node; queries along them are free coordinates.
struct HjGrid {
    int dim = 1;
    Vec3 origin;
    double h = 0.0;
    std::array<int, 3> n{1, 1, 1};

    void validate() const {
        if (dim < 1 || dim > 3) throw ConfigError("HjGrid: dim must be 1, 2, or 3");
        if (!(h > 0.0)) throw ConfigError("HjGrid: h must be > 0");
        for (int a = 0; a < 3; ++a) {
            if (a < dim && n[a] < 4)
                throw ConfigError("HjGrid: active axes need at least 4 nodes");
            if (a >= dim && n[a] != 1) throw ConfigError("HjGrid: inactive axes must have n = 1");
        }
    }
    std::size_t nodes() const {
        return static_cast<std::size_t>(n[0]) * n[1] * n[2];
    }
    std::size_t index(int i, int j, int k) const {
        return (static_cast<std::size_t>(k) * n[1] + j) * n[0] + i;
    }
    Vec3 node(int i, int j, int k) const {
        return origin + h * Vec3{double(i), double(j), double(k)};
    }
};

/// S sampled on a configuration grid x uniformly spaced time slices.
/// dt is the slice spacing of the stored block; solve_hj may advance
/// with a finer internal step (dt_internal) and store every stride-th
/// slice. cfl records c*dt_internal/h of the producing run.
struct ScalarGridField {
    HjGrid grid;
    double t0 = 0.0;
    double dt = 0.0;
    int nt = 1;
    double dt_internal = 0.0;
    double cfl = 0.0;
    double error_estimate = 0.0;  ///< Richardson gap of a dt/2 rerun at the final slice
    std::vector<double> S;

    double time(int j) const { return t0 + j * dt; }
    const double* slice(int j) const { return S.data() + static_cast<std::size_t>(j) * grid.nodes(); }
    double* slice(int j) { return S.data() + static_cast<std::size_t>(j) * grid.nodes(); }
    double at(int j, int i0, int i1, int i2) const { return slice(j)[grid.index(i0, i1, i2)]; }
    double& at(int j, int i0, int i1, int i2) { return slice(j)[grid.index(i0, i1, i2)]; }

    void validate() const {
        grid.validate();
        if (nt < 1) throw ConfigError("ScalarGridField: nt must be >= 1");
        if (nt > 1 && !(dt > 0.0)) throw ConfigError("ScalarGridField: dt must be > 0");
        if (S.size() != grid.nodes() * static_cast<std::size_t>(nt))
            throw ConfigError("ScalarGridField: value count does not match grid x time layout");
        for (double v : S)
            if (!std::isfinite(v)) throw ConfigError("ScalarGridField: non-finite value");
    }
};

/// Sample an initial slice S0(q) on a grid. dt is the intended solver
/// time step (CFL-checked by solve_hj).
inline ScalarGridField make_slice(const HjGrid& grid, double t0, double dt,
                                  const std::function<double(const Vec3&)>& S0) {
    grid.validate();
    if (!S0) throw ConfigError("make_slice: sampler is required");
    ScalarGridField f;
    f.grid = grid;
    f.t0 = t0;
    f.dt = dt;
    f.nt = 1;
    f.S.resize(grid.nodes());
    for (int k = 0; k < grid.n[2]; ++k)
        for (int j = 0; j < grid.n[1]; ++j)
            for (int i = 0; i < grid.n[0]; ++i) f.S[grid.index(i, j, k)] = S0(grid.node(i, j, k));
    return f;
}

namespace detail {

/// One monotone Lax-Friedrichs step of dS/dt = -H(grad S, q, t) with
/// H = c sqrt(m^2 c^2 + |p + (ec/c) A|^2) - ec phi and dissipation
/// coefficient alpha = c per axis (the global bound on |dH/dp|).
/// One-sided differences at the boundary come from linear ghost
/// extrapolation, which makes p+ = p- there.
inline void lf_step(const HjGrid& g, const std::vector<double>& S, std::vector<double>& out,
                    const PotentialPair& pots, double t, double dtstep, double m, double ec,
                    double c) {
    const int nx = g.n[0], ny = g.n[1], nz = g.n[2];
    const double inv_h = 1.0 / g.h;
    const double mc2 = m * m * c * c;
    for (int k = 0; k < nz; ++k)
        for (int j = 0; j < ny; ++j)
            for (int i = 0; i < nx; ++i) {
                const std::size_t id = g.index(i, j, k);
                const double s0 = S[id];
                double pbar[3] = {0.0, 0.0, 0.0};
                double jump = 0.0;  // sum_k (p+_k - p-_k)
                for (int a = 0; a < g.dim; ++a) {
                    const int idx[3] = {i, j, k};
                    const int na = g.n[a];
                    auto neighbor = [&](int shift) {
                        int t3[3] = {idx[0], idx[1], idx[2]};
                        t3[a] += shift;
                        return S[g.index(t3[0], t3[1], t3[2])];
                    };
                    const double sm = idx[a] > 0 ? neighbor(-1) : 2.0 * s0 - neighbor(+1);
                    const double sp = idx[a] < na - 1 ? neighbor(+1) : 2.0 * s0 - neighbor(-1);
                    const double pm = (s0 - sm) * inv_h;
                    const double pp = (sp - s0) * inv_h;
                    pbar[a] = 0.5 * (pm + pp);
                    jump += pp - pm;
                }
                const Vec3 q = g.node(i, j, k);
                const Vec3 P = Vec3{pbar[0], pbar[1], pbar[2]} + (ec / c) * pots.A(t, q);
                const double H = c * std::sqrt(mc2 + norm2(P)) - ec * pots.phi(t, q);
                out[id] = s0 - dtstep * H + 0.5 * c * dtstep * jump;
            }
}

inline void advance_lf(const HjGrid& g, std::vector<double>& S, const PotentialPair& pots,
                       double t_start, double dtstep, int nsteps, double m, double ec, double c,
                       const std::function<void(int, const std::vector<double>&)>& on_slice) {
    std::vector<double> next(S.size());
    for (int step = 0; step < nsteps; ++step) {
        lf_step(g, S, next, pots, t_start + step * dtstep, dtstep, m, ec, c);
        S.swap(next);
        for (double v : S)
            if (!std::isfinite(v)) throw AccuracyError("solve_hj: non-finite S, aborting");
        if (on_slice) on_slice(step + 1, S);
    }
}

} // namespace detail

/// Advance the relativistic Hamilton-Jacobi PDE
///   (1/c) dS/dt = -sqrt(m^2 c^2 + |grad S + (ec/c) A|^2) + (ec/c) phi
/// from the last slice of S0 for duration T with a first-order monotone
/// Lax-Friedrichs scheme (ec = e for q_sign = -1). The step is S0.dt,
/// CFL-checked against c dt/h <= 0.5; the step count rounds up to a
/// multiple of store_stride and every stride-th slice is stored, so the
/// returned block has uniform slice spacing stride*dt. A dt/2 rerun's
/// gap at the final slice is recorded as error_estimate (temporal
/// Richardson estimate) unless richardson is false.
inline ScalarGridField solve_hj(const Constants& kc, const ScalarGridField& S0,
                                const PotentialPair& pots, double m, double q_sign, double T,
                                int store_stride = 1, bool richardson = true) {
    S0.validate();
    pots.validate();
    if (!(m > 0.0) || !(T > 0.0)) throw ConfigError("solve_hj: need m > 0 and T > 0");
    if (store_stride < 1) throw ConfigError("solve_hj: store_stride must be >= 1");
    const double dt = S0.dt;
    if (!(dt > 0.0)) throw ConfigError("solve_hj: S0.dt must be > 0");
    const double cfl = kc.c * dt / S0.grid.h;
    if (!(cfl <= 0.5 + 1e-12)) throw ConfigError("solve_hj: CFL violation, need c dt/h <= 0.5");
    const double ec = -q_sign * kc.e;

    int nsteps = std::max(1, static_cast<int>(std::ceil(T / dt - 1e-9)));
    nsteps = ((nsteps + store_stride - 1) / store_stride) * store_stride;
    const double t_start = S0.time(S0.nt - 1);

    ScalarGridField out;
    out.grid = S0.grid;
    out.t0 = t_start;
    out.dt = dt * store_stride;
    out.dt_internal = dt;
    out.nt = nsteps / store_stride + 1;
    out.cfl = cfl;
    out.S.resize(out.grid.nodes() * static_cast<std::size_t>(out.nt));

    std::vector<double> work(S0.slice(S0.nt - 1), S0.slice(S0.nt - 1) + S0.grid.nodes());
    std::copy(work.begin(), work.end(), out.slice(0));
    detail::advance_lf(S0.grid, work, pots, t_start, dt, nsteps, m, ec, kc.c,
                       [&](int step, const std::vector<double>& s) {
                           if (step % store_stride == 0)
                               std::copy(s.begin(), s.end(), out.slice(step / store_stride));
                       });

    if (richardson) {
        std::vector<double> half(S0.slice(S0.nt - 1), S0.slice(S0.nt - 1) + S0.grid.nodes());
        detail::advance_lf(S0.grid, half, pots, t_start, 0.5 * dt, 2 * nsteps, m, ec, kc.c,
                           nullptr);
        double gap = 0.0;
        const double* fine = out.slice(out.nt - 1);
        for (std::size_t i = 0; i < half.size(); ++i)
            gap = std::max(gap, std::abs(half[i] - fine[i]));
        out.error_estimate = gap;
    }
    return out;
}

/// Pointwise residual of the Lorentz-scalar squared form
///   (dS/cdt - ec phi/c)^2 - |grad S + ec A/c|^2 - m^2 c^2
/// by central differences; boundary nodes (space or time) carry 0.
inline ScalarGridField hj_squared_residual(const Constants& kc, const ScalarGridField& S,
                                           const PotentialPair& pots, double m,
                                           double q_sign = -1.0) {
    S.validate();
    pots.validate();
    if (S.nt < 3) throw ConfigError("hj_squared_residual: need at least 3 time slices");
    const double ec = -q_sign * kc.e;
    const double c = kc.c;
    const HjGrid& g = S.grid;
    ScalarGridField r = S;
    std::fill(r.S.begin(), r.S.end(), 0.0);
    r.error_estimate = 0.0;
    for (int tslice = 1; tslice + 1 < S.nt; ++tslice) {
        const double t = S.time(tslice);
        for (int k = 0; k < g.n[2]; ++k)
            for (int j = 0; j < g.n[1]; ++j)
                for (int i = 0; i < g.n[0]; ++i) {
                    const int idx[3] = {i, j, k};
                    bool interior = true;
                    for (int a = 0; a < g.dim; ++a)
                        if (idx[a] == 0 || idx[a] == g.n[a] - 1) interior = false;
                    if (!interior) continue;
                    const double st = (S.at(tslice + 1, i, j, k) - S.at(tslice - 1, i, j, k)) /
                                      (2.0 * S.dt);
                    Vec3 grad{0, 0, 0};
                    double* gp = &grad.x;
                    for (int a = 0; a < g.dim; ++a) {
                        int lo3[3] = {i, j, k}, hi3[3] = {i, j, k};
                        lo3[a] -= 1;
                        hi3[a] += 1;
                        gp[a] = (S.at(tslice, hi3[0], hi3[1], hi3[2]) -
                                 S.at(tslice, lo3[0], lo3[1], lo3[2])) /
                                (2.0 * g.h);
                    }
                    const Vec3 q = g.node(i, j, k);
                    const Vec3 P = grad + (ec / c) * pots.A(t, q);
                    const double w = st / c - ec * pots.phi(t, q) / c;
                    r.at(tslice, i, j, k) = w * w - norm2(P) - m * m * c * c;
                }
    }
    return r;
}

namespace detail {

/// Per-slice spatial gradient of S: fourth-order central differences in
/// the interior, falling back to second-order central and one-sided at
/// the edges. Components along inactive axes are zero.
inline void hj_gradient_slice(const HjGrid& g, const double* S, std::vector<Vec3>& grad) {
    grad.assign(g.nodes(), Vec3{0, 0, 0});
    const double inv_h = 1.0 / g.h;
    for (int k = 0; k < g.n[2]; ++k)
        for (int j = 0; j < g.n[1]; ++j)
            for (int i = 0; i < g.n[0]; ++i) {
                const int idx[3] = {i, j, k};
                Vec3 gv{0, 0, 0};
                double* gp = &gv.x;
                for (int a = 0; a < g.dim; ++a) {
                    auto at = [&](int shift) {
                        int t3[3] = {idx[0], idx[1], idx[2]};
                        t3[a] += shift;
                        return S[g.index(t3[0], t3[1], t3[2])];
                    };
                    const int p = idx[a], na = g.n[a];
                    if (p >= 2 && p + 2 < na)
                        gp[a] = (8.0 * (at(1) - at(-1)) - (at(2) - at(-2))) / 12.0 * inv_h;
                    else if (p >= 1 && p + 1 < na)
                        gp[a] = 0.5 * (at(1) - at(-1)) * inv_h;
                    else if (p == 0)
                        gp[a] = (-1.5 * at(0) + 2.0 * at(1) - 0.5 * at(2)) * inv_h;
                    else
                        gp[a] = (1.5 * at(0) - 2.0 * at(-1) + 0.5 * at(-2)) * inv_h;
                }
                grad[g.index(i, j, k)] = gv;
            }
}

/// Tricubic interpolation of one gradient component grid at q;
/// collapses to bicubic/cubic on lower-dimensional grids.
inline Vec3 hj_interp_grad(const HjGrid& g, const std::vector<Vec3>& grad, const Vec3& q) {
    Vec3 out{0, 0, 0};
    double* op = &out.x;
    for (int comp = 0; comp < g.dim; ++comp) {
        auto f = [&](std::size_t i, std::size_t j, std::size_t k) {
            const Vec3& v = grad[g.index(int(i), int(j), int(k))];
            return comp == 0 ? v.x : (comp == 1 ? v.y : v.z);
        };
        if (g.dim == 1)
            op[comp] = interp_cubic_1d(f, q.x, g.origin.x, g.h, g.n[0]);
        else if (g.dim == 2)
            op[comp] = interp_cubic_2d(f, q.x, q.y, g.origin.x, g.origin.y, g.h, g.n[0], g.n[1]);
        else
            op[comp] = interp_cubic_3d(f, q.x, q.y, q.z, g.origin.x, g.origin.y, g.origin.z,
                                       g.h, g.n[0], g.n[1], g.n[2]);
    }
    return out;
}

/// True when q sits inside the cubic-stencil-safe region on every
/// active axis (one full cell away from the boundary).
inline bool hj_inside(const HjGrid& g, const Vec3& q) {
    const double* qp = &q.x;
    const double* op = &g.origin.x;
    for (int a = 0; a < g.dim; ++a) {
        const double s = (qp[a] - op[a]) / g.h;
        if (!(s >= 1.0 && s <= g.n[a] - 2.0)) return false;
    }
    return true;
}

} // namespace detail

/// Guide a defect along the Hamilton-Jacobi velocity field
///   dQ/dt = c (grad S + ec A/c) / sqrt(m^2 c^2 + |grad S + ec A/c|^2),
/// RK4 in time, tri-cubic interpolation of the per-slice grad S grids
/// and linear interpolation between slices. |dQ/dt| < c holds by the
/// formula. Recorded P is the kinetic momentum grad S + ec A/c. The
/// trajectory truncates (flagged) when a stage leaves the grid's
/// interpolation-safe interior. error_estimate is the endpoint gap
/// against a 2dt rerun.
inline Trajectory guide(const Constants& kc, const ScalarGridField& S, const PotentialPair& pots,
                        const Vec3& Q0, double dt, double T, double m, double q_sign = -1.0) {
    S.validate();
    pots.validate();
    if (!(m > 0.0)) throw ConfigError("guide: m must be > 0");
    if (!(dt > 0.0) || !(T > 0.0)) throw ConfigError("guide: need dt > 0 and T > 0");
    const double ec = -q_sign * kc.e;
    const double mc2 = m * m * kc.c * kc.c;

    // rolling two-slice gradient cache
    std::vector<Vec3> grad_a, grad_b;
    int cached = -2;
    auto ensure_pair = [&](int j) {
        j = std::clamp(j, 0, std::max(0, S.nt - 2));
        if (j == cached) return j;
        if (j == cached + 1 && S.nt > 1) {
            grad_a.swap(grad_b);
            detail::hj_gradient_slice(S.grid, S.slice(std::min(j + 1, S.nt - 1)), grad_b);
        } else {
            detail::hj_gradient_slice(S.grid, S.slice(j), grad_a);
            detail::hj_gradient_slice(S.grid, S.slice(std::min(j + 1, S.nt - 1)), grad_b);
        }
        cached = j;
        return j;
    };

    auto kinetic = [&](double t, const Vec3& q) {
        Vec3 g;
        if (S.nt == 1) {
            ensure_pair(0);
            g = detail::hj_interp_grad(S.grid, grad_a, q);
        } else {
            double s = (t - S.t0) / S.dt;
            const int j = ensure_pair(static_cast<int>(std::floor(s)));
            const double w = std::clamp(s - j, 0.0, 1.0);
            const Vec3 ga = detail::hj_interp_grad(S.grid, grad_a, q);
            const Vec3 gb = detail::hj_interp_grad(S.grid, grad_b, q);
            g = (1.0 - w) * ga + w * gb;
        }
        return g + (ec / kc.c) * pots.A(t, q);
    };
    auto vel = [&](double t, const Vec3& q) {
        const Vec3 P = kinetic(t, q);
        return kc.c / std::sqrt(mc2 + norm2(P)) * P;
    };

    const int nsteps = std::max(1, static_cast<int>(std::ceil(T / dt - 1e-9)));
    auto run = [&](double step, int count, Trajectory* record) {
        Vec3 Q = Q0;
        double t = S.t0;
        if (record) record->states.push_back({t, Q, kinetic(t, Q)});
        for (int n = 0; n < count; ++n) {
            const double h = std::min(step, S.t0 + T - t);
            if (!(h > 0.0)) break;
            if (!detail::hj_inside(S.grid, Q)) {
                if (record) record->truncated = true;
                return Q;
            }
            const Vec3 k1 = vel(t, Q);
            Vec3 stage = Q + 0.5 * h * k1;
            if (!detail::hj_inside(S.grid, stage)) {
                if (record) record->truncated = true;
                return Q;
            }
            const Vec3 k2 = vel(t + 0.5 * h, stage);
            stage = Q + 0.5 * h * k2;
            if (!detail::hj_inside(S.grid, stage)) {
                if (record) record->truncated = true;
                return Q;
            }
            const Vec3 k3 = vel(t + 0.5 * h, stage);
            stage = Q + h * k3;
            if (!detail::hj_inside(S.grid, stage)) {
                if (record) record->truncated = true;
                return Q;
            }
            const Vec3 k4 = vel(t + h, stage);
            Q = Q + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
            t += h;
            if (!detail::hj_inside(S.grid, Q)) {
                if (record) record->truncated = true;
                return Q;
            }
            if (record) record->states.push_back({t, Q, kinetic(t, Q)});
        }
        return Q;
    };

    Trajectory tr;
    tr.method = "hj-guide";
    tr.dt = dt;
    run(dt, nsteps, &tr);
    cached = -2;
    const Vec3 coarse = run(2.0 * dt, (nsteps + 1) / 2, nullptr);
    tr.error_estimate = norm(tr.back().Q - coarse);
    return tr;
}

/// Guide along explicit velocity data v(t, q) (no S field involved).
/// Used for generic velocity laws given in closed form.
inline Trajectory guide(const Constants& kc, const std::function<Vec3(double, const Vec3&)>& v,
                        const Vec3& Q0, double dt, double T, double m, double t0 = 0.0) {
    if (!v) throw ConfigError("guide: velocity sampler is required");
    if (!(m > 0.0) || !(dt > 0.0) || !(T > 0.0))
        throw ConfigError("guide: need m > 0, dt > 0, T > 0");
    Trajectory tr;
    tr.method = "velocity-guide";
    tr.dt = dt;
    Vec3 Q = Q0;
    double t = t0;
    tr.states.push_back({t, Q, momentum_of_velocity(v(t, Q), m, kc.c)});
    const int nsteps = std::max(1, static_cast<int>(std::ceil(T / dt - 1e-9)));
    for (int n = 0; n < nsteps; ++n) {
        const double h = std::min(dt, t0 + T - t);
        if (!(h > 0.0)) break;
        const Vec3 k1 = v(t, Q);
        const Vec3 k2 = v(t + 0.5 * h, Q + 0.5 * h * k1);
        const Vec3 k3 = v(t + 0.5 * h, Q + 0.5 * h * k2);
        const Vec3 k4 = v(t + h, Q + h * k3);
        Q = Q + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        t += h;
        tr.states.push_back({t, Q, momentum_of_velocity(v(t, Q), m, kc.c)});
    }
    return tr;
}

/// Gauge-transformed potentials and S field:
///   phi -> phi - (1/c) dt Upsilon,  A -> A + grad Upsilon,
///   S -> S - (ec/c) Upsilon         (ec = e for the -e defect).
struct GaugeTransformed {
    PotentialPair pots;
    ScalarGridField S;
};

inline GaugeTransformed gauge_transform(const Constants& kc, const PotentialPair& pots,
                                        const ScalarGridField& S, const GaugeFunction& ups,
                                        double q_sign = -1.0) {
    pots.validate();
    ups.validate();
    S.validate();
    const double ec = -q_sign * kc.e;
    GaugeTransformed out;
    const auto phi_old = pots.phi;
    const auto A_old = pots.A;
    const auto dY = ups.dvalue_dt;
    const auto gY = ups.gradient;
    const double c = kc.c;
    out.pots.phi = [phi_old, dY, c](double t, const Vec3& q) {
        return phi_old(t, q) - dY(t, q) / c;
    };
    out.pots.A = [A_old, gY](double t, const Vec3& q) { return A_old(t, q) + gY(t, q); };
    out.pots.differentiable = pots.differentiable;
    out.S = S;
    const HjGrid& g = S.grid;
    for (int j = 0; j < S.nt; ++j) {
        const double t = S.time(j);
        double* sl = out.S.slice(j);
        for (int kz = 0; kz < g.n[2]; ++kz)
            for (int jy = 0; jy < g.n[1]; ++jy)
                for (int ix = 0; ix < g.n[0]; ++ix)
                    sl[g.index(ix, jy, kz)] -= (ec / c) * ups.value(t, g.node(ix, jy, kz));
    }
    return out;
}

/// Report of the static self-consistency check: a resting defect in its
/// own static field solves the parallel-processing system exactly.
struct StaticCheckReport {
    double phi1_value = 0.0;        ///< phi_1(q), the on-defect potential
    double phi1_spread = 0.0;       ///< max |phi_1(q) - phi_1(0)| over probes
    double hj_residual = 0.0;       ///< max |PDE residual| of S = (-mc^2 + ec phi_1) t
    double v_max = 0.0;             ///< sup |v| of the generic velocity field
    double efield_residual_h = 0.0; ///< max |E_aether + grad phi| at spacing h
    double efield_residual_h2 = 0.0;///< same at spacing h/2 (order check)
    double h_max_max = 0.0;         ///< max |H| (zero for B = 0, so curl H = 0)
    double gauss_flux_error = 0.0;  ///< relative error of the -4 pi e sphere flux
    bool phi1_constant = false;
    bool hj_ok = false;
    bool rest_ok = false;
    bool static_maxwell_ok = false;
    bool all_pass() const { return phi1_constant && hj_ok && rest_ok && static_maxwell_ok; }
};

/// Static sharp-field data for a -e defect: phi#(s, q) = phi_Born(|s-q|),
/// A# = 0, D#(s, q) = born_displacement(s - q). Verifies:
///  (i)  phi_1(q) = phi#(q, q) is q-independent,
///  (ii) S(t, q) = (-mc^2 + e phi_1) t solves the parallel-processing
///       HJ PDE with residual < 1e-10 (discrete t- and q-stencils),
///  (iii) the generic velocity law gives v = 0 (< 1e-12),
///  (iv) with v = 0 the sharp evolution system reduces to the static
///       field equations: E# = -grad phi# to O(h^2), H# = 0, and the
///       displacement flux through spheres is -4 pi e.
inline StaticCheckReport static_selfconsistency_check(const Constants& kc) {
    kc.validate();
    StaticCheckReport rep;
    const double e = kc.e, b = kc.b, m = kc.m, c = kc.c;
    const double ec = e;  // -e defect
    const double r0 = born_radius(e, b);

    auto phi_sharp = [&](const Vec3& s, const Vec3& q) { return born_potential(norm(s - q), e, b); };

    // (i) on-defect potential is the same wherever the defect sits
    rep.phi1_value = phi_sharp({0, 0, 0}, {0, 0, 0});
    const Vec3 probes[] = {{0, 0, 0}, {1.3 * r0, 0, 0}, {-0.4 * r0, 2.0 * r0, 0.7 * r0},
                           {5.0 * r0, -3.0 * r0, 1.0 * r0}};
    for (const Vec3& q : probes)
        rep.phi1_spread = std::max(rep.phi1_spread, std::abs(phi_sharp(q, q) - rep.phi1_value));
    rep.phi1_constant = rep.phi1_spread < 1e-12 * std::abs(rep.phi1_value);

    // (ii) linear-in-t spatially uniform S on a small grid block
    {
        HjGrid g;
        g.dim = 3;
        g.h = 0.5 * r0;
        g.n = {7, 7, 7};
        g.origin = Vec3{-1.5 * r0, -1.5 * r0, -1.5 * r0};
        const double rate = -m * c * c + ec * rep.phi1_value;
        ScalarGridField S;
        S.grid = g;
        S.t0 = 0.0;
        S.dt = 0.05;
        S.nt = 5;
        S.S.resize(g.nodes() * 5);
        for (int j = 0; j < 5; ++j)
            std::fill(S.slice(j), S.slice(j) + g.nodes(), rate * S.time(j));
        PotentialPair pp;
        pp.phi = [&rep](double, const Vec3&) { return rep.phi1_value; };
        pp.A = [](double, const Vec3&) { return Vec3{0, 0, 0}; };
        const ScalarGridField res = hj_squared_residual(kc, S, pp, m, -1.0);
        // squared-form residual in units of (mc)^2
        for (double v : res.S) rep.hj_residual = std::max(rep.hj_residual, std::abs(v));
        rep.hj_residual /= m * m * c * c;
        rep.hj_ok = rep.hj_residual < 1e-10;

        // (iii) velocity field of that S block
        std::vector<Vec3> grad;
        detail::hj_gradient_slice(g, S.slice(2), grad);
        for (const Vec3& gv : grad) {
            const Vec3 P = gv;  // A_1 = 0
            rep.v_max = std::max(rep.v_max, norm(c / std::sqrt(m * m * c * c + norm2(P)) * P));
        }
        rep.rest_ok = rep.v_max < 1e-12;
    }

    // (iv) static reduction: E# + grad phi# -> 0 at O(h^2), H# = 0,
    // Gauss flux of D# = -4 pi e
    {
        auto efield_residual = [&](double h) {
            double worst = 0.0;
            const Vec3 dirs[] = {{1, 0, 0},
                                 {0, 1, 0},
                                 {0, 0, 1},
                                 {0.5773502691896258, 0.5773502691896258, 0.5773502691896258}};
            for (double r : {0.6 * r0, 1.0 * r0, 1.7 * r0, 3.1 * r0})
                for (const Vec3& d : dirs) {
                    const Vec3 s = r * d;
                    const Vec3 E = aether_map({0, 0, 0}, born_displacement(s, e), b).E;
                    Vec3 gphi;
                    double* gp = &gphi.x;
                    for (int a = 0; a < 3; ++a) {
                        Vec3 sp = s, sm = s;
                        (&sp.x)[a] += h;
                        (&sm.x)[a] -= h;
                        gp[a] = (phi_sharp(sp, {0, 0, 0}) - phi_sharp(sm, {0, 0, 0})) / (2.0 * h);
                    }
                    worst = std::max(worst, norm(E + gphi) / norm(E));
                }
            return worst;
        };
        rep.efield_residual_h = efield_residual(0.04 * r0);
        rep.efield_residual_h2 = efield_residual(0.02 * r0);

        for (double r : {0.5 * r0, 2.0 * r0})
            for (const Vec3& d : {Vec3{0.26726124191242434, 0.5345224838248488, 0.8017837257372732},
                                  Vec3{-0.6, 0.8, 0.0}}) {
                const Vec3 s = r * d;
                rep.h_max_max = std::max(
                    rep.h_max_max, norm(aether_map({0, 0, 0}, born_displacement(s, e), b).H));
            }

        // D# is exactly radial with |D| = e/r^2, so the flux integral
        // through a sphere of radius r is 4 pi r^2 D_r(r)
        double flux_err = 0.0;
        for (double r : {0.3 * r0, 1.0 * r0, 4.0 * r0}) {
            const Vec3 s{r, 0, 0};
            const double Dr = dot(born_displacement(s, e), (1.0 / r) * s);
            flux_err = std::max(flux_err,
                                std::abs(4.0 * M_PI * r * r * Dr - (-4.0 * M_PI * e)) /
                                    (4.0 * M_PI * e));
        }
        rep.gauss_flux_error = flux_err;

        const bool order_ok = rep.efield_residual_h2 < 0.35 * rep.efield_residual_h;
        rep.static_maxwell_ok = order_ok && rep.h_max_max == 0.0 && flux_err < 1e-12;
    }
    return rep;
}

/// Conserved totals of the coupled defect + field state: the particle
/// terms c sqrt(m^2 c^2 + |P|^2), P, and Q x P with P = grad S + ec A/c
/// evaluated at the defect, plus the field integrals (energy,
/// (1/4 pi c) Int D x B, and its angular moment).
inline ConservedIntegrals conserved_totals(const Constants& kc, const Vec3& Q, const Vec3& gradS,
                                           const Vec3& A_at_Q, double m,
                                           const ConservedIntegrals& field, double q_sign = -1.0) {
    if (!(m > 0.0)) throw ConfigError("conserved_totals: m must be > 0");
    const double ec = -q_sign * kc.e;
    const Vec3 P = gradS + (ec / kc.c) * A_at_Q;
    ConservedIntegrals out;
    out.energy = kc.c * std::sqrt(m * m * kc.c * kc.c + norm2(P)) + field.energy;
    out.momentum = P + field.momentum;
    out.angular_momentum = cross(Q, P) + field.angular_momentum;
    return out;
}

} // namespace chargelab
