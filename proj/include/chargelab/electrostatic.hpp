#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "chargelab/born_infeld.hpp"
#include "chargelab/constants.hpp"
#include "chargelab/errors.hpp"
#include "chargelab/field_integrals.hpp"
#include "chargelab/numerics/parallel.hpp"
#include "chargelab/vec3.hpp"

namespace chargelab {

/// One regularized point defect: total charge `charge` spread over a C^2
/// bump of radius `radius`, rho(r) = 315 q / (64 pi a^3) (1 - (r/a)^2)^3.
struct SmearedCharge {
    Vec3 position;
    double charge = 0.0;
    double radius = 0.0;
};

struct ChargeConfig {
    std::vector<SmearedCharge> charges;

    /// h > 0 additionally enforces the solver's resolution rule a >= 2h.
    void validate(double h = 0.0) const {
        if (charges.empty()) throw ConfigError("ChargeConfig: no charges");
        for (const auto& c : charges) {
            if (!std::isfinite(c.charge) || c.charge == 0.0)
                throw ConfigError("ChargeConfig: charge must be finite and nonzero");
            if (!(c.radius > 0.0))
                throw ConfigError("ChargeConfig: smearing radius must be > 0");
            if (h > 0.0 && c.radius < 2.0 * h - 1e-12 * h)
                throw ConfigError("ChargeConfig: smearing radius must be >= 2h");
        }
        for (std::size_t i = 0; i < charges.size(); ++i)
            for (std::size_t j = i + 1; j < charges.size(); ++j)
                if (norm(charges[i].position - charges[j].position) == 0.0)
                    throw ConfigError("ChargeConfig: positions must be distinct");
    }
};

/// Cubic box of n^3 cells with spacing h; lower corner lo, side L = n h.
struct BoxSpec {
    Vec3 lo;
    double h = 0.0;
    int n = 0;

    void validate() const {
        if (!(h > 0.0) || !std::isfinite(h)) throw ConfigError("BoxSpec: h must be > 0");
        if (n < 8 || n > 1024) throw ConfigError("BoxSpec: n must be in [8, 1024]");
        if (!std::isfinite(lo.x) || !std::isfinite(lo.y) || !std::isfinite(lo.z))
            throw ConfigError("BoxSpec: lo must be finite");
    }
    Vec3 hi() const { return lo + (n * h) * Vec3{1, 1, 1}; }
};

/// Staggered (face-centered) vector field on a BoxSpec box: dx lives on
/// x-faces (n+1) n n, dy on y-faces, dz on z-faces.  The cell divergence
/// is the exact telescoping sum, which is what the solver constrains.
struct GridField {
    Vec3 lo;
    double h = 0.0;
    int n = 0;
    std::vector<double> dx, dy, dz;

    std::size_t ix(int i, int j, int k) const {
        return (static_cast<std::size_t>(i) * n + j) * n + k;
    }
    std::size_t iy(int i, int j, int k) const {
        return (static_cast<std::size_t>(i) * (n + 1) + j) * n + k;
    }
    std::size_t iz(int i, int j, int k) const {
        return (static_cast<std::size_t>(i) * n + j) * (n + 1) + k;
    }

    void allocate(const BoxSpec& g) {
        lo = g.lo;
        h = g.h;
        n = g.n;
        const std::size_t nn = static_cast<std::size_t>(n);
        dx.assign((nn + 1) * nn * nn, 0.0);
        dy.assign(nn * (nn + 1) * nn, 0.0);
        dz.assign(nn * nn * (nn + 1), 0.0);
    }

    void validate() const {
        if (n < 1 || !(h > 0.0)) throw ConfigError("GridField: empty grid");
        const std::size_t nn = static_cast<std::size_t>(n);
        if (dx.size() != (nn + 1) * nn * nn || dy.size() != nn * (nn + 1) * nn ||
            dz.size() != nn * nn * (nn + 1))
            throw ConfigError("GridField: face array sizes do not match n");
    }

    /// Exact discrete divergence at cell (i, j, k).
    double divergence(int i, int j, int k) const {
        return (dx[ix(i + 1, j, k)] - dx[ix(i, j, k)] + dy[iy(i, j + 1, k)] -
                dy[iy(i, j, k)] + dz[iz(i, j, k + 1)] - dz[iz(i, j, k)]) /
               h;
    }

    /// Componentwise trilinear interpolation off the face lattices.
    /// Trustworthy for points at least one spacing inside the box.
    Vec3 sample(const Vec3& p) const {
        auto interp = [&](const std::vector<double>& f, const Vec3& origin, int n0,
                          int n1, int n2, auto&& idx) {
            double u = (p.x - origin.x) / h;
            double v = (p.y - origin.y) / h;
            double w = (p.z - origin.z) / h;
            const int i = std::clamp(static_cast<int>(std::floor(u)), 0, n0 - 2);
            const int j = std::clamp(static_cast<int>(std::floor(v)), 0, n1 - 2);
            const int k = std::clamp(static_cast<int>(std::floor(w)), 0, n2 - 2);
            u = std::clamp(u - i, 0.0, 1.0);
            v = std::clamp(v - j, 0.0, 1.0);
            w = std::clamp(w - k, 0.0, 1.0);
            double c00 = f[idx(i, j, k)] * (1 - u) + f[idx(i + 1, j, k)] * u;
            double c10 = f[idx(i, j + 1, k)] * (1 - u) + f[idx(i + 1, j + 1, k)] * u;
            double c01 = f[idx(i, j, k + 1)] * (1 - u) + f[idx(i + 1, j, k + 1)] * u;
            double c11 =
                f[idx(i, j + 1, k + 1)] * (1 - u) + f[idx(i + 1, j + 1, k + 1)] * u;
            return (c00 * (1 - v) + c10 * v) * (1 - w) + (c01 * (1 - v) + c11 * v) * w;
        };
        const double half = 0.5 * h;
        Vec3 out;
        out.x = interp(dx, lo + Vec3{0, half, half}, n + 1, n, n,
                       [&](int i, int j, int k) { return ix(i, j, k); });
        out.y = interp(dy, lo + Vec3{half, 0, half}, n, n + 1, n,
                       [&](int i, int j, int k) { return iy(i, j, k); });
        out.z = interp(dz, lo + Vec3{half, half, 0}, n, n, n + 1,
                       [&](int i, int j, int k) { return iz(i, j, k); });
        return out;
    }
};

struct SolverReport {
    double energy = 0.0;
    double gradient_norm = 0.0;          ///< final L2 norm of the reduced gradient
    double initial_gradient_norm = 0.0;
    int iterations = 0;
    double constraint_residual = 0.0;    ///< max |div D - 4 pi rho| / (4 pi max rho)
    double boundary_flux_error = 0.0;    ///< Gauss-law mismatch of the raw boundary data
    int poisson_iterations = 0;
    int energy_evaluations = 0;
    bool converged = false;
    bool stalled = false;  ///< stopped at the floating-point floor of the energy
    std::vector<double> energy_history;  ///< energy after each accepted iteration
};

namespace detail {

/// Edge-potential coefficient vector (the free variable of the Hodge
/// splitting D = D_particular + curl A).  Boundary-adjacent entries are
/// permanently zero so curl A vanishes on the fixed boundary faces.
struct EdgeVec {
    std::vector<double> x, y, z;

    void allocate(int n) {
        const std::size_t nn = static_cast<std::size_t>(n);
        x.assign(nn * (nn + 1) * (nn + 1), 0.0);
        y.assign((nn + 1) * nn * (nn + 1), 0.0);
        z.assign((nn + 1) * (nn + 1) * nn, 0.0);
    }
    void set_zero() {
        std::fill(x.begin(), x.end(), 0.0);
        std::fill(y.begin(), y.end(), 0.0);
        std::fill(z.begin(), z.end(), 0.0);
    }
};

inline void edge_axpy(EdgeVec& out, double alpha, const EdgeVec& v) {
    auto run = [&](std::vector<double>& o, const std::vector<double>& s) {
        parallel_for_chunked(o.size(), [&](std::size_t b, std::size_t e, std::size_t) {
            for (std::size_t i = b; i < e; ++i) o[i] += alpha * s[i];
        });
    };
    run(out.x, v.x);
    run(out.y, v.y);
    run(out.z, v.z);
}

inline void edge_combine(EdgeVec& d, const EdgeVec& g, double beta) {
    // d <- -g + beta d
    auto run = [&](std::vector<double>& dd, const std::vector<double>& gg) {
        parallel_for_chunked(dd.size(), [&](std::size_t b, std::size_t e, std::size_t) {
            for (std::size_t i = b; i < e; ++i) dd[i] = -gg[i] + beta * dd[i];
        });
    };
    run(d.x, g.x);
    run(d.y, g.y);
    run(d.z, g.z);
}

inline void edge_assign_sum(EdgeVec& out, const EdgeVec& a, double alpha,
                            const EdgeVec& v) {
    auto run = [&](std::vector<double>& o, const std::vector<double>& aa,
                   const std::vector<double>& vv) {
        parallel_for_chunked(o.size(), [&](std::size_t b, std::size_t e, std::size_t) {
            for (std::size_t i = b; i < e; ++i) o[i] = aa[i] + alpha * vv[i];
        });
    };
    run(out.x, a.x, v.x);
    run(out.y, a.y, v.y);
    run(out.z, a.z, v.z);
}

inline double edge_dot(const EdgeVec& a, const EdgeVec& b) {
    double s = 0.0;
    s += parallel_sum(a.x.size(), [&](std::size_t i) { return a.x[i] * b.x[i]; });
    s += parallel_sum(a.y.size(), [&](std::size_t i) { return a.y[i] * b.y[i]; });
    s += parallel_sum(a.z.size(), [&](std::size_t i) { return a.z[i] * b.z[i]; });
    return s;
}

/// Discrete variational problem: all grid operators plus preallocated
/// work buffers.  Constructing it assembles the smeared density, the
/// Coulomb boundary data (flux-audited and exactly balanced) and the
/// particular solution of div D = 4 pi rho via a conjugate-gradient
/// Poisson solve, so eval() only ever moves along curl directions.
class ElectroProblem {
  public:
    ElectroProblem(const ChargeConfig& cfg, const BoxSpec& grid, double b)
        : b_(b), n_(grid.n), h_(grid.h), lo_(grid.lo) {
        grid.validate();
        cfg.validate(grid.h);
        if (!(b > 0.0) || !std::isfinite(b))
            throw ConfigError("solve_electrostatic: b must be positive and finite");
        const double margin = 2.0 * h_;
        for (const auto& c : cfg.charges) {
            const Vec3 hi = grid.hi();
            for (int ax = 0; ax < 3; ++ax)
                if (c.position[ax] - c.radius - margin < lo_[ax] ||
                    c.position[ax] + c.radius + margin > hi[ax])
                    throw ConfigError(
                        "solve_electrostatic: smeared charge support too close to "
                        "the box boundary");
        }
        base_.allocate(grid);
        const std::size_t nc =
            static_cast<std::size_t>(n_) * n_ * static_cast<std::size_t>(n_);
        rho_.assign(nc, 0.0);
        ex_.assign(nc, 0.0);
        ey_.assign(nc, 0.0);
        ez_.assign(nc, 0.0);
        gfx_.assign(base_.dx.size(), 0.0);
        gfy_.assign(base_.dy.size(), 0.0);
        gfz_.assign(base_.dz.size(), 0.0);
        work_.allocate(grid);
        assemble_density(cfg);
        assemble_boundary(cfg);
        solve_particular();
    }

    int n() const { return n_; }
    double h() const { return h_; }
    double b() const { return b_; }
    double boundary_flux_error() const { return flux_error_; }
    int poisson_iterations() const { return poisson_iters_; }
    const GridField& base() const { return base_; }

    /// D = D_particular + curl A on the interior faces (boundary fixed).
    void compose(const EdgeVec& A, GridField& D) const {
        D.lo = lo_;
        D.h = h_;
        D.n = n_;
        D.dx = base_.dx;
        D.dy = base_.dy;
        D.dz = base_.dz;
        const int n = n_;
        const std::size_t nxf = static_cast<std::size_t>(n - 1) * n * n;
        parallel_for_chunked(nxf, [&](std::size_t bgn, std::size_t end, std::size_t) {
            for (std::size_t t = bgn; t < end; ++t) {
                const int k = static_cast<int>(t % n);
                const int j = static_cast<int>((t / n) % n);
                const int i = 1 + static_cast<int>(t / (static_cast<std::size_t>(n) * n));
                D.dx[D.ix(i, j, k)] +=
                    (A.z[ez(i, j + 1, k)] - A.z[ez(i, j, k)] + A.y[ey(i, j, k)] -
                     A.y[ey(i, j, k + 1)]) /
                    h_;
            }
        });
        parallel_for_chunked(nxf, [&](std::size_t bgn, std::size_t end, std::size_t) {
            for (std::size_t t = bgn; t < end; ++t) {
                const int k = static_cast<int>(t % n);
                const int i = static_cast<int>((t / n) % n);
                const int j = 1 + static_cast<int>(t / (static_cast<std::size_t>(n) * n));
                D.dy[D.iy(i, j, k)] +=
                    (A.x[ex(i, j, k + 1)] - A.x[ex(i, j, k)] + A.z[ez(i, j, k)] -
                     A.z[ez(i + 1, j, k)]) /
                    h_;
            }
        });
        parallel_for_chunked(nxf, [&](std::size_t bgn, std::size_t end, std::size_t) {
            for (std::size_t t = bgn; t < end; ++t) {
                const int j = static_cast<int>(t % n);
                const int i = static_cast<int>((t / n) % n);
                const int k = 1 + static_cast<int>(t / (static_cast<std::size_t>(n) * n));
                D.dz[D.iz(i, j, k)] +=
                    (A.y[ey(i + 1, j, k)] - A.y[ey(i, j, k)] + A.x[ex(i, j, k)] -
                     A.x[ex(i, j + 1, k)]) /
                    h_;
            }
        });
    }

    /// Born-Infeld energy of D(A) and its gradient with respect to the
    /// edge coefficients (zero on non-free edges).
    double eval(const EdgeVec& A, EdgeVec& grad) {
        compose(A, work_);
        return eval_composed(work_, grad);
    }

    /// Same, splitting out the composed field (work buffer reuse).
    double eval_composed(const GridField& D, EdgeVec& grad) {
        const int n = n_;
        const std::size_t nc = rho_.size();
        const double cell = h_ * h_ * h_;
        const std::size_t chunk = detail::chunk_size_for(nc);
        const std::size_t nchunks = (nc + chunk - 1) / chunk;
        std::vector<double> partial(nchunks, 0.0);
        parallel_for_chunked(nc, [&](std::size_t bgn, std::size_t end, std::size_t ci) {
            double s = 0.0;
            for (std::size_t t = bgn; t < end; ++t) {
                const int k = static_cast<int>(t % n);
                const int j = static_cast<int>((t / n) % n);
                const int i = static_cast<int>(t / (static_cast<std::size_t>(n) * n));
                const Vec3 Dbar{
                    0.5 * (D.dx[D.ix(i, j, k)] + D.dx[D.ix(i + 1, j, k)]),
                    0.5 * (D.dy[D.iy(i, j, k)] + D.dy[D.iy(i, j + 1, k)]),
                    0.5 * (D.dz[D.iz(i, j, k)] + D.dz[D.iz(i, j, k + 1)])};
                s += cell * field_energy_density(Vec3{}, Dbar, b_);
                const Vec3 E = aether_map(Vec3{}, Dbar, b_).E;
                ex_[t] = E.x;
                ey_[t] = E.y;
                ez_[t] = E.z;
            }
            partial[ci] = s;
        });
        double energy = 0.0;
        for (double p : partial) energy += p;

        // adjoint of the face->cell average; same factor on both cells
        const double w = cell / (8.0 * M_PI);
        auto cellat = [&](const std::vector<double>& a, int i, int j, int k) {
            return a[(static_cast<std::size_t>(i) * n + j) * n + k];
        };
        parallel_for_chunked(
            static_cast<std::size_t>(n - 1) * n * n,
            [&](std::size_t bgn, std::size_t end, std::size_t) {
                for (std::size_t t = bgn; t < end; ++t) {
                    const int k = static_cast<int>(t % n);
                    const int j = static_cast<int>((t / n) % n);
                    const int i =
                        1 + static_cast<int>(t / (static_cast<std::size_t>(n) * n));
                    gfx_[base_.ix(i, j, k)] =
                        w * (cellat(ex_, i - 1, j, k) + cellat(ex_, i, j, k));
                    gfy_[base_.iy(k, i, j)] =
                        w * (cellat(ey_, k, i - 1, j) + cellat(ey_, k, i, j));
                    gfz_[base_.iz(k, j, i)] =
                        w * (cellat(ez_, k, j, i - 1) + cellat(ez_, k, j, i));
                }
            });

        // gather onto the free edges (adjoint of the face curl)
        const std::size_t nfree =
            static_cast<std::size_t>(n) * (n - 1) * static_cast<std::size_t>(n - 1);
        parallel_for_chunked(nfree, [&](std::size_t bgn, std::size_t end, std::size_t) {
            for (std::size_t t = bgn; t < end; ++t) {
                const int k = 1 + static_cast<int>(t % (n - 1));
                const int j = 1 + static_cast<int>((t / (n - 1)) % (n - 1));
                const int i = static_cast<int>(t / (static_cast<std::size_t>(n - 1) * (n - 1)));
                grad.x[ex(i, j, k)] = (gfy_[base_.iy(i, j, k - 1)] -
                                       gfy_[base_.iy(i, j, k)] +
                                       gfz_[base_.iz(i, j, k)] -
                                       gfz_[base_.iz(i, j - 1, k)]) /
                                      h_;
                grad.y[ey(j, i, k)] = (gfx_[base_.ix(j, i, k)] -
                                       gfx_[base_.ix(j, i, k - 1)] +
                                       gfz_[base_.iz(j - 1, i, k)] -
                                       gfz_[base_.iz(j, i, k)]) /
                                      h_;
                grad.z[ez(j, k, i)] = (gfx_[base_.ix(j, k - 1, i)] -
                                       gfx_[base_.ix(j, k, i)] +
                                       gfy_[base_.iy(j, k, i)] -
                                       gfy_[base_.iy(j - 1, k, i)]) /
                                      h_;
            }
        });
        return energy;
    }

    /// max_c |div D - 4 pi rho_c| scaled by 4 pi max |rho|.
    double constraint_residual(const GridField& D) const {
        const int n = n_;
        const std::size_t nc = rho_.size();
        const std::size_t chunk = detail::chunk_size_for(nc);
        const std::size_t nchunks = (nc + chunk - 1) / chunk;
        std::vector<double> worst(nchunks, 0.0);
        parallel_for_chunked(nc, [&](std::size_t bgn, std::size_t end, std::size_t ci) {
            double m = 0.0;
            for (std::size_t t = bgn; t < end; ++t) {
                const int k = static_cast<int>(t % n);
                const int j = static_cast<int>((t / n) % n);
                const int i = static_cast<int>(t / (static_cast<std::size_t>(n) * n));
                m = std::max(m, std::abs(D.divergence(i, j, k) -
                                         4.0 * M_PI * rho_[t]));
            }
            worst[ci] = m;
        });
        double m = 0.0;
        for (double v : worst) m = std::max(m, v);
        return m / (4.0 * M_PI * rho_max_);
    }

    // edge index maps (full arrays; boundary entries stay zero)
    std::size_t ex(int i, int j, int k) const {
        return (static_cast<std::size_t>(i) * (n_ + 1) + j) * (n_ + 1) + k;
    }
    std::size_t ey(int i, int j, int k) const {
        return (static_cast<std::size_t>(i) * n_ + j) * (n_ + 1) + k;
    }
    std::size_t ez(int i, int j, int k) const {
        return (static_cast<std::size_t>(i) * (n_ + 1) + j) * n_ + k;
    }

  private:
    Vec3 cell_center(int i, int j, int k) const {
        return lo_ + h_ * Vec3{i + 0.5, j + 0.5, k + 0.5};
    }

    void assemble_density(const ChargeConfig& cfg) {
        const double cell = h_ * h_ * h_;
        for (const auto& c : cfg.charges) {
            const double a = c.radius;
            const double amp = 315.0 / (64.0 * M_PI * a * a * a);
            int i0[3], i1[3];
            for (int ax = 0; ax < 3; ++ax) {
                i0[ax] = std::max(
                    0, static_cast<int>(std::floor((c.position[ax] - a - lo_[ax]) / h_)) - 1);
                i1[ax] = std::min(
                    n_ - 1,
                    static_cast<int>(std::floor((c.position[ax] + a - lo_[ax]) / h_)) + 1);
            }
            // sample, then rescale so the discrete charge is exactly q
            std::vector<std::pair<std::size_t, double>> samples;
            double total = 0.0;
            for (int i = i0[0]; i <= i1[0]; ++i)
                for (int j = i0[1]; j <= i1[1]; ++j)
                    for (int k = i0[2]; k <= i1[2]; ++k) {
                        const double r = norm(cell_center(i, j, k) - c.position);
                        if (r >= a) continue;
                        const double u = 1.0 - (r / a) * (r / a);
                        const double v = amp * u * u * u;
                        samples.emplace_back(
                            (static_cast<std::size_t>(i) * n_ + j) * n_ + k, v);
                        total += v * cell;
                    }
            if (samples.empty() || total <= 0.0)
                throw ConfigError(
                    "solve_electrostatic: smeared charge not resolved by the grid");
            const double scale = c.charge / total;
            for (const auto& s : samples) rho_[s.first] += scale * s.second;
        }
        rho_max_ = 0.0;
        double qtot = 0.0;
        for (double v : rho_) {
            rho_max_ = std::max(rho_max_, std::abs(v));
            qtot += v;
        }
        charge_total_ = qtot * cell;
    }

    static Vec3 coulomb_superposition(const ChargeConfig& cfg, const Vec3& p) {
        Vec3 D;
        for (const auto& c : cfg.charges) {
            const Vec3 r = p - c.position;
            const double rn = norm(r);
            D += (c.charge / (rn * rn * rn)) * r;
        }
        return D;
    }

    void assemble_boundary(const ChargeConfig& cfg) {
        const int n = n_;
        double flux = 0.0;
        for (int j = 0; j < n; ++j)
            for (int k = 0; k < n; ++k) {
                const double y = lo_.y + (j + 0.5) * h_;
                const double z = lo_.z + (k + 0.5) * h_;
                const double xl =
                    coulomb_superposition(cfg, Vec3{lo_.x, y, z}).x;
                const double xr =
                    coulomb_superposition(cfg, Vec3{lo_.x + n * h_, y, z}).x;
                base_.dx[base_.ix(0, j, k)] = xl;
                base_.dx[base_.ix(n, j, k)] = xr;
                flux += (xr - xl) * h_ * h_;
            }
        for (int i = 0; i < n; ++i)
            for (int k = 0; k < n; ++k) {
                const double x = lo_.x + (i + 0.5) * h_;
                const double z = lo_.z + (k + 0.5) * h_;
                const double yl = coulomb_superposition(cfg, Vec3{x, lo_.y, z}).y;
                const double yr =
                    coulomb_superposition(cfg, Vec3{x, lo_.y + n * h_, z}).y;
                base_.dy[base_.iy(i, 0, k)] = yl;
                base_.dy[base_.iy(i, n, k)] = yr;
                flux += (yr - yl) * h_ * h_;
            }
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) {
                const double x = lo_.x + (i + 0.5) * h_;
                const double y = lo_.y + (j + 0.5) * h_;
                const double zl = coulomb_superposition(cfg, Vec3{x, y, lo_.z}).z;
                const double zr =
                    coulomb_superposition(cfg, Vec3{x, y, lo_.z + n * h_}).z;
                base_.dz[base_.iz(i, j, 0)] = zl;
                base_.dz[base_.iz(i, j, n)] = zr;
                flux += (zr - zl) * h_ * h_;
            }
        const double target = 4.0 * M_PI * charge_total_;
        double qabs = 0.0;
        for (const auto& c : cfg.charges) qabs += std::abs(c.charge);
        flux_error_ = std::abs(flux - target) / (4.0 * M_PI * qabs);
        if (flux_error_ > 0.05)
            throw ConfigError(
                "solve_electrostatic: boundary flux audit failed (" +
                std::to_string(flux_error_) +
                " relative Gauss mismatch); box too small or boundary "
                "under-resolved");
        // spread the quadrature imbalance uniformly so the discrete
        // compatibility condition holds exactly
        const double delta =
            (target - flux) / (6.0 * n * static_cast<double>(n) * h_ * h_);
        for (int j = 0; j < n; ++j)
            for (int k = 0; k < n; ++k) {
                base_.dx[base_.ix(0, j, k)] -= delta;
                base_.dx[base_.ix(n, j, k)] += delta;
            }
        for (int i = 0; i < n; ++i)
            for (int k = 0; k < n; ++k) {
                base_.dy[base_.iy(i, 0, k)] -= delta;
                base_.dy[base_.iy(i, n, k)] += delta;
            }
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) {
                base_.dz[base_.iz(i, j, 0)] -= delta;
                base_.dz[base_.iz(i, j, n)] += delta;
            }
    }

    /// Interior-face Laplacian (Neumann walls; the fixed boundary faces
    /// were folded into the right-hand side).
    void apply_neg_laplacian(const std::vector<double>& u, std::vector<double>& out) const {
        const int n = n_;
        const double inv_h2 = 1.0 / (h_ * h_);
        parallel_for_chunked(u.size(), [&](std::size_t bgn, std::size_t end, std::size_t) {
            for (std::size_t t = bgn; t < end; ++t) {
                const int k = static_cast<int>(t % n);
                const int j = static_cast<int>((t / n) % n);
                const int i = static_cast<int>(t / (static_cast<std::size_t>(n) * n));
                double acc = 0.0;
                const double uc = u[t];
                if (i > 0) acc += u[t - static_cast<std::size_t>(n) * n] - uc;
                if (i < n - 1) acc += u[t + static_cast<std::size_t>(n) * n] - uc;
                if (j > 0) acc += u[t - static_cast<std::size_t>(n)] - uc;
                if (j < n - 1) acc += u[t + static_cast<std::size_t>(n)] - uc;
                if (k > 0) acc += u[t - 1] - uc;
                if (k < n - 1) acc += u[t + 1] - uc;
                out[t] = -acc * inv_h2;
            }
        });
    }

    void solve_particular() {
        const int n = n_;
        const std::size_t nc = rho_.size();
        std::vector<double> rhs(nc);
        parallel_for_chunked(nc, [&](std::size_t bgn, std::size_t end, std::size_t) {
            for (std::size_t t = bgn; t < end; ++t) {
                const int k = static_cast<int>(t % n);
                const int j = static_cast<int>((t / n) % n);
                const int i = static_cast<int>(t / (static_cast<std::size_t>(n) * n));
                double bc = 0.0;
                if (i == 0) bc -= -base_.dx[base_.ix(0, j, k)];
                if (i == n - 1) bc -= base_.dx[base_.ix(n, j, k)];
                if (j == 0) bc -= -base_.dy[base_.iy(i, 0, k)];
                if (j == n - 1) bc -= base_.dy[base_.iy(i, n, k)];
                if (k == 0) bc -= -base_.dz[base_.iz(i, j, 0)];
                if (k == n - 1) bc -= base_.dz[base_.iz(i, j, n)];
                // solve -lap u = -(4 pi rho - div_bc)
                rhs[t] = -(4.0 * M_PI * rho_[t] + bc / h_);
            }
        });
        // exact-compatible system is singular along constants: pin the mean
        double mean = parallel_sum(nc, [&](std::size_t i) { return rhs[i]; }) /
                      static_cast<double>(nc);
        parallel_for_chunked(nc, [&](std::size_t bgn, std::size_t end, std::size_t) {
            for (std::size_t t = bgn; t < end; ++t) rhs[t] -= mean;
        });

        std::vector<double> u(nc, 0.0), r(rhs), p(rhs), Ap(nc, 0.0);
        double rr = parallel_sum(nc, [&](std::size_t i) { return r[i] * r[i]; });
        const double stop2 = rr * 1e-28;  // relative residual 1e-14
        const int max_iters = 40 * n;
        int it = 0;
        for (; it < max_iters && rr > stop2 && rr > 0.0; ++it) {
            apply_neg_laplacian(p, Ap);
            const double pAp =
                parallel_sum(nc, [&](std::size_t i) { return p[i] * Ap[i]; });
            if (!(pAp > 0.0)) break;
            const double alpha = rr / pAp;
            parallel_for_chunked(nc, [&](std::size_t bgn, std::size_t end, std::size_t) {
                for (std::size_t t = bgn; t < end; ++t) {
                    u[t] += alpha * p[t];
                    r[t] -= alpha * Ap[t];
                }
            });
            const double rr_new =
                parallel_sum(nc, [&](std::size_t i) { return r[i] * r[i]; });
            const double beta = rr_new / rr;
            rr = rr_new;
            parallel_for_chunked(nc, [&](std::size_t bgn, std::size_t end, std::size_t) {
                for (std::size_t t = bgn; t < end; ++t) p[t] = r[t] + beta * p[t];
            });
            if ((it + 1) % 64 == 0) {
                const double um =
                    parallel_sum(nc, [&](std::size_t i) { return u[i]; }) /
                    static_cast<double>(nc);
                parallel_for_chunked(nc,
                                     [&](std::size_t bgn, std::size_t end, std::size_t) {
                                         for (std::size_t t = bgn; t < end; ++t)
                                             u[t] -= um;
                                     });
            }
        }
        poisson_iters_ = it;

        auto cellu = [&](int i, int j, int k) {
            return u[(static_cast<std::size_t>(i) * n + j) * n + k];
        };
        for (int i = 1; i < n; ++i)
            for (int j = 0; j < n; ++j)
                for (int k = 0; k < n; ++k)
                    base_.dx[base_.ix(i, j, k)] = (cellu(i, j, k) - cellu(i - 1, j, k)) / h_;
        for (int j = 1; j < n; ++j)
            for (int i = 0; i < n; ++i)
                for (int k = 0; k < n; ++k)
                    base_.dy[base_.iy(i, j, k)] = (cellu(i, j, k) - cellu(i, j - 1, k)) / h_;
        for (int k = 1; k < n; ++k)
            for (int i = 0; i < n; ++i)
                for (int j = 0; j < n; ++j)
                    base_.dz[base_.iz(i, j, k)] = (cellu(i, j, k) - cellu(i, j, k - 1)) / h_;
    }

    double b_;
    int n_;
    double h_;
    Vec3 lo_;
    GridField base_;
    GridField work_;
    std::vector<double> rho_, ex_, ey_, ez_, gfx_, gfy_, gfz_;
    double rho_max_ = 0.0;
    double charge_total_ = 0.0;
    double flux_error_ = 0.0;
    int poisson_iters_ = 0;
};

}  // namespace detail

/// Minimizes the Born-Infeld electrostatic energy over the affine family
/// D = D_particular + curl A (div D = 4 pi rho holds structurally) with
/// Polak-Ribiere+ conjugate gradients and a strong-Wolfe line search.
/// tol is relative to (1 + initial gradient norm).
inline std::pair<GridField, SolverReport> solve_electrostatic(
    const ChargeConfig& cfg, const BoxSpec& grid, double b, double tol = 1e-8,
    int max_iter = 500) {
    if (!(tol > 0.0)) throw ConfigError("solve_electrostatic: tol must be > 0");
    if (max_iter < 1) throw ConfigError("solve_electrostatic: max_iter must be >= 1");
    detail::ElectroProblem prob(cfg, grid, b);

    detail::EdgeVec A, g, g_new, d, A_trial, g_trial;
    A.allocate(grid.n);
    g.allocate(grid.n);
    g_new.allocate(grid.n);
    d.allocate(grid.n);
    A_trial.allocate(grid.n);
    g_trial.allocate(grid.n);

    SolverReport rep;
    rep.boundary_flux_error = prob.boundary_flux_error();
    rep.poisson_iterations = prob.poisson_iterations();

    double energy = prob.eval(A, g);
    ++rep.energy_evaluations;
    double gg = detail::edge_dot(g, g);
    rep.initial_gradient_norm = std::sqrt(gg);
    rep.energy_history.push_back(energy);
    const double thr = tol * (1.0 + rep.initial_gradient_norm);

    for (std::size_t i = 0; i < d.x.size(); ++i) d.x[i] = -g.x[i];
    for (std::size_t i = 0; i < d.y.size(); ++i) d.y[i] = -g.y[i];
    for (std::size_t i = 0; i < d.z.size(); ++i) d.z[i] = -g.z[i];

    const double c1 = 1e-4, c2 = 0.1;
    double alpha_prev = 0.0;
    int iter = 0;
    for (; iter < max_iter; ++iter) {
        const double gnorm = std::sqrt(gg);
        if (gnorm <= thr) {
            rep.converged = true;
            break;
        }
        double dphi0 = detail::edge_dot(g, d);
        if (dphi0 >= 0.0) {  // stale conjugacy: restart on steepest descent
            detail::edge_combine(d, g, 0.0);
            dphi0 = -gg;
        }

        // strong Wolfe line search: bracket by doubling, then bisect
        auto phi = [&](double a) {
            detail::edge_assign_sum(A_trial, A, a, d);
            const double e = prob.eval(A_trial, g_trial);
            ++rep.energy_evaluations;
            return e;
        };
        double alpha = alpha_prev > 0.0 ? alpha_prev : 1.0;
        double lo = 0.0, hi = -1.0;
        double phi_lo = energy;
        double accepted = -1.0, e_accepted = 0.0;
        double best_alpha = 0.0, best_e = energy;
        for (int bs = 0; bs < 60; ++bs) {
            const double e = phi(alpha);
            const double dphi = detail::edge_dot(g_trial, d);
            if (e < best_e) {
                best_e = e;
                best_alpha = alpha;
            }
            const bool armijo = e <= energy + c1 * alpha * dphi0;
            if (!armijo || (hi < 0.0 && bs > 0 && e >= phi_lo)) {
                hi = alpha;  // overshot: minimum is inside (lo, alpha)
                alpha = 0.5 * (lo + alpha);
                if (hi - lo < 1e-18 * std::max(1.0, hi)) break;
                continue;
            }
            if (std::abs(dphi) <= -c2 * dphi0) {
                accepted = alpha;
                e_accepted = e;
                break;
            }
            if (dphi >= 0.0) {
                hi = alpha;  // passed the minimum with energy still low
                alpha = 0.5 * (lo + alpha);
                continue;
            }
            lo = alpha;  // still descending
            phi_lo = e;
            alpha = hi < 0.0 ? 2.0 * alpha : 0.5 * (lo + hi);
            if (hi > 0.0 && hi - lo < 1e-18 * std::max(1.0, hi)) break;
        }
        if (accepted < 0.0) {
            // energy no longer decreases along the descent direction: either
            // the iterate sits at the floating-point floor of the functional
            // (benign, gradient already tiny) or the model is inconsistent
            const bool at_floor =
                gnorm <= 1e-6 * (1.0 + rep.initial_gradient_norm);
            if (best_alpha > 0.0 && best_e < energy && !at_floor) {
                phi(best_alpha);
                accepted = best_alpha;
                e_accepted = best_e;
            } else if (at_floor) {
                rep.converged = gnorm <= thr;
                rep.stalled = true;
                break;
            } else {
                throw AccuracyError(
                    "solve_electrostatic: line search could not decrease the "
                    "energy (iteration " +
                    std::to_string(iter) + ", gradient norm " + std::to_string(gnorm) +
                    " vs initial " + std::to_string(rep.initial_gradient_norm) +
                    "); optimization failure");
            }
        }

        detail::edge_assign_sum(A, A, accepted, d);
        std::swap(g_new.x, g_trial.x);
        std::swap(g_new.y, g_trial.y);
        std::swap(g_new.z, g_trial.z);
        energy = e_accepted;
        rep.energy_history.push_back(energy);
        alpha_prev = accepted;

        const double gg_new = detail::edge_dot(g_new, g_new);
        double beta =
            (gg_new - detail::edge_dot(g_new, g)) / gg;  // Polak-Ribiere
        beta = std::max(0.0, beta);
        if ((iter + 1) % 50 == 0) beta = 0.0;  // periodic restart
        detail::edge_combine(d, g_new, beta);
        std::swap(g.x, g_new.x);
        std::swap(g.y, g_new.y);
        std::swap(g.z, g_new.z);
        gg = gg_new;
    }

    rep.iterations = iter;
    rep.gradient_norm = std::sqrt(gg);
    rep.energy = energy;

    GridField D;
    prob.compose(A, D);
    rep.constraint_residual = prob.constraint_residual(D);
    if (rep.constraint_residual > 1e-12)
        throw AccuracyError(
            "solve_electrostatic: constraint residual " +
            std::to_string(rep.constraint_residual) +
            " exceeds the structural bound 1e-12");
    return {std::move(D), rep};
}

/// One row of the force-asymptotics table.
struct CoulombRow {
    double d = 0.0;
    Vec3 force;            ///< stress flux through the half-space boundary
    double force_mag = 0.0;
    double coulomb = 0.0;  ///< e^2 / d^2
    double ratio = 0.0;    ///< force_mag / coulomb
    double error = 0.0;    ///< disagreement with an independent spherical surface
};

/// Solves the symmetric two-charge problem at each separation and reads
/// the force on one charge off the stress flux through the bisector
/// plane + far-cap surface.  Each box scales with d (side 3d), so the
/// sweep probes the pure distance dependence.
inline std::vector<CoulombRow> coulomb_asymptotics_check(
    const Constants& kc, const std::vector<double>& separations, double b,
    int n = 64, double quad_rel_tol = 5e-3) {
    kc.validate();
    if (separations.empty())
        throw ConfigError("coulomb_asymptotics_check: no separations");
    if (!(b > 0.0) || !std::isfinite(b))
        throw ConfigError("coulomb_asymptotics_check: b must be positive and finite");
    const double e = kc.e;
    const double r0 = std::sqrt(e / b);
    std::vector<CoulombRow> rows;
    rows.reserve(separations.size());
    for (const double d : separations) {
        if (!(d >= 10.0 * r0))
            throw ConfigError(
                "coulomb_asymptotics_check: separation below 10 sqrt(e/b)");
        BoxSpec grid;
        grid.n = n;
        grid.h = 3.0 * d / n;
        grid.lo = Vec3{-1.5 * d, -1.5 * d, -1.5 * d};
        ChargeConfig cfg;
        cfg.charges = {{Vec3{-0.5 * d, 0, 0}, -e, 2.0 * grid.h},
                       {Vec3{+0.5 * d, 0, 0}, -e, 2.0 * grid.h}};
        auto [D, rep] = solve_electrostatic(cfg, grid, b, 1e-6, 600);
        if (!rep.converged && !rep.stalled)
            throw AccuracyError(
                "coulomb_asymptotics_check: solver did not converge at d = " +
                std::to_string(d));
        FieldSampler sampler = [&D](const Vec3& p, Vec3& B, Vec3& Dout) {
            B = Vec3{};
            Dout = D.sample(p);
        };
        SurfaceSpec half;
        half.geometry = PlaneCapSurface{Vec3{0, 0, 0}, Vec3{1, 0, 0}, 1.25 * d};
        half.order = 16;
        const Vec3 F = surface_force(sampler, b, half, quad_rel_tol);
        SurfaceSpec ball;
        ball.geometry = SphereSurface{Vec3{-0.5 * d, 0, 0}, 0.6 * d};
        ball.order = 16;
        const Vec3 Fs = surface_force(sampler, b, ball, quad_rel_tol);
        CoulombRow row;
        row.d = d;
        row.force = F;
        row.force_mag = norm(F);
        row.coulomb = e * e / (d * d);
        row.ratio = row.force_mag / row.coulomb;
        row.error = norm(F - Fs);
        rows.push_back(row);
    }
    return rows;
}

}  // namespace chargelab
