#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "chargelab/born_infeld.hpp"
#include "chargelab/field_integrals.hpp"
#include "chargelab/numerics/special.hpp"

using namespace chargelab;

static constexpr double kBetaQQ = 7.41629870920548767373540138878;
static constexpr double kEnergyCoef = 1.23604978486758127895590023146;  // B(1/4,1/4)/6
static constexpr double kBBornUnits = 0.654527763919509734300855472732; // 36/B(1/4,1/4)^2

TEST_CASE("aether map at closed-form points") {
    const FieldPair z = aether_map({0, 0, 0}, {0, 0, 0}, 1.0);
    CHECK(norm(z.E) == 0.0);
    CHECK(norm(z.H) == 0.0);

    const double s3 = std::sqrt(3.0);
    const FieldPair p = aether_map({0, 0, 0}, {s3, 0, 0}, 1.0);
    CHECK(p.E.x == Catch::Approx(s3 / 2.0).epsilon(1e-15));
    CHECK(p.E.y == 0.0);
    CHECK(norm(p.H) == 0.0);

    // symmetric crossed case: both quotients collapse back to the inputs
    const FieldPair c = aether_map({0, 0, 1}, {1, 0, 0}, 1.0);
    CHECK(norm(c.E - Vec3{1, 0, 0}) < 1e-15);
    CHECK(norm(c.H - Vec3{0, 0, 1}) < 1e-15);
}

TEST_CASE("aether map: weak-field limit and magnitude bounds") {
    std::mt19937 rng(42);
    std::uniform_real_distribution<double> uni(-1.0, 1.0);
    const double b = 3.7;
    for (int k = 0; k < 300; ++k) {
        const Vec3 Bw{uni(rng), uni(rng), uni(rng)};
        const Vec3 Dw{uni(rng), uni(rng), uni(rng)};

        // weak-field: |E - D| / |D| <= 1e-5 for |B|,|D| <= 1e-3 b
        const Vec3 Bs = 1e-3 * b / std::max(1.0, norm(Bw)) * Bw;
        const Vec3 Ds = 1e-3 * b / std::max(1.0, norm(Dw)) * Dw;
        const FieldPair weak = aether_map(Bs, Ds, b);
        if (norm(Ds) > 1e-6 * b) CHECK(norm(weak.E - Ds) / norm(Ds) <= 1e-5);
        if (norm(Bs) > 1e-6 * b) CHECK(norm(weak.H - Bs) / norm(Bs) <= 1e-5);

        // strong fields stay bounded by |D| + |B|
        const Vec3 Bb = 5.0 * b * Bw, Db = 5.0 * b * Dw;
        const FieldPair strong = aether_map(Bb, Db, b);
        CHECK(norm(strong.E) <= norm(Db) + norm(Bb) + 1e-12);
        CHECK(norm(strong.H) <= norm(Db) + norm(Bb) + 1e-12);
    }
}

TEST_CASE("born displacement") {
    CHECK(norm(born_displacement({1, 0, 0}, 2.5)) == Catch::Approx(2.5).epsilon(1e-15));
    CHECK(norm(born_displacement({0, 2, 0}, 2.5)) == Catch::Approx(2.5 / 4.0).epsilon(1e-15));
    // charge -e: D points toward the defect
    CHECK(born_displacement({1, 0, 0}, 1.0).x < 0.0);
    CHECK(born_displacement({1, 0, 0}, 1.0, +1).x > 0.0);
    CHECK_THROWS_AS(born_displacement({0, 0, 0}, 1.0), SingularityError);

    // divergence residual off the origin is O(h^2)
    auto div_at = [](double h) {
        const Vec3 s{0.8, -0.5, 0.6};
        double div = 0.0;
        for (int a = 0; a < 3; ++a) {
            Vec3 dp = s, dm = s;
            dp[a] += h;
            dm[a] -= h;
            div += (born_displacement(dp, 1.0)[a] - born_displacement(dm, 1.0)[a]) / (2 * h);
        }
        return std::abs(div);
    };
    const double r1 = div_at(0.02), r2 = div_at(0.01);
    CHECK(r1 / r2 > 3.0);
    CHECK(r1 / r2 < 5.0);
}

TEST_CASE("born potential: closed-form origin value, Coulomb tail, monotonicity") {
    const double e = 1.3, b = 0.9;
    // phi(0) = -(1/4) B(1/4,1/4) sqrt(b e)
    CHECK(born_potential(0.0, e, b) ==
          Catch::Approx(-0.25 * kBetaQQ * std::sqrt(b * e)).epsilon(1e-12));
    // with b = b_born (born units): phi(0) = -3/2 exactly
    CHECK(born_potential(0.0, 1.0, b_born(1, 1, 1)) == Catch::Approx(-1.5).epsilon(1e-12));
    // Coulomb asymptotics
    const double r_far = 60.0 * born_radius(e, b);
    CHECK(born_potential(r_far, e, b) / (-e / r_far) == Catch::Approx(1.0).epsilon(0.01));
    // monotone increasing toward 0^-
    double prev = born_potential(0.0, e, b);
    for (double r : {0.1, 0.5, 1.0, 3.0, 10.0, 50.0}) {
        const double cur = born_potential(r, e, b);
        CHECK(cur > prev);
        CHECK(cur < 0.0);
        prev = cur;
    }
    // positive charge flips the sign
    CHECK(born_potential(2.0, e, b, +1) == Catch::Approx(-born_potential(2.0, e, b)).epsilon(1e-14));
}

TEST_CASE("born potential gradient equals the aether electric field") {
    const double e = 1.0, b = 2.0;
    for (double r : {0.05, 0.3, 1.0, 4.0}) {
        const double h = 1e-5 * std::max(1.0, r);
        const double dphi = (born_potential(r + h, e, b) - born_potential(r - h, e, b)) / (2 * h);
        // E_r = D_r/sqrt(1+|D|^2/b^2) with D_r = -e/r^2; phi' = -E_r
        const double Er = -e / std::sqrt(r * r * r * r + e * e / (b * b));
        CHECK(dphi == Catch::Approx(-Er).epsilon(1e-7));
    }
}

TEST_CASE("b_born value and scaling") {
    CHECK(b_born(1, 1, 1) == Catch::Approx(kBBornUnits).epsilon(1e-13));
    CHECK(b_born(2, 1, 1) == Catch::Approx(4.0 * kBBornUnits).epsilon(1e-13));
    CHECK(b_born(1, 1, 2) == Catch::Approx(kBBornUnits / 8.0).epsilon(1e-13));
    CHECK(b_born(1, 3, 1) == Catch::Approx(81.0 * kBBornUnits).epsilon(1e-13));
}

TEST_CASE("radial energy quadrature matches the closed form") {
    for (const auto [e, b] : {std::pair{1.0, 1.0}, {0.6, 2.7}, {1.3, 0.2}}) {
        const auto got = bi_conserved_integrals_radial(
            [e = e](double r) { return born_displacement_radial(r, e); }, b, born_radius(e, b));
        const double expect = kEnergyCoef * std::sqrt(b * e * e * e);
        CHECK(got.energy == Catch::Approx(expect).epsilon(1e-9));
        CHECK(norm(got.momentum) == 0.0);
        CHECK(norm(got.angular_momentum) == 0.0);
    }
    // with b = b_born the energy is exactly m c^2
    const auto unit = bi_conserved_integrals_radial(
        [](double r) { return born_displacement_radial(r, 1.0); }, b_born(1, 1, 1),
        born_radius(1.0, b_born(1, 1, 1)));
    CHECK(unit.energy == Catch::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("grid energy path: exclusion balls plus r^-2 tail reach the Born value") {
    const double e = 1.0, b = 1.0;
    FieldSampler born = [&](const Vec3& s, Vec3& B, Vec3& D) {
        B = {0, 0, 0};
        D = born_displacement(s, e);
    };
    GridSpec grid;
    grid.h = 12.0 / 64;
    grid.lo = {-6.0 + 0.001, -6.0 + 0.0013, -6.0 + 0.0007};  // defect off lattice points
    grid.nx = grid.ny = grid.nz = 64;
    const auto got = bi_conserved_integrals_grid(born, b, grid, 1.0, {{0.001, 0.0013, 0.0007}},
                                                 true);
    CHECK(got.energy == Catch::Approx(kEnergyCoef).epsilon(0.01));
    CHECK(norm(got.momentum) < 1e-12);
}

TEST_CASE("grid path refuses fields that grow past r^-2") {
    FieldSampler growing = [](const Vec3& s, Vec3& B, Vec3& D) {
        B = {0, 0, 0};
        D = 0.3 * s;  // |D| ~ r: tail integral diverges
    };
    GridSpec grid;
    grid.h = 0.25;
    grid.lo = {-4, -4, -4};
    grid.nx = grid.ny = grid.nz = 32;
    CHECK_THROWS_AS(bi_conserved_integrals_grid(growing, 1.0, grid, 1.0, {}, true),
                    AccuracyError);
}

TEST_CASE("grid momentum bookkeeping on uniform crossed fields") {
    const Vec3 B0{0, 0, 0.4}, D0{0.3, 0, 0};
    FieldSampler crossed = [&](const Vec3&, Vec3& B, Vec3& D) {
        B = B0;
        D = D0;
    };
    GridSpec grid;
    grid.h = 0.125;
    grid.lo = {1.0, -2.0, 0.5};  // deliberately off-center box
    grid.nx = 16;
    grid.ny = 24;
    grid.nz = 8;
    const double c = 2.0;
    const auto got = bi_conserved_integrals_grid(crossed, 1.0, grid, c);
    const double vol = grid.cells() * grid.h * grid.h * grid.h;
    const Vec3 expect_p = vol / (4.0 * M_PI * c) * cross(D0, B0);
    CHECK(norm(got.momentum - expect_p) < 1e-12 * norm(expect_p));
    // angular momentum = centroid x momentum for constant density
    const Vec3 centroid = grid.box_center();
    const Vec3 expect_l = cross(centroid, expect_p);
    CHECK(norm(got.angular_momentum - expect_l) < 1e-10 * norm(expect_l));
}

TEST_CASE("stress tensor: symmetry and the radial closed form") {
    std::mt19937 rng(7);
    std::uniform_real_distribution<double> uni(-2.0, 2.0);
    for (int k = 0; k < 100; ++k) {
        const double b = 1.3;
        const Vec3 B{uni(rng), uni(rng), uni(rng)}, D{uni(rng), uni(rng), uni(rng)};
        const Mat3 th = stress_tensor(B, D, b);
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) CHECK(std::abs(th.m[i][j] - th.m[j][i]) < 1e-12);

        // Legendre duality between the (E,B) and (B,D) invariants; the
        // isotropic part of the stress relies on it
        const FieldPair eh = aether_map(B, D, b);
        const double b2 = b * b;
        const double zeta =
            (norm2(B) + norm2(D)) / b2 + norm2(cross(B, D)) / (b2 * b2);
        const double root_eb =
            std::sqrt(1.0 - (norm2(eh.E) - norm2(B)) / b2 -
                      dot(eh.E, B) * dot(eh.E, B) / (b2 * b2));
        CHECK(root_eb * std::sqrt(1.0 + zeta) ==
              Catch::Approx(1.0 + norm2(B) / b2).epsilon(1e-12));

        // trace identity: tr(Theta) * 4pi = E.D + H.B - 3 (L + H.B)
        const double lagrange = b2 * (1.0 - (1.0 + norm2(B) / b2) / std::sqrt(1.0 + zeta));
        const double tr = (th.m[0][0] + th.m[1][1] + th.m[2][2]) * 4.0 * M_PI;
        CHECK(tr == Catch::Approx(dot(eh.E, D) + dot(eh.H, B) -
                                  3.0 * (lagrange + dot(eh.H, B)))
                        .margin(1e-11));
    }

    // weak fields: Maxwell stress E(x)E + B(x)B - (|E|^2+|B|^2)/2 I
    {
        const double b = 1e5;
        const Vec3 B{0.3, -0.2, 0.5}, D{-0.4, 0.1, 0.7};
        const Mat3 th = stress_tensor(B, D, b);
        Mat3 mx = Mat3::outer(D, D) + Mat3::outer(B, B) -
                  0.5 * (norm2(D) + norm2(B)) * Mat3::identity();
        mx = mx * (1.0 / (4.0 * M_PI));
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) CHECK(std::abs(th.m[i][j] - mx.m[i][j]) < 1e-9);
    }
    const Mat3 z = stress_tensor({0, 0, 0}, {0, 0, 0}, 2.0);
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) CHECK(z.m[i][j] == 0.0);

    // Born field on the x-axis: diagonal tensor, xx entry from the
    // radial formulas, evaluated symbolically here
    const double e = 1.0, b = 1.0, r = 0.7;
    const Vec3 s{r, 0, 0};
    const Mat3 th = stress_tensor({0, 0, 0}, born_displacement(s, e), b);
    const double Dx = -e / (r * r);
    const double Ex = -e / std::sqrt(r * r * r * r + e * e / (b * b));
    const double zeta = Dx * Dx / (b * b);
    const double trace_part = b * b * (1.0 - 1.0 / std::sqrt(1.0 + zeta));
    CHECK(th.m[0][0] == Catch::Approx((Ex * Dx - trace_part) / (4 * M_PI)).epsilon(1e-12));
    CHECK(th.m[1][1] == Catch::Approx(-trace_part / (4 * M_PI)).epsilon(1e-12));
    CHECK(std::abs(th.m[0][1]) < 1e-15);
    CHECK(std::abs(th.m[1][2]) < 1e-15);
}

namespace {

/// Superposed displacement of two negative defects at +/- (d/2) z.
FieldSampler two_defects(double e, double d) {
    return [e, d](const Vec3& s, Vec3& B, Vec3& D) {
        B = {0, 0, 0};
        D = born_displacement(s - Vec3{0, 0, d / 2}, e) +
            born_displacement(s + Vec3{0, 0, d / 2}, e);
    };
}

} // namespace

TEST_CASE("surface force: symmetry zeros") {
    const double e = 1.0, b = 1.0;
    FieldSampler born = [&](const Vec3& s, Vec3& B, Vec3& D) {
        B = {0, 0, 0};
        D = born_displacement(s, e);
    };
    SurfaceSpec sph{SphereSurface{{0, 0, 0}, 2.0}, 24};
    CHECK(norm(surface_force(born, b, sph)) < 1e-10);

    // surface enclosing no charge in the exact static field
    SurfaceSpec off{SphereSurface{{4.0, 0.5, -0.3}, 1.0}, 32};
    CHECK(norm(surface_force(born, b, off)) < 1e-8);
    SurfaceSpec obox{BoxSurface{{3.0, -1.0, -1.2}, {5.0, 1.0, 0.8}}, 32};
    CHECK(norm(surface_force(born, b, obox)) < 1e-8);
}

TEST_CASE("surface force: two-defect Coulomb asymptotics and surface independence") {
    const double e = 1.0, b = 1.0;
    const double d = 40.0 * born_radius(e, b);
    const FieldSampler f = two_defects(e, d);
    const double coulomb = e * e / (d * d);

    // half-space boundary: disk on the bisector plane + hemispherical cap
    SurfaceSpec half{PlaneCapSurface{{0, 0, 0}, {0, 0, 1}, 1.2 * d}, 48};
    const Vec3 F = surface_force(f, b, half);
    CHECK(F.z < 0.0);  // like charges repel: lower defect pushed down
    CHECK(std::abs(F.x) < 0.01 * coulomb);
    CHECK(std::abs(F.y) < 0.01 * coulomb);
    CHECK(norm(F) == Catch::Approx(coulomb).epsilon(0.01));

    // independence of the enclosing surface
    SurfaceSpec half2{PlaneCapSurface{{0, 0, 0}, {0, 0, 1}, 0.8 * d}, 48};
    SurfaceSpec sph{SphereSurface{{0, 0, -d / 2}, 0.3 * d}, 32};
    SurfaceSpec box{BoxSurface{Vec3{-0.3, -0.3, -0.8} * d, Vec3{0.3, 0.3, -0.2} * d}, 32};
    const Vec3 F2 = surface_force(f, b, half2);
    const Vec3 Fs = surface_force(f, b, sph);
    const Vec3 Fb = surface_force(f, b, box);
    CHECK(norm(F2 - F) < 0.01 * coulomb);
    CHECK(norm(Fs - F) < 0.01 * coulomb);
    CHECK(norm(Fb - F) < 0.01 * coulomb);
}

TEST_CASE("surface force: order escalation failure is reported") {
    FieldSampler wiggly = [](const Vec3& s, Vec3& B, Vec3& D) {
        B = {0, 0, 0};
        D = Vec3{std::sin(40.0 * s.y), std::cos(40.0 * s.z), std::sin(40.0 * s.x)};
    };
    SurfaceSpec sph{SphereSurface{{0, 0, 0}, 1.0}, 4};
    CHECK_THROWS_AS(surface_force(wiggly, 1.0, sph, 1e-9, 1e-12), AccuracyError);
}
