#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <memory>

#include "phi2/nonlinearity.hpp"
#include "phi2/rng.hpp"
#include "phi2/spectral.hpp"

using namespace phi2;

namespace {

std::shared_ptr<SpectralBasis> basis(int d, double L, int M) {
    return std::make_shared<SpectralBasis>(d, L, M);
}

GridField random_grid(std::shared_ptr<const SpectralBasis> b, std::uint64_t seed, double scale) {
    RngStream rng(seed);
    GridField g(std::move(b));
    for (auto& v : g.values()) v = scale * rng.normal();
    return g;
}

} // namespace

TEST_CASE("pointwise drift evaluation") {
    PolynomialDrift d1(1, 0.0, 0.0);
    CHECK(d1.f(2.0) == -8.0);
    PolynomialDrift d2(1, 1.0, 0.0);
    CHECK(d2.f(1.0) == 0.0);
    PolynomialDrift d3(2, 0.0, 3.0);
    CHECK(d3.f(0.0) == 3.0);
    CHECK(d3.f_prime(1.0) == -5.0);
    CHECK(d1.f_prime(2.0) == -3.0 * 4.0);
    CHECK(d1.p_n() == 4.0);
    CHECK(1.0 / d1.p_n() + 1.0 / d1.q_n() == Catch::Approx(1.0));
    CHECK_THROWS_AS(PolynomialDrift(0, 0.0, 0.0), std::invalid_argument);
}

TEST_CASE("truncated drift clamps the argument") {
    PolynomialDrift d(1, 0.5, -0.25, 2.0);
    CHECK(d.f_truncated(3.0) == d.f(2.0));
    CHECK(d.f_truncated(-5.0) == d.f(-2.0));
    CHECK(d.f_truncated(1.5) == d.f(1.5));
    // Lipschitz constant = sup over the clamp interval of |f'|
    CHECK(d.lipschitz_truncated() == Catch::Approx(std::abs(d.f_prime(2.0))));
    PolynomialDrift no_trunc(1, 0.0, 0.0);
    CHECK_THROWS_AS(no_trunc.f_truncated(1.0), std::invalid_argument);
}

TEST_CASE("composition operator on grids") {
    auto b = basis(1, M_PI, 8);
    PolynomialDrift drift(1, 0.0, 0.0);

    GridField zero(b);
    const GridField fz = apply_F(zero, drift);
    for (double v : fz.values()) CHECK(v == 0.0);

    PolynomialDrift trunc(1, 0.0, 0.0, 2.0);
    GridField three(b);
    for (auto& v : three.values()) v = 3.0;
    const GridField ft = apply_F_N(three, trunc);
    for (double v : ft.values()) CHECK(v == trunc.f(2.0));

    // below the clamp level F_N = F exactly
    const GridField g = random_grid(b, 5, 0.5);
    const GridField a = apply_F(g, trunc);
    const GridField c = apply_F_N(g, trunc);
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i] == c[i]);
}

TEST_CASE("scalar dissipativity with constant 2^{-2n}") {
    // (f(r)-f(s))(r-s) <= -2^{-2n}|r-s|^{2n+2} + lambda1 |r-s|^2 on a fine grid
    for (int n : {1, 2, 3}) {
        PolynomialDrift drift(n, 0.7, 0.3);
        const double c = std::pow(2.0, -2.0 * n);
        for (int i = 0; i <= 80; ++i)
            for (int j = 0; j <= 80; ++j) {
                const double r = -10.0 + 0.25 * i;
                const double s = -10.0 + 0.25 * j;
                const double lhs = (drift.f(r) - drift.f(s)) * (r - s);
                const double rhs = -c * std::pow(std::abs(r - s), 2.0 * n + 2) +
                                   drift.lambda1 * (r - s) * (r - s);
                REQUIRE(lhs <= rhs + 1e-9 * std::abs(rhs));
            }
    }
    // equality case at (1, -1) for n=1, lambda1=0
    PolynomialDrift d1(1, 0.0, 0.0);
    const double lhs = (d1.f(1.0) - d1.f(-1.0)) * 2.0;
    CHECK(lhs == Catch::Approx(-4.0));
    CHECK(lhs == Catch::Approx(-std::pow(2.0, -2.0) * std::pow(2.0, 4.0)));
}

TEST_CASE("field dissipativity gap") {
    auto b = basis(1, M_PI, 16);
    PolynomialDrift drift(1, 0.5, 0.1);

    const GridField x = random_grid(b, 1, 1.5);
    const auto [l0, r0] = dissipativity_gap(x, x, drift);
    CHECK(l0 == 0.0);
    CHECK(r0 == 0.0);

    RngStream rng(99);
    for (int n : {1, 2, 3}) {
        PolynomialDrift dn(n, 0.5, -0.2);
        for (int rep = 0; rep < 200; ++rep) {
            const GridField a = random_grid(b, 1000 + static_cast<std::uint64_t>(rep), 2.0);
            const GridField c = random_grid(b, 5000 + static_cast<std::uint64_t>(rep), 2.0);
            const auto [lhs, rhs] = dissipativity_gap(a, c, dn);
            REQUIRE(lhs <= rhs + 1e-9 * (1.0 + std::abs(rhs)));
        }
    }

    auto b2 = basis(1, M_PI, 8);
    CHECK_THROWS_AS(dissipativity_gap(x, GridField(b2), drift), std::invalid_argument);
}

TEST_CASE("growth and local Lipschitz functional form") {
    // |F(x)|_{q_n} <= C (|x|_{p_n}^{2n+1} + 1) and
    // |F(x)-F(y)|_{q_n} <= C |x-y|_{p_n} (|x|^{2n} + |y|^{2n} + 1), C calibrated once
    auto b = basis(1, M_PI, 32);
    PolynomialDrift drift(1, 0.4, 0.2);
    const double pn = drift.p_n(), qn = drift.q_n();

    double C_growth = 0.0, C_lip = 0.0;
    for (int rep = 0; rep < 50; ++rep) { // calibration run
        const GridField x = random_grid(b, 10 + static_cast<std::uint64_t>(rep), 1.0);
        const GridField y = random_grid(b, 300 + static_cast<std::uint64_t>(rep), 1.0);
        GridField fx = apply_F(x, drift), fy = apply_F(y, drift), diff(b), fdiff(b);
        for (std::size_t i = 0; i < x.size(); ++i) {
            diff[i] = x[i] - y[i];
            fdiff[i] = fx[i] - fy[i];
        }
        C_growth = std::max(C_growth,
                            norm_Lp(fx, qn) / (std::pow(norm_Lp(x, pn), 2.0 * drift.n + 1) + 1.0));
        const double denom = norm_Lp(diff, pn) * (std::pow(norm_Lp(x, pn), 2.0 * drift.n) +
                                                  std::pow(norm_Lp(y, pn), 2.0 * drift.n) + 1.0);
        if (denom > 1e-12) C_lip = std::max(C_lip, norm_Lp(fdiff, qn) / denom);
    }
    // the fitted constants must keep working on fresh fields
    for (int rep = 0; rep < 200; ++rep) {
        const GridField x = random_grid(b, 7000 + static_cast<std::uint64_t>(rep), 1.0);
        const GridField y = random_grid(b, 9000 + static_cast<std::uint64_t>(rep), 1.0);
        GridField fx = apply_F(x, drift), fy = apply_F(y, drift), diff(b), fdiff(b);
        for (std::size_t i = 0; i < x.size(); ++i) {
            diff[i] = x[i] - y[i];
            fdiff[i] = fx[i] - fy[i];
        }
        REQUIRE(norm_Lp(fx, qn) <=
                1.3 * C_growth * (std::pow(norm_Lp(x, pn), 2.0 * drift.n + 1) + 1.0));
        REQUIRE(norm_Lp(fdiff, qn) <=
                1.3 * C_lip * norm_Lp(diff, pn) *
                    (std::pow(norm_Lp(x, pn), 2.0 * drift.n) +
                     std::pow(norm_Lp(y, pn), 2.0 * drift.n) + 1.0));
    }
}

TEST_CASE("spectral nonlinear operator matches the exact projection") {
    // with dealiasing, F on modes equals the exact L^2 projection of f(u)
    auto b = basis(1, M_PI, 8);
    PolynomialDrift drift(1, 0.3, 0.0);
    NonlinearSpectralOp op(b, drift, /*dealias=*/true);

    RngStream rng(4);
    SpectralField u(b);
    for (auto& c : u.coeffs()) c = 0.5 * rng.normal();
    const SpectralField fm = op.apply(u);

    // oracle: very fine grid projection
    auto fine = basis(1, M_PI, 512);
    SpectralField uf(fine);
    for (std::size_t i = 0; i < u.size(); ++i) {
        const auto idx = fine->find_mode(b->mode(i));
        uf[static_cast<std::size_t>(idx)] = u[i];
    }
    GridField gf = to_grid(uf);
    for (auto& v : gf.values()) v = drift.f(v);
    const SpectralField proj = to_modes(gf);
    for (std::size_t i = 0; i < u.size(); ++i) {
        const auto idx = fine->find_mode(b->mode(i));
        CHECK(fm[i] == Catch::Approx(proj[static_cast<std::size_t>(idx)]).margin(1e-10));
    }
}

TEST_CASE("jacobian of the spectral operator vs finite differences") {
    auto b = basis(1, M_PI, 8);
    PolynomialDrift drift(2, -0.2, 0.1);
    for (bool dealias : {true, false}) {
        NonlinearSpectralOp op(b, drift, dealias);
        RngStream rng(17);
        SpectralField u(b), v(b);
        for (auto& c : u.coeffs()) c = 0.4 * rng.normal();
        for (auto& c : v.coeffs()) c = rng.normal();
        op.apply(u);
        const auto point = op.last_grid();
        const SpectralField jv = op.jacobian_apply(point, v);

        const double h = 1e-6;
        SpectralField up = u, um = u;
        for (std::size_t i = 0; i < u.size(); ++i) {
            up[i] += h * v[i];
            um[i] -= h * v[i];
        }
        const SpectralField fp = op.apply(up);
        const SpectralField fmn = op.apply(um);
        for (std::size_t i = 0; i < u.size(); ++i) {
            const double fd = (fp[i] - fmn[i]) / (2.0 * h);
            CHECK(jv[i] == Catch::Approx(fd).margin(1e-6));
        }
    }
}
