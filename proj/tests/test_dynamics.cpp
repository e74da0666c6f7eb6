#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <memory>

#include "phi2/dynamics.hpp"
#include "phi2/rng.hpp"

using namespace phi2;

namespace {

std::shared_ptr<SpectralBasis> basis(int d, double L, int M) {
    return std::make_shared<SpectralBasis>(d, L, M);
}

SpectralField random_field(std::shared_ptr<const SpectralBasis> b, std::uint64_t seed,
                           double scale = 1.0) {
    RngStream rng(seed);
    SpectralField x(std::move(b));
    for (auto& c : x.coeffs()) c = scale * rng.normal();
    return x;
}

} // namespace

TEST_CASE("zero state with odd drift stays at zero") {
    auto b = basis(1, M_PI, 8);
    PolynomialDrift drift(1, 0.5, 0.0); // f(0) = 0
    SolverOptions opt;
    opt.T = 0.5;
    const Trajectory tr = solve_skeleton(SpectralField(b), Control{}, drift, opt);
    for (const auto& s : tr.states)
        for (double c : s.coeffs()) CHECK(c == 0.0);
}

TEST_CASE("linear equation reproduces the heat semigroup exactly") {
    auto b = basis(2, 1.4, 5);
    const SpectralField x = random_field(b, 3);
    SolverOptions opt;
    opt.dt = 1.0 / 64;
    opt.T = 0.25;
    opt.output_stride = 4;
    const Trajectory tr =
        solve_skeleton(x, Control{}, PolynomialDrift{}, opt, nullptr, /*drift_enabled=*/false);
    for (std::size_t j = 0; j < tr.states.size(); ++j) {
        const SpectralField ref = heat_propagate(x, tr.times[j]);
        for (std::size_t i = 0; i < x.size(); ++i)
            CHECK(tr.states[j][i] == Catch::Approx(ref[i]).margin(1e-13));
    }
}

TEST_CASE("self-convergence of the integrator is at least first order") {
    auto b = basis(1, M_PI, 16);
    PolynomialDrift drift(1, 0.8, 0.3);
    const SpectralField x = random_field(b, 11, 0.7);
    auto run = [&](double dt) {
        SolverOptions opt;
        opt.dt = dt;
        opt.T = 0.5;
        opt.output_stride = static_cast<std::size_t>(std::llround(0.5 / dt));
        return solve_skeleton(x, Control{}, drift, opt).back();
    };
    const SpectralField fine = run(1.0 / 2048);
    auto err = [&](double dt) {
        const SpectralField u = run(dt);
        double e = 0.0;
        for (std::size_t i = 0; i < u.size(); ++i) e += (u[i] - fine[i]) * (u[i] - fine[i]);
        return std::sqrt(e);
    };
    const double e1 = err(1.0 / 64), e2 = err(1.0 / 128), e3 = err(1.0 / 256);
    CHECK(e1 / e2 > 1.8);
    CHECK(e2 / e3 > 1.8);
}

TEST_CASE("noise-free stochastic path matches the skeleton bit for bit") {
    auto b = basis(1, M_PI, 12);
    PolynomialDrift drift(1, 0.4, 0.1);
    NoiseModel noise(b, 0.5, 1.0);
    const SpectralField x = random_field(b, 7, 0.5);
    SolverOptions opt;
    opt.T = 0.25;
    RngStream rng(1);
    const Trajectory sk = solve_skeleton(x, Control{}, drift, opt);
    const Trajectory st = solve_stochastic(x, 0.0, noise, drift, opt, rng);
    REQUIRE(sk.states.size() == st.states.size());
    for (std::size_t j = 0; j < sk.states.size(); ++j)
        for (std::size_t i = 0; i < x.size(); ++i) CHECK(sk.states[j][i] == st.states[j][i]);

    // controlled with eps = 0 equals the skeleton driven through Q_delta
    Control phi = Control::zero(b, opt.T, opt.dt);
    RngStream crng(2);
    for (auto& v : phi.values)
        for (auto& c : v.coeffs()) c = crng.normal();
    std::vector<double> q(b->size());
    for (std::size_t i = 0; i < q.size(); ++i) q[i] = noise.amp(i) * noise.amp(i);
    const Trajectory ck = solve_skeleton_weighted(x, phi, drift, opt, q);
    const Trajectory cc = solve_controlled(x, 0.0, phi, noise, drift, opt, rng);
    for (std::size_t j = 0; j < ck.states.size(); ++j)
        for (std::size_t i = 0; i < x.size(); ++i) CHECK(ck.states[j][i] == cc.states[j][i]);
}

TEST_CASE("stochastic linear moments match the Ornstein-Uhlenbeck law") {
    auto b = basis(1, M_PI, 2);
    NoiseModel noise(b, 0.5, 1.0);
    SolverOptions opt;
    opt.dt = 1.0 / 16;
    opt.T = 1.0;
    opt.output_stride = 16;
    const double eps = 0.3;
    const int reps = 20000;
    std::vector<double> second(b->size(), 0.0);
    RngStream rng(17);
    for (int rep = 0; rep < reps; ++rep) {
        const Trajectory tr = solve_stochastic(SpectralField(b), eps, noise, PolynomialDrift{},
                                               opt, rng, nullptr, /*drift_enabled=*/false);
        for (std::size_t i = 0; i < b->size(); ++i)
            second[i] += tr.back()[i] * tr.back()[i];
    }
    for (std::size_t i = 0; i < b->size(); ++i) {
        const double a = b->eigenvalue(i);
        const double var =
            eps * noise.amp(i) * noise.amp(i) * (1.0 - std::exp(-2.0 * a)) / (2.0 * a);
        CHECK(std::abs(second[i] / reps - var) < 4.0 * var * std::sqrt(2.0 / reps));
    }
}

TEST_CASE("contraction of nonlinear flows without linear instability") {
    // lambda1 = 0: two solutions contract in H
    auto b = basis(1, M_PI, 12);
    PolynomialDrift drift(1, 0.0, 0.2);
    SolverOptions opt;
    opt.T = 1.0;
    opt.output_stride = 32;
    const Trajectory ta = solve_skeleton(random_field(b, 21, 1.0), Control{}, drift, opt);
    const Trajectory tb = solve_skeleton(random_field(b, 22, 1.0), Control{}, drift, opt);
    double prev = 1e300;
    for (std::size_t j = 0; j < ta.states.size(); ++j) {
        SpectralField diff = ta.states[j];
        for (std::size_t i = 0; i < diff.size(); ++i) diff[i] -= tb.states[j][i];
        const double g = norm_H(diff);
        CHECK(g <= prev * (1.0 + 1e-12));
        prev = g;
    }
}

TEST_CASE("energy dissipation without forcing") {
    auto b = basis(2, M_PI, 6);
    PolynomialDrift drift(2, 0.0, 0.0);
    SolverOptions opt;
    opt.T = 0.5;
    opt.output_stride = 8;
    const Trajectory tr = solve_skeleton(random_field(b, 31, 1.2), Control{}, drift, opt);
    double prev = 1e300;
    for (const auto& s : tr.states) {
        const double g = norm_H(s);
        CHECK(g <= prev * (1.0 + 1e-12));
        prev = g;
    }
}

TEST_CASE("a-priori diagnostics") {
    auto b = basis(1, M_PI, 8);
    PolynomialDrift drift(1, 0.3, 0.0);
    SolverOptions opt;
    opt.T = 0.5;
    opt.track_Lpn = true;
    SolverDiagnostics diag;
    const SpectralField x = random_field(b, 41, 0.8);
    const Trajectory tr = solve_skeleton(x, Control{}, drift, opt, &diag);
    CHECK(diag.sup_norm_H >= norm_H(x));
    CHECK(diag.sup_norm_H >= norm_H(tr.back()));
    CHECK(diag.int_Lpn > 0.0);
    CHECK_FALSE(diag.accuracy_warning);

    // a coarse step against a steep drift must raise the warning
    SolverOptions coarse = opt;
    coarse.dt = 0.25;
    const SpectralField big = random_field(b, 42, 4.0);
    try {
        SolverDiagnostics d2;
        solve_skeleton(big, Control{}, drift, coarse, &d2);
        CHECK(d2.accuracy_warning);
    } catch (const BlowUpError&) {
        SUCCEED("coarse run blew up, which is also an acceptable failure mode");
    }
}

TEST_CASE("blow-up detection") {
    auto b = basis(1, M_PI, 4);
    PolynomialDrift drift(1, 0.0, 0.0);
    SolverOptions opt;
    opt.dt = 0.5;
    opt.T = 5.0;
    SpectralField x(b);
    x[0] = 1e120; // cubic overflow on the first composition
    try {
        solve_skeleton(x, Control{}, drift, opt);
        FAIL("expected BlowUpError");
    } catch (const BlowUpError& e) {
        CHECK(e.step >= 1);
    }
    x[0] = std::nan("");
    CHECK_THROWS_AS(solve_skeleton(x, Control{}, drift, opt), std::invalid_argument);
}

TEST_CASE("truncated and plain drift agree on small states") {
    auto b = basis(1, M_PI, 8);
    PolynomialDrift plain(1, 0.2, 0.0);
    PolynomialDrift trunc(1, 0.2, 0.0, 50.0);
    SolverOptions opt;
    opt.T = 0.25;
    SolverOptions topt = opt;
    topt.use_truncation = true;
    const SpectralField x = random_field(b, 51, 0.3);
    const Trajectory a = solve_skeleton(x, Control{}, plain, opt);
    const Trajectory c = solve_skeleton(x, Control{}, trunc, topt);
    for (std::size_t j = 0; j < a.states.size(); ++j)
        for (std::size_t i = 0; i < x.size(); ++i) CHECK(a.states[j][i] == c.states[j][i]);
}

TEST_CASE("stochastic convolution map") {
    auto b = basis(1, M_PI, 4);
    SolverOptions opt;
    opt.dt = 1.0 / 32;
    opt.T = 1.0;

    // constant control on the first mode: z_1(t) = (1 - e^{-alpha_1 t})/alpha_1, exact
    Control phi = Control::zero(b, opt.T, opt.dt);
    for (auto& v : phi.values) v[0] = 1.0;
    const Trajectory z = convolution_map(phi, opt);
    for (std::size_t j = 0; j < z.times.size(); ++j) {
        const double t = z.times[j];
        const double a1 = b->eigenvalue(0);
        CHECK(z.states[j][0] == Catch::Approx((1.0 - std::exp(-a1 * t)) / a1).margin(1e-13));
        for (std::size_t i = 1; i < b->size(); ++i) CHECK(z.states[j][i] == 0.0);
    }

    // linearity
    Control phi2c = Control::zero(b, opt.T, opt.dt);
    RngStream rng(61);
    for (auto& v : phi2c.values)
        for (auto& c : v.coeffs()) c = rng.normal();
    Control sum = phi2c;
    for (std::size_t j = 0; j < sum.values.size(); ++j)
        for (std::size_t i = 0; i < b->size(); ++i) sum.values[j][i] += phi.values[j][i];
    const Trajectory za = convolution_map(phi2c, opt);
    const Trajectory zs = convolution_map(sum, opt);
    for (std::size_t j = 0; j < zs.states.size(); ++j)
        for (std::size_t i = 0; i < b->size(); ++i)
            CHECK(zs.states[j][i] == Catch::Approx(za.states[j][i] + z.states[j][i]).margin(1e-12));

    CHECK_THROWS_AS(convolution_map(Control{}, opt), std::invalid_argument);
}

TEST_CASE("trajectory gap and grid-contract checks") {
    auto b = basis(1, M_PI, 6);
    PolynomialDrift drift(1, 0.1, 0.0);
    SolverOptions opt;
    opt.T = 0.25;
    const Trajectory a = solve_skeleton(random_field(b, 71, 0.4), Control{}, drift, opt);
    const Trajectory c = solve_skeleton(random_field(b, 72, 0.4), Control{}, drift, opt);
    CHECK(sup_norm_gap(a, a) == 0.0);
    const double gH = sup_norm_gap(a, c);
    CHECK(gH > 0.0);
    CHECK(sup_norm_gap(a, c, 1.0) <= gH); // alpha_k >= 1 here, so H^{-1} is weaker

    // control grid mismatch is rejected
    Control wrong = Control::zero(b, 0.5, opt.dt);
    CHECK_THROWS_AS(solve_skeleton(a.front(), wrong, drift, opt), std::invalid_argument);

    // output stride thins the grid but keeps the endpoint
    SolverOptions strided = opt;
    strided.output_stride = 16;
    const Trajectory s = solve_skeleton(a.front(), Control{}, drift, strided);
    CHECK(s.times.size() == 5);
    CHECK(s.times.back() == Catch::Approx(0.25));
}
