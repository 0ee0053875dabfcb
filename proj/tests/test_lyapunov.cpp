#include <doctest.h>

#include <cmath>
#include <random>
#include <riboflow/errors.hpp>
#include <riboflow/lyapunov.hpp>
#include <riboflow/rates.hpp>
#include <riboflow/simulate.hpp>

using namespace riboflow;
using doctest::Approx;

namespace {

std::mt19937_64 gen(2024);

std::vector<double> random_interior(int m, double lo, double hi) {
    std::uniform_real_distribution<double> u(lo, hi);
    std::vector<double> v(m);
    for (auto& x : v) x = u(gen);
    return v;
}

}  // namespace

TEST_CASE("ltv term vanishes only at the reference") {
    std::vector<double> nbar{3, 7, 11};
    CHECK(v_ltv(nbar, nbar) == 0.0);
    CHECK(v_ltv({3, 7, 12}, nbar) > 0.0);
    CHECK(v_ltv({3, 6.5, 11}, nbar) > 0.0);
    CHECK(v_ltv({0, 7, 11}, nbar) == Approx(3.0));  // n log n -> 0 at the boundary
}

TEST_CASE("lab with b = 0 collapses to weighted ltv terms") {
    for (int trial = 0; trial < 1000; ++trial) {
        auto n = random_interior(3, 0.01, 60);
        auto nbar = random_interior(3, 0.01, 60);
        auto a = random_interior(3, 0.1, 5);
        std::uniform_real_distribution<double> ul(0.5, 300);
        const double l = ul(gen);
        double expected = 0.0;
        for (int i = 0; i < 3; ++i)
            expected += a[i] * v_ltv({n[i]}, {nbar[i]});
        CHECK(v_lab(l, a, {0, 0, 0}, n, nbar) == Approx(expected).epsilon(1e-15));
    }
}

TEST_CASE("hill_32 minus hill_22 is the ltv term") {
    // log(r^3/(l+r^2)) - log(r^2/(l+r^2)) = log r, so the integrals differ
    // by the ltv integral exactly
    for (double l : {25.0, 350.0}) {
        for (int trial = 0; trial < 50; ++trial) {
            auto n = random_interior(4, 0.05, 90);
            auto nbar = random_interior(4, 0.05, 90);
            const double gap =
                v_hill(HillVariant::hill_32, l, n, nbar) - v_hill(HillVariant::hill_22, l, n, nbar);
            CHECK(gap == Approx(v_ltv(n, nbar)).epsilon(1e-12));
        }
    }
}

TEST_CASE("quadrature agrees with the closed forms") {
    const double l = 25.0;
    for (int trial = 0; trial < 100; ++trial) {
        auto n = random_interior(3, 0.2, 80);
        auto nbar = random_interior(3, 0.2, 80);

        std::vector<Transform> ident(3, Transform::identity());
        CHECK(v_general(ident, n, nbar) == Approx(v_ltv(n, nbar)).epsilon(1e-8));

        std::vector<Transform> h32(3, Transform::hill_general(l, 3, 2));
        CHECK(v_general(h32, n, nbar) ==
              Approx(v_hill(HillVariant::hill_32, l, n, nbar)).epsilon(1e-8));

        std::vector<Transform> h22(3, Transform::hill_general(l, 2, 2));
        CHECK(v_general(h22, n, nbar) ==
              Approx(v_hill(HillVariant::hill_22, l, n, nbar)).epsilon(1e-8));

        std::vector<Transform> h15(3, Transform::hill_general(l, 1.5, 0.5));
        CHECK(v_general(h15, n, nbar) ==
              Approx(v_hill(HillVariant::hill_1505, l, n, nbar)).epsilon(1e-8));

        std::vector<Transform> lab3(3, Transform::power_over_shifted_power(l, 3, 3));
        CHECK(v_general(lab3, n, nbar) ==
              Approx(v_lab(l, {3, 3, 3}, {3, 3, 3}, n, nbar)).epsilon(1e-8));
    }
}

TEST_CASE("gradients match finite differences of the value") {
    std::vector<LyapunovSpec> specs(5);
    specs[0].kind = LyapunovSpec::Kind::ltv;
    specs[1].kind = LyapunovSpec::Kind::lab;
    specs[1].l = 25;
    specs[1].a = {2, 3, 2};
    specs[1].b = {2, 0, 2};
    specs[2].kind = LyapunovSpec::Kind::hill_32;
    specs[2].l = 40;
    specs[3].kind = LyapunovSpec::Kind::hill_1505;
    specs[3].l = 40;
    specs[4].kind = LyapunovSpec::Kind::general_integral;
    specs[4].thetas.assign(3, Transform::hill_general(40, 3, 2));
    specs[4].weights = {1.5, 0.5, 2.0};

    auto nbar = std::vector<double>{9, 17, 30};
    for (const auto& spec : specs) {
        for (int trial = 0; trial < 20; ++trial) {
            auto n = random_interior(3, 1.0, 45);
            auto grad = lyapunov_gradient(spec, n, nbar);
            for (int i = 0; i < 3; ++i) {
                const double h = 1e-6 * std::max(1.0, n[i]);
                auto np = n, nm = n;
                np[i] += h;
                nm[i] -= h;
                const double fd =
                    (lyapunov_value(spec, np, nbar) - lyapunov_value(spec, nm, nbar)) / (2 * h);
                CHECK(grad[i] == Approx(fd).epsilon(5e-7));
            }
        }
    }
}

TEST_CASE("weights scale the value linearly") {
    LyapunovSpec plain;
    plain.kind = LyapunovSpec::Kind::ltv;
    LyapunovSpec doubled = plain;
    doubled.weights = {2, 2, 2};
    auto n = std::vector<double>{4, 9, 2};
    auto nbar = std::vector<double>{5, 8, 3};
    CHECK(lyapunov_value(doubled, n, nbar) == Approx(2 * lyapunov_value(plain, n, nbar)));
}

TEST_CASE("value family rejects invalid inputs") {
    std::vector<double> n{1, 2, 3}, nbar{1, 2, 3};
    CHECK_THROWS_AS(v_ltv({1, 2}, nbar), BadReference);
    CHECK_THROWS_AS(v_ltv({1, 2, -1}, nbar), BadParameter);
    CHECK_THROWS_AS(v_ltv(n, {1, 0, 3}), BadReference);
    CHECK_THROWS_AS(v_lab(25, {1, 2, 3}, {2, 3, 4}, n, nbar), BadParameter);  // b > a
    CHECK_THROWS_AS(v_lab(0, {1, 1, 1}, {0, 0, 0}, n, nbar), BadParameter);
    CHECK_THROWS_AS(v_lab(25, {1, -1, 1}, {0, 0, 0}, n, nbar), BadParameter);
    Transform degenerate;  // raw fields dodge the constructor validation
    degenerate.kind = Transform::Kind::power;
    degenerate.a = 0.0;
    std::vector<Transform> flat(3, degenerate);
    CHECK_THROWS_AS(v_general(flat, n, nbar), BadParameter);
}

TEST_CASE("profile derivatives are fourth order on uniform grids") {
    // smooth analytic path: truncation (lambda h)^4 keeps the relative error
    // well under 1e-6 at this spacing
    LyapunovSpec spec;
    spec.kind = LyapunovSpec::Kind::ltv;
    std::vector<double> nbar{10, 20, 30};

    Trajectory traj;
    traj.m = 3;
    traj.capacities = {40, 40, 40};
    const double h = 0.01;
    for (int k = 0; k <= 60; ++k) {
        const double t = k * h;
        traj.times.push_back(t);
        traj.states.push_back({10 + 5 * std::exp(-t), 20 - 3 * std::exp(-2 * t), 30 + t});
    }
    auto prof = lyapunov_profile(traj, spec, nbar);
    REQUIRE(prof.values.size() == traj.times.size());

    auto grad_dot = [&](int k) {
        auto g = lyapunov_gradient(spec, traj.states[k], nbar);
        const double t = traj.times[k];
        return g[0] * (-5 * std::exp(-t)) + g[1] * (6 * std::exp(-2 * t)) + g[2];
    };
    for (int k = 0; k < static_cast<int>(traj.times.size()); k += 7)
        CHECK(prof.derivative_estimates[k] == Approx(grad_dot(k)).epsilon(1e-6));
}

TEST_CASE("profile falls back to low order on nonuniform grids") {
    LyapunovSpec spec;
    spec.kind = LyapunovSpec::Kind::ltv;
    std::vector<double> nbar{10, 20, 30};

    Trajectory traj;
    traj.m = 3;
    traj.capacities = {40, 40, 40};
    double t = 0.0;
    for (int k = 0; k <= 40; ++k) {
        traj.times.push_back(t);
        traj.states.push_back({10 + 5 * std::exp(-t), 20 - 3 * std::exp(-2 * t), 30 + t});
        t += (k % 2 == 0) ? 0.004 : 0.009;
    }
    auto prof = lyapunov_profile(traj, spec, nbar);
    auto grad_dot = [&](int k) {
        auto g = lyapunov_gradient(spec, traj.states[k], nbar);
        const double tk = traj.times[k];
        return g[0] * (-5 * std::exp(-tk)) + g[1] * (6 * std::exp(-2 * tk)) + g[2];
    };
    for (int k = 1; k + 1 < static_cast<int>(traj.times.size()); k += 5)
        CHECK(prof.derivative_estimates[k] == Approx(grad_dot(k)).epsilon(5e-4));
}

TEST_CASE("chain rule tracks the profile estimate along a real trajectory") {
    // slow rates and a fine stride keep the stencil truncation below the
    // comparison tolerance through the initial transient
    auto model = build_model(3, {{0, 1}, {1, 2}, {2, 0}}, {5, 25, 50});
    std::vector<RateSpec> rs;
    for (auto [edge, kbar] : {std::pair{std::pair{0, 1}, 1.0}, {{1, 2}, 0.4}, {{2, 0}, 0.6}}) {
        RateSpec r = make_mass_action(TimeCoefficient::constant(kbar));
        r.edge = edge;
        rs.push_back(r);
    }
    SimOptions o;
    o.t_end = 0.3;
    o.dense_output_stride = 2e-4;
    o.rel_tol = 1e-12;
    o.abs_tol = 1e-14;
    auto traj = simulate_reduced(model, rs, {2, 10, 28}, o);

    LyapunovSpec spec;
    spec.kind = LyapunovSpec::Kind::ltv;
    auto nbar = std::vector<double>{1.42, 8.74, 29.84};  // any positive reference works here
    auto prof = lyapunov_profile(traj, spec, nbar);
    auto chain = lyapunov_chain_rule(traj, spec, nbar, model, rs);
    REQUIRE(chain.size() == prof.derivative_estimates.size());
    for (std::size_t k = 1; k + 1 < chain.size(); ++k)
        if (std::abs(prof.derivative_estimates[k]) > 1e-6)
            CHECK(chain[k] ==
                  Approx(prof.derivative_estimates[k]).epsilon(1e-6));
}
