#include <doctest.h>

#include <cmath>
#include <riboflow/errors.hpp>
#include <riboflow/graph.hpp>
#include <riboflow/rates.hpp>
#include <riboflow/simulate.hpp>

using namespace riboflow;
using doctest::Approx;

namespace {

CompartmentalModel triangle() {
    return build_model(3, {{0, 1}, {1, 2}, {2, 0}}, {5, 25, 50});
}

std::vector<RateSpec> triangle_rates() {
    std::vector<RateSpec> rs;
    for (auto [edge, kbar] : {std::pair{std::pair{0, 1}, 100.0}, {{1, 2}, 40.0}, {{2, 0}, 60.0}}) {
        RateSpec r = make_mass_action(TimeCoefficient::constant(kbar));
        r.edge = edge;
        rs.push_back(r);
    }
    return rs;
}

}  // namespace

TEST_CASE("reduced simulation conserves the level") {
    SimOptions o;
    o.t_end = 2.0;
    auto traj = simulate_reduced(triangle(), triangle_rates(), {2, 10, 28}, o);
    CHECK(traj.level == 40.0);
    CHECK(!traj.full);
    auto rep = conservation_report(traj);
    CHECK(rep.max_total_drift <= 1e-12);
    CHECK(rep.max_percompartment_drift == 0.0);
}

TEST_CASE("full simulation conserves every pair sum") {
    SimOptions o;
    o.t_end = 2.0;
    std::vector<double> n0{2, 10, 28}, s0{3, 15, 22};
    auto traj = simulate_full(triangle(), triangle_rates(), n0, s0, o);
    CHECK(traj.full);
    REQUIRE(traj.states[0].size() == 6);
    auto rep = conservation_report(traj);
    CHECK(rep.max_total_drift <= 1e-12);
    CHECK(rep.max_percompartment_drift <= 1e-12);
}

TEST_CASE("full and reduced trajectories coincide") {
    SimOptions o;
    o.t_end = 1.5;
    o.rel_tol = 1e-12;
    o.abs_tol = 1e-13;
    auto m = triangle();
    std::vector<double> n0{2, 10, 28};
    std::vector<double> s0(3);
    for (int i = 0; i < 3; ++i) s0[i] = m.capacities[i] - n0[i];
    auto red = simulate_reduced(m, triangle_rates(), n0, o);
    auto full = simulate_full(m, triangle_rates(), n0, s0, o);
    REQUIRE(red.times.size() == full.times.size());
    double gap = 0.0;
    for (std::size_t k = 0; k < red.times.size(); ++k)
        for (int i = 0; i < 3; ++i)
            gap = std::max(gap, std::abs(red.states[k][i] - full.states[k][i]));
    CHECK(gap <= 1e-9);
}

TEST_CASE("zero horizon emits the initial row only") {
    SimOptions o;
    o.t_end = 0.0;
    auto traj = simulate_reduced(triangle(), triangle_rates(), {2, 10, 28}, o);
    REQUIRE(traj.times.size() == 1);
    CHECK(traj.times[0] == 0.0);
    CHECK(traj.states[0] == std::vector<double>{2, 10, 28});
}

TEST_CASE("dense grid is uniform and ends exactly at t_end") {
    SimOptions o;
    o.t_end = 0.35;
    o.dense_output_stride = 0.1;
    auto traj = simulate_reduced(triangle(), triangle_rates(), {2, 10, 28}, o);
    REQUIRE(traj.times.size() == 5);
    CHECK(traj.times[1] == Approx(0.1));
    CHECK(traj.times.back() == 0.35);
}

TEST_CASE("fixed rk4 tracks the adaptive solution") {
    SimOptions fine;
    fine.t_end = 0.5;
    fine.method = Method::fixed_rk4;
    fine.dense_output_stride = 5e-4;
    auto ref = simulate_reduced(triangle(), triangle_rates(), {2, 10, 28}, fine);

    SimOptions o;
    o.t_end = 0.5;
    o.rel_tol = 1e-11;
    o.abs_tol = 1e-12;
    o.dense_output_stride = 0.1;
    auto traj = simulate_reduced(triangle(), triangle_rates(), {2, 10, 28}, o);
    double gap = 0.0;
    for (int i = 0; i < 3; ++i)
        gap = std::max(gap, std::abs(traj.states.back()[i] - ref.states.back()[i]));
    CHECK(gap <= 1e-7);
}

TEST_CASE("piecewise coefficients are integrated across their break") {
    auto m = triangle();
    auto rs = triangle_rates();
    rs[0].k = TimeCoefficient::piecewise(
        {{0.0, TimeCoefficient::constant(20)}, {1.0, TimeCoefficient::constant(80)}});
    SimOptions o;
    o.t_end = 2.0;
    o.rel_tol = 1e-12;
    o.abs_tol = 1e-13;
    auto whole = simulate_reduced(m, rs, {2, 10, 28}, o);

    // stitched reference: constant-coefficient halves restarted at the break
    auto rs_lo = triangle_rates(), rs_hi = triangle_rates();
    rs_lo[0].k = TimeCoefficient::constant(20);
    rs_hi[0].k = TimeCoefficient::constant(80);
    SimOptions half = o;
    half.t_end = 1.0;
    auto first = simulate_reduced(m, rs_lo, {2, 10, 28}, half);
    auto second = simulate_reduced(m, rs_hi, first.states.back(), half);
    double gap = 0.0;
    for (int i = 0; i < 3; ++i)
        gap = std::max(gap, std::abs(whole.states.back()[i] - second.states.back()[i]));
    CHECK(gap <= 1e-9);
}

TEST_CASE("persistence margin is positive from an interior start") {
    SimOptions o;
    o.t_end = 3.0;
    auto traj = simulate_reduced(triangle(), triangle_rates(), {2, 10, 28}, o);
    CHECK(persistence_margin(traj, 0.5) > 0.0);
    CHECK_THROWS_AS(persistence_margin(traj, 4.0), EmptyWindow);
}

TEST_CASE("degenerate levels report zero margin") {
    SimOptions o;
    o.t_end = 1.0;
    auto traj = simulate_reduced(triangle(), triangle_rates(), {0, 0, 0}, o);
    CHECK(persistence_margin(traj, 0.5) == 0.0);
}

TEST_CASE("initial conditions are validated") {
    SimOptions o;
    CHECK_THROWS_AS(simulate_reduced(triangle(), triangle_rates(), {1, 2}, o), BadParameter);
    CHECK_THROWS_AS(simulate_reduced(triangle(), triangle_rates(), {-1, 2, 3}, o), BadParameter);
    CHECK_THROWS_AS(simulate_reduced(triangle(), triangle_rates(), {6, 2, 3}, o), BadParameter);
    CHECK_THROWS_AS(simulate_full(triangle(), triangle_rates(), {1, 2, 3}, {1, -2, 3}, o),
                    BadParameter);
}

TEST_CASE("options and rate coverage are validated") {
    SimOptions bad;
    bad.dense_output_stride = 0.0;
    CHECK_THROWS_AS(simulate_reduced(triangle(), triangle_rates(), {2, 10, 28}, bad), BadParameter);

    SimOptions o;
    auto rs = triangle_rates();
    rs.pop_back();
    CHECK_THROWS_AS(simulate_reduced(triangle(), rs, {2, 10, 28}, o), BadParameter);
    rs = triangle_rates();
    rs[2].edge = {0, 2};  // not a declared transition
    CHECK_THROWS_AS(simulate_reduced(triangle(), rs, {2, 10, 28}, o), BadReference);
}
