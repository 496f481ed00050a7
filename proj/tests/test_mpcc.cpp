#include <doctest.h>

#include <cmath>

#include "racebo/mpcc.hpp"
#include "racebo/rng.hpp"
#include "racebo/track.hpp"

using namespace racebo;

namespace {

Track circle_track(double radius, double hw = 0.3) {
    std::vector<TrackWaypoint> wp;
    const int n = 360;
    for (int i = 0; i <= n; ++i) {
        const double a = 2.0 * M_PI * i / n;
        wp.push_back({radius * std::cos(a), radius * std::sin(a), hw, hw});
    }
    return Track::from_waypoints(wp);
}

AugmentedState rest_on_straight(const Track& track, double s) {
    VehicleState x;
    const Vec2 p = track.position(s);
    x.px = p.x;
    x.py = p.y;
    x.psi = track.heading(s);
    return {x, s};
}

}  // namespace

TEST_CASE("car at rest on a straight accelerates without steering hard") {
    const Track track = Track::load("data/tracks/demo_track.csv");
    Config cfg = Config::defaults();
    MpccController ctrl(track, cfg.nominal, cfg.mpcc);
    ctrl.set_weights({600.0, 3.0, cfg.mpcc.q_lag});
    const MpccSolution sol = ctrl.solve(rest_on_straight(track, 1.0));
    REQUIRE(sol.status == SolveStatus::Ok);
    const VehicleInput u = sol.first_input();
    CHECK(u.tau > 0.0);
    CHECK(std::abs(u.delta) < 0.05);
}

TEST_CASE("no advancing reward keeps the car still") {
    const Track track = Track::load("data/tracks/demo_track.csv");
    Config cfg = Config::defaults();
    MpccController ctrl(track, cfg.nominal, cfg.mpcc);
    ctrl.set_weights({600.0, 0.0, cfg.mpcc.q_lag});
    MpccSolution sol;
    const AugmentedState at_rest = rest_on_straight(track, 1.0);
    for (int i = 0; i < 5; ++i) sol = ctrl.solve(at_rest);  // let RTI settle
    REQUIRE(sol.status == SolveStatus::Ok);
    const VehicleInput u = sol.first_input();
    CHECK(std::abs(u.delta) < 0.01);
    CHECK(std::abs(u.tau) < 0.1);
    CHECK(sol.inputs(2, 0) <= 5.0 * cfg.mpcc.gamma_min);
}

TEST_CASE("QP step decreases the quadratic model cost") {
    const Track track = Track::load("data/tracks/demo_track.csv");
    Config cfg = Config::defaults();
    MpccController ctrl(track, cfg.nominal, cfg.mpcc);
    ctrl.set_weights({800.0, 4.0, cfg.mpcc.q_lag});
    AugmentedState aug = rest_on_straight(track, 0.5);
    aug.state.vx = 1.5;
    for (int i = 0; i < 10; ++i) {
        const MpccSolution sol = ctrl.solve(aug);
        REQUIRE(sol.status == SolveStatus::Ok);
        CHECK(sol.qp_cost_solution <= sol.qp_cost_warmstart + 1e-9);
        // crude forward sim so successive solves see fresh states
        aug.state = integrate_step(aug.state, sol.first_input(), cfg.nominal, cfg.mpcc.dt);
        aug.s = track.project({aug.state.px, aug.state.py}, aug.s);
    }
}

TEST_CASE("returned inputs respect the hard bounds and gamma stays positive") {
    const Track track = Track::load("data/tracks/demo_track.csv");
    Config cfg = Config::defaults();
    MpccController ctrl(track, cfg.nominal, cfg.mpcc);
    ctrl.set_weights({50.0, 12.0, cfg.mpcc.q_lag});  // most aggressive corner
    Rng rng(3);
    for (int trial = 0; trial < 25; ++trial) {
        const double s = rng.uniform(0.0, track.total_length());
        AugmentedState aug = rest_on_straight(track, s);
        aug.state.vx = rng.uniform(0.0, 3.0);
        aug.state.vy = rng.uniform(-0.3, 0.3);
        aug.state.omega = rng.uniform(-3.0, 3.0);
        const MpccSolution sol = ctrl.solve(aug);
        REQUIRE(sol.status == SolveStatus::Ok);
        for (int i = 0; i < sol.inputs.cols(); ++i) {
            CHECK(std::abs(sol.inputs(0, i)) <= cfg.nominal.delta_max + 1e-9);
            CHECK(std::abs(sol.inputs(1, i)) <= 1.0 + 1e-9);
            CHECK(sol.inputs(2, i) >= cfg.mpcc.gamma_min - 1e-12);
            CHECK(sol.inputs(2, i) <= cfg.mpcc.gamma_max + 1e-9);
            CHECK(sol.inputs(2, i) > 0.0);
        }
    }
}

TEST_CASE("warm-started re-solve at a steady state is a fixed point") {
    // cruising below the grip limit: gamma_max caps the speed so the optimum
    // is interior and the real-time iteration settles
    const Track track = circle_track(2.0);
    Config cfg = Config::defaults();
    cfg.mpcc.gamma_max = 1.5;
    MpccController ctrl(track, cfg.nominal, cfg.mpcc);
    ctrl.set_weights({800.0, 2.0, cfg.mpcc.q_lag});

    // drive the noise-free loop into steady cornering
    AugmentedState aug = rest_on_straight(track, 0.0);
    for (int k = 0; k < 300; ++k) {
        const MpccSolution sol = ctrl.solve(aug);
        REQUIRE(sol.status != SolveStatus::Failed);
        aug.state = integrate_step(aug.state, sol.first_input(), cfg.nominal, cfg.mpcc.dt);
        const double sp = track.project({aug.state.px, aug.state.py}, aug.s);
        aug.s = sp;
    }

    // freeze the state; repeated shifted re-solves must stop changing the cost
    double prev_cost = 0.0;
    double delta = 1e300;
    for (int k = 0; k < 40; ++k) {
        const MpccSolution sol = ctrl.solve(aug);
        REQUIRE(sol.status == SolveStatus::Ok);
        if (k > 0) delta = std::abs(sol.stage_cost - prev_cost);
        prev_cost = sol.stage_cost;
    }
    CHECK(delta < 1e-6);
}

TEST_CASE("zero residual predictions equal nominal rollouts exactly") {
    const Track track = Track::load("data/tracks/demo_track.csv");
    Config cfg = Config::defaults();
    MpccController ctrl(track, cfg.nominal, cfg.mpcc);
    ctrl.set_weights({600.0, 3.0, cfg.mpcc.q_lag});
    AugmentedState aug = rest_on_straight(track, 2.0);
    aug.state.vx = 1.0;
    const MpccSolution sol = ctrl.solve(aug);
    REQUIRE(sol.status == SolveStatus::Ok);

    VehicleState x = aug.state;
    for (int i = 0; i < sol.inputs.cols(); ++i) {
        x = integrate_step(x, {sol.inputs(0, i), sol.inputs(1, i)}, cfg.nominal, cfg.mpcc.dt);
        CHECK(sol.states(3, i + 1) == x.vx);
        CHECK(sol.states(4, i + 1) == x.vy);
        CHECK(sol.states(5, i + 1) == x.omega);
    }
}

TEST_CASE("solve is deterministic across fresh controllers") {
    const Track track = Track::load("data/tracks/demo_track.csv");
    Config cfg = Config::defaults();
    auto run = [&]() {
        MpccController ctrl(track, cfg.nominal, cfg.mpcc);
        ctrl.set_weights({700.0, 5.0, cfg.mpcc.q_lag});
        AugmentedState aug = rest_on_straight(track, 3.0);
        aug.state.vx = 2.0;
        MpccSolution sol;
        for (int i = 0; i < 3; ++i) sol = ctrl.solve(aug);
        return sol;
    };
    const MpccSolution a = run();
    const MpccSolution b = run();
    REQUIRE(a.inputs.cols() == b.inputs.cols());
    for (int i = 0; i < a.inputs.cols(); ++i)
        for (int c = 0; c < 3; ++c) CHECK(a.inputs(c, i) == b.inputs(c, i));
}
