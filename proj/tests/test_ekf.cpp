#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>

#include "racebo/ekf.hpp"
#include "racebo/rng.hpp"
#include "racebo/sim.hpp"
#include "racebo/track.hpp"

using namespace racebo;

TEST_CASE("predict mean equals open-loop integration with zero innovation path") {
    Config cfg = Config::defaults();
    VehicleEkf ekf(cfg.ekf, cfg.nominal);
    ekf.initialize({0.3, -0.2, 0.4});
    VehicleState x = ekf.state();
    const ResidualModel none;
    const VehicleInput u{0.1, 0.5};
    for (int i = 0; i < 20; ++i) {
        ekf.predict(u, cfg.mpcc.dt, none);
        x = integrate_step(x, u, cfg.nominal, cfg.mpcc.dt);
    }
    const VehicleState m = ekf.state();
    CHECK(m.px == doctest::Approx(x.px).epsilon(1e-12));
    CHECK(m.vx == doctest::Approx(x.vx).epsilon(1e-12));
    CHECK(m.omega == doctest::Approx(x.omega).epsilon(1e-12));
}

TEST_CASE("stationary equilibrium is preserved by repeated predicts") {
    Config cfg = Config::defaults();
    VehicleEkf ekf(cfg.ekf, cfg.nominal);
    ekf.initialize({1.0, 2.0, 0.5});
    const VehicleInput hold{0.0, cfg.nominal.cr0 / cfg.nominal.cm1};
    for (int i = 0; i < 30; ++i) ekf.predict(hold, cfg.mpcc.dt, ResidualModel());
    const VehicleState m = ekf.state();
    CHECK(m.px == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(m.py == doctest::Approx(2.0).epsilon(1e-12));
    CHECK(std::abs(m.vx) < 1e-12);
}

TEST_CASE("numerical jacobians agree across step sizes") {
    Config cfg = Config::defaults();
    VehicleState x;
    x.vx = 1.8;
    x.vy = -0.1;
    x.omega = 1.5;
    x.psi = 0.7;
    const VehicleInput u{0.15, 0.4};
    const auto f = [&](const Eigen::VectorXd& v) {
        VehicleState s{v[0], v[1], v[2], v[3], v[4], v[5]};
        const VehicleState n = integrate_step(s, u, cfg.nominal, cfg.mpcc.dt);
        Eigen::VectorXd out(6);
        out << n.px, n.py, n.psi, n.vx, n.vy, n.omega;
        return out;
    };
    Eigen::VectorXd v(6);
    v << x.px, x.py, x.psi, x.vx, x.vy, x.omega;
    const Eigen::MatrixXd j4 = ExtendedKalman::numerical_jacobian(f, v, 1e-4);
    const Eigen::MatrixXd j6 = ExtendedKalman::numerical_jacobian(f, v, 1e-6);
    CHECK((j4 - j6).norm() / j6.norm() < 1e-4);
}

TEST_CASE("zero innovation leaves the mean unchanged") {
    Config cfg = Config::defaults();
    VehicleEkf ekf(cfg.ekf, cfg.nominal);
    ekf.initialize({0.1, 0.2, 0.3});
    const VehicleState before = ekf.state();
    ekf.update({before.px, before.py, before.psi});
    const VehicleState after = ekf.state();
    CHECK(after.px == doctest::Approx(before.px).epsilon(1e-14));
    CHECK(after.vy == doctest::Approx(before.vy).epsilon(1e-14));
}

TEST_CASE("vanishing measurement noise pins the pose to the measurement") {
    Config cfg = Config::defaults();
    cfg.ekf.r_pos = 1e-18;
    cfg.ekf.r_psi = 1e-18;
    VehicleEkf ekf(cfg.ekf, cfg.nominal);
    ekf.initialize({0.0, 0.0, 0.0});
    ekf.predict({0.0, 0.5}, cfg.mpcc.dt, ResidualModel());
    ekf.update({0.77, -0.33, 0.21});
    const VehicleState m = ekf.state();
    CHECK(m.px == doctest::Approx(0.77).epsilon(1e-9));
    CHECK(m.py == doctest::Approx(-0.33).epsilon(1e-9));
    CHECK(m.psi == doctest::Approx(0.21).epsilon(1e-9));
}

TEST_CASE("angle innovation is wrapped to (-pi, pi]") {
    CHECK(wrap_angle(3.5 * M_PI) == doctest::Approx(-0.5 * M_PI));
    CHECK(wrap_angle(M_PI) == doctest::Approx(M_PI));
    CHECK(wrap_angle(-M_PI) == doctest::Approx(M_PI));
    CHECK(wrap_angle(0.3) == doctest::Approx(0.3));

    Config cfg = Config::defaults();
    VehicleEkf ekf(cfg.ekf, cfg.nominal);
    ekf.initialize({0.0, 0.0, 3.1});
    ekf.update({0.0, 0.0, -3.1});  // short way across the branch cut
    // the mean must move towards pi, not through zero
    CHECK(ekf.state().psi > 3.1);
}

TEST_CASE("generic core matches a textbook Kalman filter on a double integrator") {
    // state (p, v), measurement p; both filters run the same data
    const double dt = 0.1, q = 1e-3, r = 1e-2;
    Eigen::MatrixXd A(2, 2);
    A << 1, dt, 0, 1;
    Eigen::MatrixXd Q(2, 2);
    Q << q, 0, 0, q;
    Eigen::MatrixXd Hm(1, 2);
    Hm << 1, 0;
    Eigen::MatrixXd R(1, 1);
    R << r;

    Eigen::VectorXd m0(2);
    m0 << 0.3, -0.5;
    Eigen::MatrixXd P0 = Eigen::MatrixXd::Identity(2, 2);

    ExtendedKalman ekf(m0, P0);
    Eigen::VectorXd kf_m = m0;
    Eigen::MatrixXd kf_p = P0;

    Rng rng(3);
    for (int i = 0; i < 50; ++i) {
        ekf.predict([&](const Eigen::VectorXd& x) { return Eigen::VectorXd(A * x); }, Q, 1e-6);
        kf_m = A * kf_m;
        kf_p = A * kf_p * A.transpose() + Q;

        Eigen::VectorXd z(1);
        z << kf_m[0] + rng.normal(0.0, 0.1);
        ekf.update(Hm, R, z);
        const Eigen::MatrixXd S = Hm * kf_p * Hm.transpose() + R;
        const Eigen::MatrixXd K = kf_p * Hm.transpose() * S.inverse();
        kf_m = kf_m + K * (z - Hm * kf_m);
        kf_p = (Eigen::MatrixXd::Identity(2, 2) - K * Hm) * kf_p;

        CHECK((ekf.mean() - kf_m).lpNorm<Eigen::Infinity>() < 1e-10);
        CHECK((ekf.covariance() - kf_p).lpNorm<Eigen::Infinity>() < 1e-10);
    }
}

TEST_CASE("covariance stays symmetric PSD through a simulated lap") {
    Config cfg = Config::defaults();
    const Track track = Track::load("data/tracks/demo_track.csv");
    SimSession session(track, cfg, cfg.scenario("nominal"), 4);
    session.set_weights({cfg.experiments.collect_q_cont, cfg.experiments.collect_q_adv,
                         cfg.mpcc.q_lag});
    session.run_lap();  // exercises predict/update internally; now inspect directly

    VehicleEkf ekf(cfg.ekf, cfg.nominal);
    ekf.initialize({0.0, 0.0, 0.0});
    Rng rng(9);
    for (int i = 0; i < 200; ++i) {
        ekf.predict({0.1 * std::sin(0.05 * i), 0.4}, cfg.mpcc.dt, ResidualModel());
        ekf.update({rng.normal(0, 0.01), rng.normal(0, 0.01), rng.normal(0, 0.05)});
        const Eigen::MatrixXd& P = ekf.covariance();
        CHECK((P - P.transpose()).lpNorm<Eigen::Infinity>() < 1e-12);
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(P);
        CHECK(es.eigenvalues().minCoeff() > -1e-12);
    }
}

TEST_CASE("estimation accuracy on the demo lap") {
    Config cfg = Config::defaults();
    const Track track = Track::load("data/tracks/demo_track.csv");
    ScenarioDef sc = cfg.scenario("nominal");
    SimSession session(track, cfg, sc, 21);
    session.set_weights({cfg.experiments.collect_q_cont, cfg.experiments.collect_q_adv,
                         cfg.mpcc.q_lag});
    session.run_lap();
    const LapResult lap = session.run_lap();
    REQUIRE(lap.completed);

    // true_states[i] is the plant at step i+1; the matching estimate is the
    // posterior logged on the next telemetry row
    double pos2 = 0, vx2 = 0, vy2 = 0, om2 = 0;
    int n = 0;
    for (size_t i = 0; i + 1 < lap.telemetry.rows.size(); ++i, ++n) {
        const VehicleState& est = lap.telemetry.rows[i + 1].ekf;
        const VehicleState& truth = lap.true_states[i];
        pos2 += (est.px - truth.px) * (est.px - truth.px) +
                (est.py - truth.py) * (est.py - truth.py);
        vx2 += (est.vx - truth.vx) * (est.vx - truth.vx);
        vy2 += (est.vy - truth.vy) * (est.vy - truth.vy);
        om2 += (est.omega - truth.omega) * (est.omega - truth.omega);
    }
    // pose fusion beats the raw measurement noise
    CHECK(std::sqrt(pos2 / (2 * n)) < std::hypot(cfg.meas_noise.px, cfg.meas_noise.py));
    // velocity errors sit within a small factor of the per-step process noise:
    // the stiff lateral states are strongly damped, v_x accumulates over the
    // observability window and lands a few floors above it
    CHECK(std::sqrt(vx2 / n) < 6.0 * cfg.plant_noise.vx);
    CHECK(std::sqrt(vy2 / n) < 3.0 * cfg.plant_noise.vy);
    CHECK(std::sqrt(om2 / n) < 2.0 * cfg.plant_noise.omega);
}
