#include "racebo/sim.hpp"

#include <cmath>

namespace racebo {

double lap_objective(const LapResult& lap, double lambda) {
    return lap.laptime + lambda * lap.mean_abs_cont_cm;
}

SimSession::SimSession(const Track& track, const Config& cfg, const ScenarioDef& scenario,
                       uint64_t seed)
    : track_(track),
      cfg_(cfg),
      scenario_(scenario),
      controller_(track, cfg.nominal, cfg.mpcc),
      ekf_(cfg.ekf, cfg.nominal),
      rng_plant_(Rng::derive(seed, 1)),
      rng_meas_(Rng::derive(seed, 2)) {
    reset_to_start();
}

void SimSession::set_residual(const ResidualModel& m) { controller_.set_residual(m); }

void SimSession::reset_to_start() {
    plant_ = VehicleState{};
    const Vec2 p0 = track_.position(0.0);
    plant_.px = p0.x;
    plant_.py = p0.y;
    plant_.psi = track_.heading(0.0);
    s_true_ = 0.0;
    s_est_ = 0.0;
    lap_start_time_ = time_;
    controller_.reset();
    fresh_start_ = true;
}

void SimSession::force_state(const VehicleState& s) {
    plant_ = s;
    const double sp = track_.project({s.px, s.py}, 0.0, track_.total_length());
    s_true_ = sp;
    s_est_ = sp;
    lap_start_time_ = time_;
    controller_.reset();
    fresh_start_ = true;
}

void SimSession::step(const std::optional<VehicleInput>& forced, LapResult& lap,
                      int& fail_streak) {
    // measure and estimate
    const PoseMeasurement y = measure_pose(plant_, cfg_.meas_noise, rng_meas_);
    if (fresh_start_) {
        ekf_.initialize(y);
        fresh_start_ = false;
    } else {
        ekf_.update(y);
    }
    const VehicleState est = ekf_.state();

    // progress estimate, warm-hinted and unwrapped
    const double L = track_.total_length();
    const double s_proj = track_.project({est.px, est.py}, s_est_);
    double ds = s_proj - std::fmod(s_est_, L);
    if (ds > L / 2) ds -= L;
    if (ds < -L / 2) ds += L;
    s_est_ += ds;

    // control
    VehicleInput u;
    TelemetryRow row;
    if (forced) {
        u = *forced;
        row.solver_ok = 1;
    } else {
        const MpccSolution sol = controller_.solve({est, std::fmod(s_est_, L)});
        u = sol.first_input();
        row.solver_ok = sol.status == SolveStatus::Ok ? 1 : 0;
        if (sol.states.cols() > 1) {
            row.pred_vy = sol.states(4, 1);
            row.pred_omega = sol.states(5, 1);
        }
        if (sol.status == SolveStatus::Ok)
            fail_streak = 0;
        else
            ++fail_streak;
        const Eigen::Vector2d std2 =
            controller_.residual().predictive_std(taylor_features(est, u, cfg_.nominal));
        row.pred_std_vy = std2[0];
        row.pred_std_omega = std2[1];
    }

    const auto e_est = track_.contouring_errors({est.px, est.py}, std::fmod(s_est_, L));
    row.t = time_;
    row.pose = {time_, y.px, y.py, y.psi};
    row.ekf = est;
    row.input = u;
    row.s = s_est_;
    row.e_lag = e_est.lag;
    row.e_cont = e_est.cont;
    lap.telemetry.rows.push_back(row);

    // actuate plant and advance the filter
    plant_ = simulate_plant_step(plant_, u, scenario_.true_params, cfg_.plant_noise,
                                 cfg_.mpcc.dt, rng_plant_);
    ekf_.predict(u, cfg_.mpcc.dt, controller_.residual());
    time_ += cfg_.mpcc.dt;

    // true-trajectory bookkeeping
    const double sp = track_.project({plant_.px, plant_.py}, s_true_);
    double dst = sp - std::fmod(s_true_, L);
    if (dst > L / 2) dst -= L;
    if (dst < -L / 2) dst += L;
    s_true_ += dst;

    const auto e_true = track_.contouring_errors({plant_.px, plant_.py}, std::fmod(s_true_, L));
    lap.positions.push_back({plant_.px, plant_.py});
    lap.true_states.push_back(plant_);
    lap.mean_abs_cont_cm += std::abs(e_true.cont) * 100.0;
    if (track_.boundary_margin({plant_.px, plant_.py}, std::fmod(s_true_, L)) < 0.0)
        ++lap.boundary_violations;
}

LapResult SimSession::run_lap() {
    LapResult lap;
    const double L = track_.total_length();
    const double s_target = std::floor(s_true_ / L + 1e-9) * L + L;
    lap_start_time_ = time_;
    int fail_streak = 0;
    int steps = 0;

    while (true) {
        const double s_before = s_true_;
        const double t_before = time_;
        step(std::nullopt, lap, fail_streak);
        ++steps;

        if (s_true_ >= s_target) {
            // sub-period crossing time by linear interpolation of progress
            const double frac = (s_target - s_before) / (s_true_ - s_before);
            const double t_cross = t_before + frac * cfg_.mpcc.dt;
            lap.laptime = t_cross - lap_start_time_;
            lap.completed = true;
            break;
        }
        if (time_ - lap_start_time_ > cfg_.lap.timeout) {
            lap.abort_reason = "timeout";
            break;
        }
        if (fail_streak >= cfg_.lap.max_solver_failures) {
            lap.abort_reason = "solver_failures";
            break;
        }
        if (track_.boundary_margin({plant_.px, plant_.py}, std::fmod(s_true_, L)) <
            -cfg_.lap.offtrack_abort) {
            lap.abort_reason = "off_track";
            break;
        }
    }
    if (steps > 0) lap.mean_abs_cont_cm /= steps;
    if (!lap.completed) reset_to_start();
    return lap;
}

LapResult SimSession::run_lap_fixed_input(const VehicleInput& input) {
    LapResult lap;
    const double L = track_.total_length();
    const double s_target = std::floor(s_true_ / L + 1e-9) * L + L;
    lap_start_time_ = time_;
    int fail_streak = 0;
    int steps = 0;
    while (true) {
        const double s_before = s_true_;
        const double t_before = time_;
        step(input, lap, fail_streak);
        ++steps;
        if (s_true_ >= s_target) {
            const double frac = (s_target - s_before) / (s_true_ - s_before);
            lap.laptime = t_before + frac * cfg_.mpcc.dt - lap_start_time_;
            lap.completed = true;
            break;
        }
        if (time_ - lap_start_time_ > cfg_.lap.timeout) {
            lap.abort_reason = "timeout";
            break;
        }
    }
    if (steps > 0) lap.mean_abs_cont_cm /= steps;
    return lap;
}

SimTuningEnv::SimTuningEnv(const Track& track, const Config& cfg, const ScenarioDef& scenario,
                           uint64_t seed)
    : track_(track), cfg_(cfg), session_(track, cfg, scenario, seed) {
    session_.set_weights({cfg.experiments.collect_q_cont, cfg.experiments.collect_q_adv,
                          cfg.mpcc.q_lag});
}

LapEvaluation SimTuningEnv::evaluate(const ThetaPoint& theta) {
    session_.set_weights({theta.q_cont, theta.q_adv, cfg_.mpcc.q_lag});

    LapEvaluation out;
    LapResult transient = session_.run_lap();  // discarded, absorbs the weight change
    laps_.push_back(transient);
    if (!transient.completed) return out;  // crash on the transient lap: failed evaluation

    LapResult measured = session_.run_lap();
    laps_.push_back(measured);
    if (!measured.completed) return out;

    last_telemetry_ = measured.telemetry;
    out.completed = true;
    out.laptime = measured.laptime;
    out.centerline_dev = measured.mean_abs_cont_cm;
    out.objective = lap_objective(measured, cfg_.objective.lambda);
    return out;
}

void SimTuningEnv::collect_initial_telemetry() {
    session_.set_weights({cfg_.experiments.collect_q_cont, cfg_.experiments.collect_q_adv,
                          cfg_.mpcc.q_lag});
    session_.set_gamma_cap(cfg_.experiments.collect_gamma_max);
    for (int attempt = 0; attempt < 3; ++attempt) {
        const LapResult lap = session_.run_lap();
        laps_.push_back(lap);
        if (lap.completed) {
            last_telemetry_ = lap.telemetry;
            break;
        }
    }
    session_.clear_gamma_cap();
}

Eigen::Vector4d SimTuningEnv::measure_context_and_update_model() {
    if (last_telemetry_.rows.size() >= 50) {
        try {
            const ContextResult res =
                context_from_lap(last_telemetry_, cfg_.nominal, cfg_.residual, cfg_.mpcc.dt);
            last_context_ = res.context;
            session_.set_residual(res.model);
        } catch (const std::exception&) {
            // keep the previous model when the log is unusable
        }
    }
    return last_context_;
}

}  // namespace racebo
