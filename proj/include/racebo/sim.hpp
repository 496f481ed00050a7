#pragma once

#include <optional>
#include <string>
#include <vector>

#include "racebo/config.hpp"
#include "racebo/ekf.hpp"
#include "racebo/mpcc.hpp"
#include "racebo/residual.hpp"
#include "racebo/track.hpp"
#include "racebo/tuning.hpp"
#include "racebo/vehicle.hpp"

namespace racebo {

struct LapResult {
    double laptime = 0.0;          // [s]
    double mean_abs_cont_cm = 0.0; // mean |e_cont| of the true trajectory [cm]
    int boundary_violations = 0;   // steps with the true position outside the track
    bool completed = false;
    std::string abort_reason;      // set when !completed
    TelemetryLog telemetry;
    std::vector<Vec2> positions;          // true positions, for density plots
    std::vector<VehicleState> true_states;  // plant state per step (simulation ground truth)
};

// regularized lap objective J = T_lap + lambda * mean centerline distance [cm]
double lap_objective(const LapResult& lap, double lambda);

// One continuous closed-loop drive on a track: true plant -> noisy pose
// measurement -> EKF -> contouring controller -> plant, at the control rate.
// Laps are delimited by crossings of the start-line arc position; the session
// keeps driving across laps (flying starts) until reset.
class SimSession {
public:
    SimSession(const Track& track, const Config& cfg, const ScenarioDef& scenario,
               uint64_t seed);

    void set_weights(const ControllerWeights& w) { controller_.set_weights(w); }
    ControllerWeights weights() const { return controller_.weights(); }

    void set_residual(const ResidualModel& m);
    const ResidualModel& residual() const { return controller_.residual(); }

    // cap the advancing rate (pace-limited measurement laps); restore with the
    // configured maximum
    void set_gamma_cap(double cap) { controller_.set_gamma_max(cap); }
    void clear_gamma_cap() { controller_.set_gamma_max(cfg_.mpcc.gamma_max); }

    // car at rest on the start line, filter re-initialized, controller cold
    void reset_to_start();

    // fixture hook: place the plant at an arbitrary state (filter re-primed)
    void force_state(const VehicleState& s);

    // drive until the next start-line crossing or an abort condition
    LapResult run_lap();

    // drive a fixed number of steps with an externally chosen input (bypasses
    // the controller; used for kinematic fixtures)
    LapResult run_lap_fixed_input(const VehicleInput& input);

    const VehicleState& true_state() const { return plant_; }
    double progress() const { return s_true_; }
    const Track& track() const { return track_; }

private:
    void step(const std::optional<VehicleInput>& forced, LapResult& lap, int& fail_streak);

    const Track& track_;
    Config cfg_;
    ScenarioDef scenario_;
    MpccController controller_;
    VehicleEkf ekf_;
    Rng rng_plant_;
    Rng rng_meas_;

    VehicleState plant_{};
    double s_true_ = 0.0;   // unwrapped true progress
    double s_est_ = 0.0;    // unwrapped estimated progress
    double time_ = 0.0;
    double lap_start_time_ = 0.0;
    bool fresh_start_ = true;
};

// Simulator-backed tuning environment (Algorithm-1 plumbing): one transient
// lap plus one measured lap per evaluation, telemetry retained for the
// per-lap context refit.
class SimTuningEnv : public TuningEnv {
public:
    SimTuningEnv(const Track& track, const Config& cfg, const ScenarioDef& scenario,
                 uint64_t seed);

    LapEvaluation evaluate(const ThetaPoint& theta) override;
    void collect_initial_telemetry() override;
    Eigen::Vector4d measure_context_and_update_model() override;

    SimSession& session() { return session_; }
    const std::vector<LapResult>& lap_history() const { return laps_; }

private:
    const Track& track_;
    Config cfg_;
    SimSession session_;
    TelemetryLog last_telemetry_;
    Eigen::Vector4d last_context_ = Eigen::Vector4d::Zero();
    std::vector<LapResult> laps_;
};

}  // namespace racebo
