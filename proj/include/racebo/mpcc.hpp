#pragma once

#include <Eigen/Dense>

#include "racebo/config.hpp"
#include "racebo/residual.hpp"
#include "racebo/track.hpp"
#include "racebo/vehicle.hpp"

namespace racebo {

// Cost weights exposed to the tuner. q_lag is fixed by config, (q_cont, q_adv)
// live in the tuning domain.
struct ControllerWeights {
    double q_cont = 600.0;  // [1/m^2]
    double q_adv = 3.0;     // [1/m]
    double q_lag = 1000.0;  // [1/m^2]
};

struct AugmentedState {
    VehicleState state;
    double s = 0.0;  // track progress, unwrapped [m]
};

enum class SolveStatus { Ok, FallbackShifted, Failed };

struct MpccSolution {
    Eigen::Matrix3Xd inputs;   // rows (delta, tau, gamma), one column per stage
    Eigen::MatrixXd states;    // 7 x (H+1): six vehicle states plus progress
    SolveStatus status = SolveStatus::Failed;
    double stage_cost = 0.0;          // nonlinear cost of the returned trajectory
    double qp_cost_solution = 0.0;    // quadratic model at the QP solution
    double qp_cost_warmstart = 0.0;   // quadratic model at the (feasible) zero step
    int qp_iterations = 0;

    VehicleInput first_input() const {
        if (inputs.cols() == 0) return {};
        return {inputs(0, 0), inputs(1, 0)};
    }
};

// Receding-horizon contouring controller: one-to-few real-time-iteration SQP
// passes per call, each linearizing the prediction model and the track errors
// about the rollout of the shifted previous input sequence and solving a
// condensed QP (inputs + boundary slacks) with the dual active-set solver.
class MpccController {
public:
    MpccController(const Track& track, const VehicleParams& nominal, const MpccConfig& cfg);

    void set_weights(const ControllerWeights& w) { weights_ = w; }
    const ControllerWeights& weights() const { return weights_; }

    void set_residual(const ResidualModel& m) { residual_ = m; }
    const ResidualModel& residual() const { return residual_; }

    const MpccConfig& config() const { return cfg_; }

    // pace limit for telemetry/measurement laps
    void set_gamma_max(double g) { cfg_.gamma_max = g; }

    // Forget the warm start (cold-start the next solve).
    void reset() { warm_ = false; }

    MpccSolution solve(const AugmentedState& x0);

private:
    using Vec7 = Eigen::Matrix<double, 7, 1>;
    using Mat7 = Eigen::Matrix<double, 7, 7>;
    using Mat73 = Eigen::Matrix<double, 7, 3>;

    Vec7 discrete_map(const Vec7& x, const Eigen::Vector3d& u) const;
    Eigen::MatrixXd rollout(const Vec7& x0, const Eigen::Matrix3Xd& inputs) const;
    void linearize(const Vec7& x, const Eigen::Vector3d& u, Mat7& A, Mat73& B) const;
    double nonlinear_cost(const Eigen::MatrixXd& states, const Eigen::Matrix3Xd& inputs) const;
    Eigen::Matrix3Xd clamp_inputs(Eigen::Matrix3Xd u) const;

    const Track& track_;
    VehicleParams nominal_;
    MpccConfig cfg_;
    ControllerWeights weights_;
    ResidualModel residual_;

    Eigen::Matrix3Xd u_warm_;       // previous optimal input sequence
    VehicleInput last_applied_{};   // for the input-rate term
    bool warm_ = false;
};

}  // namespace racebo
