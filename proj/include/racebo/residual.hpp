#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "racebo/config.hpp"
#include "racebo/vehicle.hpp"

namespace racebo {

// Tire-force features from the first-order expansion of the model in the
// Pacejka D coefficients, evaluated with the NOMINAL B/C parameters:
//   phi_1 = sin(Cf atan(Bf alpha_f)) cos(delta)
//   phi_2 = sin(Cr atan(Br alpha_r))
Eigen::Vector2d taylor_features(const VehicleState& state, const VehicleInput& input,
                                const VehicleParams& nominal);

// Conjugate Bayesian linear regression posterior for one output dimension.
struct BlrPosterior {
    Eigen::Vector2d mean = Eigen::Vector2d::Zero();
    Eigen::Matrix2d covariance = Eigen::Matrix2d::Zero();
    double noise_var = 0.0;
};

// mean = (Phi'Phi + noise_var*prior_precision I)^-1 Phi' y
// cov  = noise_var (Phi'Phi + noise_var*prior_precision I)^-1
BlrPosterior blr_fit(const Eigen::Matrix<double, Eigen::Dynamic, 2>& phi,
                     const Eigen::VectorXd& targets, double prior_precision, double noise_var);

// Estimates the noise variance from a preliminary ridge fit, then refits.
BlrPosterior blr_fit_auto(const Eigen::Matrix<double, Eigen::Dynamic, 2>& phi,
                          const Eigen::VectorXd& targets, double prior_precision);

// Learned residual g(x, u) = C phi(x, u) on the (v_y, omega) rows. A
// default-constructed model is identically zero (no correction).
class ResidualModel {
public:
    ResidualModel() = default;
    ResidualModel(BlrPosterior vy, BlrPosterior omega)
        : vy_(std::move(vy)), omega_(std::move(omega)), zero_(false) {}

    bool is_zero() const { return zero_; }

    // (g_vy, g_omega) for given features
    Eigen::Vector2d mean(const Eigen::Vector2d& phi) const {
        if (zero_) return Eigen::Vector2d::Zero();
        return {vy_.mean.dot(phi), omega_.mean.dot(phi)};
    }

    Eigen::Vector2d predictive_std(const Eigen::Vector2d& phi) const {
        if (zero_) return Eigen::Vector2d::Zero();
        const double v1 = phi.dot(vy_.covariance * phi) + vy_.noise_var;
        const double v2 = phi.dot(omega_.covariance * phi) + omega_.noise_var;
        return {std::sqrt(std::max(0.0, v1)), std::sqrt(std::max(0.0, v2))};
    }

    // context vector [c_vy; c_omega]
    Eigen::Vector4d context() const {
        Eigen::Vector4d c;
        c << vy_.mean, omega_.mean;
        return c;
    }

    const BlrPosterior& vy() const { return vy_; }
    const BlrPosterior& omega() const { return omega_; }

private:
    BlrPosterior vy_;
    BlrPosterior omega_;
    bool zero_ = true;
};

// Discrete prediction with the learned correction: f(x,u) + B g(x,u).
VehicleState predict_with_residual(const VehicleState& state, const VehicleInput& input,
                                   const VehicleParams& nominal, const ResidualModel& residual,
                                   double dt);

struct PoseSample {
    double t = 0.0;
    double px = 0.0;
    double py = 0.0;
    double psi = 0.0;
};

struct TelemetryRow {
    double t = 0.0;
    PoseSample pose;      // raw measurement
    VehicleState ekf;     // posterior estimate at this step
    VehicleInput input;   // applied over [t, t+dt)
    double s = 0.0;       // progress estimate [m]
    double e_lag = 0.0;
    double e_cont = 0.0;
    int solver_ok = 1;
    double pred_vy = 0.0;     // controller's one-step prediction, for
    double pred_omega = 0.0;  // predicted-vs-realized diagnostics
    double pred_std_vy = 0.0;
    double pred_std_omega = 0.0;
};

struct TelemetryLog {
    std::vector<TelemetryRow> rows;

    void save(const std::string& path) const;
    std::vector<PoseSample> poses() const;
    std::vector<VehicleInput> inputs() const;
};

// Zero-phase Savitzky-Golay smoothing; the window shrinks symmetrically near
// the boundaries.
std::vector<double> savitzky_golay_smooth(const std::vector<double>& values, int window,
                                          int order);

// Velocity ground truth reconstructed from raw poses: central differences of
// the (unwrapped) pose signals, zero-phase smoothing, rotation into the body
// frame. Requires at least 50 samples.
std::vector<VehicleState> ground_truth_states(const std::vector<PoseSample>& poses,
                                              int sg_window, int sg_order);

struct RegressionData {
    Eigen::Matrix<double, Eigen::Dynamic, 2> phi;  // features at (x_k, u_k)
    Eigen::VectorXd err_vy;                        // e_k components
    Eigen::VectorXd err_omega;
};

// One-step prediction errors of the nominal model against ground truth,
// restricted to the (v_y, omega) rows. Boundary samples where the smoothing
// window was truncated are dropped.
RegressionData prediction_errors(const std::vector<VehicleState>& truth,
                                 const std::vector<VehicleInput>& inputs,
                                 const VehicleParams& nominal, double dt, int margin);

struct ContextResult {
    Eigen::Vector4d context = Eigen::Vector4d::Zero();
    ResidualModel model;
    int samples = 0;
};

// Full per-lap pipeline: ground truth -> prediction errors -> per-output BLR.
ContextResult context_from_lap(const TelemetryLog& telemetry, const VehicleParams& nominal,
                               const ResidualConfig& rc, double dt);

}  // namespace racebo
