#pragma once

#include <Eigen/Dense>
#include <functional>

#include "racebo/config.hpp"
#include "racebo/residual.hpp"
#include "racebo/vehicle.hpp"

namespace racebo {

// Generic extended Kalman core over dynamic-size vectors. The transition
// Jacobian is formed by central finite differences of the supplied discrete
// map; updates use the Joseph form so the covariance stays symmetric PSD.
class ExtendedKalman {
public:
    using Transition = std::function<Eigen::VectorXd(const Eigen::VectorXd&)>;
    // maps a raw innovation to the one actually used (e.g. angle wrapping)
    using InnovationMap = std::function<Eigen::VectorXd(const Eigen::VectorXd&)>;

    ExtendedKalman() = default;
    ExtendedKalman(Eigen::VectorXd mean, Eigen::MatrixXd cov)
        : mean_(std::move(mean)), cov_(std::move(cov)) {}

    const Eigen::VectorXd& mean() const { return mean_; }
    const Eigen::MatrixXd& covariance() const { return cov_; }
    void set_mean(const Eigen::VectorXd& m) { mean_ = m; }

    void predict(const Transition& f, const Eigen::MatrixXd& process_noise, double fd_step);

    void update(const Eigen::MatrixXd& H, const Eigen::MatrixXd& R, const Eigen::VectorXd& z,
                const InnovationMap& map = nullptr);

    // central-difference Jacobian of f at x (exposed for tests)
    static Eigen::MatrixXd numerical_jacobian(const Transition& f, const Eigen::VectorXd& x,
                                              double fd_step);

private:
    void symmetrize();

    Eigen::VectorXd mean_;
    Eigen::MatrixXd cov_;
};

struct PoseMeasurement {
    double px = 0.0;
    double py = 0.0;
    double psi = 0.0;
};

PoseMeasurement measure_pose(const VehicleState& truth, const MeasurementNoise& noise, Rng& rng);

// 6-state vehicle filter over pose measurements. The prediction model is the
// nominal dynamics plus the learned residual, mirroring the controller.
class VehicleEkf {
public:
    VehicleEkf(const EkfConfig& cfg, const VehicleParams& nominal);

    void initialize(const PoseMeasurement& pose);
    void predict(const VehicleInput& input, double dt, const ResidualModel& residual);
    void update(const PoseMeasurement& pose);

    VehicleState state() const;
    const Eigen::MatrixXd& covariance() const { return core_.covariance(); }

private:
    EkfConfig cfg_;
    VehicleParams nominal_;
    ExtendedKalman core_;
    Eigen::MatrixXd q_;  // process noise
    Eigen::MatrixXd r_;  // measurement noise
    Eigen::MatrixXd h_;  // pose observation matrix [I3 0]
};

double wrap_angle(double a);  // to (-pi, pi]

}  // namespace racebo
