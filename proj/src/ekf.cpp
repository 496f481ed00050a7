#include "racebo/ekf.hpp"

#include <cmath>

namespace racebo {

double wrap_angle(double a) {
    a = std::fmod(a + M_PI, 2.0 * M_PI);
    if (a <= 0.0) a += 2.0 * M_PI;
    return a - M_PI;
}

Eigen::MatrixXd ExtendedKalman::numerical_jacobian(const Transition& f, const Eigen::VectorXd& x,
                                                   double fd_step) {
    const int n = static_cast<int>(x.size());
    const Eigen::VectorXd fx = f(x);
    Eigen::MatrixXd J(fx.size(), n);
    for (int j = 0; j < n; ++j) {
        // recompute the step so x +/- h are exactly representable; keeps the
        // Jacobian of linear maps exact to round-off
        double h = fd_step * (1.0 + std::abs(x[j]));
        volatile double tmp = x[j] + h;
        h = tmp - x[j];
        Eigen::VectorXd xp = x, xm = x;
        xp[j] = x[j] + h;
        xm[j] = x[j] - h;
        J.col(j) = (f(xp) - f(xm)) / (2.0 * h);
    }
    return J;
}

void ExtendedKalman::predict(const Transition& f, const Eigen::MatrixXd& process_noise,
                             double fd_step) {
    const Eigen::MatrixXd F = numerical_jacobian(f, mean_, fd_step);
    mean_ = f(mean_);
    cov_ = F * cov_ * F.transpose() + process_noise;
    symmetrize();
}

void ExtendedKalman::update(const Eigen::MatrixXd& H, const Eigen::MatrixXd& R,
                            const Eigen::VectorXd& z, const InnovationMap& map) {
    Eigen::VectorXd innov = z - H * mean_;
    if (map) innov = map(innov);
    const Eigen::MatrixXd S = H * cov_ * H.transpose() + R;
    const Eigen::MatrixXd K = cov_ * H.transpose() * S.ldlt().solve(
                                  Eigen::MatrixXd::Identity(S.rows(), S.cols()));
    mean_ += K * innov;
    const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(cov_.rows(), cov_.cols());
    const Eigen::MatrixXd A = I - K * H;
    cov_ = A * cov_ * A.transpose() + K * R * K.transpose();  // Joseph form
    symmetrize();
}

void ExtendedKalman::symmetrize() { cov_ = (0.5 * (cov_ + cov_.transpose())).eval(); }

PoseMeasurement measure_pose(const VehicleState& truth, const MeasurementNoise& noise,
                             Rng& rng) {
    PoseMeasurement m;
    m.px = truth.px + rng.normal(0.0, noise.px);
    m.py = truth.py + rng.normal(0.0, noise.py);
    m.psi = wrap_angle(truth.psi + rng.normal(0.0, noise.psi));  // sensor reports wrapped
    return m;
}

VehicleEkf::VehicleEkf(const EkfConfig& cfg, const VehicleParams& nominal)
    : cfg_(cfg), nominal_(nominal) {
    q_ = Eigen::VectorXd::Zero(6).asDiagonal();
    Eigen::VectorXd qd(6);
    qd << cfg.q_pos, cfg.q_pos, cfg.q_psi, cfg.q_vx, cfg.q_vy, cfg.q_omega;
    q_ = qd.asDiagonal();
    Eigen::Vector3d rd(cfg.r_pos, cfg.r_pos, cfg.r_psi);
    r_ = rd.asDiagonal();
    h_ = Eigen::MatrixXd::Zero(3, 6);
    h_.leftCols(3).setIdentity();
}

void VehicleEkf::initialize(const PoseMeasurement& pose) {
    Eigen::VectorXd m(6);
    m << pose.px, pose.py, pose.psi, 0.0, 0.0, 0.0;
    Eigen::VectorXd v(6);
    v << cfg_.init_var_pos, cfg_.init_var_pos, cfg_.init_var_psi, cfg_.init_var_v,
        cfg_.init_var_v, cfg_.init_var_omega;
    core_ = ExtendedKalman(m, v.asDiagonal());
}

void VehicleEkf::predict(const VehicleInput& input, double dt, const ResidualModel& residual) {
    const auto f = [&](const Eigen::VectorXd& x) {
        VehicleState s{x[0], x[1], x[2], x[3], x[4], x[5]};
        const VehicleState n = predict_with_residual(s, input, nominal_, residual, dt);
        Eigen::VectorXd out(6);
        out << n.px, n.py, n.psi, n.vx, n.vy, n.omega;
        return out;
    };
    core_.predict(f, q_, cfg_.fd_step);
}

void VehicleEkf::update(const PoseMeasurement& pose) {
    Eigen::Vector3d z(pose.px, pose.py, pose.psi);
    core_.update(h_, r_, z, [](const Eigen::VectorXd& innov) {
        Eigen::VectorXd out = innov;
        out[2] = wrap_angle(out[2]);
        return out;
    });
}

VehicleState VehicleEkf::state() const {
    const auto& m = core_.mean();
    return {m[0], m[1], m[2], m[3], m[4], m[5]};
}

}  // namespace racebo
