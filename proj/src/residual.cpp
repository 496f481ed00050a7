#include "racebo/residual.hpp"

#include <cmath>
#include <stdexcept>

#include "racebo/csv.hpp"

namespace racebo {

Eigen::Vector2d taylor_features(const VehicleState& state, const VehicleInput& input,
                                const VehicleParams& nominal) {
    const SlipAngles a = slip_angles(state, input.delta, nominal);
    Eigen::Vector2d phi;
    phi[0] = std::sin(nominal.cf * std::atan(nominal.bf * a.front)) * std::cos(input.delta);
    phi[1] = std::sin(nominal.cr * std::atan(nominal.br * a.rear));
    return phi;
}

BlrPosterior blr_fit(const Eigen::Matrix<double, Eigen::Dynamic, 2>& phi,
                     const Eigen::VectorXd& targets, double prior_precision, double noise_var) {
    if (phi.rows() < 2) throw std::runtime_error("blr_fit needs at least 2 samples");
    if (phi.rows() != targets.rows()) throw std::runtime_error("blr_fit size mismatch");

    const Eigen::Matrix2d gram = phi.transpose() * phi;
    Eigen::Matrix2d A = gram + noise_var * prior_precision * Eigen::Matrix2d::Identity();
    Eigen::LDLT<Eigen::Matrix2d> ldlt(A);
    if (ldlt.info() != Eigen::Success || !ldlt.isPositive()) {
        A += 1e-10 * Eigen::Matrix2d::Identity();  // jitter for singular normal matrix
        ldlt.compute(A);
    }
    BlrPosterior post;
    post.mean = ldlt.solve(phi.transpose() * targets);
    post.covariance = noise_var * ldlt.solve(Eigen::Matrix2d::Identity());
    // symmetrize against round-off
    post.covariance = 0.5 * (post.covariance + post.covariance.transpose()).eval();
    post.noise_var = noise_var;
    return post;
}

BlrPosterior blr_fit_auto(const Eigen::Matrix<double, Eigen::Dynamic, 2>& phi,
                          const Eigen::VectorXd& targets, double prior_precision) {
    const auto n = phi.rows();
    if (n < 2) throw std::runtime_error("blr_fit needs at least 2 samples");
    // preliminary ridge pass to estimate the noise level
    const Eigen::Matrix2d A =
        phi.transpose() * phi + prior_precision * Eigen::Matrix2d::Identity();
    const Eigen::Vector2d w = A.ldlt().solve(phi.transpose() * targets);
    const Eigen::VectorXd resid = targets - phi * w;
    const double dof = static_cast<double>(std::max<Eigen::Index>(n - 2, 1));
    const double noise_var = std::max(resid.squaredNorm() / dof, 1e-12);
    return blr_fit(phi, targets, prior_precision, noise_var);
}

VehicleState predict_with_residual(const VehicleState& state, const VehicleInput& input,
                                   const VehicleParams& nominal, const ResidualModel& residual,
                                   double dt) {
    VehicleState next = integrate_step(state, input, nominal, dt);
    if (!residual.is_zero()) {
        const Eigen::Vector2d g = residual.mean(taylor_features(state, input, nominal));
        next.vy += g[0];
        next.omega += g[1];
    }
    return next;
}

void TelemetryLog::save(const std::string& path) const {
    CsvWriter w(path, {"t", "px", "py", "psi", "vx", "vy", "omega", "delta", "tau",
                       "ekf_px", "ekf_py", "ekf_psi", "ekf_vx", "ekf_vy", "ekf_omega",
                       "s", "e_lag", "e_cont", "solver_ok", "pred_vy", "pred_omega",
                       "pred_std_vy", "pred_std_omega"});
    for (const auto& r : rows) {
        w.write_row({r.t, r.pose.px, r.pose.py, r.pose.psi, r.ekf.vx, r.ekf.vy, r.ekf.omega,
                     r.input.delta, r.input.tau, r.ekf.px, r.ekf.py, r.ekf.psi, r.ekf.vx,
                     r.ekf.vy, r.ekf.omega, r.s, r.e_lag, r.e_cont,
                     static_cast<double>(r.solver_ok), r.pred_vy, r.pred_omega,
                     r.pred_std_vy, r.pred_std_omega});
    }
}

std::vector<PoseSample> TelemetryLog::poses() const {
    std::vector<PoseSample> out;
    out.reserve(rows.size());
    for (const auto& r : rows) out.push_back(r.pose);
    return out;
}

std::vector<VehicleInput> TelemetryLog::inputs() const {
    std::vector<VehicleInput> out;
    out.reserve(rows.size());
    for (const auto& r : rows) out.push_back(r.input);
    return out;
}

std::vector<double> savitzky_golay_smooth(const std::vector<double>& values, int window,
                                          int order) {
    const int n = static_cast<int>(values.size());
    if (window < 3 || window % 2 == 0) throw std::runtime_error("sg window must be odd >= 3");
    const int half = window / 2;
    std::vector<double> out(values.size());
    for (int i = 0; i < n; ++i) {
        const int h = std::min({half, i, n - 1 - i});
        if (h == 0 || 2 * h < order + 1) {
            out[i] = values[i];
            continue;
        }
        const int p = std::min(order, 2 * h);
        // least-squares polynomial through the symmetric window, evaluated at
        // its center: weight row of (V'V)^-1 V'
        Eigen::MatrixXd V(2 * h + 1, p + 1);
        for (int r = -h; r <= h; ++r)
            for (int c = 0; c <= p; ++c) V(r + h, c) = std::pow(static_cast<double>(r), c);
        const Eigen::MatrixXd gram = V.transpose() * V;
        Eigen::VectorXd e0 = Eigen::VectorXd::Zero(p + 1);
        e0[0] = 1.0;
        const Eigen::VectorXd coef = V * gram.ldlt().solve(e0);
        double acc = 0.0;
        for (int r = -h; r <= h; ++r) acc += coef[r + h] * values[i + r];
        out[i] = acc;
    }
    return out;
}

std::vector<VehicleState> ground_truth_states(const std::vector<PoseSample>& poses,
                                              int sg_window, int sg_order) {
    const int n = static_cast<int>(poses.size());
    if (n < 50) throw std::runtime_error("pose log too short for ground truth (< 50 samples)");

    // unwrap heading before differentiating
    std::vector<double> psi(n);
    psi[0] = poses[0].psi;
    for (int i = 1; i < n; ++i) {
        double d = poses[i].psi - poses[i - 1].psi;
        while (d > M_PI) d -= 2 * M_PI;
        while (d < -M_PI) d += 2 * M_PI;
        psi[i] = psi[i - 1] + d;
    }

    // central differences (one-sided at the ends)
    std::vector<double> vwx(n), vwy(n), om(n);
    auto diff = [&](auto value, int i) {
        const int i0 = std::max(0, i - 1);
        const int i1 = std::min(n - 1, i + 1);
        return (value(i1) - value(i0)) / (poses[i1].t - poses[i0].t);
    };
    for (int i = 0; i < n; ++i) {
        vwx[i] = diff([&](int k) { return poses[k].px; }, i);
        vwy[i] = diff([&](int k) { return poses[k].py; }, i);
        om[i] = diff([&](int k) { return psi[k]; }, i);
    }

    vwx = savitzky_golay_smooth(vwx, sg_window, sg_order);
    vwy = savitzky_golay_smooth(vwy, sg_window, sg_order);
    om = savitzky_golay_smooth(om, sg_window, sg_order);
    // the rotation into the body frame is sensitive to heading noise at speed,
    // so it uses the smoothed heading as well
    const std::vector<double> psi_s = savitzky_golay_smooth(psi, sg_window, sg_order);

    std::vector<VehicleState> out(n);
    for (int i = 0; i < n; ++i) {
        VehicleState s;
        s.px = poses[i].px;
        s.py = poses[i].py;
        s.psi = psi[i];
        const double c = std::cos(psi_s[i]);
        const double sn = std::sin(psi_s[i]);
        s.vx = c * vwx[i] + sn * vwy[i];
        s.vy = -sn * vwx[i] + c * vwy[i];
        s.omega = om[i];
        out[i] = s;
    }
    return out;
}

RegressionData prediction_errors(const std::vector<VehicleState>& truth,
                                 const std::vector<VehicleInput>& inputs,
                                 const VehicleParams& nominal, double dt, int margin) {
    const int n = static_cast<int>(std::min(truth.size(), inputs.size()));
    const int lo = margin;
    const int hi = n - 2 - margin;  // k+1 must stay clear of the boundary
    const int count = std::max(0, hi - lo + 1);
    RegressionData data;
    data.phi.resize(count, 2);
    data.err_vy.resize(count);
    data.err_omega.resize(count);
    for (int k = lo, r = 0; k <= hi; ++k, ++r) {
        const VehicleState pred = integrate_step(truth[k], inputs[k], nominal, dt);
        data.phi.row(r) = taylor_features(truth[k], inputs[k], nominal).transpose();
        data.err_vy[r] = truth[k + 1].vy - pred.vy;
        data.err_omega[r] = truth[k + 1].omega - pred.omega;
    }
    return data;
}

ContextResult context_from_lap(const TelemetryLog& telemetry, const VehicleParams& nominal,
                               const ResidualConfig& rc, double dt) {
    const auto poses = telemetry.poses();
    const auto truth = ground_truth_states(poses, rc.sg_window, rc.sg_order);
    const int margin = rc.sg_window / 2 + 1;
    const RegressionData data = prediction_errors(truth, telemetry.inputs(), nominal, dt, margin);
    if (data.phi.rows() < 8)
        throw std::runtime_error("not enough samples for residual regression");

    const BlrPosterior post_vy = blr_fit_auto(data.phi, data.err_vy, rc.prior_precision);
    const BlrPosterior post_om = blr_fit_auto(data.phi, data.err_omega, rc.prior_precision);
    ContextResult out;
    out.model = ResidualModel(post_vy, post_om);
    out.context = out.model.context();
    out.samples = static_cast<int>(data.phi.rows());
    return out;
}

}  // namespace racebo
