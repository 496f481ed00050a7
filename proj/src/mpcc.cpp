#include "racebo/mpcc.hpp"

#include <cmath>

#include "racebo/qp.hpp"

namespace racebo {

namespace {

VehicleState to_state(const Eigen::Matrix<double, 7, 1>& x) {
    return {x[0], x[1], x[2], x[3], x[4], x[5]};
}

Eigen::Matrix<double, 7, 1> to_vec(const VehicleState& s, double prog) {
    Eigen::Matrix<double, 7, 1> x;
    x << s.px, s.py, s.psi, s.vx, s.vy, s.omega, prog;
    return x;
}

}  // namespace

MpccController::MpccController(const Track& track, const VehicleParams& nominal,
                               const MpccConfig& cfg)
    : track_(track), nominal_(nominal), cfg_(cfg) {
    weights_.q_lag = cfg.q_lag;
    u_warm_.resize(3, cfg_.horizon);
    u_warm_.setZero();
}

MpccController::Vec7 MpccController::discrete_map(const Vec7& x, const Eigen::Vector3d& u) const {
    const VehicleState next = predict_with_residual(to_state(x), {u[0], u[1]}, nominal_,
                                                    residual_, cfg_.dt);
    Vec7 out = to_vec(next, x[6] + u[2] * cfg_.dt);
    return out;
}

Eigen::MatrixXd MpccController::rollout(const Vec7& x0, const Eigen::Matrix3Xd& inputs) const {
    const int H = static_cast<int>(inputs.cols());
    Eigen::MatrixXd X(7, H + 1);
    X.col(0) = x0;
    for (int i = 0; i < H; ++i) X.col(i + 1) = discrete_map(X.col(i), inputs.col(i));
    return X;
}

void MpccController::linearize(const Vec7& x, const Eigen::Vector3d& u, Mat7& A,
                               Mat73& B) const {
    A.setZero();
    B.setZero();
    // progress sub-block is exact: s' = s + gamma dt, decoupled from the rest
    A(6, 6) = 1.0;
    B(6, 2) = cfg_.dt;

    // vehicle sub-block by central differences of the discrete map
    const double h0 = 1e-6;
    for (int j = 0; j < 6; ++j) {
        const double h = h0 * (1.0 + std::abs(x[j]));
        Vec7 xp = x, xm = x;
        xp[j] += h;
        xm[j] -= h;
        const Vec7 fp = discrete_map(xp, u);
        const Vec7 fm = discrete_map(xm, u);
        A.block<6, 1>(0, j) = (fp.head<6>() - fm.head<6>()) / (2.0 * h);
    }
    for (int j = 0; j < 2; ++j) {
        const double h = h0 * (1.0 + std::abs(u[j]));
        Eigen::Vector3d up = u, um = u;
        up[j] += h;
        um[j] -= h;
        const Vec7 fp = discrete_map(x, up);
        const Vec7 fm = discrete_map(x, um);
        B.block<6, 1>(0, j) = (fp.head<6>() - fm.head<6>()) / (2.0 * h);
    }
}

double MpccController::nonlinear_cost(const Eigen::MatrixXd& states,
                                      const Eigen::Matrix3Xd& inputs) const {
    double cost = 0.0;
    for (int i = 0; i < states.cols(); ++i) {
        const auto e = track_.contouring_errors({states(0, i), states(1, i)}, states(6, i));
        cost += weights_.q_lag * e.lag * e.lag + weights_.q_cont * e.cont * e.cont;
    }
    for (int i = 0; i < inputs.cols(); ++i) cost -= weights_.q_adv * inputs(2, i);
    return cost;
}

Eigen::Matrix3Xd MpccController::clamp_inputs(Eigen::Matrix3Xd u) const {
    for (int i = 0; i < u.cols(); ++i) {
        u(0, i) = std::clamp(u(0, i), -nominal_.delta_max, nominal_.delta_max);
        u(1, i) = std::clamp(u(1, i), -1.0, 1.0);
        u(2, i) = std::clamp(u(2, i), cfg_.gamma_min, cfg_.gamma_max);
    }
    return u;
}

MpccSolution MpccController::solve(const AugmentedState& aug) {
    const int H = cfg_.horizon;
    const Vec7 x0 = to_vec(aug.state, aug.s);

    Eigen::Matrix3Xd U(3, H);
    if (warm_) {
        // shift the previous solution by one stage, repeating the last input
        U.leftCols(H - 1) = u_warm_.rightCols(H - 1);
        U.col(H - 1) = u_warm_.col(H - 1);
    } else {
        U.setZero();
        const double g0 = std::clamp(aug.state.vx, cfg_.gamma_min, cfg_.gamma_max);
        U.row(2).setConstant(g0);
        last_applied_ = {};
    }
    U = clamp_inputs(U);

    const int sqp_iters = warm_ ? cfg_.sqp_iters : cfg_.sqp_iters_cold;
    const int nu = 3 * H;  // input step variables

    MpccSolution sol;
    sol.qp_iterations = 0;
    bool qp_failed = false;

    const double w_slack = cfg_.slack_weight_factor * std::max(weights_.q_cont, 1.0);
    const double ulo[3] = {-nominal_.delta_max, -1.0, cfg_.gamma_min};
    const double uhi[3] = {nominal_.delta_max, 1.0, cfg_.gamma_max};
    const double trust[3] = {cfg_.trust_delta, cfg_.trust_tau, cfg_.trust_gamma};

    double qp_cost_sol = 0.0, qp_cost_zero = 0.0;

    for (int iter = 0; iter < sqp_iters; ++iter) {
        const Eigen::MatrixXd X = rollout(x0, U);
        if (!X.allFinite()) {
            qp_failed = true;
            break;
        }

        // dynamics linearization and condensing: dx_i = M_i du, dx_0 = 0
        std::vector<Eigen::MatrixXd> M(H + 1, Eigen::MatrixXd::Zero(7, nu));
        for (int i = 0; i < H; ++i) {
            Mat7 A;
            Mat73 B;
            linearize(X.col(i), U.col(i), A, B);
            M[i + 1].noalias() = A * M[i];
            M[i + 1].middleCols(3 * i, 3) += B;
        }

        // boundary rows are only kept for stages that can actually reach the
        // boundary within the trust region; everything else is provably slack
        struct BoundaryRow {
            int stage;
            Eigen::RowVectorXd crow;  // d e_cont / d du
            double e_ref;
            double hw;
        };
        std::vector<BoundaryRow> risk;
        for (int i = 1; i <= H; ++i) {
            const double s_ref = X(6, i);
            const Vec2 p_ref{X(0, i), X(1, i)};
            const auto err = track_.contouring_errors(p_ref, s_ref);
            const Vec2 nm = track_.normal(s_ref);
            const double kappa = track_.curvature(s_ref);
            Eigen::Matrix<double, 1, 7> jc = Eigen::Matrix<double, 1, 7>::Zero();
            jc(0, 0) = nm.x;
            jc(0, 1) = nm.y;
            jc(0, 6) = -kappa * err.lag;
            Eigen::RowVectorXd crow = jc * M[i];
            const double hw = std::max(track_.half_width(s_ref) - cfg_.boundary_margin, 0.02);
            double reach = 0.0;
            for (int a = 0; a < nu; ++a) reach += std::abs(crow[a]) * trust[a % 3];
            if (std::abs(err.cont) + reach >= hw)
                risk.push_back({i, std::move(crow), err.cont, hw});
        }

        const int ns = static_cast<int>(risk.size());
        const int nz = nu + ns;

        Eigen::MatrixXd Hq = Eigen::MatrixXd::Zero(nz, nz);
        Eigen::VectorXd gq = Eigen::VectorXd::Zero(nz);
        double cost_const = 0.0;

        // contouring/lag tracking term per predicted stage
        for (int i = 1; i <= H; ++i) {
            const double s_ref = X(6, i);
            const Vec2 p_ref{X(0, i), X(1, i)};
            const auto err = track_.contouring_errors(p_ref, s_ref);
            const Vec2 tg = track_.tangent(s_ref);
            const Vec2 nm = track_.normal(s_ref);
            const double kappa = track_.curvature(s_ref);

            Eigen::Matrix<double, 2, 7> J = Eigen::Matrix<double, 2, 7>::Zero();
            J(0, 0) = tg.x;
            J(0, 1) = tg.y;
            J(0, 6) = kappa * err.cont - 1.0;
            J(1, 0) = nm.x;
            J(1, 1) = nm.y;
            J(1, 6) = -kappa * err.lag;

            const Eigen::Matrix2d Q =
                Eigen::Vector2d(weights_.q_lag, weights_.q_cont).asDiagonal();
            const Eigen::Vector2d e_ref(err.lag, err.cont);
            const Eigen::MatrixXd E = J * M[i];  // 2 x nu
            Hq.topLeftCorner(nu, nu).noalias() += 2.0 * E.transpose() * Q * E;
            gq.head(nu).noalias() += 2.0 * E.transpose() * Q * e_ref;
            cost_const += e_ref.dot(Q * e_ref);
        }

        // advancing reward (linear) and input-rate regularization
        const Eigen::Vector3d rate_w(cfg_.rate_delta, cfg_.rate_tau, cfg_.rate_gamma);
        for (int i = 0; i < H; ++i) {
            gq[3 * i + 2] -= weights_.q_adv;
            cost_const -= weights_.q_adv * U(2, i);

            // (u_i + du_i - u_{i-1} - du_{i-1})' R (...)
            Eigen::Vector3d du_prev_ref;
            if (i == 0)
                du_prev_ref << last_applied_.delta, last_applied_.tau, U(2, 0);
            else
                du_prev_ref = U.col(i - 1);
            const Eigen::Vector3d dref = U.col(i) - du_prev_ref;
            for (int c = 0; c < 3; ++c) {
                const double w = rate_w[c];
                if (w <= 0) continue;
                const int a = 3 * i + c;
                Hq(a, a) += 2 * w;
                gq[a] += 2 * w * dref[c];
                if (i > 0) {
                    const int b = 3 * (i - 1) + c;
                    Hq(b, b) += 2 * w;
                    Hq(a, b) -= 2 * w;
                    Hq(b, a) -= 2 * w;
                    gq[b] -= 2 * w * dref[c];
                }
                cost_const += w * dref[c] * dref[c];
            }
        }

        // L1 slack penalty; the matching quadratic keeps the slack block on
        // the same scale as the rest of the Hessian (sigma* = 0 when feasible)
        for (int k = 0; k < ns; ++k) {
            gq[nu + k] += w_slack;
            Hq(nu + k, nu + k) += w_slack;
        }

        // Levenberg regularization on the input steps
        const double reg = cfg_.levenberg * (1.0 + Hq.topLeftCorner(nu, nu).trace() / nu);
        Hq.topLeftCorner(nu, nu) += reg * Eigen::MatrixXd::Identity(nu, nu);

        // constraints: input box/trust, soft track boundary, slack >= 0
        const int mc = 2 * nu + 3 * ns;
        Eigen::MatrixXd CI = Eigen::MatrixXd::Zero(nz, mc);
        Eigen::VectorXd ci0 = Eigen::VectorXd::Zero(mc);
        int col = 0;
        for (int i = 0; i < H; ++i) {
            for (int c = 0; c < 3; ++c) {
                const int a = 3 * i + c;
                CI(a, col) = 1.0;
                ci0[col++] = std::min(U(c, i) - ulo[c], trust[c]);
                CI(a, col) = -1.0;
                ci0[col++] = std::min(uhi[c] - U(c, i), trust[c]);
            }
        }
        std::vector<double> slack_feas(ns, 0.0);
        for (int k = 0; k < ns; ++k) {
            const auto& row = risk[k];
            // hw - e_cont + sigma >= 0
            CI.block(0, col, nu, 1) = -row.crow.transpose();
            CI(nu + k, col) = 1.0;
            ci0[col++] = row.hw - row.e_ref;
            // hw + e_cont + sigma >= 0
            CI.block(0, col, nu, 1) = row.crow.transpose();
            CI(nu + k, col) = 1.0;
            ci0[col++] = row.hw + row.e_ref;
            // sigma >= 0
            CI(nu + k, col) = 1.0;
            ci0[col++] = 0.0;
            slack_feas[k] = std::max(0.0, std::abs(row.e_ref) - row.hw);
        }

        // variable scaling keeps the condensed Hessian well conditioned
        Eigen::VectorXd scale(nz);
        for (int i = 0; i < H; ++i) {
            scale[3 * i + 0] = 0.4;
            scale[3 * i + 1] = 1.0;
            scale[3 * i + 2] = 2.0;
        }
        scale.tail(ns).setConstant(1.0);

        Eigen::MatrixXd Hs = Hq;
        Eigen::VectorXd gs = gq;
        Eigen::MatrixXd CIs = CI;
        for (int r = 0; r < nz; ++r) {
            Hs.row(r) *= scale[r];
            gs[r] *= scale[r];
            CIs.row(r) *= scale[r];
        }
        for (int c2 = 0; c2 < nz; ++c2) Hs.col(c2) *= scale[c2];

        const QpResult qp = solve_qp(Hs, gs, CIs, ci0);
        sol.qp_iterations += qp.iterations;
        if (!qp.ok) {
            qp_failed = true;
            break;
        }
        const Eigen::VectorXd z = scale.asDiagonal() * qp.x;

        // quadratic-model bookkeeping for the descent diagnostic
        auto model_cost = [&](const Eigen::VectorXd& zz) {
            return cost_const + gq.dot(zz) + 0.5 * zz.dot(Hq * zz);
        };
        Eigen::VectorXd z0 = Eigen::VectorXd::Zero(nz);
        for (int k = 0; k < ns; ++k) z0[nu + k] = slack_feas[k];
        qp_cost_sol = model_cost(z);
        qp_cost_zero = model_cost(z0);

        for (int i = 0; i < H; ++i) U.col(i) += z.segment<3>(3 * i);
        U = clamp_inputs(U);
    }

    if (qp_failed) {
        if (warm_) {
            // keep driving on the shifted previous plan rather than stopping
            sol.inputs = U;
            sol.states = rollout(x0, U);
            sol.status = SolveStatus::FallbackShifted;
            sol.stage_cost = sol.states.allFinite() ? nonlinear_cost(sol.states, U) : 0.0;
            u_warm_ = U;
            last_applied_ = sol.first_input();
            return sol;
        }
        sol.status = SolveStatus::Failed;
        sol.inputs = U;
        sol.states.resize(7, H + 1);
        sol.states.setZero();
        return sol;
    }

    sol.inputs = U;
    sol.states = rollout(x0, U);
    sol.stage_cost = nonlinear_cost(sol.states, U);
    sol.qp_cost_solution = qp_cost_sol;
    sol.qp_cost_warmstart = qp_cost_zero;
    sol.status = SolveStatus::Ok;

    u_warm_ = U;
    warm_ = true;
    last_applied_ = sol.first_input();
    return sol;
}

}  // namespace racebo
