#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>
#include <vector>

#include "racebo/qp.hpp"
#include "racebo/rng.hpp"

using namespace racebo;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

MatrixXd random_spd(int n, Rng& rng, double cond_boost = 0.5) {
    MatrixXd A(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) A(i, j) = rng.normal();
    return A * A.transpose() + cond_boost * MatrixXd::Identity(n, n);
}

// max KKT residual: stationarity, primal feasibility, dual feasibility,
// complementary slackness
double kkt_residual(const MatrixXd& G, const VectorXd& g0, const MatrixXd& CI,
                    const VectorXd& ci0, const QpResult& r) {
    double worst = 0.0;
    const VectorXd stat = G * r.x + g0 - CI * r.lambda;
    worst = std::max(worst, stat.lpNorm<Eigen::Infinity>());
    for (int i = 0; i < CI.cols(); ++i) {
        const double s = CI.col(i).dot(r.x) + ci0[i];
        worst = std::max(worst, std::max(0.0, -s));              // feasibility
        worst = std::max(worst, std::max(0.0, -r.lambda[i]));    // dual sign
        worst = std::max(worst, std::abs(r.lambda[i] * s));      // complementarity
    }
    return worst;
}

// Brute force over all active sets for tiny problems: solve the equality KKT
// system per subset, keep the feasible/dual-feasible candidate with the best
// objective.
bool enumerate_qp(const MatrixXd& G, const VectorXd& g0, const MatrixXd& CI,
                  const VectorXd& ci0, VectorXd& best_x) {
    const int n = static_cast<int>(G.rows());
    const int m = static_cast<int>(CI.cols());
    double best_obj = 1e300;
    bool found = false;
    for (int mask = 0; mask < (1 << m); ++mask) {
        std::vector<int> act;
        for (int i = 0; i < m; ++i)
            if (mask & (1 << i)) act.push_back(i);
        const int k = static_cast<int>(act.size());
        if (k > n) continue;
        MatrixXd KKT(n + k, n + k);
        KKT.setZero();
        KKT.topLeftCorner(n, n) = G;
        VectorXd rhs(n + k);
        rhs.head(n) = -g0;
        for (int a = 0; a < k; ++a) {
            KKT.block(0, n + a, n, 1) = -CI.col(act[a]);
            KKT.block(n + a, 0, 1, n) = CI.col(act[a]).transpose();
            rhs[n + a] = -ci0[act[a]];
        }
        Eigen::FullPivLU<MatrixXd> lu(KKT);
        if (!lu.isInvertible()) continue;
        const VectorXd sol = lu.solve(rhs);
        const VectorXd x = sol.head(n);
        const VectorXd lam = sol.tail(k);
        if ((lam.array() < -1e-9).any()) continue;
        bool feasible = true;
        for (int i = 0; i < m; ++i)
            if (CI.col(i).dot(x) + ci0[i] < -1e-9) feasible = false;
        if (!feasible) continue;
        const double obj = 0.5 * x.dot(G * x) + g0.dot(x);
        if (obj < best_obj) {
            best_obj = obj;
            best_x = x;
            found = true;
        }
    }
    return found;
}

}  // namespace

TEST_CASE("unconstrained minimum is returned when feasible") {
    MatrixXd G(2, 2);
    G << 2, 0, 0, 2;
    VectorXd g0(2);
    g0 << -2, -4;  // minimizer (1, 2)
    MatrixXd CI(2, 2);
    CI << 1, 0, 0, 1;  // x >= -1 componentwise
    VectorXd ci0(2);
    ci0 << 1, 1;
    const auto r = solve_qp(G, g0, CI, ci0);
    REQUIRE(r.ok);
    CHECK(r.x[0] == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(r.x[1] == doctest::Approx(2.0).epsilon(1e-12));
}

TEST_CASE("single active bound") {
    MatrixXd G = MatrixXd::Identity(2, 2);
    VectorXd g0(2);
    g0 << -4, 0;  // unconstrained minimizer (4, 0)
    MatrixXd CI(2, 1);
    CI << -1, 0;  // -x0 + 1 >= 0  =>  x0 <= 1
    VectorXd ci0(1);
    ci0 << 1;
    const auto r = solve_qp(G, g0, CI, ci0);
    REQUIRE(r.ok);
    CHECK(r.x[0] == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(r.x[1] == doctest::Approx(0.0).scale(1.0).epsilon(1e-12));
    CHECK(r.lambda[0] == doctest::Approx(3.0).epsilon(1e-10));
}

TEST_CASE("random QPs satisfy KKT conditions to 1e-6") {
    Rng rng(42);
    for (int trial = 0; trial < 200; ++trial) {
        const int n = 2 + static_cast<int>(rng.uniform_index(19));  // up to 20
        const int m = 1 + static_cast<int>(rng.uniform_index(2 * n));
        const MatrixXd G = random_spd(n, rng);
        VectorXd g0(n);
        for (int i = 0; i < n; ++i) g0[i] = rng.normal();
        MatrixXd CI(n, m);
        VectorXd ci0(m);
        // random halfspaces through points near the origin: always feasible-ish
        for (int j = 0; j < m; ++j) {
            for (int i = 0; i < n; ++i) CI(i, j) = rng.normal();
            ci0[j] = rng.uniform(0.0, 2.0);  // origin stays feasible
        }
        const auto r = solve_qp(G, g0, CI, ci0);
        REQUIRE(r.ok);
        CHECK(kkt_residual(G, g0, CI, ci0, r) < 1e-6);
    }
}

TEST_CASE("matches exhaustive active-set enumeration for tiny QPs") {
    Rng rng(7);
    int solved = 0;
    for (int trial = 0; trial < 300; ++trial) {
        const int n = 2 + static_cast<int>(rng.uniform_index(3));  // 2..4
        const int m = 1 + static_cast<int>(rng.uniform_index(4));  // 1..4
        const MatrixXd G = random_spd(n, rng);
        VectorXd g0(n);
        for (int i = 0; i < n; ++i) g0[i] = rng.normal();
        MatrixXd CI(n, m);
        VectorXd ci0(m);
        for (int j = 0; j < m; ++j) {
            for (int i = 0; i < n; ++i) CI(i, j) = rng.normal();
            ci0[j] = rng.uniform(0.0, 1.5);
        }
        VectorXd x_ref;
        if (!enumerate_qp(G, g0, CI, ci0, x_ref)) continue;
        const auto r = solve_qp(G, g0, CI, ci0);
        REQUIRE(r.ok);
        CHECK((r.x - x_ref).lpNorm<Eigen::Infinity>() < 1e-6);
        ++solved;
    }
    CHECK(solved > 200);  // the oracle must have covered most trials
}

TEST_CASE("infeasible constraints are reported, not crashed") {
    MatrixXd G = MatrixXd::Identity(1, 1);
    VectorXd g0 = VectorXd::Zero(1);
    MatrixXd CI(1, 2);
    CI << 1, -1;
    VectorXd ci0(2);
    ci0 << -2, -2;  // x >= 2 and x <= -2
    const auto r = solve_qp(G, g0, CI, ci0);
    CHECK(!r.ok);
}

TEST_CASE("box plus slack structure typical of the controller") {
    // mimic the condensed controller QP: box bounds and soft constraints with
    // nonnegative slack variables, strictly convex after regularization
    Rng rng(11);
    for (int trial = 0; trial < 50; ++trial) {
        const int nu = 6, ns = 3;
        const int n = nu + ns;
        MatrixXd G = MatrixXd::Zero(n, n);
        G.topLeftCorner(nu, nu) = random_spd(nu, rng, 1.0);
        G.bottomRightCorner(ns, ns) = 1e-6 * MatrixXd::Identity(ns, ns);
        VectorXd g0(n);
        for (int i = 0; i < nu; ++i) g0[i] = rng.normal();
        for (int i = 0; i < ns; ++i) g0[nu + i] = 50.0;  // L1 slack penalty

        const int m = 2 * n + ns;
        MatrixXd CI = MatrixXd::Zero(n, m);
        VectorXd ci0 = VectorXd::Zero(m);
        for (int i = 0; i < n; ++i) {
            CI(i, 2 * i) = 1.0;       // x >= -1
            ci0[2 * i] = 1.0;
            CI(i, 2 * i + 1) = -1.0;  // x <= 1
            ci0[2 * i + 1] = 1.0;
        }
        for (int k = 0; k < ns; ++k) {
            // a'u - b <= s  with random a
            for (int i = 0; i < nu; ++i) CI(i, 2 * n + k) = -rng.normal();
            CI(nu + k, 2 * n + k) = 1.0;
            ci0[2 * n + k] = rng.uniform(-0.5, 0.5);
        }
        const auto r = solve_qp(G, g0, CI, ci0);
        REQUIRE(r.ok);
        CHECK(kkt_residual(G, g0, CI, ci0, r) < 1e-6);
    }
}
