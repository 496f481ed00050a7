#include "racebo/qp.hpp"

#include <cmath>
#include <limits>
#include <vector>

namespace racebo {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Appends the incoming constraint direction (held in d) to the triangular
// factor R, rotating J so its trailing columns stay orthogonal to the active
// normals. Returns false when the normal is linearly dependent on the active
// set.
bool add_constraint(Eigen::MatrixXd& R, Eigen::MatrixXd& J, Eigen::VectorXd& d, int& q,
                    double& r_norm) {
    const int n = static_cast<int>(J.rows());
    for (int j = n - 1; j >= q + 1; --j) {
        double cc = d[j - 1];
        double ss = d[j];
        const double h = std::hypot(cc, ss);
        if (h == 0.0) continue;
        d[j] = 0.0;
        ss /= h;
        cc /= h;
        if (cc < 0.0) {
            cc = -cc;
            ss = -ss;
            d[j - 1] = -h;
        } else {
            d[j - 1] = h;
        }
        const double xny = ss / (1.0 + cc);
        for (int k = 0; k < n; ++k) {
            const double t1 = J(k, j - 1);
            const double t2 = J(k, j);
            J(k, j - 1) = t1 * cc + t2 * ss;
            J(k, j) = xny * (t1 + J(k, j - 1)) - t2;
        }
    }
    ++q;
    for (int i = 0; i < q; ++i) R(i, q - 1) = d[i];
    r_norm = std::max(r_norm, std::abs(d[q - 1]));
    return std::abs(d[q - 1]) > 1e2 * std::numeric_limits<double>::epsilon() * r_norm;
}

// Removes active constraint with position `qq` in the active set, restoring
// the triangularity of R with Givens rotations.
void delete_constraint(Eigen::MatrixXd& R, Eigen::MatrixXd& J, std::vector<int>& active,
                       Eigen::VectorXd& u, int& q, int qq) {
    const int n = static_cast<int>(J.rows());
    for (int i = qq; i < q - 1; ++i) {
        active[i] = active[i + 1];
        u[i] = u[i + 1];
        R.col(i) = R.col(i + 1);
    }
    active.pop_back();
    --q;
    if (q == 0) return;

    for (int j = qq; j < q; ++j) {
        double cc = R(j, j);
        double ss = R(j + 1, j);
        const double h = std::hypot(cc, ss);
        if (h == 0.0) continue;
        cc /= h;
        ss /= h;
        R(j + 1, j) = 0.0;
        if (cc < 0.0) {
            R(j, j) = -h;
            cc = -cc;
            ss = -ss;
        } else {
            R(j, j) = h;
        }
        const double xny = ss / (1.0 + cc);
        for (int k = j + 1; k < q; ++k) {
            const double t1 = R(j, k);
            const double t2 = R(j + 1, k);
            R(j, k) = t1 * cc + t2 * ss;
            R(j + 1, k) = xny * (t1 + R(j, k)) - t2;
        }
        for (int k = 0; k < n; ++k) {
            const double t1 = J(k, j);
            const double t2 = J(k, j + 1);
            J(k, j) = t1 * cc + t2 * ss;
            J(k, j + 1) = xny * (J(k, j) + t1) - t2;
        }
    }
}

}  // namespace

QpResult solve_qp(const Eigen::MatrixXd& G, const Eigen::VectorXd& g0,
                  const Eigen::MatrixXd& CI, const Eigen::VectorXd& ci0) {
    QpResult res;
    const int n = static_cast<int>(G.rows());
    const int m = static_cast<int>(CI.cols());
    res.lambda = Eigen::VectorXd::Zero(m);

    Eigen::LLT<Eigen::MatrixXd> llt(G);
    if (llt.info() != Eigen::Success) return res;

    // unconstrained minimizer and the inverse Cholesky transform
    Eigen::VectorXd x = -llt.solve(g0);
    Eigen::MatrixXd J =
        llt.matrixU().solve(Eigen::MatrixXd::Identity(n, n));  // J = L^{-T}
    Eigen::MatrixXd R = Eigen::MatrixXd::Zero(n, n);
    double r_norm = 1.0;

    std::vector<int> active;
    Eigen::VectorXd u = Eigen::VectorXd::Zero(n + 1);
    Eigen::VectorXd s = Eigen::VectorXd::Zero(m);
    Eigen::VectorXd d(n), z(n), r(n), np(n);
    int q = 0;

    const double scale = 1.0 + std::abs(g0.lpNorm<Eigen::Infinity>()) +
                         (m > 0 ? std::abs(ci0.lpNorm<Eigen::Infinity>()) : 0.0);
    const double tol = 1e-11 * scale;
    const int max_iter = 50 * (n + m + 1);

    int iter = 0;
    while (true) {
        if (++iter > max_iter) return res;

        // most violated inactive constraint
        for (int i = 0; i < m; ++i) s[i] = CI.col(i).dot(x) + ci0[i];
        int ip = -1;
        double smin = -tol;
        for (int i = 0; i < m; ++i) {
            bool in_active = false;
            for (int k = 0; k < q; ++k)
                if (active[k] == i) {
                    in_active = true;
                    break;
                }
            if (in_active) continue;
            if (s[i] < smin) {
                smin = s[i];
                ip = i;
            }
        }
        if (ip < 0) break;  // all satisfied: optimal

        np = CI.col(ip);
        double u_plus = 0.0;
        double s_ip = s[ip];

        while (true) {
            if (++iter > max_iter) return res;

            d.noalias() = J.transpose() * np;
            z.setZero();
            if (q < n) z.noalias() = J.rightCols(n - q) * d.tail(n - q);
            if (q > 0)
                r.head(q) = R.topLeftCorner(q, q)
                                .triangularView<Eigen::Upper>()
                                .solve(d.head(q));

            // dual step length: first active constraint whose multiplier hits 0
            double t1 = kInf;
            int lq = -1;
            for (int k = 0; k < q; ++k) {
                if (r[k] > 0.0 && u[k] / r[k] < t1) {
                    t1 = u[k] / r[k];
                    lq = k;
                }
            }
            const double ztn = z.dot(np);
            const double t2 = (z.norm() > 1e-14) ? -s_ip / ztn : kInf;
            const double t = std::min(t1, t2);

            if (t >= kInf) return res;  // constraints inconsistent

            if (t2 >= kInf) {
                // pure dual step: drop the blocking constraint and retry
                for (int k = 0; k < q; ++k) u[k] -= t * r[k];
                u_plus += t;
                delete_constraint(R, J, active, u, q, lq);
                continue;
            }

            x += t * z;
            for (int k = 0; k < q; ++k) u[k] -= t * r[k];
            u_plus += t;

            if (t == t2) {
                // full step: the incoming constraint becomes active
                u[q] = u_plus;
                active.push_back(ip);
                if (!add_constraint(R, J, d, q, r_norm)) {
                    // degenerate normal; drop it again and accept the step
                    delete_constraint(R, J, active, u, q, q - 1);
                }
                break;
            }

            // partial step: blocking constraint leaves the active set
            delete_constraint(R, J, active, u, q, lq);
            s_ip = CI.col(ip).dot(x) + ci0[ip];
        }
    }

    res.ok = true;
    res.x = x;
    for (int k = 0; k < q; ++k) res.lambda[active[k]] = u[k];
    res.objective = 0.5 * x.dot(G * x) + g0.dot(x);
    res.iterations = iter;
    return res;
}

}  // namespace racebo
