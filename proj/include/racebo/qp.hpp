#pragma once

#include <Eigen/Dense>

namespace racebo {

// Strictly convex inequality-constrained QP
//
//   min 0.5 x'Gx + g0'x   s.t.  CI' x + ci0 >= 0
//
// solved with the Goldfarb-Idnani dual active-set method: start at the
// unconstrained minimizer and add violated constraints one at a time, taking
// dual steps to drop blocking constraints. Terminates with a primal-dual pair
// satisfying the KKT conditions to near machine precision, or reports failure
// if G is not positive definite / the constraints are inconsistent.
struct QpResult {
    bool ok = false;
    Eigen::VectorXd x;          // primal solution
    Eigen::VectorXd lambda;     // multipliers per inequality (0 if inactive)
    double objective = 0.0;
    int iterations = 0;
};

QpResult solve_qp(const Eigen::MatrixXd& G, const Eigen::VectorXd& g0,
                  const Eigen::MatrixXd& CI, const Eigen::VectorXd& ci0);

}  // namespace racebo
