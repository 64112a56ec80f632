#pragma once

#include <Eigen/Dense>

namespace iga {

struct QpResult {
    Eigen::VectorXd p;
    Eigen::VectorXd multipliers;  // one per row of A, nonnegative
    bool relaxed = false;         // solved the elastic reformulation
    bool converged = false;
};

/// min 1/2 p' B p + g' p  subject to  A p >= b, solved by a primal
/// active-set method. Infeasible subproblems fall back to an elastic
/// reformulation with slack penalty rho.
QpResult solve_qp(const Eigen::MatrixXd& B, const Eigen::VectorXd& g, const Eigen::MatrixXd& A,
                  const Eigen::VectorXd& b, double rho = 1e7);

} // namespace iga
