#pragma once

#include <Eigen/Dense>
#include <functional>
#include <stdexcept>

namespace iga {

using LinearOperator = std::function<Eigen::VectorXd(const Eigen::VectorXd&)>;

struct KrylovError : std::runtime_error {
    double final_residual;
    KrylovError(const std::string& what, double res) : std::runtime_error(what), final_residual(res) {}
};

/// Forward-difference directional derivative of a residual map,
/// (r(at + eps d) - r(at)) / eps.
Eigen::VectorXd matfree_apply(const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& residual_fn,
                              const Eigen::VectorXd& at, const Eigen::VectorXd& direction, double eps);

/// Scaled default step for matfree_apply.
double matfree_eps(const Eigen::VectorXd& at, const Eigen::VectorXd& direction);

/// Restarted GMRES without preconditioning; throws KrylovError on
/// non-convergence, carrying the final relative residual.
Eigen::VectorXd solve_krylov(const LinearOperator& apply, const Eigen::VectorXd& b, double tol,
                             int max_iter, int restart = 60);

} // namespace iga
