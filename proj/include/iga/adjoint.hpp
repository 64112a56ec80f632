#pragma once

#include "iga/state_problem.hpp"

namespace iga {

struct GradientResult {
    double objective_value = 0.0;
    Eigen::VectorXd gradient;
    std::vector<double> constraint_values;
    std::vector<Eigen::VectorXd> constraint_gradients;
};

struct AdjointOptions {
    bool matrix_free = false;
    double krylov_tol = 1e-7;
    int krylov_max_iter = 4000;
    int krylov_restart = 500;  // effectively full GMRES at desk scale
    double state_tol = 1e-7;   // precondition on ||B||_inf relative to the residual scale
    EggOptions egg;
};

/// Objective value and design gradient, plus every constraint's value and
/// gradient, sharing one state-Jacobian and one EGG-Jacobian factorization.
/// dcB_tangent (2|B| x n, from dcB_dalpha) belongs to the projection
/// operator; when omitted it is computed internally at the cost of one
/// boundary-mass factorization.
GradientResult compute_gradient(const StateProblem& problem, const GeometryMapping& mapping,
                                const SplineFunction& state, const Eigen::VectorXd& alpha,
                                const AdjointOptions& opts = {},
                                const Eigen::MatrixXd* dcB_tangent = nullptr);

/// Per-constraint (value, gradient) list; same chain and reuse as
/// compute_gradient.
std::vector<std::pair<double, Eigen::VectorXd>> constraint_gradients(const StateProblem& problem,
                                                                     const GeometryMapping& mapping,
                                                                     const SplineFunction& state,
                                                                     const Eigen::VectorXd& alpha,
                                                                     const AdjointOptions& opts = {});

} // namespace iga
