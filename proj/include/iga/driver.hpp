#pragma once

#include "iga/adjoint.hpp"

namespace iga {

struct DriverConfig {
    int degree = 3;
    int coarse_cells_x = 7, coarse_cells_y = 7;
    double mu = 1e-4;  // boundary projection threshold
    int u_ref = 0;     // uniform h-refinements of the state space w.r.t. the geometry space
    bool static_basis = false;
    int static_cells_x = 12, static_cells_y = 12;  // SBA element counts
    int max_levels = 6;
    double state_newton_tol = 1e-10;
    int state_newton_max_iter = 25;
    EggOptions egg;
    AdjointOptions adjoint;
};

/// Basis tuple pinned by a previous evaluation (used for line-search trial
/// points and finite-difference probes).
struct FrozenBasis {
    SpacePtr geometry;
    SpacePtr state;
};

struct DesignEvalError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct DesignEval {
    GeometryMapping mapping;
    SplineFunction state;
    GradientResult result;  // constraint values always filled; gradients only on request
    ParameterizeStats param_stats;
    int dof_geometry = 0;
    int dof_state = 0;
};

/// Solves the (linear or mildly nonlinear) state equation on the given space.
SplineFunction solve_state(const StateProblem& problem, const GeometryMapping& mapping,
                           SpacePtr state_space, const Eigen::VectorXd& alpha, const DriverConfig& cfg);

/// One full design evaluation: basis selection, boundary projection, EGG
/// solve with fold repair, state solve, objective/constraints and (on
/// request) adjoint gradients.
DesignEval evaluate_design(const StateProblem& problem, const Eigen::VectorXd& alpha,
                           const DriverConfig& cfg, bool want_gradient,
                           const FrozenBasis* frozen = nullptr, const SplineFunction* warm_start = nullptr);

struct FdCheckResult {
    double objective = 0.0;
    Eigen::VectorXd adjoint_grad;
    Eigen::VectorXd fd_grad;
    Eigen::VectorXd rel_error;
    std::vector<std::string> component_errors;  // pipeline failures at probe points
};

/// Central differences of the discrete objective against the adjoint
/// gradient; with frozen_basis the basis tuple selected at alpha is reused
/// for every probe.
FdCheckResult fd_gradient_check(const StateProblem& problem, const Eigen::VectorXd& alpha, double h,
                                bool frozen_basis, const DriverConfig& cfg);

} // namespace iga
