#include "iga/driver.hpp"

#include <cmath>

namespace iga {

SplineFunction solve_state(const StateProblem& problem, const GeometryMapping& mapping,
                           SpacePtr state_space, const Eigen::VectorXd& alpha, const DriverConfig& cfg) {
    SplineFunction u{state_space, Eigen::MatrixXd::Zero(state_space->num_active(), 1)};
    StateParts parts;
    parts.dB_ddA = true;

    for (int it = 0; it <= cfg.state_newton_max_iter; ++it) {
        const StateAssembly sa = problem.state_residual(u, mapping, alpha, parts);
        const double norm = sa.residual.lpNorm<Eigen::Infinity>();
        if (norm <= cfg.state_newton_tol) return u;
        const LuSolver lu(*sa.dB_ddA);
        u.coeffs.col(0) -= lu.solve(sa.residual);
        if (problem.linear_state()) {
            const StateAssembly chk = problem.state_residual(u, mapping, alpha, {});
            if (chk.residual.lpNorm<Eigen::Infinity>() <= cfg.state_newton_tol * 10 + 1e-9 * norm) return u;
        }
    }
    throw DesignEvalError("solve_state: state solve did not converge");
}

DesignEval evaluate_design(const StateProblem& problem, const Eigen::VectorXd& alpha,
                           const DriverConfig& cfg, bool want_gradient, const FrozenBasis* frozen,
                           const SplineFunction* warm_start) {
    DesignEval ev;
    const BoundaryCurve curve = problem.curve();
    try {
        if (frozen) {
            ev.mapping = parameterize_frozen(alpha, curve, frozen->geometry, &ev.param_stats, cfg.egg,
                                             warm_start);
            if (!ev.mapping.fold_free)
                throw DesignEvalError("evaluate_design: frozen-basis mapping folded");
        } else if (cfg.static_basis) {
            SpacePtr s = make_space(cfg.degree, cfg.static_cells_x, cfg.static_cells_y, cfg.max_levels);
            ev.mapping = parameterize_frozen(alpha, curve, s, &ev.param_stats, cfg.egg, warm_start);
            if (!ev.mapping.fold_free)
                throw DesignEvalError("evaluate_design: static-basis mapping folded");
        } else {
            SpacePtr s = make_space(cfg.degree, cfg.coarse_cells_x, cfg.coarse_cells_y, cfg.max_levels);
            ev.mapping = parameterize(alpha, curve, s, cfg.mu, &ev.param_stats, cfg.egg, warm_start);
        }

        SpacePtr state_space = frozen ? frozen->state : ev.mapping.space;
        if (!frozen)
            for (int r = 0; r < cfg.u_ref; ++r) state_space = state_space->uniform_rebase();

        ev.state = solve_state(problem, ev.mapping, state_space, alpha, cfg);
        ev.dof_geometry = 2 * ev.mapping.space->num_active();
        ev.dof_state = state_space->num_active();

        if (want_gradient) {
            // the boundary tangent is part of the projection operator; build it
            // once so the gradient chain reuses exactly two factorizations
            const Eigen::MatrixXd dcB =
                dcB_dalpha(curve, alpha, *ev.mapping.space, ev.mapping.bset, cfg.egg);
            ev.result = compute_gradient(problem, ev.mapping, ev.state, alpha, cfg.adjoint, &dcB);
        } else {
            const ScalarEval obj = problem.objective(ev.state, ev.mapping, alpha, false);
            ev.result.objective_value = obj.value;
            for (int k = 0; k < problem.num_constraints(); ++k)
                ev.result.constraint_values.push_back(
                    problem.constraint(k, ev.state, ev.mapping, alpha, false).value);
        }
    } catch (const DesignEvalError&) {
        throw;
    } catch (const std::exception& e) {
        throw DesignEvalError(std::string("evaluate_design: ") + e.what());
    }
    return ev;
}

FdCheckResult fd_gradient_check(const StateProblem& problem, const Eigen::VectorXd& alpha, double h,
                                bool frozen_basis, const DriverConfig& cfg) {
    if (h <= 0.0) throw std::invalid_argument("fd_gradient_check: h must be positive");
    const int n = static_cast<int>(alpha.size());

    const DesignEval center = evaluate_design(problem, alpha, cfg, true);
    FrozenBasis fb{center.mapping.space, center.state.space};
    const SplineFunction warm = center.mapping.spline();

    FdCheckResult out;
    out.objective = center.result.objective_value;
    out.adjoint_grad = center.result.gradient;
    out.fd_grad = Eigen::VectorXd::Zero(n);
    out.rel_error = Eigen::VectorXd::Zero(n);
    out.component_errors.assign(n, "");

    for (int j = 0; j < n; ++j) {
        Eigen::VectorXd ap = alpha, am = alpha;
        ap[j] += h;
        am[j] -= h;
        try {
            const DesignEval ep = frozen_basis ? evaluate_design(problem, ap, cfg, false, &fb, &warm)
                                               : evaluate_design(problem, ap, cfg, false);
            const DesignEval em = frozen_basis ? evaluate_design(problem, am, cfg, false, &fb, &warm)
                                               : evaluate_design(problem, am, cfg, false);
            out.fd_grad[j] = (ep.result.objective_value - em.result.objective_value) / (2.0 * h);
            const double scale = std::max(1.0, std::abs(out.fd_grad[j]));
            out.rel_error[j] = std::abs(out.fd_grad[j] - out.adjoint_grad[j]) / scale;
        } catch (const std::exception& e) {
            out.component_errors[j] = e.what();
            out.rel_error[j] = std::numeric_limits<double>::quiet_NaN();
        }
    }
    return out;
}

} // namespace iga
