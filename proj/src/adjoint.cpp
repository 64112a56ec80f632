#include "iga/adjoint.hpp"

#include "iga/krylov.hpp"

#include <cmath>

namespace iga {

namespace {

Eigen::VectorXd gather_set(const Eigen::VectorXd& full, const std::vector<int>& ranks) {
    Eigen::VectorXd v(2 * ranks.size());
    for (std::size_t k = 0; k < ranks.size(); ++k) {
        v[2 * k] = full[2 * ranks[k]];
        v[2 * k + 1] = full[2 * ranks[k] + 1];
    }
    return v;
}

struct TangentData {
    // d c_A / d alpha_j as full geometry vectors, and d d_A / d alpha_j
    std::vector<Eigen::VectorXd> v;
    std::vector<Eigen::VectorXd> r;
};

/// Forward (tangent) sensitivities via Krylov solves with Gateaux products;
/// used by the matrix-free mode.
TangentData tangent_sensitivities(const StateProblem& problem, const GeometryMapping& m,
                                  const SplineFunction& u, const Eigen::VectorXd& alpha,
                                  const AdjointOptions& opts, const Eigen::MatrixXd* dcB_pre) {
    const int n = static_cast<int>(alpha.size());
    const int n_geo = m.space->num_active();
    const BoundaryCurve curve = problem.curve();

    const Eigen::MatrixXd dcB = dcB_pre ? *dcB_pre : dcB_dalpha(curve, alpha, *m.space, m.bset, opts.egg);

    const Eigen::VectorXd cI0 = m.inner_vec();
    auto egg_residual_at = [&](const Eigen::VectorXd& cI) {
        GeometryMapping mm = m;
        mm.set_inner(cI);
        return egg_system(mm, false, false, opts.egg).F;
    };
    auto egg_residual_cB = [&](const Eigen::VectorXd& cB) {
        GeometryMapping mm = m;
        mm.set_boundary(cB);
        return egg_system(mm, false, false, opts.egg).F;
    };

    const StateParts none;
    auto state_residual_d = [&](const Eigen::VectorXd& d) {
        SplineFunction uu = u;
        uu.coeffs.col(0) = d;
        return problem.state_residual(uu, m, alpha, none).residual;
    };
    auto state_residual_c = [&](const Eigen::VectorXd& cA) {
        GeometryMapping mm = m;
        for (int r2 = 0; r2 < n_geo; ++r2) {
            mm.coeffs(r2, 0) = cA[2 * r2];
            mm.coeffs(r2, 1) = cA[2 * r2 + 1];
        }
        return problem.state_residual(u, mm, alpha, none).residual;
    };
    auto state_residual_a = [&](const Eigen::VectorXd& al) {
        return problem.state_residual(u, m, al, none).residual;
    };

    Eigen::VectorXd cA0(2 * n_geo);
    for (int r2 = 0; r2 < n_geo; ++r2) {
        cA0[2 * r2] = m.coeffs(r2, 0);
        cA0[2 * r2 + 1] = m.coeffs(r2, 1);
    }
    const Eigen::VectorXd cB0 = m.boundary_vec();
    const Eigen::VectorXd d0 = u.coeffs.col(0);

    // Gateaux products share the converged base residuals across all applies
    const Eigen::VectorXd F0 = egg_residual_at(cI0);
    const Eigen::VectorXd B0 = state_residual_d(d0);
    auto gateaux = [](const auto& fn, const Eigen::VectorXd& base, const Eigen::VectorXd& at,
                      const Eigen::VectorXd& v) {
        const double eps = matfree_eps(at, v);
        return Eigen::VectorXd((fn(at + eps * v) - base) / eps);
    };
    // the right-hand-side products enter the gradient directly, so their
    // truncation error is suppressed with a centered difference composed from
    // the same forward primitive
    auto gateaux_centered = [](const auto& fn, const Eigen::VectorXd& at, const Eigen::VectorXd& v) {
        const double eps = matfree_eps(at, v);
        return matfree_apply(fn, at - eps * v, v, 2.0 * eps);
    };

    TangentData td;
    for (int j = 0; j < n; ++j) {
        const Eigen::VectorXd wj = dcB.col(j);
        const Eigen::VectorXd rhsF = gateaux_centered(egg_residual_cB, cB0, wj);
        const Eigen::VectorXd tj = -solve_krylov(
            [&](const Eigen::VectorXd& v) { return gateaux(egg_residual_at, F0, cI0, v); }, rhsF,
            opts.krylov_tol, opts.krylov_max_iter, opts.krylov_restart);

        Eigen::VectorXd vj = Eigen::VectorXd::Zero(2 * n_geo);
        for (std::size_t k = 0; k < m.bset.inner.size(); ++k) {
            vj[2 * m.bset.inner[k]] = tj[2 * k];
            vj[2 * m.bset.inner[k] + 1] = tj[2 * k + 1];
        }
        for (std::size_t k = 0; k < m.bset.boundary.size(); ++k) {
            vj[2 * m.bset.boundary[k]] = wj[2 * k];
            vj[2 * m.bset.boundary[k] + 1] = wj[2 * k + 1];
        }

        const Eigen::VectorXd rhsB = gateaux_centered(state_residual_c, cA0, vj) +
                                     gateaux_centered(state_residual_a, alpha, Eigen::VectorXd::Unit(n, j));
        // linear-in-state residuals make the forward product truncation-free,
        // so a large step suppresses the roundoff floor and the ill-conditioned
        // Nitsche system can be solved tightly
        const bool lin = problem.linear_state();
        const double state_tol = lin ? std::min(opts.krylov_tol, 1e-10) : opts.krylov_tol;
        auto state_apply = [&](const Eigen::VectorXd& v) {
            const double eps = lin ? 1e-3 * (1.0 + d0.cwiseAbs().maxCoeff()) / (1.0 + v.cwiseAbs().maxCoeff())
                                   : matfree_eps(d0, v);
            return matfree_apply(state_residual_d, d0, v, eps);
        };
        const Eigen::VectorXd rj =
            -solve_krylov(state_apply, rhsB, state_tol, opts.krylov_max_iter, opts.krylov_restart);
        td.v.push_back(vj);
        td.r.push_back(rj);
    }
    return td;
}

} // namespace

GradientResult compute_gradient(const StateProblem& problem, const GeometryMapping& m,
                                const SplineFunction& u, const Eigen::VectorXd& alpha,
                                const AdjointOptions& opts, const Eigen::MatrixXd* dcB_tangent) {
    if (!m.fold_free)
        throw std::invalid_argument("compute_gradient: mapping is not fold-free");
    const int n = static_cast<int>(alpha.size());
    const int n_geo = m.space->num_active();
    const BoundaryCurve curve = problem.curve();
    const int nc = problem.num_constraints();

    Eigen::MatrixXd dcB_local;
    if (!dcB_tangent && !opts.matrix_free) {
        dcB_local = dcB_dalpha(curve, alpha, *m.space, m.bset, opts.egg);
        dcB_tangent = &dcB_local;
    }

    GradientResult out;
    out.gradient = Eigen::VectorXd::Zero(n);

    if (opts.matrix_free) {
        // forward tangents with Krylov + Gateaux products; the chain value is
        // identical to the adjoint path
        {
            const StateParts none;
            const double bn = problem.state_residual(u, m, alpha, none).residual.lpNorm<Eigen::Infinity>();
            if (bn > opts.state_tol * (1.0 + std::abs(out.objective_value)))
                throw std::invalid_argument("compute_gradient: state residual not converged");
        }
        const TangentData td = tangent_sensitivities(problem, m, u, alpha, opts, dcB_tangent);
        auto contract = [&](const ScalarEval& ev) {
            Eigen::VectorXd g = ev.d_alpha;
            for (int j = 0; j < n; ++j) g[j] += ev.d_dA.dot(td.r[j]) + ev.d_cA.dot(td.v[j]);
            return g;
        };
        const ScalarEval obj = problem.objective(u, m, alpha, true);
        out.objective_value = obj.value;
        out.gradient = (obj.depends_on_state || obj.depends_on_geometry) ? contract(obj) : obj.d_alpha;
        for (int k = 0; k < nc; ++k) {
            const ScalarEval ck = problem.constraint(k, u, m, alpha, true);
            out.constraint_values.push_back(ck.value);
            out.constraint_gradients.push_back(
                (ck.depends_on_state || ck.depends_on_geometry) ? contract(ck) : ck.d_alpha);
        }
        return out;
    }

    StateParts parts;
    parts.dB_ddA = true;
    parts.dB_dcA = true;
    parts.dB_dalpha = true;
    const StateAssembly sa = problem.state_residual(u, m, alpha, parts);
    if (sa.residual.lpNorm<Eigen::Infinity>() > opts.state_tol)
        throw std::invalid_argument("compute_gradient: state residual not converged");

    const LuSolver factB(*sa.dB_ddA);
    const EggSystem egg = egg_system(m, true, true, opts.egg);
    const LuSolver factF(*egg.dF_dcI);

    auto chain = [&](const ScalarEval& ev) -> Eigen::VectorXd {
        if (!ev.depends_on_state && !ev.depends_on_geometry) return ev.d_alpha;
        Eigen::VectorXd a = Eigen::VectorXd::Zero(sa.residual.size());
        Eigen::VectorXd b = ev.d_cA;
        if (ev.depends_on_state) {
            a = factB.solve_transpose(ev.d_dA);
            b -= (*sa.dB_dcA).transpose() * a;
        }
        const Eigen::VectorXd b_I = gather_set(b, m.bset.inner);
        const Eigen::VectorXd b_B = gather_set(b, m.bset.boundary);
        const Eigen::VectorXd e = factF.solve_transpose(b_I);
        const Eigen::VectorXd q = -(*egg.dF_dcB).transpose() * e + b_B;
        Eigen::VectorXd g = dcB_tangent->transpose() * q;
        if (ev.depends_on_state) g -= sa.dB_dalpha->transpose() * a;
        g += ev.d_alpha;
        return g;
    };

    const ScalarEval obj = problem.objective(u, m, alpha, true);
    out.objective_value = obj.value;
    out.gradient = chain(obj);
    for (int k = 0; k < nc; ++k) {
        const ScalarEval ck = problem.constraint(k, u, m, alpha, true);
        out.constraint_values.push_back(ck.value);
        out.constraint_gradients.push_back(chain(ck));
    }
    (void)n_geo;
    return out;
}

std::vector<std::pair<double, Eigen::VectorXd>> constraint_gradients(const StateProblem& problem,
                                                                     const GeometryMapping& m,
                                                                     const SplineFunction& u,
                                                                     const Eigen::VectorXd& alpha,
                                                                     const AdjointOptions& opts) {
    const GradientResult r = compute_gradient(problem, m, u, alpha, opts);
    std::vector<std::pair<double, Eigen::VectorXd>> out;
    for (std::size_t k = 0; k < r.constraint_values.size(); ++k)
        out.push_back({r.constraint_values[k], r.constraint_gradients[k]});
    return out;
}

} // namespace iga
