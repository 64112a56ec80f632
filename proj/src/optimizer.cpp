#include "iga/optimizer.hpp"

#include "iga/qp.hpp"

#include <chrono>
#include <cmath>

namespace iga {

const WarmStartDatabase::Entry* WarmStartDatabase::lookup(const Eigen::VectorXd& alpha) const {
    const Entry* best = nullptr;
    double best_dist = eps_;
    for (const Entry& e : entries_) {
        const double d = (e.alpha - alpha).norm();
        if (d < best_dist) {
            best_dist = d;
            best = &e;
        }
    }
    return best;
}

std::optional<SplineFunction> warm_start_lookup(const WarmStartDatabase& db, const Eigen::VectorXd& alpha,
                                                const SpacePtr& target) {
    const WarmStartDatabase::Entry* e = db.lookup(alpha);
    if (!e) return std::nullopt;
    if (!e->mapping.space->same_base(*target)) return std::nullopt;
    const SpacePtr common = meet_space(*e->mapping.space, *target);
    const SplineFunction on_common = prolong(e->mapping, common);
    return restrict_to(on_common, target).first;
}

namespace {

double violation(const std::vector<double>& g) {
    double v = 0.0;
    for (double gi : g) v += std::max(0.0, -gi);
    return v;
}

struct Timer {
    std::chrono::steady_clock::time_point t0 = std::chrono::steady_clock::now();
    double seconds() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    }
};

} // namespace

OptimizeResult optimize(const StateProblem& problem, Eigen::VectorXd alpha, const OptimizerConfig& cfg) {
    const int n = static_cast<int>(alpha.size());
    const Eigen::VectorXd lo = problem.lower_bounds(), hi = problem.upper_bounds();
    if (((alpha - lo).minCoeff() < -1e-12) || ((hi - alpha).minCoeff() < -1e-12))
        throw std::invalid_argument("optimize: starting point violates the box bounds");

    WarmStartDatabase db(cfg.warm_eps);
    OptimizeResult out;
    Eigen::MatrixXd Bk = Eigen::MatrixXd::Identity(n, n);
    bool scaled_once = false;
    double nu_floor = 1.0;

    auto warm_for = [&](const Eigen::VectorXd&) -> const SplineFunction* { return nullptr; };
    (void)warm_for;

    Timer total;
    auto full_eval = [&](const Eigen::VectorXd& a) {
        const WarmStartDatabase::Entry* e = cfg.use_warm_start ? db.lookup(a) : nullptr;
        const SplineFunction* warm = e ? &e->mapping : nullptr;
        DesignEval ev = evaluate_design(problem, a, cfg.driver, true, nullptr, warm);
        db.append(a, ev.mapping.spline());
        return ev;
    };

    DesignEval cur = full_eval(alpha);
    {
        const double v0 = violation(cur.result.constraint_values);
        if (v0 > cfg.mu_feas && !cur.result.constraint_values.empty())
            throw std::invalid_argument("optimize: starting point infeasible beyond the slack");
    }

    Eigen::VectorXd grad_prev;
    Eigen::VectorXd lambda = Eigen::VectorXd::Zero(problem.num_constraints());
    double kkt = std::numeric_limits<double>::infinity();
    long dof_geo_sum = cur.dof_geometry, dof_state_sum = cur.dof_state;
    int dof_samples = 1;

    auto record = [&](const Eigen::VectorXd& a, double J, double kkt_res, double viol, const DesignEval* ev,
                      bool accepted) {
        IterationRecord r;
        r.index = static_cast<int>(out.history.size());
        r.alpha = a;
        r.objective = J;
        r.kkt_residual = kkt_res;
        r.max_violation = viol;
        if (ev) {
            r.dof_geometry = ev->dof_geometry;
            r.dof_state = ev->dof_state;
            r.fold_rounds = ev->param_stats.fold_rounds;
        }
        r.wall_seconds = total.seconds();
        r.accepted = accepted;
        out.history.push_back(std::move(r));
    };

    const int nc = problem.num_constraints();
    int iter = 0;
    for (; iter < cfg.max_outer_iter; ++iter) {
        const Eigen::VectorXd& gJ = cur.result.gradient;
        const std::vector<double>& gv = cur.result.constraint_values;

        // QP data: nonlinear constraints with slack, then box rows
        const int rows = nc + 2 * n;
        Eigen::MatrixXd A(rows, n);
        Eigen::VectorXd b(rows);
        for (int i = 0; i < nc; ++i) {
            A.row(i) = cur.result.constraint_gradients[i].transpose();
            b[i] = -gv[i];  // the linearized model targets exact feasibility;
                            // the slack enters only the termination test
        }
        for (int j = 0; j < n; ++j) {
            A.row(nc + j) = Eigen::RowVectorXd::Unit(n, j);
            b[nc + j] = lo[j] - alpha[j];
            A.row(nc + n + j) = -Eigen::RowVectorXd::Unit(n, j);
            b[nc + n + j] = alpha[j] - hi[j];
        }

        const QpResult qp = solve_qp(Bk, gJ, A, b);
        const Eigen::VectorXd p = qp.p;
        lambda = qp.multipliers.head(nc);

        // KKT residual: stationarity of the Lagrangian plus violation beyond slack
        Eigen::VectorXd stat = gJ;
        for (int i = 0; i < rows; ++i) stat -= qp.multipliers[i] * A.row(i).transpose();
        double viol_now = 0.0;
        for (int i = 0; i < nc; ++i) viol_now = std::max(viol_now, -gv[i] - cfg.mu_feas);
        kkt = std::max(stat.lpNorm<Eigen::Infinity>(), viol_now);
        if (kkt <= cfg.kkt_tol || p.lpNorm<Eigen::Infinity>() <= 1e-14) {
            record(alpha, cur.result.objective_value, kkt, violation(gv), &cur, true);
            out.converged = kkt <= cfg.kkt_tol;
            break;
        }

        // l1 merit line search on the incumbent (frozen) basis
        const double nu = std::max(nu_floor, 2.0 * qp.multipliers.lpNorm<Eigen::Infinity>());
        const double phi0 = cur.result.objective_value + nu * violation(gv);
        const double dphi = gJ.dot(p) - nu * violation(gv);
        const FrozenBasis fb{cur.mapping.space, cur.state.space};
        const SplineFunction warm = cur.mapping.spline();

        double step = 1.0;
        bool accepted = false;
        Eigen::VectorXd a_try;
        for (int ls = 0; ls < 12; ++ls) {
            a_try = alpha + step * p;
            for (int j = 0; j < n; ++j) a_try[j] = std::clamp(a_try[j], lo[j], hi[j]);
            bool evaluated = false;
            double phi = 0.0;
            try {
                const DesignEval trial = evaluate_design(problem, a_try, cfg.driver, false, &fb, &warm);
                phi = trial.result.objective_value + nu * violation(trial.result.constraint_values);
                record(a_try, trial.result.objective_value, kkt, violation(trial.result.constraint_values),
                       &trial, false);
                evaluated = true;
            } catch (const DesignEvalError&) {
                // the incumbent basis cannot represent this trial (typically a
                // fold); re-select the basis for this point instead
                try {
                    const DesignEval trial = evaluate_design(problem, a_try, cfg.driver, false);
                    phi = trial.result.objective_value + nu * violation(trial.result.constraint_values);
                    record(a_try, trial.result.objective_value, kkt,
                           violation(trial.result.constraint_values), &trial, false);
                    evaluated = true;
                } catch (const DesignEvalError&) {
                    // halve the step
                }
            }
            if (evaluated && (phi <= phi0 + 1e-4 * step * dphi || phi < phi0)) {
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if (!accepted) {
            // one retry with a reset quasi-Newton model before giving up
            if (scaled_once) {
                scaled_once = false;
                Bk = Eigen::MatrixXd::Identity(n, n);
                continue;
            }
            record(alpha, cur.result.objective_value, kkt, violation(gv), &cur, true);
            break;
        }

        // accepted iterate: re-select the basis and compute fresh gradients
        DesignEval next = full_eval(a_try);
        dof_geo_sum += next.dof_geometry;
        dof_state_sum += next.dof_state;
        ++dof_samples;

        // damped BFGS on the Lagrangian gradient
        Eigen::VectorXd gL_prev = cur.result.gradient;
        for (int i = 0; i < nc; ++i) gL_prev -= lambda[i] * cur.result.constraint_gradients[i];
        Eigen::VectorXd gL_next = next.result.gradient;
        for (int i = 0; i < nc; ++i) gL_next -= lambda[i] * next.result.constraint_gradients[i];
        const Eigen::VectorXd s = a_try - alpha;
        Eigen::VectorXd y = gL_next - gL_prev;
        const double sBs = s.dot(Bk * s);
        const double sy = s.dot(y);
        if (sy < 0.2 * sBs) {
            const double theta = 0.8 * sBs / (sBs - sy);
            y = theta * y + (1.0 - theta) * (Bk * s);
        }
        const double sy2 = s.dot(y);
        scaled_once = true;  // enables one model reset after a failed line search
        if (sy2 > 1e-14 && sBs > 1e-14)
            Bk = Bk - (Bk * s) * (s.transpose() * Bk) / sBs + y * y.transpose() / sy2;

        // persistent infeasibility beyond the slack tightens the merit penalty
        if (violation(next.result.constraint_values) > cfg.mu_feas) nu_floor = std::min(1e6, nu_floor * 2.0);

        alpha = a_try;
        cur = std::move(next);
        record(alpha, cur.result.objective_value, kkt, violation(cur.result.constraint_values), &cur, true);
    }

    out.alpha = alpha;
    out.objective = cur.result.objective_value;
    out.constraint_values = cur.result.constraint_values;
    out.iterations = iter;
    out.best_objective = out.objective;
    for (const IterationRecord& r : out.history)
        if (r.accepted && r.max_violation <= cfg.mu_feas) out.best_objective = std::min(out.best_objective, r.objective);
    out.avg_dof_geometry = static_cast<double>(dof_geo_sum) / dof_samples;
    out.avg_dof_state = static_cast<double>(dof_state_sum) / dof_samples;
    return out;
}

} // namespace iga
