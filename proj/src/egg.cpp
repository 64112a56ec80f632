#include "iga/egg.hpp"

#include "iga/geom_delta.hpp"

#include <cmath>
#include <set>

namespace iga {

namespace {

Eigen::VectorXd gather(const Eigen::MatrixXd& coeffs, const std::vector<int>& ranks) {
    Eigen::VectorXd v(2 * ranks.size());
    for (std::size_t k = 0; k < ranks.size(); ++k) {
        v[2 * k] = coeffs(ranks[k], 0);
        v[2 * k + 1] = coeffs(ranks[k], 1);
    }
    return v;
}

void scatter(Eigen::MatrixXd& coeffs, const std::vector<int>& ranks, const Eigen::VectorXd& v) {
    for (std::size_t k = 0; k < ranks.size(); ++k) {
        coeffs(ranks[k], 0) = v[2 * k];
        coeffs(ranks[k], 1) = v[2 * k + 1];
    }
}

} // namespace

Eigen::VectorXd GeometryMapping::inner_vec() const { return gather(coeffs, bset.inner); }
Eigen::VectorXd GeometryMapping::boundary_vec() const { return gather(coeffs, bset.boundary); }
void GeometryMapping::set_inner(const Eigen::VectorXd& v) { scatter(coeffs, bset.inner, v); }
void GeometryMapping::set_boundary(const Eigen::VectorXd& v) { scatter(coeffs, bset.boundary, v); }

// ---------------------------------------------------------------------------
// boundary projection
// ---------------------------------------------------------------------------

namespace {

struct BoundarySystem {
    SpMat mass;          // |B| x |B|
    Eigen::MatrixXd rhs;  // |B| x 2
};

BoundarySystem boundary_mass_rhs(const BoundaryCurve& curve, const Eigen::VectorXd& alpha,
                                 const HierarchicalSpace& space, const BoundaryIndexSet& bset,
                                 const EggOptions& opts) {
    const int nb = static_cast<int>(bset.boundary.size());
    IntegrateOptions io;
    io.rule = opts.quad;
    io.nders = 0;
    io.res_size = 3 * nb;  // rhs_x, rhs_y interleaved with nothing; use rows [0,nb) x, [nb,2nb) y
    io.want_jacobian = true;
    io.jac_rows = io.jac_cols = nb;
    io.parallel = opts.parallel;

    const AssemblyOutput out = integrate_boundary(
        {Side::South, Side::East, Side::North, Side::West}, {&space}, nullptr,
        [&](const CellQuad& cq, LocalOut& lo) {
            const auto& b = cq.basis[0];
            const int nf = static_cast<int>(b.funcs.size());
            for (std::size_t q = 0; q < cq.pts.size(); ++q) {
                const double s = side_parameter(cq.side, cq.pts[q]);
                const Eigen::Vector2d d = curve.eval(cq.side, s, alpha);
                for (int i = 0; i < nf; ++i) {
                    if (!bset.is_boundary[b.funcs[i]]) continue;
                    const int bi = bset.pos[b.funcs[i]];
                    const double v = b.tables[0](i, static_cast<int>(q)) * cq.w[q];
                    lo.add(bi, v * d[0]);
                    lo.add(nb + bi, v * d[1]);
                    for (int j = 0; j < nf; ++j) {
                        if (!bset.is_boundary[b.funcs[j]]) continue;
                        lo.add(bi, bset.pos[b.funcs[j]], v * b.tables[0](j, static_cast<int>(q)));
                    }
                }
            }
        },
        io);

    BoundarySystem sys;
    sys.mass = *out.jacobian;
    sys.rhs.resize(nb, 2);
    sys.rhs.col(0) = out.residual.segment(0, nb);
    sys.rhs.col(1) = out.residual.segment(nb, nb);
    return sys;
}

/// r_i and ||phi_i||_{L2} over the boundary functions, for the current c_B.
std::pair<Eigen::VectorXd, Eigen::VectorXd> projection_residuals(
    const BoundaryCurve& curve, const Eigen::VectorXd& alpha, const HierarchicalSpace& space,
    const BoundaryIndexSet& bset, const Eigen::MatrixXd& c_B, const EggOptions& opts) {
    const int nb = static_cast<int>(bset.boundary.size());
    IntegrateOptions io;
    io.rule = opts.quad;
    io.nders = 0;
    io.res_size = 2 * nb;
    io.parallel = opts.parallel;

    const AssemblyOutput out = integrate_boundary(
        {Side::South, Side::East, Side::North, Side::West}, {&space}, nullptr,
        [&](const CellQuad& cq, LocalOut& lo) {
            const auto& b = cq.basis[0];
            const int nf = static_cast<int>(b.funcs.size());
            for (std::size_t q = 0; q < cq.pts.size(); ++q) {
                const double s = side_parameter(cq.side, cq.pts[q]);
                const Eigen::Vector2d d = curve.eval(cq.side, s, alpha);
                Eigen::Vector2d dh = Eigen::Vector2d::Zero();
                for (int j = 0; j < nf; ++j) {
                    if (!bset.is_boundary[b.funcs[j]]) continue;
                    dh += b.tables[0](j, static_cast<int>(q)) * c_B.row(bset.pos[b.funcs[j]]).transpose();
                }
                const double err2 = (d - dh).squaredNorm();
                for (int i = 0; i < nf; ++i) {
                    if (!bset.is_boundary[b.funcs[i]]) continue;
                    const double phi = b.tables[0](i, static_cast<int>(q));
                    const int bi = bset.pos[b.funcs[i]];
                    lo.add(bi, cq.w[q] * phi * err2);
                    lo.add(nb + bi, cq.w[q] * phi * phi);
                }
            }
        },
        io);

    Eigen::VectorXd r(nb), norms(nb);
    for (int i = 0; i < nb; ++i) {
        r[i] = std::sqrt(std::max(0.0, out.residual[i]));
        norms[i] = std::sqrt(std::max(0.0, out.residual[nb + i]));
    }
    return {r, norms};
}

} // namespace

BoundaryProjection project_boundary(const BoundaryCurve& curve, const Eigen::VectorXd& alpha,
                                    SpacePtr space, const EggOptions& opts) {
    BoundaryProjection p;
    p.space = std::move(space);
    p.bset = boundary_decompose(*p.space);
    const BoundarySystem sys = boundary_mass_rhs(curve, alpha, *p.space, p.bset, opts);
    const LuSolver lu(sys.mass);
    p.c_B = lu.solve(sys.rhs);
    auto [r, norms] = projection_residuals(curve, alpha, *p.space, p.bset, p.c_B, opts);
    p.report.per_function = r;
    p.report.thresholds = Eigen::VectorXd::Zero(r.size());
    p.report.residual_total = std::sqrt(0.5 * r.squaredNorm());
    return p;
}

BoundaryProjection project_boundary_adaptive(const BoundaryCurve& curve, const Eigen::VectorXd& alpha,
                                             SpacePtr space, double mu, const EggOptions& opts) {
    if (mu <= 0.0) throw std::invalid_argument("project_boundary_adaptive: mu must be positive");
    int rounds = 0;
    for (;;) {
        BoundaryProjection p = project_boundary(curve, alpha, space, opts);
        auto [r, norms] = std::pair{p.report.per_function, Eigen::VectorXd()};
        // recompute norms: project_boundary discarded them; redo cheaply
        auto rn = projection_residuals(curve, alpha, *p.space, p.bset, p.c_B, opts);
        r = rn.first;
        const Eigen::VectorXd& nr = rn.second;
        Eigen::VectorXd thresholds(r.size());
        std::vector<int> violators;
        for (int i = 0; i < r.size(); ++i) {
            thresholds[i] = mu / std::sqrt(std::max(nr[i], 1e-300));
            if (r[i] > thresholds[i]) violators.push_back(p.bset.boundary[i]);
        }
        p.report.thresholds = thresholds;
        p.report.refinement_rounds = rounds;
        if (violators.empty()) return p;

        std::set<std::pair<int, std::pair<int, int>>> marks;
        for (int rank : violators)
            for (const CellId& c : p.space->support_cells(rank)) marks.insert({c.level, {c.cx, c.cy}});
        std::vector<CellId> marked;
        for (const auto& [l, xy] : marks) marked.push_back({l, xy.first, xy.second});
        space = p.space->refine_cells(marked);  // throws when the depth budget is exhausted
        ++rounds;
    }
}

Eigen::MatrixXd coons_inner_guess(const SpacePtr& space, const BoundaryIndexSet& bset,
                                  const Eigen::MatrixXd& c_B) {
    Eigen::MatrixXd coeffs = Eigen::MatrixXd::Zero(space->num_active(), 2);
    for (std::size_t k = 0; k < bset.boundary.size(); ++k) coeffs.row(bset.boundary[k]) = c_B.row(k);
    const SplineFunction dh{space, coeffs};

    const Eigen::Vector2d P00 = dh.value(0, 0), P10 = dh.value(1, 0), P01 = dh.value(0, 1), P11 = dh.value(1, 1);
    for (int rank : bset.inner) {
        const Eigen::Vector2d g = space->greville(rank);
        const double x = g[0], y = g[1];
        const Eigen::Vector2d S = dh.value(x, 0), N = dh.value(x, 1), W = dh.value(0, y), E = dh.value(1, y);
        coeffs.row(rank) = ((1 - y) * S + y * N + (1 - x) * W + x * E -
                            ((1 - x) * (1 - y) * P00 + x * (1 - y) * P10 + (1 - x) * y * P01 + x * y * P11))
                               .transpose();
    }
    return coeffs;
}

// ---------------------------------------------------------------------------
// EGG residual and Jacobian
// ---------------------------------------------------------------------------

EggSystem egg_system(const GeometryMapping& m, bool want_dcI, bool want_dcB, const EggOptions& opts) {
    const int ni = static_cast<int>(m.bset.inner.size());
    const int nb = static_cast<int>(m.bset.boundary.size());
    const SplineFunction map = m.spline();
    const double eps = opts.metric_eps;

    IntegrateOptions io;
    io.rule = opts.quad;
    io.nders = 2;
    io.res_size = 2 * ni;
    io.want_jacobian = want_dcI || want_dcB;
    io.jac_rows = 2 * ni;
    io.jac_cols = 2 * (ni + nb);  // columns: inner block first, then boundary block
    io.parallel = opts.parallel;

    const auto& bset = m.bset;
    const AssemblyOutput out = integrate(
        {m.space.get()}, &map,
        [&](const CellQuad& cq, LocalOut& lo) {
            const auto& b = cq.basis[0];
            const int nf = static_cast<int>(b.funcs.size());
            const bool with_jac = want_dcI || want_dcB;
            // local test-function list (inner only) and dense accumulators
            std::vector<int> test_local, test_pos;
            for (int i = 0; i < nf; ++i)
                if (!bset.is_boundary[b.funcs[i]]) {
                    test_local.push_back(i);
                    test_pos.push_back(bset.pos[b.funcs[i]]);
                }
            const int nt = static_cast<int>(test_local.size());
            if (nt == 0) return;
            Eigen::VectorXd res = Eigen::VectorXd::Zero(2 * nt);
            Eigen::MatrixXd jac;
            if (with_jac) jac = Eigen::MatrixXd::Zero(2 * nt, 2 * nf);

            for (std::size_t q = 0; q < cq.pts.size(); ++q) {
                const int qi = static_cast<int>(q);
                const MapData& md = cq.map[q];
                const double g11 = md.J.col(0).squaredNorm();
                const double g22 = md.J.col(1).squaredNorm();
                const double g12 = md.J.col(0).dot(md.J.col(1));
                const double W = g11 + g22 + eps;
                const double Nd[2] = {g22 * md.Hx[0] - 2 * g12 * md.Hx[1] + g11 * md.Hx[2],
                                      g22 * md.Hy[0] - 2 * g12 * md.Hy[1] + g11 * md.Hy[2]};
                for (int t = 0; t < nt; ++t) {
                    const double phi = b.tables[0](test_local[t], qi);
                    res[2 * t] += cq.w[q] * phi * Nd[0] / W;
                    res[2 * t + 1] += cq.w[q] * phi * Nd[1] / W;
                }
                if (!with_jac) continue;
                for (int j = 0; j < nf; ++j) {
                    const Eigen::Vector2d dphi(b.tables[1](j, qi), b.tables[2](j, qi));
                    const Eigen::Vector3d hphi(b.tables[3](j, qi), b.tables[4](j, qi), b.tables[5](j, qi));
                    for (int e = 0; e < 2; ++e) {
                        const double dg11 = 2 * dphi[0] * md.J(e, 0);
                        const double dg22 = 2 * dphi[1] * md.J(e, 1);
                        const double dg12 = dphi[0] * md.J(e, 1) + md.J(e, 0) * dphi[1];
                        const double dW = dg11 + dg22;
                        double dNd[2];
                        for (int d = 0; d < 2; ++d) {
                            const Eigen::Vector3d& Hd = (d == 0) ? md.Hx : md.Hy;
                            dNd[d] = dg22 * Hd[0] - 2 * dg12 * Hd[1] + dg11 * Hd[2];
                            if (d == e) dNd[d] += g22 * hphi[0] - 2 * g12 * hphi[1] + g11 * hphi[2];
                        }
                        const double c0 = dNd[0] / W - Nd[0] * dW / (W * W);
                        const double c1 = dNd[1] / W - Nd[1] * dW / (W * W);
                        for (int t = 0; t < nt; ++t) {
                            const double phi = b.tables[0](test_local[t], qi);
                            jac(2 * t, 2 * j + e) += cq.w[q] * phi * c0;
                            jac(2 * t + 1, 2 * j + e) += cq.w[q] * phi * c1;
                        }
                    }
                }
            }

            for (int t = 0; t < nt; ++t) {
                lo.add(2 * test_pos[t], res[2 * t]);
                lo.add(2 * test_pos[t] + 1, res[2 * t + 1]);
            }
            if (with_jac)
                for (int j = 0; j < nf; ++j) {
                    const bool jb = bset.is_boundary[b.funcs[j]] != 0;
                    if (jb && !want_dcB) continue;
                    if (!jb && !want_dcI) continue;
                    for (int e = 0; e < 2; ++e) {
                        const int col = jb ? 2 * ni + 2 * bset.pos[b.funcs[j]] + e : 2 * bset.pos[b.funcs[j]] + e;
                        for (int t = 0; t < nt; ++t) {
                            lo.add(2 * test_pos[t], col, jac(2 * t, 2 * j + e));
                            lo.add(2 * test_pos[t] + 1, col, jac(2 * t + 1, 2 * j + e));
                        }
                    }
                }
        },
        io);

    EggSystem sys;
    sys.F = out.residual;
    if (io.want_jacobian) {
        const SpMat& J = *out.jacobian;
        if (want_dcI) sys.dF_dcI = J.leftCols(2 * ni);
        if (want_dcB) sys.dF_dcB = J.rightCols(2 * nb);
    }
    return sys;
}

// ---------------------------------------------------------------------------
// Newton, folds, parameterize
// ---------------------------------------------------------------------------

NewtonStats newton_solve_egg(GeometryMapping& m, const EggOptions& opts) {
    NewtonStats stats;
    Eigen::VectorXd cI = m.inner_vec();
    double norm = egg_system(m, false, false, opts).F.lpNorm<Eigen::Infinity>();
    stats.residual_history.push_back(norm);

    while (norm > opts.newton_tol) {
        if (stats.iterations >= opts.newton_max_iter)
            throw NewtonFailure("newton_solve_egg: max iterations exceeded", cI, stats);
        const EggSystem sys = egg_system(m, true, false, opts);
        const LuSolver lu(*sys.dF_dcI);
        const Eigen::VectorXd step = lu.solve(sys.F);
        double damping = 1.0;
        Eigen::VectorXd cI_trial;
        double trial_norm = norm;
        for (;;) {
            cI_trial = cI - damping * step;
            m.set_inner(cI_trial);
            trial_norm = egg_system(m, false, false, opts).F.lpNorm<Eigen::Infinity>();
            if (trial_norm < norm || trial_norm <= opts.newton_tol) break;
            damping *= 0.5;
            if (damping < std::pow(2.0, -10))
                throw NewtonFailure("newton_solve_egg: line search step underflow", cI, stats);
        }
        cI = cI_trial;
        norm = trial_norm;
        ++stats.iterations;
        stats.residual_history.push_back(norm);
    }
    m.set_inner(cI);
    stats.converged = true;
    return stats;
}

std::vector<CellId> detect_folds(GeometryMapping& m, const EggOptions& opts) {
    const QuadratureRule g = gauss_rule(opts.quad);
    std::vector<CellId> defective;
    for (const CellId& c : m.space->active_cells()) {
        const auto r = m.space->cell_rect(c);
        std::vector<double> xs, ys;
        auto fill = [&](std::vector<double>& v, double a, double b) {
            for (int q = 0; q < g.size(); ++q) v.push_back(a + (b - a) * g.points[q]);
            v.push_back(a);
            v.push_back(b);
            v.push_back(0.5 * (a + b));
            for (int k = 0; k < 4; ++k) v.push_back(a + (b - a) * (k + 0.5) / 4.0);
        };
        fill(xs, r[0], r[1]);
        fill(ys, r[2], r[3]);
        const auto cb = m.space->eval_on_cell(c, xs, ys, 1);
        const int nq = static_cast<int>(xs.size() * ys.size());
        Eigen::Matrix<double, 2, Eigen::Dynamic> loc(2, cb.funcs.size());
        for (std::size_t j = 0; j < cb.funcs.size(); ++j) loc.col(j) = m.coeffs.row(cb.funcs[j]).transpose();
        const Eigen::MatrixXd Jx = loc * cb.tables[1];  // 2 x nq, d x / d xi
        const Eigen::MatrixXd Jy = loc * cb.tables[2];
        bool bad = false;
        for (int q = 0; q < nq && !bad; ++q)
            bad = (Jx(0, q) * Jy(1, q) - Jy(0, q) * Jx(1, q)) <= 0.0;
        if (bad) defective.push_back(c);
    }
    m.fold_free = defective.empty();
    return defective;
}

namespace {

GeometryMapping run_pipeline(const Eigen::VectorXd& alpha, const BoundaryCurve& curve, SpacePtr space,
                             std::optional<double> adaptive_mu, ParameterizeStats* stats,
                             const EggOptions& opts, const SplineFunction* warm_start, bool repair_folds) {
    BoundaryProjection proj = adaptive_mu ? project_boundary_adaptive(curve, alpha, space, *adaptive_mu, opts)
                                          : project_boundary(curve, alpha, space, opts);
    ParameterizeStats local;
    local.projection = proj.report;

    GeometryMapping m;
    m.space = proj.space;
    m.bset = proj.bset;
    if (warm_start) {
        auto [restricted, residue] = restrict_to(*warm_start, proj.space);
        m.coeffs = std::move(restricted.coeffs);
        // boundary rows always come from the fresh projection
        for (std::size_t k = 0; k < proj.bset.boundary.size(); ++k)
            m.coeffs.row(proj.bset.boundary[k]) = proj.c_B.row(static_cast<int>(k));
    } else {
        m.coeffs = coons_inner_guess(proj.space, proj.bset, proj.c_B);
    }

    for (int round = 0;; ++round) {
        const NewtonStats ns = newton_solve_egg(m, opts);
        local.newton_iterations_total += ns.iterations;
        if (round == 0) local.newton_iterations_first = ns.iterations;
        const std::vector<CellId> folds = detect_folds(m, opts);
        if (folds.empty()) break;
        if (!repair_folds) break;
        if (round >= opts.max_fold_rounds)
            throw ParameterizeFailure("parameterize: fold repair did not terminate", folds);
        local.fold_rounds = round + 1;

        // refine every function that does not vanish on a defective cell
        std::set<std::tuple<int, int, int>> marks;
        for (const CellId& c : folds)
            for (int rank : m.space->cell_functions(c))
                for (const CellId& sc : m.space->support_cells(rank)) marks.insert({sc.level, sc.cx, sc.cy});
        std::vector<CellId> marked;
        for (const auto& [l, cx, cy] : marks) marked.push_back({l, cx, cy});
        SpacePtr refined;
        try {
            refined = m.space->refine_cells(marked);
        } catch (const std::runtime_error&) {
            throw ParameterizeFailure("parameterize: hierarchy budget exhausted during fold repair", folds);
        }
        // prolong the defective mapping as the next initial guess; the
        // boundary is re-projected on the enriched trace space (folds at a
        // corner are determined by the boundary coefficients alone, so the
        // repair must be allowed to improve them)
        const SplineFunction next = prolong(m.spline(), refined);
        BoundaryProjection reproj = project_boundary(curve, alpha, refined, opts);
        m.space = refined;
        m.coeffs = next.coeffs;
        m.bset = reproj.bset;
        for (std::size_t k = 0; k < reproj.bset.boundary.size(); ++k)
            m.coeffs.row(reproj.bset.boundary[k]) = reproj.c_B.row(static_cast<int>(k));
        m.fold_free = false;
    }
    if (stats) *stats = local;
    return m;
}

} // namespace

GeometryMapping parameterize(const Eigen::VectorXd& alpha, const BoundaryCurve& curve, SpacePtr coarse_space,
                             double mu, ParameterizeStats* stats, const EggOptions& opts,
                             const SplineFunction* warm_start) {
    return run_pipeline(alpha, curve, std::move(coarse_space), mu, stats, opts, warm_start, true);
}

GeometryMapping parameterize_frozen(const Eigen::VectorXd& alpha, const BoundaryCurve& curve, SpacePtr space,
                                    ParameterizeStats* stats, const EggOptions& opts,
                                    const SplineFunction* warm_start) {
    return run_pipeline(alpha, curve, std::move(space), std::nullopt, stats, opts, warm_start, false);
}

// ---------------------------------------------------------------------------
// boundary sensitivity
// ---------------------------------------------------------------------------

namespace {

Eigen::MatrixXd curve_partial_matrix(const BoundaryCurve& curve, const Eigen::VectorXd& alpha,
                                     const HierarchicalSpace& space, const BoundaryIndexSet& bset,
                                     const EggOptions& opts) {
    const int nb = static_cast<int>(bset.boundary.size());
    const int n = curve.n_design;
    IntegrateOptions io;
    io.rule = opts.quad;
    io.nders = 0;
    io.res_size = 2 * nb * n;
    io.parallel = opts.parallel;
    const AssemblyOutput out = integrate_boundary(
        {Side::South, Side::East, Side::North, Side::West}, {&space}, nullptr,
        [&](const CellQuad& cq, LocalOut& lo) {
            const auto& b = cq.basis[0];
            const int nf = static_cast<int>(b.funcs.size());
            for (std::size_t q = 0; q < cq.pts.size(); ++q) {
                const double s = side_parameter(cq.side, cq.pts[q]);
                const Eigen::MatrixXd dd = curve.d_alpha(cq.side, s, alpha);  // 2 x n
                for (int i = 0; i < nf; ++i) {
                    if (!bset.is_boundary[b.funcs[i]]) continue;
                    const double phi = b.tables[0](i, static_cast<int>(q));
                    if (phi == 0.0) continue;
                    const int bi = bset.pos[b.funcs[i]];
                    for (int j = 0; j < n; ++j) {
                        lo.add((2 * bi) * n + j, cq.w[q] * phi * dd(0, j));
                        lo.add((2 * bi + 1) * n + j, cq.w[q] * phi * dd(1, j));
                    }
                }
            }
        },
        io);
    Eigen::MatrixXd D(2 * nb, n);
    for (int r = 0; r < 2 * nb; ++r)
        for (int j = 0; j < n; ++j) D(r, j) = out.residual[r * n + j];
    return D;
}

SpMat boundary_mass_of(const BoundaryCurve& curve, const Eigen::VectorXd& alpha,
                       const HierarchicalSpace& space, const BoundaryIndexSet& bset,
                       const EggOptions& opts) {
    return boundary_mass_rhs(curve, alpha, space, bset, opts).mass;
}

} // namespace

Eigen::VectorXd dcB_dalpha_transpose_apply(const Eigen::VectorXd& k, const BoundaryCurve& curve,
                                           const Eigen::VectorXd& alpha, const HierarchicalSpace& space,
                                           const BoundaryIndexSet& bset, const EggOptions& opts) {
    const int nb = static_cast<int>(bset.boundary.size());
    const SpMat M = boundary_mass_of(curve, alpha, space, bset, opts);
    const LuSolver lu(M);
    Eigen::VectorXd y(2 * nb);
    Eigen::VectorXd kx(nb), ky(nb);
    for (int i = 0; i < nb; ++i) {
        kx[i] = k[2 * i];
        ky[i] = k[2 * i + 1];
    }
    const Eigen::VectorXd yx = lu.solve_transpose(kx);
    const Eigen::VectorXd yy = lu.solve_transpose(ky);
    for (int i = 0; i < nb; ++i) {
        y[2 * i] = yx[i];
        y[2 * i + 1] = yy[i];
    }
    const Eigen::MatrixXd D = curve_partial_matrix(curve, alpha, space, bset, opts);
    return D.transpose() * y;
}

Eigen::MatrixXd dcB_dalpha(const BoundaryCurve& curve, const Eigen::VectorXd& alpha,
                           const HierarchicalSpace& space, const BoundaryIndexSet& bset,
                           const EggOptions& opts) {
    const int nb = static_cast<int>(bset.boundary.size());
    const SpMat M = boundary_mass_of(curve, alpha, space, bset, opts);
    const LuSolver lu(M);
    const Eigen::MatrixXd D = curve_partial_matrix(curve, alpha, space, bset, opts);
    Eigen::MatrixXd out(2 * nb, curve.n_design);
    Eigen::MatrixXd Dx(nb, curve.n_design), Dy(nb, curve.n_design);
    for (int i = 0; i < nb; ++i) {
        Dx.row(i) = D.row(2 * i);
        Dy.row(i) = D.row(2 * i + 1);
    }
    const Eigen::MatrixXd Sx = lu.solve(Dx);
    const Eigen::MatrixXd Sy = lu.solve(Dy);
    for (int i = 0; i < nb; ++i) {
        out.row(2 * i) = Sx.row(i);
        out.row(2 * i + 1) = Sy.row(i);
    }
    return out;
}

} // namespace iga
