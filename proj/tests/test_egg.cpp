#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "iga/egg.hpp"
#include "iga/krylov.hpp"
#include "iga/validation.hpp"
#include "test_util.hpp"

#include <cmath>

using namespace iga;

namespace {

GeometryMapping identity_mapping(SpacePtr s) {
    GeometryMapping m;
    m.space = s;
    m.bset = boundary_decompose(*s);
    m.coeffs.resize(s->num_active(), 2);
    for (int i = 0; i < s->num_active(); ++i) m.coeffs.row(i) = s->greville(i).transpose();
    return m;
}

BoundaryCurve square_curve() {
    BoundaryCurve c;
    c.n_design = 1;
    c.eval = [](Side side, double s, const Eigen::VectorXd&) -> Eigen::Vector2d {
        switch (side) {
            case Side::South: return {s, 0.0};
            case Side::East: return {1.0, s};
            case Side::North: return {s, 1.0};
            default: return {0.0, s};
        }
    };
    c.d_alpha = [](Side, double, const Eigen::VectorXd&) { return Eigen::MatrixXd::Zero(2, 1); };
    return c;
}

} // namespace

TEST_CASE("boundary projection: exact representation and thresholds") {
    SpacePtr s = make_space(3, 7, 7);
    const BoundaryCurve vc = validation_curve();

    // alpha = 0: the unit-square boundary lies in the trace space
    const Eigen::VectorXd a0 = Eigen::VectorXd::Zero(4);
    BoundaryProjection p0 = project_boundary_adaptive(vc, a0, s, 1e-6);
    CHECK(p0.report.refinement_rounds == 0);
    CHECK(p0.report.per_function.maxCoeff() <= 1e-12);

    // cubic polynomial displacement reproduced exactly without refinement
    BoundaryCurve cubic;
    cubic.n_design = 1;
    cubic.eval = [](Side side, double s, const Eigen::VectorXd&) -> Eigen::Vector2d {
        const double p = s * (1.0 - s) * (0.3 + 0.4 * s);
        switch (side) {
            case Side::South: return {s, 0.2 * p};
            case Side::East: return {1.0 - 0.1 * p, s};
            case Side::North: return {s, 1.0 - 0.15 * p};
            default: return {0.25 * p, s};
        }
    };
    cubic.d_alpha = [](Side, double, const Eigen::VectorXd&) { return Eigen::MatrixXd::Zero(2, 1); };
    BoundaryProjection pc = project_boundary_adaptive(cubic, Eigen::VectorXd::Zero(1), s, 1e-6);
    CHECK(pc.report.refinement_rounds == 0);
    CHECK(pc.report.per_function.maxCoeff() <= 1e-12);

    // oscillatory boundary at the box corner: refinement must happen and the
    // total residual must obey the threshold postcondition
    const Eigen::VectorXd a4 = Eigen::VectorXd::Constant(4, 0.4);
    BoundaryProjection p4 = project_boundary_adaptive(vc, a4, s, 1e-6);
    CHECK(p4.report.refinement_rounds > 0);
    CHECK((p4.report.per_function.array() <= p4.report.thresholds.array()).all());
    const double R = p4.report.residual_total;
    CHECK(R <= 1e-6 * p4.bset.boundary.size());
}

TEST_CASE("coons guess: identity and affine reproduction") {
    SpacePtr s = make_space(3, 7, 7);
    const BoundaryCurve sq = square_curve();
    BoundaryProjection p = project_boundary(sq, Eigen::VectorXd::Zero(1), s);
    Eigen::MatrixXd coef = coons_inner_guess(p.space, p.bset, p.c_B);
    for (int i = 0; i < s->num_active(); ++i)
        CHECK((coef.row(i).transpose() - s->greville(i)).cwiseAbs().maxCoeff() <= 1e-12);

    // affine image of the square
    BoundaryCurve aff;
    aff.n_design = 1;
    Eigen::Matrix2d A;
    A << 2.0, 0.3, -0.4, 1.5;
    const Eigen::Vector2d t(0.7, -0.2);
    aff.eval = [&, A, t](Side side, double s2, const Eigen::VectorXd& al) -> Eigen::Vector2d {
        return A * square_curve().eval(side, s2, al) + t;
    };
    aff.d_alpha = [](Side, double, const Eigen::VectorXd&) { return Eigen::MatrixXd::Zero(2, 1); };
    BoundaryProjection pa = project_boundary(aff, Eigen::VectorXd::Zero(1), s);
    Eigen::MatrixXd ca = coons_inner_guess(pa.space, pa.bset, pa.c_B);
    for (int i = 0; i < s->num_active(); ++i) {
        const Eigen::Vector2d want = A * s->greville(i) + t;
        CHECK((ca.row(i).transpose() - want).cwiseAbs().maxCoeff() <= 1e-11);
    }
}

TEST_CASE("egg residual vanishes for identity and affine mappings") {
    SpacePtr s = make_space(3, 5, 5);
    GeometryMapping m = identity_mapping(s);
    EggSystem sys = egg_system(m, false, false);
    CHECK(sys.F.lpNorm<Eigen::Infinity>() <= 1e-12);

    Eigen::Matrix2d A;
    A << 1.4, 0.5, -0.2, 0.9;
    for (int i = 0; i < s->num_active(); ++i)
        m.coeffs.row(i) = (A * s->greville(i) + Eigen::Vector2d(0.3, 0.1)).transpose();
    sys = egg_system(m, false, false);
    CHECK(sys.F.lpNorm<Eigen::Infinity>() <= 1e-12);
}

TEST_CASE("egg jacobian matches finite differences") {
    SpacePtr s = make_space(3, 4, 4);
    GeometryMapping m = identity_mapping(s);
    auto& gen = testing::rng(71);
    // random interior perturbation, keep far from folding
    for (int rank : m.bset.inner)
        m.coeffs.row(rank) += 0.03 * Eigen::RowVector2d(testing::uniform01(gen) - 0.5, testing::uniform01(gen) - 0.5);

    EggSystem sys = egg_system(m, true, true);
    const Eigen::MatrixXd JI = Eigen::MatrixXd(*sys.dF_dcI);
    const Eigen::MatrixXd JB = Eigen::MatrixXd(*sys.dF_dcB);
    const double h = 1e-6;

    // inner columns
    Eigen::VectorXd cI = m.inner_vec();
    for (int col : {0, 3, static_cast<int>(cI.size()) / 2, static_cast<int>(cI.size()) - 1}) {
        Eigen::VectorXd cp = cI, cm = cI;
        cp[col] += h;
        cm[col] -= h;
        m.set_inner(cp);
        const Eigen::VectorXd Fp = egg_system(m, false, false).F;
        m.set_inner(cm);
        const Eigen::VectorXd Fm = egg_system(m, false, false).F;
        m.set_inner(cI);
        const Eigen::VectorXd fd = (Fp - Fm) / (2 * h);
        const double scale = std::max(1.0, fd.cwiseAbs().maxCoeff());
        CHECK((fd - JI.col(col)).cwiseAbs().maxCoeff() / scale <= 1e-5);
    }

    // boundary columns
    Eigen::VectorXd cB = m.boundary_vec();
    for (int col : {1, static_cast<int>(cB.size()) / 2}) {
        Eigen::VectorXd cp = cB, cm = cB;
        cp[col] += h;
        cm[col] -= h;
        m.set_boundary(cp);
        const Eigen::VectorXd Fp = egg_system(m, false, false).F;
        m.set_boundary(cm);
        const Eigen::VectorXd Fm = egg_system(m, false, false).F;
        m.set_boundary(cB);
        const Eigen::VectorXd fd = (Fp - Fm) / (2 * h);
        const double scale = std::max(1.0, fd.cwiseAbs().maxCoeff());
        CHECK((fd - JB.col(col)).cwiseAbs().maxCoeff() / scale <= 1e-5);
    }

    // locality: rows of inner test functions whose supports avoid every
    // boundary-function support (cell strips 0 and 6 on a 7x7 grid) are zero
    {
        SpacePtr s7 = make_space(3, 7, 7);
        GeometryMapping m7 = identity_mapping(s7);
        EggSystem sys7 = egg_system(m7, false, true);
        const Eigen::MatrixXd JB7 = Eigen::MatrixXd(*sys7.dF_dcB);
        int found = 0;
        for (std::size_t k = 0; k < m7.bset.inner.size(); ++k) {
            const auto r = m7.space->support_range(m7.bset.inner[k]);
            if (r[0] >= 1 && r[1] <= 5 && r[2] >= 1 && r[3] <= 5) {
                ++found;
                CHECK(JB7.row(2 * k).cwiseAbs().maxCoeff() == 0.0);
                CHECK(JB7.row(2 * k + 1).cwiseAbs().maxCoeff() == 0.0);
            }
        }
        CHECK(found > 0);
    }

    // gateaux product against the assembled jacobian
    auto& gen2 = testing::rng(73);
    Eigen::VectorXd dir(cI.size());
    for (int i = 0; i < dir.size(); ++i) dir[i] = testing::uniform01(gen2) - 0.5;
    auto resid = [&](const Eigen::VectorXd& v) {
        GeometryMapping mm = m;
        mm.set_inner(v);
        return egg_system(mm, false, false).F;
    };
    const Eigen::VectorXd gx = matfree_apply(resid, cI, dir, 1e-7 * (1 + cI.cwiseAbs().maxCoeff()));
    const Eigen::VectorXd ex = JI * dir;
    CHECK((gx - ex).cwiseAbs().maxCoeff() / std::max(1.0, ex.cwiseAbs().maxCoeff()) <= 1e-5);
}

TEST_CASE("newton: exact start, validation case, quadratic convergence") {
    SpacePtr s = make_space(3, 7, 7);
    GeometryMapping m = identity_mapping(s);
    NewtonStats st = newton_solve_egg(m);
    CHECK(st.iterations <= 1);

    // affine start converges in at most one iteration
    Eigen::Matrix2d A;
    A << 1.2, 0.4, -0.1, 0.8;
    for (int i = 0; i < s->num_active(); ++i) m.coeffs.row(i) = (A * s->greville(i)).transpose();
    st = newton_solve_egg(m);
    CHECK(st.iterations <= 1);

    // validation domain on an adequately resolved boundary space
    const BoundaryCurve vc = validation_curve();
    const Eigen::VectorXd a = Eigen::VectorXd::Constant(4, 0.2);
    BoundaryProjection p = project_boundary_adaptive(vc, a, s, 1e-4);
    GeometryMapping vm;
    vm.space = p.space;
    vm.bset = p.bset;
    vm.coeffs = coons_inner_guess(p.space, p.bset, p.c_B);
    EggOptions opts;
    opts.newton_tol = 1e-10;
    NewtonStats vst = newton_solve_egg(vm, opts);
    CHECK(vst.converged);
    CHECK(detect_folds(vm).empty());
    CHECK(vm.fold_free);

    // quadratic tail: ||F_{k+1}|| <= C ||F_k||^2 over the last steps
    const auto& h = vst.residual_history;
    REQUIRE(h.size() >= 3);
    for (std::size_t k = h.size() - 3; k + 1 < h.size(); ++k) {
        if (h[k] < 1e-13) continue;
        CHECK(h[k + 1] / (h[k] * h[k]) <= 1e4);
    }
}

TEST_CASE("fold detection") {
    SpacePtr s = make_space(3, 4, 4);
    GeometryMapping m = identity_mapping(s);
    CHECK(detect_folds(m).empty());
    CHECK(m.fold_free);

    // one inner control point thrown far outside folds its support cells
    GeometryMapping bad = identity_mapping(s);
    const int rank = bad.bset.inner[bad.bset.inner.size() / 2];
    bad.coeffs.row(rank) = Eigen::RowVector2d(3.0, 3.0);
    const std::vector<CellId> folds = detect_folds(bad);
    CHECK(!folds.empty());
    CHECK(!bad.fold_free);
    const auto sup = bad.space->support_cells(rank);
    bool overlap = false;
    for (const CellId& c : folds)
        for (const CellId& d : sup) overlap = overlap || (c == d);
    CHECK(overlap);

    // reflection: every cell defective
    GeometryMapping refl = identity_mapping(s);
    refl.coeffs.col(0) *= -1.0;
    CHECK(detect_folds(refl).size() == refl.space->active_cells().size());
}

TEST_CASE("parameterize: validation family") {
    SpacePtr s = make_space(3, 7, 7);
    const BoundaryCurve vc = validation_curve();

    ParameterizeStats st0;
    GeometryMapping m0 = parameterize(Eigen::VectorXd::Zero(4), vc, s, 1e-4, &st0);
    CHECK(m0.fold_free);
    CHECK(st0.fold_rounds == 0);
    // identity-equivalent mapping
    const SplineFunction f0 = m0.spline();
    CHECK((f0.value(0.37, 0.61) - Eigen::Vector2d(0.37, 0.61)).cwiseAbs().maxCoeff() <= 1e-9);

    ParameterizeStats st4;
    GeometryMapping m4 = parameterize(Eigen::VectorXd::Constant(4, 0.4), vc, s, 1e-4, &st4);
    CHECK(m4.fold_free);
    CHECK(st4.fold_rounds <= 2);

    const ValidationReference ref;
    ParameterizeStats stA;
    GeometryMapping mA = parameterize(Eigen::VectorXd::Constant(4, ref.A_exact), vc, s, 1e-4, &stA);
    CHECK(mA.fold_free);
    CHECK(detect_folds(mA).empty());

    // boundary preservation: boundary rows equal the projected coefficients
    BoundaryProjection pp = project_boundary(vc, Eigen::VectorXd::Constant(4, ref.A_exact), mA.space);
    for (std::size_t k = 0; k < pp.bset.boundary.size(); ++k)
        CHECK((mA.coeffs.row(pp.bset.boundary[k]) - pp.c_B.row(static_cast<int>(k))).cwiseAbs().maxCoeff() <=
              1e-11);
}

TEST_CASE("dF_dcB sensitivities and dcB_dalpha") {
    SpacePtr s = make_space(3, 5, 5);
    const BoundaryCurve vc = validation_curve();
    const Eigen::VectorXd a = Eigen::VectorXd::Constant(4, 0.15);

    // k = 0 maps to 0
    BoundaryProjection p = project_boundary(vc, a, s);
    const Eigen::VectorXd zero = Eigen::VectorXd::Zero(2 * p.bset.boundary.size());
    CHECK(dcB_dalpha_transpose_apply(zero, vc, a, *p.space, p.bset).cwiseAbs().maxCoeff() == 0.0);

    // finite differences of the projected coefficients
    auto& gen = testing::rng(79);
    Eigen::VectorXd k(2 * p.bset.boundary.size());
    for (int i = 0; i < k.size(); ++i) k[i] = testing::uniform01(gen) - 0.5;
    const Eigen::VectorXd got = dcB_dalpha_transpose_apply(k, vc, a, *p.space, p.bset);
    const Eigen::MatrixXd tangent = dcB_dalpha(vc, a, *p.space, p.bset);
    CHECK((tangent.transpose() * k - got).cwiseAbs().maxCoeff() <= 1e-11);

    const double h = 1e-6;
    for (int j = 0; j < 4; ++j) {
        Eigen::VectorXd ap = a, am = a;
        ap[j] += h;
        am[j] -= h;
        const BoundaryProjection pp = project_boundary(vc, ap, s);
        const BoundaryProjection pm = project_boundary(vc, am, s);
        Eigen::VectorXd fd(k.size());
        for (std::size_t i = 0; i < p.bset.boundary.size(); ++i) {
            fd[2 * i] = (pp.c_B(i, 0) - pm.c_B(i, 0)) / (2 * h);
            fd[2 * i + 1] = (pp.c_B(i, 1) - pm.c_B(i, 1)) / (2 * h);
        }
        CHECK(std::abs(fd.dot(k) - got[j]) <= 1e-5 * std::max(1.0, std::abs(got[j])));
    }

    // a curve component independent of alpha_j yields a zero gradient entry
    BoundaryCurve partial = vc;
    partial.d_alpha = [](Side side, double s2, const Eigen::VectorXd& al) {
        Eigen::MatrixXd d = validation_curve().d_alpha(side, s2, al);
        d.col(2).setZero();  // freeze alpha_3
        return d;
    };
    const Eigen::VectorXd g2 = dcB_dalpha_transpose_apply(k, partial, a, *p.space, p.bset);
    CHECK(g2[2] == 0.0);
}

TEST_CASE("warm start reduces newton iterations near a converged design") {
    SpacePtr s = make_space(3, 7, 7);
    const BoundaryCurve vc = validation_curve();
    auto& gen = testing::rng(83);
    int warm_not_worse = 0;
    const int trials = 10;
    for (int t = 0; t < trials; ++t) {
        Eigen::VectorXd a(4);
        for (int i = 0; i < 4; ++i) a[i] = 0.05 + 0.25 * testing::uniform01(gen);
        ParameterizeStats cold_stats;
        GeometryMapping m = parameterize(a, vc, s, 1e-3, &cold_stats);

        Eigen::VectorXd b = a;
        for (int i = 0; i < 4; ++i) b[i] = std::clamp(a[i] + 0.04 * (testing::uniform01(gen) - 0.5), 0.0, 0.4);
        ParameterizeStats cold2;
        parameterize(b, vc, s, 1e-3, &cold2);
        ParameterizeStats warm;
        const SplineFunction start = m.spline();
        parameterize(b, vc, s, 1e-3, &warm, {}, &start);
        if (warm.newton_iterations_first <= cold2.newton_iterations_first) ++warm_not_worse;
    }
    CHECK(warm_not_worse >= 8);
}
