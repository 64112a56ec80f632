#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "iga/assembly.hpp"
#include "iga/geom_delta.hpp"
#include "iga/krylov.hpp"
#include "iga/sparse.hpp"
#include "test_util.hpp"

#include <cmath>

using namespace iga;

namespace {

SplineFunction identity_map(SpacePtr s) {
    Eigen::MatrixXd c(s->num_active(), 2);
    for (int i = 0; i < c.rows(); ++i) c.row(i) = s->greville(i).transpose();
    return make_spline(s, c);
}

} // namespace

TEST_CASE("gauss rules") {
    const QuadratureRule g1 = gauss_rule(1);
    CHECK(g1.points[0] == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(g1.weights[0] == doctest::Approx(1.0).epsilon(1e-15));

    const QuadratureRule g2 = gauss_rule(2);
    CHECK(g2.points[0] == doctest::Approx(0.5 - 0.5 / std::sqrt(3.0)).epsilon(1e-14));
    CHECK(g2.points[1] == doctest::Approx(0.5 + 0.5 / std::sqrt(3.0)).epsilon(1e-14));
    CHECK(g2.weights[0] == doctest::Approx(0.5).epsilon(1e-14));

    const QuadratureRule g4 = gauss_rule(4);
    double v = 0.0;
    for (int q = 0; q < 4; ++q) v += g4.weights[q] * std::pow(g4.points[q], 7);
    CHECK(std::abs(v - 0.125) <= 1e-14);

    for (int n = 1; n <= 16; ++n) CHECK(std::abs(gauss_rule(n).weights.sum() - 1.0) <= 1e-13);
    CHECK_THROWS(gauss_rule(0));
    CHECK_THROWS(gauss_rule(17));
}

TEST_CASE("residual of the basis-value integrand sums to one") {
    auto& gen = testing::rng(51);
    SpacePtr s = testing::random_thb_space(gen, 3, 3, 2, 1);
    IntegrateOptions opts;
    opts.res_size = s->num_active();
    const AssemblyOutput out = integrate(
        {s.get()}, nullptr,
        [](const CellQuad& cq, LocalOut& lo) {
            for (std::size_t q = 0; q < cq.pts.size(); ++q)
                for (std::size_t j = 0; j < cq.basis[0].funcs.size(); ++j)
                    lo.add(cq.basis[0].funcs[j], cq.w[q] * cq.basis[0].tables[0](static_cast<int>(j), static_cast<int>(q)));
        },
        opts);
    CHECK(std::abs(out.residual.sum() - 1.0) <= 1e-13);
    CHECK(out.residual.minCoeff() > 0.0);
}

TEST_CASE("bilinear mass matrix on a single cell") {
    SpacePtr s = make_space(1, 1, 1);
    IntegrateOptions opts;
    opts.rule = 4;
    opts.res_size = 4;
    opts.want_jacobian = true;
    opts.jac_rows = opts.jac_cols = 4;
    const AssemblyOutput out = integrate(
        {s.get()}, nullptr,
        [](const CellQuad& cq, LocalOut& lo) {
            const auto& b = cq.basis[0];
            for (std::size_t q = 0; q < cq.pts.size(); ++q)
                for (std::size_t i = 0; i < b.funcs.size(); ++i)
                    for (std::size_t j = 0; j < b.funcs.size(); ++j)
                        lo.add(b.funcs[i], b.funcs[j],
                               cq.w[q] * b.tables[0](static_cast<int>(i), static_cast<int>(q)) *
                                   b.tables[0](static_cast<int>(j), static_cast<int>(q)));
        },
        opts);
    const Eigen::MatrixXd M = Eigen::MatrixXd(*out.jacobian);
    // hat-function products: 1/9 diagonal, 1/18 edge neighbors, 1/36 diagonal neighbor
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j) {
            const auto [ix, iy] = s->active_index(i);
            const auto [jx, jy] = s->active_index(j);
            const double ref = ((ix == jx) ? (1.0 / 3) : (1.0 / 6)) * ((iy == jy) ? (1.0 / 3) : (1.0 / 6));
            CHECK(M(i, j) == doctest::Approx(ref).epsilon(1e-13));
        }
}

TEST_CASE("jacobian of a linear residual equals the independently assembled matrix") {
    auto& gen = testing::rng(53);
    SpacePtr s = testing::random_thb_space(gen, 3, 3, 1, 2);
    const int n = s->num_active();
    Eigen::VectorXd u = Eigen::VectorXd::Random(n);

    // residual r_i = sum_j (int grad phi_j . grad phi_i) u_j assembled as one kernel,
    // jacobian in the same loop
    IntegrateOptions opts;
    opts.res_size = n;
    opts.want_jacobian = true;
    opts.jac_rows = opts.jac_cols = n;
    const AssemblyOutput both = integrate(
        {s.get()}, nullptr,
        [&](const CellQuad& cq, LocalOut& lo) {
            const auto& b = cq.basis[0];
            const int nf = static_cast<int>(b.funcs.size());
            for (std::size_t q = 0; q < cq.pts.size(); ++q) {
                Eigen::VectorXd gux = b.tables[1].col(q), guy = b.tables[2].col(q);
                double ux = 0, uy = 0;
                for (int j = 0; j < nf; ++j) {
                    ux += u[b.funcs[j]] * gux[j];
                    uy += u[b.funcs[j]] * guy[j];
                }
                for (int i = 0; i < nf; ++i) {
                    lo.add(b.funcs[i], cq.w[q] * (ux * gux[i] + uy * guy[i]));
                    for (int j = 0; j < nf; ++j)
                        lo.add(b.funcs[i], b.funcs[j], cq.w[q] * (gux[j] * gux[i] + guy[j] * guy[i]));
                }
            }
        },
        opts);
    const Eigen::VectorXd r2 = (*both.jacobian) * u;
    CHECK((both.residual - r2).cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("default rule integrates basis products with bilinear factor exactly") {
    SpacePtr s = make_space(3, 2, 2);
    auto kernel = [&](const CellQuad& cq, LocalOut& lo) {
        const auto& b = cq.basis[0];
        for (std::size_t q = 0; q < cq.pts.size(); ++q) {
            const double bilin = (1.0 + 0.3 * cq.pts[q][0]) * (1.0 - 0.2 * cq.pts[q][1]);
            for (std::size_t i = 0; i < b.funcs.size(); ++i)
                for (std::size_t j = 0; j < b.funcs.size(); ++j)
                    lo.add(b.funcs[i], cq.w[q] * bilin * b.tables[0](static_cast<int>(i), static_cast<int>(q)) *
                                           b.tables[0](static_cast<int>(j), static_cast<int>(q)));
        }
    };
    IntegrateOptions o8;
    o8.res_size = s->num_active();
    IntegrateOptions o16 = o8;
    o16.rule = 16;
    const AssemblyOutput a = integrate({s.get()}, nullptr, kernel, o8);
    const AssemblyOutput b = integrate({s.get()}, nullptr, kernel, o16);
    CHECK((a.residual - b.residual).cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("parallel element loop matches the serial reference bitwise") {
    auto& gen = testing::rng(57);
    SpacePtr s = testing::random_thb_space(gen, 3, 4, 2, 2);
    const SplineFunction map = identity_map(s);
    IntegrateOptions opts;
    opts.res_size = s->num_active();
    opts.want_jacobian = true;
    opts.jac_rows = opts.jac_cols = s->num_active();
    auto kernel = [](const CellQuad& cq, LocalOut& lo) {
        const auto& b = cq.basis[0];
        for (std::size_t q = 0; q < cq.pts.size(); ++q) {
            for (std::size_t i = 0; i < b.funcs.size(); ++i) {
                lo.add(b.funcs[i], cq.w[q] * cq.map[q].detJ * b.tables[0](static_cast<int>(i), static_cast<int>(q)));
                for (std::size_t j = 0; j < b.funcs.size(); ++j)
                    lo.add(b.funcs[i], b.funcs[j],
                           cq.w[q] * b.tables[1](static_cast<int>(i), static_cast<int>(q)) *
                               b.tables[1](static_cast<int>(j), static_cast<int>(q)));
            }
        }
    };
    const AssemblyOutput p = integrate({s.get()}, &map, kernel, opts);
    const AssemblyOutput q = integrate_serial({s.get()}, &map, kernel, opts);
    CHECK((p.residual - q.residual).cwiseAbs().maxCoeff() == 0.0);
    CHECK((Eigen::MatrixXd(*p.jacobian) - Eigen::MatrixXd(*q.jacobian)).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("boundary loop measures the unit-square perimeter sides") {
    auto& gen = testing::rng(59);
    SpacePtr s = testing::random_thb_space(gen, 3, 3, 1, 2);
    IntegrateOptions opts;
    opts.res_size = 1;
    for (Side side : kAllSides) {
        const AssemblyOutput out = integrate_boundary(
            {side}, {s.get()}, nullptr,
            [](const CellQuad& cq, LocalOut& lo) {
                for (std::size_t q = 0; q < cq.pts.size(); ++q) lo.add(0, cq.w[q]);
            },
            opts);
        CHECK(out.residual[0] == doctest::Approx(1.0).epsilon(1e-13));
    }
}

TEST_CASE("solve_sparse: identity, SPD, transpose") {
    const int n = 50;
    auto& gen = testing::rng(61);
    SpMat I(n, n);
    I.setIdentity();
    Eigen::VectorXd b = Eigen::VectorXd::Random(n);
    CHECK((solve_sparse(I, b) - b).cwiseAbs().maxCoeff() == 0.0);

    Eigen::MatrixXd Ad = Eigen::MatrixXd::Random(n, n);
    Eigen::MatrixXd spd = Ad.transpose() * Ad + n * Eigen::MatrixXd::Identity(n, n);
    SpMat A = spd.sparseView();
    const Eigen::VectorXd x = solve_sparse(A, b);
    CHECK((A * x - b).norm() / b.norm() <= 1e-10);

    Eigen::MatrixXd Nd = Eigen::MatrixXd::Random(n, n) + n * Eigen::MatrixXd::Identity(n, n);
    SpMat N = Nd.sparseView();
    const Eigen::VectorXd y1 = solve_sparse(N, b, SolveMode::Transpose);
    SpMat Nt = N.transpose();
    const Eigen::VectorXd y2 = solve_sparse(Nt, b, SolveMode::Normal);
    CHECK((y1 - y2).cwiseAbs().maxCoeff() <= 1e-12);
    CHECK((N.transpose() * y1 - b).norm() / b.norm() <= 1e-10);

    // transpose-then-normal round trip on SPD
    const Eigen::VectorXd z1 = solve_sparse(A, b, SolveMode::Normal);
    const Eigen::VectorXd z2 = solve_sparse(A, b, SolveMode::Transpose);
    CHECK((z1 - z2).norm() <= 1e-10);

    SpMat S(3, 3);
    S.insert(0, 0) = 1.0;  // rank deficient
    S.makeCompressed();
    CHECK_THROWS_AS((void)solve_sparse(S, Eigen::VectorXd::Ones(3)), SingularMatrixError);
}

TEST_CASE("matfree_apply") {
    const int n = 20;
    Eigen::MatrixXd M = Eigen::MatrixXd::Random(n, n);
    auto fn = [&](const Eigen::VectorXd& v) { return Eigen::VectorXd(M * v); };
    Eigen::VectorXd at = Eigen::VectorXd::Random(n), dir = Eigen::VectorXd::Random(n);
    const Eigen::VectorXd a = matfree_apply(fn, at, dir, 1e-7);
    CHECK((a - M * dir).cwiseAbs().maxCoeff() <= 1e-5 * dir.norm());
    CHECK(matfree_apply(fn, at, Eigen::VectorXd::Zero(n), 1e-7).cwiseAbs().maxCoeff() == 0.0);
    CHECK_THROWS(matfree_apply(fn, at, dir, 0.0));
}

TEST_CASE("solve_krylov") {
    const int n = 40;
    Eigen::VectorXd b = Eigen::VectorXd::Random(n);
    auto ident = [](const Eigen::VectorXd& v) { return v; };
    CHECK((solve_krylov(ident, b, 1e-12, 5) - b).cwiseAbs().maxCoeff() <= 1e-12);

    Eigen::MatrixXd Ad = Eigen::MatrixXd::Random(n, n) + n * Eigen::MatrixXd::Identity(n, n);
    SpMat A = Ad.sparseView();
    const double tol = 1e-9;
    const Eigen::VectorXd xk = solve_krylov([&](const Eigen::VectorXd& v) { return Eigen::VectorXd(A * v); },
                                            b, tol, 500);
    const Eigen::VectorXd xd = solve_sparse(A, b);
    CHECK((xk - xd).norm() / xd.norm() <= 10 * tol);

    // via matfree on the linear residual r(x) = A x - b
    auto res = [&](const Eigen::VectorXd& v) { return Eigen::VectorXd(A * v - b); };
    Eigen::VectorXd at = Eigen::VectorXd::Zero(n);
    const Eigen::VectorXd xm = solve_krylov(
        [&](const Eigen::VectorXd& v) { return matfree_apply(res, at, v, matfree_eps(at, v)); }, b, tol, 500);
    CHECK((xm - xd).norm() / xd.norm() <= 10 * tol + 1e-6);

    CHECK_THROWS_AS((void)solve_krylov([&](const Eigen::VectorXd& v) { return Eigen::VectorXd(A * v); }, b,
                                       1e-14, 2),
                    KrylovError);
}

TEST_CASE("geometry delta helpers match finite differences") {
    // quadratic-in-xi synthetic mapping with nontrivial J and H
    auto& gen = testing::rng(63);
    SpacePtr s = make_space(3, 2, 2);
    Eigen::MatrixXd c(s->num_active(), 2);
    for (int i = 0; i < c.rows(); ++i) {
        const Eigen::Vector2d g = s->greville(i);
        c(i, 0) = g[0] + 0.15 * g[0] * g[1];
        c(i, 1) = g[1] - 0.1 * g[0] * g[0];
    }
    SplineFunction map = make_spline(s, c);

    IntegrateOptions opts;
    opts.res_size = 1;
    opts.map_third = true;
    opts.nders = 3;

    const double h = 1e-6;
    // pick a coefficient to perturb and compare all the deltas
    const int pick = s->num_active() / 2;
    for (int comp = 0; comp < 2; ++comp) {
        double got_det = 0, fd_det = 0;
        Eigen::Vector2d got_gdet = Eigen::Vector2d::Zero(), fd_gdet = Eigen::Vector2d::Zero();
        double got_arc = 0, fd_arc = 0;

        auto probe = [&](const SplineFunction& m, double& det, Eigen::Vector2d& gdet, double& arc) {
            integrate(
                {s.get()}, &m,
                [&](const CellQuad& cq, LocalOut&) {
                    if (cq.rect[0] != 0.0 || cq.rect[2] != 0.0) return;
                    const MapData& md = cq.map[3];
                    det = md.detJ;
                    gdet = grad_detJ(md);
                    arc = md.J.col(0).norm();
                },
                opts);
        };
        double det0, arc0;
        Eigen::Vector2d gdet0;
        probe(map, det0, gdet0, arc0);

        SplineFunction mp = map, mm = map;
        mp.coeffs(pick, comp) += h;
        mm.coeffs(pick, comp) -= h;
        double detp, detm, arcp, arcm;
        Eigen::Vector2d gdetp, gdetm;
        probe(mp, detp, gdetp, arcp);
        probe(mm, detm, gdetm, arcm);
        fd_det = (detp - detm) / (2 * h);
        fd_gdet = (gdetp - gdetm) / (2 * h);
        fd_arc = (arcp - arcm) / (2 * h);

        integrate(
            {s.get()}, &map,
            [&](const CellQuad& cq, LocalOut&) {
                if (cq.rect[0] != 0.0 || cq.rect[2] != 0.0) return;
                const MapData& md = cq.map[3];
                const auto& b = cq.basis[0];
                for (std::size_t j = 0; j < b.funcs.size(); ++j)
                    if (b.funcs[j] == pick) {
                        CoefDelta d;
                        d.comp = comp;
                        d.phi = b.tables[0](static_cast<int>(j), 3);
                        d.dphi << b.tables[1](static_cast<int>(j), 3), b.tables[2](static_cast<int>(j), 3);
                        d.hphi << b.tables[3](static_cast<int>(j), 3), b.tables[4](static_cast<int>(j), 3),
                            b.tables[5](static_cast<int>(j), 3);
                        got_det = delta_detJ(md, d);
                        got_gdet = delta_grad_detJ(md, d);
                        got_arc = delta_arc_factor(md, d, 0);
                    }
            },
            opts);

        CHECK(std::abs(got_det - fd_det) <= 1e-6 * std::max(1.0, std::abs(fd_det)));
        CHECK((got_gdet - fd_gdet).cwiseAbs().maxCoeff() <= 1e-5);
        CHECK(std::abs(got_arc - fd_arc) <= 1e-6);
    }

    // hess_detJ against finite differences of grad_detJ in xi
    IntegrateOptions o2 = opts;
    Eigen::Vector3d hd;
    Eigen::Vector2d g0, gx, gy;
    auto grad_at = [&](double x, double y) {
        const BasisEval be = s->eval(x, y, 2);
        MapData md;
        md.J.setZero();
        md.Hx.setZero();
        md.Hy.setZero();
        for (std::size_t j = 0; j < be.funcs.size(); ++j) {
            const Eigen::Vector2d cc = c.row(be.funcs[j]).transpose();
            md.J.col(0) += cc * be.grad(static_cast<int>(j), 0);
            md.J.col(1) += cc * be.grad(static_cast<int>(j), 1);
            for (int k = 0; k < 3; ++k) {
                md.Hx[k] += cc[0] * be.hess(static_cast<int>(j), k);
                md.Hy[k] += cc[1] * be.hess(static_cast<int>(j), k);
            }
        }
        return grad_detJ(md);
    };
    {
        const double x = 0.31, y = 0.47, hh = 1e-6;
        const BasisEval be = s->eval(x, y, 3);
        MapData md;
        md.J.setZero();
        md.Hx.setZero();
        md.Hy.setZero();
        md.Tx.setZero();
        md.Ty.setZero();
        for (std::size_t j = 0; j < be.funcs.size(); ++j) {
            const Eigen::Vector2d cc = c.row(be.funcs[j]).transpose();
            md.J.col(0) += cc * be.grad(static_cast<int>(j), 0);
            md.J.col(1) += cc * be.grad(static_cast<int>(j), 1);
            for (int k = 0; k < 3; ++k) {
                md.Hx[k] += cc[0] * be.hess(static_cast<int>(j), k);
                md.Hy[k] += cc[1] * be.hess(static_cast<int>(j), k);
            }
            for (int k = 0; k < 4; ++k) {
                md.Tx[k] += cc[0] * be.third(static_cast<int>(j), k);
                md.Ty[k] += cc[1] * be.third(static_cast<int>(j), k);
            }
        }
        hd = hess_detJ(md);
        gx = (grad_at(x + hh, y) - grad_at(x - hh, y)) / (2 * hh);
        gy = (grad_at(x, y + hh) - grad_at(x, y - hh)) / (2 * hh);
        CHECK(std::abs(hd[0] - gx[0]) <= 1e-5 * std::max(1.0, std::abs(gx[0])));
        CHECK(std::abs(hd[1] - gx[1]) <= 1e-5 * std::max(1.0, std::abs(gx[1])));
        CHECK(std::abs(hd[1] - gy[0]) <= 1e-5 * std::max(1.0, std::abs(gy[0])));
        CHECK(std::abs(hd[2] - gy[1]) <= 1e-5 * std::max(1.0, std::abs(gy[1])));
    }
}
