#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "iga/knots.hpp"
#include "iga/spline_function.hpp"
#include "test_util.hpp"

#include <cmath>

using namespace iga;

TEST_CASE("open knot vectors") {
    const KnotVector kv = make_open_knot_vector(3, 1);
    CHECK(kv.knots() == std::vector<double>{0, 0, 0, 0, 1, 1, 1, 1});
    CHECK(kv.num_funcs() == 4);

    const KnotVector kv7 = make_open_knot_vector(3, 7);
    CHECK(kv7.num_funcs() == 10);
    for (int k = 1; k < 7; ++k) CHECK(kv7.knots()[3 + k] == doctest::Approx(k / 7.0).epsilon(1e-15));

    const KnotVector hat = make_open_knot_vector(1, 2);
    CHECK(hat.knots() == std::vector<double>{0, 0, 0.5, 1, 1});
    CHECK(hat.num_funcs() == 3);

    CHECK_THROWS(make_open_knot_vector(0, 3));
    CHECK_THROWS(make_open_knot_vector(3, 0));
}

TEST_CASE("cubic values at an interior knot") {
    // uniform cubic B-splines take the classic (1/6, 2/3, 1/6) values at knots
    SpacePtr s = make_space(3, 7, 7);
    const BasisEval be = s->eval(3.0 / 7.0, 2.0 / 7.0, 0);
    std::vector<double> nz;
    for (int j = 0; j < be.value.size(); ++j)
        if (std::abs(be.value[j]) > 1e-14) nz.push_back(be.value[j]);
    // tensor product of two univariate triples
    CHECK(nz.size() == 9);
    std::sort(nz.begin(), nz.end());
    CHECK(nz.back() == doctest::Approx((2.0 / 3.0) * (2.0 / 3.0)).epsilon(1e-12));
    CHECK(nz.front() == doctest::Approx((1.0 / 6.0) * (1.0 / 6.0)).epsilon(1e-12));

    CHECK_THROWS_AS((void)s->eval(1.2, 0.5, 0), std::domain_error);
}

TEST_CASE("partition of unity on random THB spaces") {
    auto& gen = testing::rng(101);
    for (int t = 0; t < 20; ++t) {
        SpacePtr s = testing::random_thb_space(gen);
        for (int p = 0; p < 1000; ++p) {
            const double x = testing::uniform01(gen), y = testing::uniform01(gen);
            const BasisEval be = s->eval(x, y, 0);
            CHECK(std::abs(be.value.sum() - 1.0) <= 1e-12);
        }
    }
}

TEST_CASE("basis derivatives match finite differences") {
    auto& gen = testing::rng(7);
    SpacePtr s = testing::random_thb_space(gen, 3, 4, 2, 2);
    const double h = 1e-5;
    int checked = 0;
    for (int p = 0; p < 40; ++p) {
        const double x = 0.05 + 0.9 * testing::uniform01(gen);
        const double y = 0.05 + 0.9 * testing::uniform01(gen);
        // keep away from knot lines of the finest level
        const CellId c = s->locate(x, y);
        const auto r = s->cell_rect(c);
        if (x - r[0] < 5 * h || r[1] - x < 5 * h || y - r[2] < 5 * h || r[3] - y < 5 * h) continue;
        const BasisEval b0 = s->eval(x, y, 2);
        const BasisEval bxp = s->eval(x + h, y, 1), bxm = s->eval(x - h, y, 1);
        const BasisEval byp = s->eval(x, y + h, 1), bym = s->eval(x, y - h, 1);
        REQUIRE(bxp.funcs == b0.funcs);
        REQUIRE(byp.funcs == b0.funcs);
        for (int j = 0; j < b0.value.size(); ++j) {
            const double scale = std::max(1.0, std::abs(b0.grad(j, 0)));
            CHECK(std::abs((bxp.value[j] - bxm.value[j]) / (2 * h) - b0.grad(j, 0)) / scale <= 1e-6);
            CHECK(std::abs((byp.value[j] - bym.value[j]) / (2 * h) - b0.grad(j, 1)) / scale <= 1e-6);
            const double sxx = std::max(1.0, std::abs(b0.hess(j, 0)));
            CHECK(std::abs((bxp.grad(j, 0) - bxm.grad(j, 0)) / (2 * h) - b0.hess(j, 0)) / sxx <= 1e-6);
            CHECK(std::abs((bxp.grad(j, 1) - bxm.grad(j, 1)) / (2 * h) - b0.hess(j, 1)) /
                      std::max(1.0, std::abs(b0.hess(j, 1))) <=
                  1e-6);
            CHECK(std::abs((byp.grad(j, 1) - bym.grad(j, 1)) / (2 * h) - b0.hess(j, 2)) /
                      std::max(1.0, std::abs(b0.hess(j, 2))) <=
                  1e-6);
        }
        ++checked;
    }
    CHECK(checked > 10);
}

TEST_CASE("global C^2 for maximum-regularity bicubics") {
    SpacePtr s = make_space(3, 5, 5);
    auto& gen = testing::rng(11);
    Eigen::MatrixXd coef(s->num_active(), 1);
    for (int i = 0; i < coef.rows(); ++i) coef(i, 0) = testing::uniform01(gen);
    // one-sided polynomial values across each interior knot line
    for (int k = 1; k < 5; ++k) {
        const double xk = k / 5.0;
        for (int t = 0; t < 10; ++t) {
            const double y = 0.999 * testing::uniform01(gen);
            const int cy = s->ky(0).find_cell(y);
            const auto left = s->eval_on_cell({0, k - 1, cy}, {xk}, {y}, 2);
            const auto right = s->eval_on_cell({0, k, cy}, {xk}, {y}, 2);
            auto contract = [&](const HierarchicalSpace::CellBasis& cb, int table) {
                double v = 0.0;
                for (std::size_t j = 0; j < cb.funcs.size(); ++j)
                    v += coef(cb.funcs[j], 0) * cb.tables[table](static_cast<int>(j), 0);
                return v;
            };
            for (int tab : {0, 1, 2}) CHECK(std::abs(contract(left, tab) - contract(right, tab)) <= 1e-10);
        }
    }
}

TEST_CASE("evaluation in the unrefined quadrant is unchanged by refinement") {
    SpacePtr s0 = make_space(3, 4, 4);
    std::vector<CellId> marks;
    for (const CellId& c : s0->active_cells())
        if (c.cx < 2 && c.cy < 2) marks.push_back(c);  // lower-left quadrant
    SpacePtr s1 = s0->refine_cells(marks);

    auto& gen = testing::rng(13);
    for (int t = 0; t < 50; ++t) {
        // points in the opposite quadrant, away from the refined region
        const double x = 0.55 + 0.44 * testing::uniform01(gen);
        const double y = 0.55 + 0.44 * testing::uniform01(gen);
        const BasisEval a = s0->eval(x, y, 0);
        const BasisEval b = s1->eval(x, y, 0);
        REQUIRE(a.value.size() == b.value.size());
        // compare as multisets of values: ranks differ between the spaces
        Eigen::VectorXd va = a.value, vb = b.value;
        std::sort(va.data(), va.data() + va.size());
        std::sort(vb.data(), vb.data() + vb.size());
        CHECK((va - vb).cwiseAbs().maxCoeff() <= 1e-13);
    }
}

TEST_CASE("refine_cells: no-op, corner, budget, invalid marks") {
    SpacePtr s = make_space(3, 7, 7);
    SpacePtr same = s->refine_cells({});
    CHECK(same->num_active() == s->num_active());

    SpacePtr corner = s->refine_cells({CellId{0, 0, 0}});
    CHECK(corner->num_active() > s->num_active());
    auto& gen = testing::rng(17);
    for (int p = 0; p < 200; ++p) {
        const double x = testing::uniform01(gen), y = testing::uniform01(gen);
        CHECK(std::abs(corner->eval(x, y, 0).value.sum() - 1.0) <= 1e-12);
    }

    CHECK_THROWS(s->refine_cells({CellId{1, 0, 0}}));  // not active (level 1 absent)

    SpacePtr deep = make_space(3, 2, 2, 3);
    deep = deep->refine_cells({CellId{0, 0, 0}});
    deep = deep->refine_cells({CellId{1, 0, 0}});
    CHECK_THROWS(deep->refine_cells({CellId{2, 0, 0}}));  // budget = 3 levels
}

TEST_CASE("mark-all refinement spans the uniform h-refined tensor space") {
    SpacePtr s = make_space(3, 3, 3);
    SpacePtr fine = s->refine_all();
    // dimension matches the tensor space with doubled cells
    CHECK(fine->num_active() == (6 + 3) * (6 + 3));
    // prolongation round trip reproduces random members of the coarse space
    auto& gen = testing::rng(19);
    Eigen::MatrixXd coef(s->num_active(), 2);
    for (int i = 0; i < coef.rows(); ++i)
        coef.row(i) << testing::uniform01(gen), testing::uniform01(gen);
    const SplineFunction f = make_spline(s, coef);
    const SplineFunction g = prolong(f, fine);
    for (int t = 0; t < 100; ++t) {
        const double x = testing::uniform01(gen), y = testing::uniform01(gen);
        CHECK((f.value(x, y) - g.value(x, y)).cwiseAbs().maxCoeff() <= 1e-12);
    }
}

TEST_CASE("prolongation: identity, constants, random spaces") {
    auto& gen = testing::rng(23);
    SpacePtr s = testing::random_thb_space(gen);

    Eigen::MatrixXd coef(s->num_active(), 1);
    for (int i = 0; i < coef.rows(); ++i) coef(i, 0) = testing::uniform01(gen);
    const SplineFunction f = make_spline(s, coef);

    const SplineFunction same = prolong(f, s);
    CHECK((same.coeffs - f.coeffs).cwiseAbs().maxCoeff() <= 1e-14);

    const SplineFunction one = constant_spline(s, Eigen::VectorXd::Ones(1));
    const auto& cells = s->active_cells();
    SpacePtr r = s->refine_cells({cells[cells.size() / 2]});
    const SplineFunction one_f = prolong(one, r);
    CHECK((one_f.coeffs.array() - 1.0).abs().maxCoeff() <= 1e-13);

    const SplineFunction g = prolong(f, r);
    for (int t = 0; t < 100; ++t) {
        const double x = testing::uniform01(gen), y = testing::uniform01(gen);
        CHECK(std::abs(f.value(x, y)[0] - g.value(x, y)[0]) <= 1e-12);
    }

    // non-nesting target rejected (corner refinement genuinely enriches the space)
    SpacePtr base = make_space(3, 7, 7);
    SpacePtr rich = base->refine_cells({CellId{0, 0, 0}, CellId{0, 1, 0}, CellId{0, 0, 1}, CellId{0, 1, 1}});
    REQUIRE(rich->num_active() > base->num_active());
    CHECK_THROWS(prolong(make_spline(rich, Eigen::MatrixXd::Random(rich->num_active(), 1)), base));
}

TEST_CASE("nesting under random marks") {
    auto& gen = testing::rng(29);
    for (int t = 0; t < 5; ++t) {
        SpacePtr s = testing::random_thb_space(gen, 3, 4, 1, 2);
        Eigen::MatrixXd coef(s->num_active(), 1);
        for (int i = 0; i < coef.rows(); ++i) coef(i, 0) = testing::uniform01(gen);
        const SplineFunction f = make_spline(s, coef);
        const auto& cells = s->active_cells();
        std::uniform_int_distribution<std::size_t> pick(0, cells.size() - 1);
        SpacePtr r = s->refine_cells({cells[pick(gen)], cells[pick(gen) / 2]});
        const SplineFunction g = prolong(f, r);
        for (int p = 0; p < 100; ++p) {
            const double x = testing::uniform01(gen), y = testing::uniform01(gen);
            CHECK(std::abs(f.value(x, y)[0] - g.value(x, y)[0]) <= 1e-12);
        }
    }
}

TEST_CASE("boundary/inner decomposition") {
    SpacePtr s = make_space(3, 7, 7);
    const BoundaryIndexSet bs = boundary_decompose(*s);
    CHECK(bs.boundary.size() == 36);
    CHECK(bs.inner.size() == 64);

    SpacePtr hat = make_space(1, 2, 2);
    const BoundaryIndexSet hs = boundary_decompose(*hat);
    CHECK(hs.boundary.size() == 8);
    CHECK(hs.inner.size() == 1);

    // refinement strictly inside keeps the boundary set unchanged
    SpacePtr s4 = make_space(3, 6, 6);
    SpacePtr ri = s4->refine_cells({CellId{0, 2, 3}, CellId{0, 3, 2}, CellId{0, 3, 3}});
    const BoundaryIndexSet b0 = boundary_decompose(*s4);
    const BoundaryIndexSet b1 = boundary_decompose(*ri);
    CHECK(b0.boundary.size() == b1.boundary.size());

    // inner functions vanish on the boundary
    auto& gen = testing::rng(31);
    for (int t = 0; t < 200; ++t) {
        const double a = testing::uniform01(gen);
        for (auto [x, y] : {std::pair{a, 0.0}, {a, 1.0}, {0.0, a}, {1.0, a}}) {
            const BasisEval be = s->eval(x, y, 0);
            for (std::size_t j = 0; j < be.funcs.size(); ++j)
                if (!bs.is_boundary[be.funcs[j]]) CHECK(std::abs(be.value[static_cast<int>(j)]) <= 1e-12);
        }
    }
}

TEST_CASE("meet space covers both hierarchies") {
    SpacePtr s = make_space(3, 4, 4);
    SpacePtr a = s->refine_cells({CellId{0, 0, 0}});
    SpacePtr b = s->refine_cells({CellId{0, 3, 3}, CellId{0, 0, 0}});
    SpacePtr m = meet_space(*a, *b);
    // prolongation of members of both spaces must be exact
    auto& gen = testing::rng(37);
    Eigen::MatrixXd ca = Eigen::MatrixXd::Random(a->num_active(), 1);
    Eigen::MatrixXd cb = Eigen::MatrixXd::Random(b->num_active(), 1);
    const SplineFunction fa = make_spline(a, ca), fb = make_spline(b, cb);
    const SplineFunction pa = prolong(fa, m), pb = prolong(fb, m);
    for (int t = 0; t < 50; ++t) {
        const double x = testing::uniform01(gen), y = testing::uniform01(gen);
        CHECK(std::abs(fa.value(x, y)[0] - pa.value(x, y)[0]) <= 1e-12);
        CHECK(std::abs(fb.value(x, y)[0] - pb.value(x, y)[0]) <= 1e-12);
    }
}

TEST_CASE("greville abscissae reproduce linear functions") {
    auto& gen = testing::rng(41);
    SpacePtr s = testing::random_thb_space(gen, 3, 3, 2, 2);
    Eigen::MatrixXd coef(s->num_active(), 1);
    for (int i = 0; i < s->num_active(); ++i) {
        const Eigen::Vector2d g = s->greville(i);
        coef(i, 0) = 2.0 * g[0] - 0.5 * g[1] + 0.25;
    }
    const SplineFunction f = make_spline(s, coef);
    for (int t = 0; t < 100; ++t) {
        const double x = testing::uniform01(gen), y = testing::uniform01(gen);
        CHECK(std::abs(f.value(x, y)[0] - (2.0 * x - 0.5 * y + 0.25)) <= 1e-12);
    }
}
