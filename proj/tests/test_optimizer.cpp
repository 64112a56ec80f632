#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "iga/optimizer.hpp"
#include "iga/qp.hpp"
#include "iga/validation.hpp"
#include "test_util.hpp"
#include "toy_problem.hpp"

#include <cmath>

using namespace iga;

namespace {

/// Toy with one active linear constraint: minimize distance to a target that
/// violates alpha_0 <= 0.5.
class ConstrainedToy : public testing::ToyProblem {
  public:
    ConstrainedToy() : ToyProblem(Eigen::Vector2d(2.0, 0.25)) {}
    int num_constraints() const override { return 1; }
    ScalarEval constraint(int, const SplineFunction&, const GeometryMapping& m, const Eigen::VectorXd& alpha,
                          bool want) const override {
        ScalarEval ev;
        ev.value = 0.5 - alpha[0];
        ev.depends_on_state = false;
        ev.depends_on_geometry = false;
        if (want) {
            ev.d_alpha = Eigen::Vector2d(-1.0, 0.0);
            ev.d_dA = Eigen::VectorXd();
            ev.d_cA = Eigen::VectorXd::Zero(2 * m.space->num_active());
        }
        return ev;
    }
};

} // namespace

TEST_CASE("active-set qp") {
    // unconstrained minimum inside the feasible region
    Eigen::MatrixXd B = Eigen::MatrixXd::Identity(2, 2);
    Eigen::VectorXd g(2);
    g << -1.0, -2.0;
    Eigen::MatrixXd A(1, 2);
    A << -1.0, 0.0;  // -p0 >= -10
    Eigen::VectorXd b(1);
    b << -10.0;
    QpResult r = solve_qp(B, g, A, b);
    CHECK(r.converged);
    CHECK((r.p - Eigen::Vector2d(1.0, 2.0)).cwiseAbs().maxCoeff() <= 1e-10);
    CHECK(r.multipliers[0] == doctest::Approx(0.0));

    // binding constraint: p0 <= 0.5
    b << -0.5;
    r = solve_qp(B, g, A, b);
    CHECK(r.converged);
    CHECK(r.p[0] == doctest::Approx(0.5).epsilon(1e-10));
    CHECK(r.p[1] == doctest::Approx(2.0).epsilon(1e-10));
    CHECK(r.multipliers[0] == doctest::Approx(0.5).epsilon(1e-8));

    // infeasible at p = 0: elastic reformulation still returns a useful step
    Eigen::MatrixXd A2(1, 2);
    A2 << 1.0, 0.0;  // p0 >= 2 (current point infeasible)
    Eigen::VectorXd b2(1);
    b2 << 2.0;
    r = solve_qp(B, g, A2, b2);
    CHECK(r.p[0] >= 1.0);
}

TEST_CASE("quadratic toy converges in a few iterations") {
    Eigen::VectorXd target(3);
    target << 0.4, -1.2, 2.2;
    const testing::ToyProblem toy(target);
    OptimizerConfig cfg;
    cfg.kkt_tol = 1e-8;
    cfg.driver.coarse_cells_x = cfg.driver.coarse_cells_y = 2;
    OptimizeResult r = optimize(toy, Eigen::VectorXd::Zero(3), cfg);
    CHECK(r.converged);
    CHECK(r.iterations <= 5);  // n + 2
    CHECK((r.alpha - target).cwiseAbs().maxCoeff() <= 1e-8);
}

TEST_CASE("constrained toy terminates feasible with the bound active") {
    const ConstrainedToy toy;
    OptimizerConfig cfg;
    cfg.kkt_tol = 1e-8;
    cfg.mu_feas = 1e-8;
    cfg.driver.coarse_cells_x = cfg.driver.coarse_cells_y = 2;
    OptimizeResult r = optimize(toy, Eigen::VectorXd::Zero(2), cfg);
    CHECK(r.converged);
    CHECK(r.alpha[0] == doctest::Approx(0.5).epsilon(1e-6));
    CHECK(r.alpha[1] == doctest::Approx(0.25).epsilon(1e-6));
    for (double g : r.constraint_values) CHECK(g >= -cfg.mu_feas);
}

TEST_CASE("validation run: determinism, monotone merit, history completeness") {
    const ValidationProblem problem;
    OptimizerConfig cfg;
    cfg.kkt_tol = 1e-6;
    cfg.driver.mu = 1e-2;
    cfg.driver.u_ref = 0;
    const OptimizeResult r1 = optimize(problem, Eigen::VectorXd::Zero(4), cfg);
    const OptimizeResult r2 = optimize(problem, Eigen::VectorXd::Zero(4), cfg);

    CHECK(r1.objective == r2.objective);  // bit-identical reruns
    CHECK((r1.alpha - r2.alpha).cwiseAbs().maxCoeff() == 0.0);
    REQUIRE(r1.history.size() == r2.history.size());
    for (std::size_t k = 0; k < r1.history.size(); ++k)
        CHECK(r1.history[k].objective == r2.history[k].objective);

    // accepted iterates do not increase the objective (no constraints here)
    double prev = std::numeric_limits<double>::infinity();
    int accepted = 0;
    for (const IterationRecord& rec : r1.history)
        if (rec.accepted) {
            CHECK(rec.objective <= prev + 1e-12);
            prev = rec.objective;
            ++accepted;
        }
    CHECK(accepted >= 2);
    CHECK(static_cast<int>(r1.history.size()) >= accepted);  // trials logged too

    // repeated single evaluations are bit-identical
    DriverConfig dc = cfg.driver;
    const DesignEval e1 = evaluate_design(problem, Eigen::VectorXd::Constant(4, 0.1), dc, true);
    const DesignEval e2 = evaluate_design(problem, Eigen::VectorXd::Constant(4, 0.1), dc, true);
    CHECK(e1.result.objective_value == e2.result.objective_value);
    CHECK((e1.result.gradient - e2.result.gradient).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("warm start database") {
    WarmStartDatabase db(0.05);
    const Eigen::VectorXd a = Eigen::VectorXd::Constant(4, 0.2);
    CHECK(db.lookup(a) == nullptr);

    SpacePtr coarse = make_space(3, 4, 4);
    auto& gen = testing::rng(107);
    Eigen::MatrixXd coef(coarse->num_active(), 2);
    for (int i = 0; i < coef.rows(); ++i)
        coef.row(i) << testing::uniform01(gen), testing::uniform01(gen);
    db.append(a, SplineFunction{coarse, coef});

    CHECK(db.lookup(Eigen::VectorXd::Constant(4, 0.3)) == nullptr);  // outside radius

    // exact match on the same space returns the stored coefficients
    const auto ws = warm_start_lookup(db, a, coarse);
    REQUIRE(ws.has_value());
    CHECK((ws->coeffs - coef).cwiseAbs().maxCoeff() <= 1e-14);

    // entry on a coarser space: prolong-then-restrict reproduces it pointwise
    SpacePtr finer = coarse->refine_cells(
        {CellId{0, 0, 0}, CellId{0, 1, 0}, CellId{0, 0, 1}, CellId{0, 1, 1}});
    const auto ws2 = warm_start_lookup(db, Eigen::VectorXd::Constant(4, 0.21), finer);
    REQUIRE(ws2.has_value());
    const SplineFunction stored{coarse, coef};
    for (int t = 0; t < 100; ++t) {
        const double x = testing::uniform01(gen), y = testing::uniform01(gen);
        CHECK((ws2->value(x, y) - stored.value(x, y)).cwiseAbs().maxCoeff() <= 1e-10);
    }
}
