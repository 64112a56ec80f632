#pragma once

#include "iga/state_problem.hpp"

namespace iga::testing {

/// Minimal plugin: unit-square boundary (alpha-independent), mass-matrix
/// state system with zero solution, quadratic design objective.
class ToyProblem : public StateProblem {
  public:
    explicit ToyProblem(Eigen::VectorXd target) : target_(std::move(target)) {}

    std::string name() const override { return "toy"; }
    int design_dim() const override { return static_cast<int>(target_.size()); }
    Eigen::VectorXd lower_bounds() const override { return Eigen::VectorXd::Constant(design_dim(), -10.0); }
    Eigen::VectorXd upper_bounds() const override { return Eigen::VectorXd::Constant(design_dim(), 10.0); }

    BoundaryCurve curve() const override {
        BoundaryCurve c;
        c.n_design = design_dim();
        c.eval = [](Side side, double s, const Eigen::VectorXd&) -> Eigen::Vector2d {
            switch (side) {
                case Side::South: return {s, 0.0};
                case Side::East: return {1.0, s};
                case Side::North: return {s, 1.0};
                default: return {0.0, s};
            }
        };
        const int n = design_dim();
        c.d_alpha = [n](Side, double, const Eigen::VectorXd&) { return Eigen::MatrixXd::Zero(2, n); };
        return c;
    }

    StateAssembly state_residual(const SplineFunction& u, const GeometryMapping& m,
                                 const Eigen::VectorXd&, const StateParts& parts) const override {
        const int n = u.space->num_active();
        IntegrateOptions io;
        io.res_size = n;
        io.want_jacobian = parts.dB_ddA;
        io.jac_rows = io.jac_cols = n;
        const AssemblyOutput out = integrate(
            {u.space.get()}, nullptr,
            [&](const CellQuad& cq, LocalOut& lo) {
                const auto& b = cq.basis[0];
                for (std::size_t q = 0; q < cq.pts.size(); ++q) {
                    double uv = 0.0;
                    for (std::size_t j = 0; j < b.funcs.size(); ++j)
                        uv += u.coeffs(b.funcs[j], 0) * b.tables[0](static_cast<int>(j), static_cast<int>(q));
                    for (std::size_t i = 0; i < b.funcs.size(); ++i) {
                        const double phi = b.tables[0](static_cast<int>(i), static_cast<int>(q));
                        lo.add(b.funcs[i], cq.w[q] * uv * phi);
                        if (parts.dB_ddA)
                            for (std::size_t j = 0; j < b.funcs.size(); ++j)
                                lo.add(b.funcs[i], b.funcs[j],
                                       cq.w[q] * phi * b.tables[0](static_cast<int>(j), static_cast<int>(q)));
                    }
                }
            },
            io);
        StateAssembly sa;
        sa.residual = out.residual;
        if (parts.dB_ddA) sa.dB_ddA = *out.jacobian;
        if (parts.dB_dcA) sa.dB_dcA = SpMat(n, 2 * m.space->num_active());
        if (parts.dB_dalpha) sa.dB_dalpha = Eigen::MatrixXd::Zero(n, design_dim());
        return sa;
    }

    ScalarEval objective(const SplineFunction&, const GeometryMapping& m, const Eigen::VectorXd& alpha,
                         bool want) const override {
        ScalarEval ev;
        ev.value = 0.5 * (alpha - target_).squaredNorm();
        ev.depends_on_state = false;
        ev.depends_on_geometry = false;
        if (want) {
            ev.d_alpha = alpha - target_;
            ev.d_dA = Eigen::VectorXd();
            ev.d_cA = Eigen::VectorXd::Zero(2 * m.space->num_active());
        }
        return ev;
    }

  private:
    Eigen::VectorXd target_;
};

} // namespace iga::testing
