#pragma once

#include "iga/state_problem.hpp"

namespace iga {

/// Closed-form reference data of the validation problem: the boundary
/// displacement integral and the exact optimum it induces.
struct ValidationReference {
    double A_exact = 0.23738317851312254;  // integral of d(s) over [0,1]
    double J_star() const { return 1.0 - 2.0 * A_exact * A_exact; }
    Eigen::Vector4d alpha_star() const { return Eigen::Vector4d::Constant(A_exact); }
};

/// Envelope-times-cosine boundary displacement profile, d(0)=d(1)=0, d(1/2)=1.
double validation_profile(double s);
double validation_profile_derivative(double s);

/// Four-sided boundary family with per-side displacement amplitudes
/// alpha in [0, 2/5]^4.
BoundaryCurve validation_curve();

struct ValidationOptions {
    double nitsche_c = 1e3;
    int quad = 8;
    bool parallel = true;
};

/// Poisson problem -lap u = -lap det J with Nitsche boundary enforcement of
/// u = det J; objective integral of u over the parametric domain plus the
/// quadratic design penalty.
class ValidationProblem : public StateProblem {
  public:
    explicit ValidationProblem(ValidationOptions opts = {}) : opts_(opts) {}

    std::string name() const override { return "validation"; }
    int design_dim() const override { return 4; }
    Eigen::VectorXd lower_bounds() const override { return Eigen::VectorXd::Zero(4); }
    Eigen::VectorXd upper_bounds() const override { return Eigen::VectorXd::Constant(4, 0.4); }
    BoundaryCurve curve() const override { return validation_curve(); }

    StateAssembly state_residual(const SplineFunction& u, const GeometryMapping& m,
                                 const Eigen::VectorXd& alpha, const StateParts& parts) const override;

    ScalarEval objective(const SplineFunction& u, const GeometryMapping& m, const Eigen::VectorXd& alpha,
                         bool want_partials) const override;

    std::optional<double> strong_density(const SplineFunction& u, const MapData& md, const Eigen::Vector2d& xi,
                                         const Eigen::VectorXd& alpha) const override;
    double strong_boundary_penalty(const SplineFunction& u, const GeometryMapping& m,
                                   const Eigen::VectorXd& alpha) const override;

  private:
    ValidationOptions opts_;
};

} // namespace iga
