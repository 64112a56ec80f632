#pragma once

#include "iga/egg.hpp"

#include <optional>
#include <string>

namespace iga {

struct StateParts {
    bool dB_ddA = false;
    bool dB_dcA = false;
    bool dB_dalpha = false;
};

struct StateAssembly {
    Eigen::VectorXd residual;                  // one entry per state basis function
    std::optional<SpMat> dB_ddA;               // n_state x n_state
    std::optional<SpMat> dB_dcA;               // n_state x 2*n_geo, column 2*rank+comp
    std::optional<Eigen::MatrixXd> dB_dalpha;  // n_state x n_design
};

/// Value and partials of a scalar functional (objective or constraint).
struct ScalarEval {
    double value = 0.0;
    Eigen::VectorXd d_dA;
    Eigen::VectorXd d_cA;
    Eigen::VectorXd d_alpha;
    bool depends_on_state = true;
    bool depends_on_geometry = true;
};

/// A shape-optimization problem plugin: boundary-curve family, state
/// residual, objective and constraints, all with exact partials.
class StateProblem {
  public:
    virtual ~StateProblem() = default;

    virtual std::string name() const = 0;
    virtual int design_dim() const = 0;
    virtual Eigen::VectorXd lower_bounds() const = 0;
    virtual Eigen::VectorXd upper_bounds() const = 0;
    virtual BoundaryCurve curve() const = 0;
    virtual bool linear_state() const { return true; }

    virtual StateAssembly state_residual(const SplineFunction& u, const GeometryMapping& m,
                                         const Eigen::VectorXd& alpha, const StateParts& parts) const = 0;

    virtual ScalarEval objective(const SplineFunction& u, const GeometryMapping& m,
                                 const Eigen::VectorXd& alpha, bool want_partials) const = 0;

    virtual int num_constraints() const { return 0; }
    /// Constraints are feasibility margins g_k >= 0.
    virtual ScalarEval constraint(int k, const SplineFunction& u, const GeometryMapping& m,
                                  const Eigen::VectorXd& alpha, bool want_partials) const;

    /// Squared strong-form residual density at a quadrature point of the
    /// volume loop (for the strong marker); unset when unavailable.
    virtual std::optional<double> strong_density(const SplineFunction& u, const MapData& md,
                                                 const Eigen::Vector2d& xi, const Eigen::VectorXd& alpha) const;

    /// Boundary penalty added to the strong marker.
    virtual double strong_boundary_penalty(const SplineFunction& u, const GeometryMapping& m,
                                           const Eigen::VectorXd& alpha) const;
};

} // namespace iga
