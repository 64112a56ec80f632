#pragma once

#include "iga/state_problem.hpp"

namespace iga {

/// Physical and template constants of the cooling-element design problem.
struct CoolingOptions {
    double width = 2.0, height = 1.0;
    double diffusivity = 0.8;        // d
    double dissipation = 1e-3;       // f
    double n_tot = 10.0;             // total heat influx
    double t_max = 80.0;             // source temperature bound
    double sigma = 0.1;              // internal source width
    Eigen::Vector2d source_center = {1.5, 0.25};
    double cooling_coef = 1.0 / 20.0;  // prefactor of R^3/r^2
    double cost_coef = 100.0 / M_PI;   // manufacturing cost per R^2
    double band_factor = 0.25;         // admissible normal offset, fraction of R
    double blend_factor = 0.05;        // junction blend half-width, fraction of R
    double corner_margin = 0.05;       // clearance added to R at the corners
    double r_min = 0.12, r_max = 0.85;
    int quad = 8;
    bool parallel = true;
};

/// Design vector layout: centers (x1,y1,...,x4,y4) then radii (R1..R4);
/// coolers live on the south, north, north, and east sides.
class CoolingProblem : public StateProblem {
  public:
    explicit CoolingProblem(CoolingOptions opts = {}) : opts_(opts) {}

    std::string name() const override { return "cooling"; }
    int design_dim() const override { return 12; }
    Eigen::VectorXd lower_bounds() const override;
    Eigen::VectorXd upper_bounds() const override;
    BoundaryCurve curve() const override;

    StateAssembly state_residual(const SplineFunction& u, const GeometryMapping& m,
                                 const Eigen::VectorXd& alpha, const StateParts& parts) const override;

    ScalarEval objective(const SplineFunction& u, const GeometryMapping& m, const Eigen::VectorXd& alpha,
                         bool want_partials) const override;

    int num_constraints() const override { return 31; }  // temperature + 30 geometric
    ScalarEval constraint(int k, const SplineFunction& u, const GeometryMapping& m,
                          const Eigen::VectorXd& alpha, bool want_partials) const override;

    std::optional<double> strong_density(const SplineFunction& u, const MapData& md, const Eigen::Vector2d& xi,
                                         const Eigen::VectorXd& alpha) const override;

    /// Source temperature T and its partials (the closed-form inversion of
    /// the influx balance).
    ScalarEval temperature(const SplineFunction& u, const GeometryMapping& m,
                           const Eigen::VectorXd& alpha, bool want_partials) const;

    /// Template design with one dominant cooler of radius r1; the remaining
    /// coolers take the minimum radius.
    Eigen::VectorXd default_start(double r1) const;

    const CoolingOptions& options() const { return opts_; }

    /// Exact boundary length of one side of the current template.
    double side_length(Side side, const Eigen::VectorXd& alpha) const;

  private:
    CoolingOptions opts_;
};

} // namespace iga
