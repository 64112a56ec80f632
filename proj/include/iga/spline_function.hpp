#pragma once

#include "iga/hierarchical_space.hpp"

#include <Eigen/Dense>

namespace iga {

/// Function in a hierarchical space, one coefficient row per active function.
struct SplineFunction {
    SpacePtr space;
    Eigen::MatrixXd coeffs;  // num_active x dim

    int dim() const { return static_cast<int>(coeffs.cols()); }

    Eigen::VectorXd value(double x, double y) const;
    /// rows: components, cols: (d/dxi, d/deta)
    Eigen::MatrixXd jacobian(double x, double y) const;
};

SplineFunction make_spline(SpacePtr space, Eigen::MatrixXd coeffs);

/// Constant function via partition of unity.
SplineFunction constant_spline(SpacePtr space, const Eigen::VectorXd& value);

/// Exact re-representation on a space that refines f.space cellwise.
SplineFunction prolong(const SplineFunction& f, SpacePtr target);

/// Lossy re-representation; unrepresentable detail is dropped and its
/// coefficient magnitude reported.
std::pair<SplineFunction, double> restrict_to(const SplineFunction& f, SpacePtr target);

} // namespace iga
