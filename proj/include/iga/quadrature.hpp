#pragma once

#include <Eigen/Dense>

namespace iga {

/// Gauss-Legendre rule mapped to [0,1]; weights sum to 1.
struct QuadratureRule {
    Eigen::VectorXd points;
    Eigen::VectorXd weights;
    int size() const { return static_cast<int>(points.size()); }
};

QuadratureRule gauss_rule(int n);

} // namespace iga
