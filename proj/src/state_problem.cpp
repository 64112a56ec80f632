#include "iga/state_problem.hpp"

#include <stdexcept>

namespace iga {

ScalarEval StateProblem::constraint(int, const SplineFunction&, const GeometryMapping&,
                                    const Eigen::VectorXd&, bool) const {
    throw std::out_of_range("StateProblem::constraint: no constraints defined");
}

std::optional<double> StateProblem::strong_density(const SplineFunction&, const MapData&,
                                                   const Eigen::Vector2d&, const Eigen::VectorXd&) const {
    return std::nullopt;
}

double StateProblem::strong_boundary_penalty(const SplineFunction&, const GeometryMapping&,
                                             const Eigen::VectorXd&) const {
    return 0.0;
}

} // namespace iga
