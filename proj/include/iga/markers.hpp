#pragma once

#include "iga/state_problem.hpp"

namespace iga {

enum class MarkerMode { Strong, Weak };

struct MarkerResult {
    // weak mode: squared residual components against the enriched test space
    Eigen::VectorXd function_indicators;
    SpacePtr enriched;
    // strong mode: elementwise strong-residual integrals
    std::vector<std::pair<CellId, double>> cell_indicators;
    double boundary_penalty = 0.0;
    double total = 0.0;
};

/// A posteriori refinement indicators of the state approximation: weak mode
/// tests the residual against a uniformly h-refined space; strong mode
/// integrates the squared strong-form residual per cell plus a boundary
/// penalty.
MarkerResult residual_markers(const StateProblem& problem, const SplineFunction& u,
                              const GeometryMapping& m, const Eigen::VectorXd& alpha, MarkerMode mode,
                              int quad = 8);

} // namespace iga
