#pragma once

#include "iga/assembly.hpp"
#include "iga/sparse.hpp"

#include <functional>
#include <optional>

namespace iga {

/// Family of boundary curves d^alpha: one curve per side of the unit square,
/// differentiable in the design vector.
struct BoundaryCurve {
    int n_design = 0;
    std::function<Eigen::Vector2d(Side, double, const Eigen::VectorXd&)> eval;
    /// 2 x n_design partials at (side, s, alpha)
    std::function<Eigen::MatrixXd(Side, double, const Eigen::VectorXd&)> d_alpha;
};

struct ProjectionReport {
    double residual_total = 0.0;       // R(d_h)
    Eigen::VectorXd per_function;      // r_i, aligned with the boundary index set
    Eigen::VectorXd thresholds;        // mu_i
    int refinement_rounds = 0;
};

/// EGG mapping: full coefficient matrix over the active functions, with the
/// boundary rows fixed by projection and the inner rows the EGG unknowns.
struct GeometryMapping {
    SpacePtr space;
    Eigen::MatrixXd coeffs;  // n_active x 2
    BoundaryIndexSet bset;
    bool fold_free = false;

    SplineFunction spline() const { return {space, coeffs}; }
    int inner_size() const { return 2 * static_cast<int>(bset.inner.size()); }
    int boundary_size() const { return 2 * static_cast<int>(bset.boundary.size()); }

    Eigen::VectorXd inner_vec() const;
    Eigen::VectorXd boundary_vec() const;
    void set_inner(const Eigen::VectorXd& v);
    void set_boundary(const Eigen::VectorXd& v);
};

struct EggOptions {
    double newton_tol = 1e-10;  // on ||F||_inf
    int newton_max_iter = 50;
    int quad = 8;
    double metric_eps = 1e-4;  // regularization of the metric trace
    int max_fold_rounds = 8;
    bool parallel = true;
};

struct BoundaryProjection {
    SpacePtr space;  // possibly refined during the adaptive loop
    BoundaryIndexSet bset;
    Eigen::MatrixXd c_B;  // |B| x 2, aligned with bset.boundary
    ProjectionReport report;
};

/// L2 projection of the boundary curve onto the trace of the given space,
/// without refinement.
BoundaryProjection project_boundary(const BoundaryCurve& curve, const Eigen::VectorXd& alpha,
                                    SpacePtr space, const EggOptions& opts = {});

/// Adaptive variant: refines every boundary function whose residual
/// contribution exceeds its threshold until all thresholds hold.
BoundaryProjection project_boundary_adaptive(const BoundaryCurve& curve, const Eigen::VectorXd& alpha,
                                             SpacePtr space, double mu, const EggOptions& opts = {});

/// Transfinite (Coons) interpolant of the projected boundary, evaluated at
/// the Greville points of the inner functions. Returns the full coefficient
/// matrix (boundary rows copied from c_B).
Eigen::MatrixXd coons_inner_guess(const SpacePtr& space, const BoundaryIndexSet& bset,
                                  const Eigen::MatrixXd& c_B);

struct EggSystem {
    Eigen::VectorXd F;             // 2|I|
    std::optional<SpMat> dF_dcI;   // 2|I| x 2|I|
    std::optional<SpMat> dF_dcB;   // 2|I| x 2|B|
};

/// Residual (and optionally both Jacobian blocks) of the elliptic grid
/// generation weak form, assembled in one element loop. The rational scaling
/// 1/(g11+g22+eps) is differentiated exactly.
EggSystem egg_system(const GeometryMapping& m, bool want_dcI, bool want_dcB,
                     const EggOptions& opts = {});

struct NewtonStats {
    int iterations = 0;
    std::vector<double> residual_history;
    bool converged = false;
};

struct NewtonFailure : std::runtime_error {
    Eigen::VectorXd last_iterate;
    NewtonStats stats;
    NewtonFailure(const std::string& w, Eigen::VectorXd it, NewtonStats st)
        : std::runtime_error(w), last_iterate(std::move(it)), stats(std::move(st)) {}
};

/// Damped Newton on the inner coefficients (residual-norm line search with
/// step halving, minimum step 2^-10).
NewtonStats newton_solve_egg(GeometryMapping& m, const EggOptions& opts = {});

/// Cells where det J is non-positive at any sample point (tensor quadrature
/// points, corners, center, and a 4x4 uniform grid per cell).
std::vector<CellId> detect_folds(GeometryMapping& m, const EggOptions& opts = {});

struct ParameterizeStats {
    int fold_rounds = 0;
    int newton_iterations_total = 0;
    int newton_iterations_first = 0;
    ProjectionReport projection;
};

struct ParameterizeFailure : std::runtime_error {
    std::vector<CellId> defective;
    explicit ParameterizeFailure(const std::string& w, std::vector<CellId> d)
        : std::runtime_error(w), defective(std::move(d)) {}
};

/// Full pipeline: adaptive boundary projection, Coons (or warm) start,
/// Newton solve, fold detection and repair by refining all functions that do
/// not vanish on defective cells.
GeometryMapping parameterize(const Eigen::VectorXd& alpha, const BoundaryCurve& curve,
                             SpacePtr coarse_space, double mu, ParameterizeStats* stats = nullptr,
                             const EggOptions& opts = {},
                             const SplineFunction* warm_start = nullptr);

/// Same pipeline on a frozen space: plain projection, no adaptivity, no fold
/// repair (folds reported through fold_free).
GeometryMapping parameterize_frozen(const Eigen::VectorXd& alpha, const BoundaryCurve& curve,
                                    SpacePtr space, ParameterizeStats* stats = nullptr,
                                    const EggOptions& opts = {},
                                    const SplineFunction* warm_start = nullptr);

/// Action of [d c_B / d alpha]^T: one transpose solve with the boundary mass
/// matrix followed by multiplication with the assembled curve partials.
Eigen::VectorXd dcB_dalpha_transpose_apply(const Eigen::VectorXd& k, const BoundaryCurve& curve,
                                           const Eigen::VectorXd& alpha, const HierarchicalSpace& space,
                                           const BoundaryIndexSet& bset, const EggOptions& opts = {});

/// Forward tangent d c_B / d alpha_j for all j (|2B| x n), used by the
/// matrix-free gradient path.
Eigen::MatrixXd dcB_dalpha(const BoundaryCurve& curve, const Eigen::VectorXd& alpha,
                           const HierarchicalSpace& space, const BoundaryIndexSet& bset,
                           const EggOptions& opts = {});

} // namespace iga
