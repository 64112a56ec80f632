#pragma once

#include "iga/quadrature.hpp"
#include "iga/spline_function.hpp"

#include <Eigen/Sparse>
#include <functional>
#include <optional>

namespace iga {

using SpMat = Eigen::SparseMatrix<double>;
using Triplet = Eigen::Triplet<double>;

/// Mapping values at a quadrature point.
struct MapData {
    Eigen::Vector2d x;
    Eigen::Matrix2d J;     // J(c, q) = d x_c / d xi_q
    Eigen::Matrix2d Jinv;
    double detJ = 0.0;
    Eigen::Vector3d Hx, Hy;  // second derivatives (xx, xy, yy) per component
    Eigen::Vector4d Tx, Ty;  // third derivatives (xxx, xxy, xyy, yyy), when requested
};

/// Quadrature data of one integration box (a cell of the joint partition).
struct CellQuad {
    std::array<double, 4> rect;  // x0, x1, y0, y1
    std::vector<Eigen::Vector2d> pts;
    std::vector<double> w;  // includes the box measure (and edge length on boundaries)
    std::vector<HierarchicalSpace::CellBasis> basis;  // one entry per requested space
    std::vector<MapData> map;                         // empty without a mapping
    // boundary-loop fields
    Side side = Side::South;
    int tangent_axis = 0;  // 0: xi varies along the edge, 1: eta varies
    bool is_boundary = false;
};

struct LocalOut {
    std::vector<std::pair<int, double>> res;
    std::vector<Triplet> jac;
    void add(int row, double v) { res.emplace_back(row, v); }
    void add(int row, int col, double v) { jac.emplace_back(row, col, v); }
};

using Kernel = std::function<void(const CellQuad&, LocalOut&)>;

struct AssemblyOutput {
    Eigen::VectorXd residual;
    std::optional<SpMat> jacobian;
};

struct IntegrateOptions {
    int rule = 8;        // Gauss points per direction (2(p+1) for bicubics)
    int rule_subcell = 0;  // when > 0: rule for boxes strictly inside a mapping cell
    int nders = 2;       // basis derivative order made available to the kernel
    bool map_third = false;
    int res_size = 0;
    bool want_jacobian = false;
    int jac_rows = 0, jac_cols = 0;
    bool parallel = true;
};

/// Joint partition of the unit square induced by several spaces: the  boxes
/// on which every space is polynomial. Spaces must share a commensurate
/// uniform dyadic base.
struct JointCell {
    std::array<double, 4> rect;
    std::vector<CellId> owner;  // active cell of each space containing the box
};
std::vector<JointCell> joint_cells(const std::vector<const HierarchicalSpace*>& spaces);
std::vector<JointCell> joint_boundary_cells(const std::vector<const HierarchicalSpace*>& spaces, Side side);

/// Element loop over the joint partition; per-cell contributions are reduced
/// in deterministic cell order regardless of thread count.
AssemblyOutput integrate(const std::vector<const HierarchicalSpace*>& spaces,
                         const SplineFunction* mapping, const Kernel& kernel,
                         const IntegrateOptions& opts);

/// Serial reference implementation of the same loop (kept for testing and
/// benchmarking against the parallel path).
AssemblyOutput integrate_serial(const std::vector<const HierarchicalSpace*>& spaces,
                                const SplineFunction* mapping, const Kernel& kernel,
                                const IntegrateOptions& opts);

/// Loop over the edges of boundary cells of the given sides.
AssemblyOutput integrate_boundary(const std::vector<Side>& sides,
                                  const std::vector<const HierarchicalSpace*>& spaces,
                                  const SplineFunction* mapping, const Kernel& kernel,
                                  const IntegrateOptions& opts);

/// Arc-length parameter of a boundary point on a side (the free coordinate).
double side_parameter(Side side, const Eigen::Vector2d& xi);

} // namespace iga
