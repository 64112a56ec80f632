#pragma once

#include "iga/knots.hpp"

#include <Eigen/Dense>
#include <array>
#include <memory>
#include <vector>

namespace iga {

enum class Side : int { South = 0, East = 1, North = 2, West = 3 };
constexpr std::array<Side, 4> kAllSides = {Side::South, Side::East, Side::North, Side::West};

struct CellId {
    int level = 0, cx = 0, cy = 0;
    friend bool operator==(const CellId&, const CellId&) = default;
};

/// Basis data of all active functions whose support contains a point.
struct BasisEval {
    std::vector<int> funcs;  // global active ranks
    Eigen::VectorXd value;
    Eigen::MatrixXd grad;   // n x 2 (d/dxi, d/deta)
    Eigen::MatrixXd hess;   // n x 3 (xx, xy, yy)
    Eigen::MatrixXd third;  // n x 4 (xxx, xxy, xyy, yyy), only when nders >= 3
};

/// Truncated hierarchical B-spline space on [0,1]^2 built from dyadic
/// refinements of a tensor-product base. Immutable after construction;
/// refinement returns a new space.
class HierarchicalSpace {
  public:
    static constexpr int kDefaultMaxLevels = 6;

    /// Single-level tensor-product space.
    HierarchicalSpace(KnotVector kx, KnotVector ky, int max_levels = kDefaultMaxLevels);

    enum CellState : unsigned char { Ghost = 0, Active = 1, Refined = 2 };

    /// From explicit per-level cell states (level 0 first; every level-0 cell
    /// non-ghost; children of refined cells non-ghost; children of active
    /// cells ghost).
    HierarchicalSpace(KnotVector kx0, KnotVector ky0,
                      std::vector<std::vector<unsigned char>> cell_states,
                      int max_levels = kDefaultMaxLevels);

    int num_levels() const { return static_cast<int>(levels_.size()); }
    int max_levels() const { return max_levels_; }
    int degree_x() const { return levels_[0].kx.degree(); }
    int degree_y() const { return levels_[0].ky.degree(); }
    const KnotVector& kx(int level) const { return levels_[level].kx; }
    const KnotVector& ky(int level) const { return levels_[level].ky; }
    int cells_x(int level) const { return levels_[level].kx.num_cells(); }
    int cells_y(int level) const { return levels_[level].ky.num_cells(); }

    int num_active() const { return num_active_; }
    int active_level(int rank) const { return func_level_[rank]; }
    /// Tensor index (ix, iy) of an active function at its own level.
    std::pair<int, int> active_index(int rank) const;
    Eigen::Vector2d greville(int rank) const;

    const std::vector<CellId>& active_cells() const { return active_cells_; }
    bool is_active_cell(const CellId& c) const;
    CellState cell_state(const CellId& c) const;
    CellId locate(double x, double y) const;
    std::array<double, 4> cell_rect(const CellId& c) const;  // x0, x1, y0, y1

    BasisEval eval(double x, double y, int nders) const;

    /// Tensor-structured evaluation on one active cell. Points form the grid
    /// xs × ys (all inside the cell); column index q = qx * ys.size() + qy.
    /// tables[k], k in 0..9: value, dx, dy, dxx, dxy, dyy, dxxx, dxxy, dxyy, dyyy.
    struct CellBasis {
        std::vector<int> funcs;
        std::array<Eigen::MatrixXd, 10> tables;
        int nders = 0;
    };
    CellBasis eval_on_cell(const CellId& cell, const std::vector<double>& xs,
                           const std::vector<double>& ys, int nders) const;

    std::shared_ptr<const HierarchicalSpace> refine_cells(const std::vector<CellId>& marked) const;
    std::shared_ptr<const HierarchicalSpace> refine_all() const;
    /// Same refinement pattern expressed on a dyadically refined base
    /// (spans the uniform h-refinement without deepening the hierarchy).
    std::shared_ptr<const HierarchicalSpace> uniform_rebase() const;

    /// All active cells (any level) intersecting the open support of an
    /// active function.
    std::vector<CellId> support_cells(int rank) const;

    /// Active functions that do not vanish on an active cell.
    const std::vector<int>& cell_functions(const CellId& c) const;

    /// Support of the active function in its own level's cell coordinates.
    std::array<int, 4> support_range(int rank) const;  // cx0, cx1, cy0, cy1 at active_level

    bool same_base(const HierarchicalSpace& o) const {
        return levels_[0].kx == o.levels_[0].kx && levels_[0].ky == o.levels_[0].ky;
    }

    // --- internals shared with the transfer/assembly machinery ---
    bool func_active(int level, int tensor_idx) const;
    int rank_of(int level, int tensor_idx) const;
    bool supp_in_omega(int level, int tensor_idx) const;  // supp subset of Omega^level
    int funcs_x(int level) const { return levels_[level].kx.num_funcs(); }
    int funcs_y(int level) const { return levels_[level].ky.num_funcs(); }
    const std::vector<int>& active_funcs(int level) const { return levels_[level].active_funcs; }

  private:
    struct Level {
        KnotVector kx, ky;
        std::vector<unsigned char> cell_state;    // per flat cell cy*ncx+cx
        std::vector<unsigned char> in_omega;      // cell region subset of Omega^l
        std::vector<unsigned char> cov_next;      // cell region subset of Omega^{l+1}
        std::vector<unsigned char> supp_in;       // per tensor func: supp in Omega^l
        std::vector<unsigned char> supp_cov_next; // per tensor func: supp in Omega^{l+1}
        std::vector<int> active_funcs;            // tensor indices, sorted
        std::vector<int> rank;                    // tensor idx -> global rank (-1 inactive)
    };

    struct Extraction {
        std::vector<int> funcs;  // global ranks
        Eigen::MatrixXd coef;    // n_funcs x (px+1)(py+1), local (a,b) = a*(py+1)+b
    };

    void build();
    const Extraction& extraction(const CellId& c) const;

    std::vector<Level> levels_;
    int max_levels_;
    int num_active_ = 0;
    std::vector<int> func_level_;               // rank -> level
    std::vector<int> func_tensor_;              // rank -> tensor idx at level
    std::vector<CellId> active_cells_;
    std::vector<std::vector<int>> cell_ext_;    // level -> flat cell -> index into ext_ (-1)
    std::vector<Extraction> ext_;
    // two-scale rows between consecutive levels, per direction
    std::vector<RefinementRows> rx_, ry_;

    friend struct TransferAccess;
};

using SpacePtr = std::shared_ptr<const HierarchicalSpace>;

SpacePtr make_space(int degree, int cells_x, int cells_y, int max_levels = HierarchicalSpace::kDefaultMaxLevels);

/// Decomposition of the active functions by their trace on the boundary of
/// the unit square, decided by dense sampling of the (truncated) trace.
struct BoundaryIndexSet {
    std::vector<int> boundary;  // ranks with nonzero boundary trace, sorted
    std::vector<int> inner;     // complement, sorted
    std::vector<int> pos;       // rank -> position in its own set
    std::vector<unsigned char> is_boundary;  // rank -> flag
};

BoundaryIndexSet boundary_decompose(const HierarchicalSpace& space);

/// Re-expresses coefficients (n_active(from) x dim) on `to`. residue is the
/// max-norm of the unrepresentable remainder (0 whenever span(from) is
/// contained in span(to), e.g. for cellwise refinement).
struct TransferResult {
    Eigen::MatrixXd coeffs;
    double residue = 0.0;
    std::vector<unsigned char> assigned;  // per target rank; mass never moves up levels
};
TransferResult transfer(const HierarchicalSpace& from, const Eigen::MatrixXd& coef,
                        const HierarchicalSpace& to);

/// Coarsest hierarchy compatible with both inputs (levelwise domain union).
SpacePtr meet_space(const HierarchicalSpace& a, const HierarchicalSpace& b);

} // namespace iga
