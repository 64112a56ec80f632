#pragma once

#include <Eigen/Dense>
#include <vector>

namespace iga {

/// Open (clamped) knot vector on [0,1] with basis evaluation up to
/// arbitrary derivative order.
class KnotVector {
  public:
    KnotVector(int degree, std::vector<double> knots);

    int degree() const { return degree_; }
    const std::vector<double>& knots() const { return knots_; }
    int num_funcs() const { return static_cast<int>(knots_.size()) - degree_ - 1; }
    int num_cells() const { return static_cast<int>(cell_span_.size()); }

    /// Left/right bound of cell c (cells are the nonzero knot spans).
    double cell_begin(int c) const { return knots_[cell_span_[c]]; }
    double cell_end(int c) const { return knots_[cell_span_[c] + 1]; }

    /// Cell index containing x; the last cell is closed on the right.
    int find_cell(double x) const;

    /// First/last cell index intersecting the support of function i.
    int support_begin(int i) const;
    int support_end(int i) const;

    /// Knot-average abscissa of function i.
    double greville(int i) const;

    /// Values and derivatives of the degree+1 functions that are nonzero
    /// on cell c, evaluated at x. Row r = function first_func_on_cell(c)+r,
    /// column k = k-th derivative. nders entries beyond the degree are zero.
    Eigen::MatrixXd eval_on_cell(int c, double x, int nders) const;

    /// Index of the first nonzero function on cell c.
    int first_func_on_cell(int c) const { return cell_span_[c] - degree_; }

    bool operator==(const KnotVector& o) const {
        return degree_ == o.degree_ && knots_ == o.knots_;
    }

  private:
    int degree_;
    std::vector<double> knots_;
    std::vector<int> cell_span_;
};

/// Uniform open knot vector on [0,1] with n_cells cells and maximum
/// interior regularity.
KnotVector make_open_knot_vector(int degree, int n_cells);

/// Knot vector obtained by inserting the midpoint of every cell.
KnotVector dyadic_refine(const KnotVector& kv);

/// Banded matrix R (fine x coarse) expressing each coarse function as a
/// combination of fine functions: phi_c_j = sum_i R(i,j) phi_f_i.
/// Stored row-wise: row i covers columns [col_begin[i], col_begin[i]+vals[i].size()).
struct RefinementRows {
    std::vector<int> col_begin;
    std::vector<std::vector<double>> vals;
    int cols = 0;

    double coef(int i, int j) const {
        const int off = j - col_begin[i];
        if (off < 0 || off >= static_cast<int>(vals[i].size())) return 0.0;
        return vals[i][off];
    }
};

RefinementRows refinement_rows(const KnotVector& coarse, const KnotVector& fine);

} // namespace iga
