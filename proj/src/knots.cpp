#include "iga/knots.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace iga {

KnotVector::KnotVector(int degree, std::vector<double> knots)
    : degree_(degree), knots_(std::move(knots)) {
    if (degree_ < 1) throw std::invalid_argument("knot vector: degree must be >= 1");
    const int m = static_cast<int>(knots_.size());
    if (m < 2 * (degree_ + 1)) throw std::invalid_argument("knot vector: too few knots");
    for (int i = 0; i + 1 < m; ++i)
        if (knots_[i] > knots_[i + 1]) throw std::invalid_argument("knot vector: knots must be nondecreasing");
    for (int i = 0; i <= degree_; ++i) {
        if (knots_[i] != knots_[0] || knots_[m - 1 - i] != knots_[m - 1])
            throw std::invalid_argument("knot vector: first/last knot must repeat degree+1 times");
    }
    // interior multiplicities must keep at least C^1 continuity
    int run = 1;
    for (int i = degree_ + 2; i < m - degree_ - 1; ++i) {
        run = (knots_[i] == knots_[i - 1]) ? run + 1 : 1;
        if (run > degree_ - 1) throw std::invalid_argument("knot vector: interior multiplicity breaks C^1");
    }
    for (int i = degree_; i < m - degree_ - 1; ++i)
        if (knots_[i + 1] > knots_[i]) cell_span_.push_back(i);
    if (cell_span_.empty()) throw std::invalid_argument("knot vector: no cells");
}

int KnotVector::support_begin(int i) const {
    const int n = num_cells();
    for (int c = 0; c < n; ++c)
        if (cell_span_[c] >= i) return c;
    return n - 1;
}

int KnotVector::support_end(int i) const {
    for (int c = num_cells() - 1; c >= 0; --c)
        if (cell_span_[c] <= i + degree_) return c;
    return 0;
}

int KnotVector::find_cell(double x) const {
    const int n = num_cells();
    if (x <= cell_begin(0)) return 0;
    if (x >= cell_end(n - 1)) return n - 1;
    int lo = 0, hi = n - 1;
    while (lo < hi) {
        const int mid = (lo + hi) / 2;
        if (x < cell_end(mid))
            hi = mid;
        else
            lo = mid + 1;
    }
    return lo;
}

double KnotVector::greville(int i) const {
    double s = 0.0;
    for (int k = 1; k <= degree_; ++k) s += knots_[i + k];
    return s / degree_;
}

Eigen::MatrixXd KnotVector::eval_on_cell(int c, double x, int nders) const {
    const int p = degree_;
    const int span = cell_span_[c]; // knots_[span] <= x < knots_[span+1]
    Eigen::MatrixXd out = Eigen::MatrixXd::Zero(p + 1, nders + 1);

    // basis values and derivatives, The NURBS Book A2.3
    Eigen::MatrixXd ndu(p + 1, p + 1);
    std::vector<double> left(p + 1), right(p + 1);
    ndu(0, 0) = 1.0;
    for (int j = 1; j <= p; ++j) {
        left[j] = x - knots_[span + 1 - j];
        right[j] = knots_[span + j] - x;
        double saved = 0.0;
        for (int r = 0; r < j; ++r) {
            ndu(j, r) = right[r + 1] + left[j - r];
            const double temp = ndu(r, j - 1) / ndu(j, r);
            ndu(r, j) = saved + right[r + 1] * temp;
            saved = left[j - r] * temp;
        }
        ndu(j, j) = saved;
    }
    for (int j = 0; j <= p; ++j) out(j, 0) = ndu(j, p);

    const int nd = std::min(nders, p);
    std::vector<std::vector<double>> a(2, std::vector<double>(p + 1));
    for (int r = 0; r <= p; ++r) {
        int s1 = 0, s2 = 1;
        a[0][0] = 1.0;
        for (int k = 1; k <= nd; ++k) {
            double d = 0.0;
            const int rk = r - k, pk = p - k;
            if (r >= k) {
                a[s2][0] = a[s1][0] / ndu(pk + 1, rk);
                d = a[s2][0] * ndu(rk, pk);
            }
            const int j1 = (rk >= -1) ? 1 : -rk;
            const int j2 = (r - 1 <= pk) ? k - 1 : p - r;
            for (int j = j1; j <= j2; ++j) {
                a[s2][j] = (a[s1][j] - a[s1][j - 1]) / ndu(pk + 1, rk + j);
                d += a[s2][j] * ndu(rk + j, pk);
            }
            if (r <= pk) {
                a[s2][k] = -a[s1][k - 1] / ndu(pk + 1, r);
                d += a[s2][k] * ndu(r, pk);
            }
            out(r, k) = d;
            std::swap(s1, s2);
        }
    }
    double fac = static_cast<double>(p);
    for (int k = 1; k <= nd; ++k) {
        for (int r = 0; r <= p; ++r) out(r, k) *= fac;
        fac *= static_cast<double>(p - k);
    }
    return out;
}

KnotVector make_open_knot_vector(int degree, int n_cells) {
    if (degree < 1) throw std::invalid_argument("make_open_knot_vector: degree must be >= 1");
    if (n_cells < 1) throw std::invalid_argument("make_open_knot_vector: n_cells must be >= 1");
    std::vector<double> knots;
    knots.reserve(2 * (degree + 1) + n_cells - 1);
    for (int i = 0; i <= degree; ++i) knots.push_back(0.0);
    for (int i = 1; i < n_cells; ++i) knots.push_back(static_cast<double>(i) / n_cells);
    for (int i = 0; i <= degree; ++i) knots.push_back(1.0);
    return KnotVector(degree, std::move(knots));
}

KnotVector dyadic_refine(const KnotVector& kv) {
    return make_open_knot_vector(kv.degree(), 2 * kv.num_cells());
}

RefinementRows refinement_rows(const KnotVector& coarse, const KnotVector& fine) {
    if (coarse.degree() != fine.degree())
        throw std::invalid_argument("refinement_rows: degree mismatch");
    const int p = coarse.degree();

    // knots of `fine` not present in `coarse`, to insert one at a time
    std::vector<double> work(coarse.knots());
    std::vector<double> to_insert;
    {
        const auto& f = fine.knots();
        std::size_t ci = 0;
        for (double t : f) {
            if (ci < work.size() && work[ci] == t) {
                ++ci;
            } else {
                to_insert.push_back(t);
            }
        }
        if (ci != work.size())
            throw std::invalid_argument("refinement_rows: fine knots do not contain coarse knots");
    }

    // rows[i] = expansion of fine function i over coarse functions; start as identity
    RefinementRows R;
    R.cols = coarse.num_funcs();
    R.col_begin.resize(R.cols);
    R.vals.resize(R.cols);
    for (int i = 0; i < R.cols; ++i) {
        R.col_begin[i] = i;
        R.vals[i] = {1.0};
    }

    for (double t : to_insert) {
        // Boehm: span k in `work` with work[k] <= t < work[k+1]
        int k = static_cast<int>(std::upper_bound(work.begin(), work.end(), t) - work.begin()) - 1;
        const int m = static_cast<int>(R.col_begin.size());
        RefinementRows next;
        next.cols = R.cols;
        next.col_begin.resize(m + 1);
        next.vals.resize(m + 1);
        for (int i = 0; i <= m; ++i) {
            double a;
            if (i <= k - p)
                a = 1.0;
            else if (i >= k + 1)
                a = 0.0;
            else
                a = (t - work[i]) / (work[i + p] - work[i]);
            // new row i = a * old row i + (1-a) * old row i-1
            if (a == 1.0) {
                next.col_begin[i] = R.col_begin[i];
                next.vals[i] = R.vals[i];
            } else if (a == 0.0) {
                next.col_begin[i] = R.col_begin[i - 1];
                next.vals[i] = R.vals[i - 1];
            } else {
                const int b0 = std::min(R.col_begin[i], R.col_begin[i - 1]);
                const int e0 = std::max(R.col_begin[i] + static_cast<int>(R.vals[i].size()),
                                        R.col_begin[i - 1] + static_cast<int>(R.vals[i - 1].size()));
                next.col_begin[i] = b0;
                next.vals[i].assign(e0 - b0, 0.0);
                for (std::size_t j = 0; j < R.vals[i].size(); ++j)
                    next.vals[i][R.col_begin[i] - b0 + j] += a * R.vals[i][j];
                for (std::size_t j = 0; j < R.vals[i - 1].size(); ++j)
                    next.vals[i][R.col_begin[i - 1] - b0 + j] += (1.0 - a) * R.vals[i - 1][j];
            }
        }
        R = std::move(next);
        work.insert(std::upper_bound(work.begin(), work.end(), t), t);
    }
    if (static_cast<int>(R.col_begin.size()) != fine.num_funcs())
        throw std::logic_error("refinement_rows: size mismatch after insertion");
    return R;
}

} // namespace iga
