#include "iga/krylov.hpp"

#include <cmath>

namespace iga {

Eigen::VectorXd matfree_apply(const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& residual_fn,
                              const Eigen::VectorXd& at, const Eigen::VectorXd& direction, double eps) {
    if (eps <= 0.0) throw std::invalid_argument("matfree_apply: eps must be positive");
    if (direction.cwiseAbs().maxCoeff() == 0.0) return Eigen::VectorXd::Zero(at.size());
    return (residual_fn(at + eps * direction) - residual_fn(at)) / eps;
}

double matfree_eps(const Eigen::VectorXd& at, const Eigen::VectorXd& direction) {
    const double na = at.size() ? at.cwiseAbs().maxCoeff() : 0.0;
    const double nd = direction.size() ? direction.cwiseAbs().maxCoeff() : 0.0;
    return 1e-7 * (1.0 + na) / (1.0 + nd);
}

Eigen::VectorXd solve_krylov(const LinearOperator& apply, const Eigen::VectorXd& b, double tol,
                             int max_iter, int restart) {
    const int n = static_cast<int>(b.size());
    const double bnorm = b.norm();
    Eigen::VectorXd x = Eigen::VectorXd::Zero(n);
    if (bnorm == 0.0) return x;

    int iters = 0;
    double rel = 1.0;
    while (iters < max_iter) {
        Eigen::VectorXd r = b - apply(x);
        double beta = r.norm();
        rel = beta / bnorm;
        if (rel <= tol) return x;

        const int m = std::min(restart, max_iter - iters);
        Eigen::MatrixXd V(n, m + 1);
        Eigen::MatrixXd H = Eigen::MatrixXd::Zero(m + 1, m);
        Eigen::VectorXd cs(m), sn(m), g = Eigen::VectorXd::Zero(m + 1);
        V.col(0) = r / beta;
        g[0] = beta;

        int k = 0;
        for (; k < m; ++k) {
            Eigen::VectorXd w = apply(V.col(k));
            for (int j = 0; j <= k; ++j) {
                H(j, k) = V.col(j).dot(w);
                w -= H(j, k) * V.col(j);
            }
            // one re-orthogonalization pass
            for (int j = 0; j <= k; ++j) {
                const double c = V.col(j).dot(w);
                H(j, k) += c;
                w -= c * V.col(j);
            }
            const double hk1 = w.norm();
            H(k + 1, k) = hk1;
            if (hk1 > 1e-30) V.col(k + 1) = w / hk1;

            for (int j = 0; j < k; ++j) {
                const double t = cs[j] * H(j, k) + sn[j] * H(j + 1, k);
                H(j + 1, k) = -sn[j] * H(j, k) + cs[j] * H(j + 1, k);
                H(j, k) = t;
            }
            const double denom = std::hypot(H(k, k), H(k + 1, k));
            cs[k] = H(k, k) / denom;
            sn[k] = H(k + 1, k) / denom;
            H(k, k) = denom;
            H(k + 1, k) = 0.0;
            g[k + 1] = -sn[k] * g[k];
            g[k] = cs[k] * g[k];
            ++iters;
            rel = std::abs(g[k + 1]) / bnorm;
            if (rel <= tol || hk1 <= 1e-30) {
                ++k;
                break;
            }
        }
        Eigen::VectorXd y = H.topLeftCorner(k, k).triangularView<Eigen::Upper>().solve(g.head(k));
        x += V.leftCols(k) * y;
        if (rel <= tol) {
            const double check = (b - apply(x)).norm() / bnorm;
            if (check <= 10 * tol) return x;
            rel = check;
        }
    }
    throw KrylovError("solve_krylov: no convergence within max_iter", rel);
}

} // namespace iga
