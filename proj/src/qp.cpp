#include "iga/qp.hpp"

#include <cmath>
#include <vector>

namespace iga {

namespace {

struct ActiveSetQp {
    const Eigen::MatrixXd& B;
    const Eigen::VectorXd& g;
    const Eigen::MatrixXd& A;
    const Eigen::VectorXd& b;

    QpResult run(Eigen::VectorXd p) const {
        const int n = static_cast<int>(g.size());
        const int m = static_cast<int>(b.size());
        std::vector<int> W;
        for (int i = 0; i < m; ++i)
            if (std::abs(A.row(i).dot(p) - b[i]) < 1e-12) W.push_back(i);

        QpResult out;
        out.multipliers = Eigen::VectorXd::Zero(m);
        for (int iter = 0; iter < 100 * (n + m + 1); ++iter) {
            // equality-constrained subproblem on the working set
            const int k = static_cast<int>(W.size());
            Eigen::MatrixXd K(n + k, n + k);
            K.setZero();
            K.topLeftCorner(n, n) = B;
            for (int r = 0; r < k; ++r) {
                K.block(n + r, 0, 1, n) = A.row(W[r]);
                K.block(0, n + r, n, 1) = A.row(W[r]).transpose();
            }
            Eigen::VectorXd rhs(n + k);
            rhs.head(n) = -(g + B * p);
            rhs.tail(k).setZero();
            const Eigen::VectorXd sol = K.fullPivLu().solve(rhs);
            const Eigen::VectorXd d = sol.head(n);
            const Eigen::VectorXd lam = -sol.tail(k);

            if (d.lpNorm<Eigen::Infinity>() <= 1e-12) {
                // optimal on the working set; check multiplier signs
                int drop = -1;
                double most_negative = -1e-10;
                for (int r = 0; r < k; ++r)
                    if (lam[r] < most_negative) {
                        most_negative = lam[r];
                        drop = r;
                    }
                if (drop < 0) {
                    out.p = p;
                    out.multipliers.setZero();
                    for (int r = 0; r < k; ++r) out.multipliers[W[r]] = std::max(0.0, lam[r]);
                    out.converged = true;
                    return out;
                }
                W.erase(W.begin() + drop);
                continue;
            }

            // step to the nearest blocking constraint
            double tau = 1.0;
            int block = -1;
            for (int i = 0; i < m; ++i) {
                bool inW = false;
                for (int r : W) inW = inW || (r == i);
                if (inW) continue;
                const double ad = A.row(i).dot(d);
                if (ad < -1e-14) {
                    const double t = (b[i] - A.row(i).dot(p)) / ad;
                    if (t < tau) {
                        tau = t;
                        block = i;
                    }
                }
            }
            p += tau * d;
            if (block >= 0) W.push_back(block);
        }
        out.p = p;
        return out;  // iteration cap; converged stays false
    }
};

} // namespace

QpResult solve_qp(const Eigen::MatrixXd& B, const Eigen::VectorXd& g, const Eigen::MatrixXd& A,
                  const Eigen::VectorXd& b, double rho) {
    const int n = static_cast<int>(g.size());
    const int m = static_cast<int>(b.size());

    // p = 0 feasible: solve directly
    bool feasible0 = true;
    for (int i = 0; i < m; ++i) feasible0 = feasible0 && (b[i] <= 1e-12);
    if (feasible0) {
        const ActiveSetQp qp{B, g, A, b};
        QpResult r = qp.run(Eigen::VectorXd::Zero(n));
        if (r.converged) return r;
    }

    // elastic reformulation: variables (p, t), t >= 0, A p + t >= b
    Eigen::MatrixXd Be = Eigen::MatrixXd::Zero(n + m, n + m);
    Be.topLeftCorner(n, n) = B;
    Be.bottomRightCorner(m, m) = 1e-6 * Eigen::MatrixXd::Identity(m, m);
    Eigen::VectorXd ge(n + m);
    ge.head(n) = g;
    ge.tail(m).setConstant(rho);
    Eigen::MatrixXd Ae = Eigen::MatrixXd::Zero(2 * m, n + m);
    Ae.topLeftCorner(m, n) = A;
    Ae.topRightCorner(m, m) = Eigen::MatrixXd::Identity(m, m);
    Ae.bottomRightCorner(m, m) = Eigen::MatrixXd::Identity(m, m);
    Eigen::VectorXd be(2 * m);
    be.head(m) = b;
    be.tail(m).setZero();

    Eigen::VectorXd z0 = Eigen::VectorXd::Zero(n + m);
    for (int i = 0; i < m; ++i) z0[n + i] = std::max(0.0, b[i]);
    const ActiveSetQp qp{Be, ge, Ae, be};
    QpResult re = qp.run(z0);

    QpResult out;
    out.p = re.p.head(n);
    out.multipliers = re.multipliers.head(m);
    out.relaxed = true;
    out.converged = re.converged;
    return out;
}

} // namespace iga
