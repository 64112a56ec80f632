#include "iga/sparse.hpp"

#include <atomic>

namespace iga {

namespace stats {
namespace {
std::atomic<long> g_factorizations{0};
}
long factorization_count() { return g_factorizations.load(); }
void reset_factorization_count() { g_factorizations.store(0); }
void bump_factorization_count() { ++g_factorizations; }
} // namespace stats

LuSolver::LuSolver(const SpMat& A) {
    if (A.rows() != A.cols()) throw std::invalid_argument("LuSolver: matrix must be square");
    SpMat Ac = A;
    Ac.makeCompressed();
    lu_.compute(Ac);
    if (lu_.info() != Eigen::Success)
        throw SingularMatrixError("sparse factorization failed: matrix singular to working precision");
    stats::bump_factorization_count();
}

Eigen::VectorXd LuSolver::solve(const Eigen::VectorXd& b) const {
    Eigen::VectorXd x = lu_.solve(b);
    if (lu_.info() != Eigen::Success) throw SingularMatrixError("sparse solve failed");
    return x;
}

Eigen::VectorXd LuSolver::solve_transpose(const Eigen::VectorXd& b) const {
    Eigen::VectorXd x = lu_.transpose().solve(b);
    return x;
}

Eigen::MatrixXd LuSolver::solve(const Eigen::MatrixXd& b) const {
    Eigen::MatrixXd x = lu_.solve(b);
    if (lu_.info() != Eigen::Success) throw SingularMatrixError("sparse solve failed");
    return x;
}

Eigen::MatrixXd LuSolver::solve_transpose(const Eigen::MatrixXd& b) const {
    Eigen::MatrixXd x = lu_.transpose().solve(b);
    return x;
}

Eigen::VectorXd solve_sparse(const SpMat& A, const Eigen::VectorXd& b, SolveMode mode) {
    const LuSolver lu(A);
    return mode == SolveMode::Normal ? lu.solve(b) : lu.solve_transpose(b);
}

} // namespace iga
