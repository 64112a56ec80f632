#pragma once

#include <Eigen/Sparse>
#include <Eigen/SparseLU>

#include <memory>
#include <stdexcept>

namespace iga {

using SpMat = Eigen::SparseMatrix<double>;

struct SingularMatrixError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

namespace stats {
/// Count of sparse LU factorizations since the last reset (used by the
/// factorization-reuse tests).
long factorization_count();
void reset_factorization_count();
void bump_factorization_count();
} // namespace stats

/// LU factorization usable for both normal and transposed solves.
class LuSolver {
  public:
    explicit LuSolver(const SpMat& A);

    Eigen::VectorXd solve(const Eigen::VectorXd& b) const;
    Eigen::VectorXd solve_transpose(const Eigen::VectorXd& b) const;
    Eigen::MatrixXd solve(const Eigen::MatrixXd& b) const;
    Eigen::MatrixXd solve_transpose(const Eigen::MatrixXd& b) const;

  private:
    mutable Eigen::SparseLU<SpMat> lu_;  // transpose-solve views are non-const in Eigen
};

enum class SolveMode { Normal, Transpose };

Eigen::VectorXd solve_sparse(const SpMat& A, const Eigen::VectorXd& b,
                             SolveMode mode = SolveMode::Normal);

} // namespace iga
