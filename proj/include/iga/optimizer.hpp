#pragma once

#include "iga/driver.hpp"

#include <optional>

namespace iga {

/// Stored converged designs reused as Newton warm starts for nearby alphas.
class WarmStartDatabase {
  public:
    struct Entry {
        Eigen::VectorXd alpha;
        SplineFunction mapping;
    };

    explicit WarmStartDatabase(double match_eps = 0.05) : eps_(match_eps) {}

    void append(Eigen::VectorXd alpha, SplineFunction mapping) {
        entries_.push_back({std::move(alpha), std::move(mapping)});
    }
    std::size_t size() const { return entries_.size(); }
    double match_eps() const { return eps_; }

    /// Nearest entry within the match radius (Euclidean on alpha).
    const Entry* lookup(const Eigen::VectorXd& alpha) const;

  private:
    std::vector<Entry> entries_;
    double eps_;
};

/// The stored mapping of the matched entry, prolonged to the coarsest space
/// compatible with its own and restricted to the target space.
std::optional<SplineFunction> warm_start_lookup(const WarmStartDatabase& db, const Eigen::VectorXd& alpha,
                                                const SpacePtr& target);

struct IterationRecord {
    int index = 0;
    Eigen::VectorXd alpha;
    double objective = 0.0;
    double kkt_residual = 0.0;
    double max_violation = 0.0;
    int dof_geometry = 0;
    int dof_state = 0;
    int fold_rounds = 0;
    double wall_seconds = 0.0;
    bool accepted = true;
};

struct OptimizerConfig {
    double kkt_tol = 1e-6;
    double mu_feas = 1e-6;  // feasibility slack at termination
    int max_outer_iter = 30;
    double warm_eps = 0.05;
    bool use_warm_start = true;
    DriverConfig driver;
};

struct OptimizeResult {
    Eigen::VectorXd alpha;
    double objective = 0.0;
    double best_objective = 0.0;
    bool converged = false;
    int iterations = 0;
    std::vector<IterationRecord> history;
    std::vector<double> constraint_values;
    double avg_dof_geometry = 0.0;
    double avg_dof_state = 0.0;
};

/// SQP with a damped BFGS model, linearized constraints with feasibility
/// slack, native box bounds, and an l1 merit line search. The basis is
/// re-selected at accepted iterates; line-search trials reuse the incumbent
/// basis.
OptimizeResult optimize(const StateProblem& problem, Eigen::VectorXd alpha0, const OptimizerConfig& cfg);

} // namespace iga
