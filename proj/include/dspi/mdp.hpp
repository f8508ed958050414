#pragma once

#include <Eigen/Dense>

#include <iosfwd>
#include <string>
#include <vector>

namespace dspi {

// Default numeric tolerances. Harness configs may override the slack used in
// individual certificate checks; these are the library-level defaults.
inline constexpr double kDistributionTol = 1e-12;
inline constexpr double kEvalResidualTol = 1e-10;
inline constexpr double kReferenceTol = 1e-12;

// Below this smoothing weight the regularized greedy step is numerically a
// point mass; the solvers switch to the exact greedy branch and flag the
// iteration in the trace.
inline constexpr double kEtaFloor = 1e-300;

/**
 * Finite discounted MDP with a dense transition tensor.
 *
 * The transition tensor is stored flat in state-action-successor order:
 * p(s'|s,a) = transition[(s*m + a)*n + s']. Rewards lie in [0,1] and the
 * discount factor is strictly inside (0,1).
 */
struct TabularMdp {
    int n = 0;  // number of states
    int m = 0;  // number of actions
    std::vector<double> transition;  // n*m*n entries, rows sum to 1
    Eigen::MatrixXd reward;          // n x m
    double gamma = 0.0;

    double p(int s, int a, int next) const {
        return transition[(static_cast<std::size_t>(s) * m + a) * n + next];
    }
    double& p(int s, int a, int next) {
        return transition[(static_cast<std::size_t>(s) * m + a) * n + next];
    }
};

/** Stochastic policy: one probability distribution over actions per state. */
struct Policy {
    Eigen::MatrixXd probs;  // n x m, rows sum to 1
};

/** State-action value table. */
struct QFunction {
    Eigen::MatrixXd values;  // n x m
};

/** State value table. */
struct VFunction {
    Eigen::VectorXd values;  // n
};

/** True iff mu is componentwise >= -tol and sums to 1 within tol. */
bool is_distribution(const Eigen::VectorXd& mu, double tol = kDistributionTol);

/** Throws std::invalid_argument when an invariant is violated. */
void validate(const TabularMdp& mdp);
void validate(const Policy& pi, int n, int m);

Policy uniform_policy(int n, int m);
Policy deterministic_policy(const std::vector<int>& actions, int m);

/** Row-wise V(s) = sum_a pi(a|s) Q(s,a). */
VFunction value_of(const QFunction& q, const Policy& pi);

// JSON serialization: {n, m, gamma, reward: [[..]], transition: [[[..]]]}
// with state -> action -> successor nesting. The loader validates all
// invariants and rejects malformed documents.
TabularMdp load_mdp_json(std::istream& in);
TabularMdp load_mdp_file(const std::string& path);
void save_mdp_json(const TabularMdp& mdp, std::ostream& out);

}  // namespace dspi
