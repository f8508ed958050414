#pragma once

#include "dspi/bellman.hpp"
#include "dspi/mdp.hpp"
#include "dspi/regularizer.hpp"
#include "dspi/schedule.hpp"
#include "dspi/trace.hpp"

#include <vector>

namespace dspi {

struct PiResult {
    SolverTrace trace;
    // iteration k at which the greedy policy first repeated (pi_{k+1} = pi_k);
    // -1 when the budget ran out first
    int converged_at = -1;
};

/**
 * Policy iteration: greedy improvement on the exact Q of the previous policy,
 * lowest-index tie-breaking, uniform initial policy. Early-stops as soon as
 * the policy repeats. The trace envelope is gamma^k * |V* - V^{pi_0}|_inf.
 */
PiResult run_pi(const TabularMdp& mdp, int k_max);

/**
 * Doubly smoothed policy iteration: policy k+1 is the nu-regularized greedy
 * step on the running average of past Q-functions,
 *
 *   Qbar_{k+1} = (1 - beta_k) Qbar_k + beta_k Q^{pi_k}
 *   pi_{k+1}(s) = argmax_mu { mu.Qbar_{k+1}(s) + eta_k nu(mu) },
 *   eta_k = tau * prod_{j=1..k} (1 - beta_j)  (maintained multiplicatively),
 *
 * with pi_0 the nu-maximizer at every state and Qbar_0 = 0.
 */
SolverTrace run_dspi(const TabularMdp& mdp, const Regularizer& nu, double tau,
                     const StepsizeSchedule& schedule, int k_max);

/**
 * Natural policy gradient with the geometric stepsize alpha_k =
 * beta*alpha0/(1-beta)^k, run in the normalized averaged representation
 * (entropy regularizer, tau = 1/alpha0, constant stepsize beta) so that no
 * geometrically growing dual accumulator is ever stored.
 */
SolverTrace run_npg(const TabularMdp& mdp, double alpha0, double beta, int k_max);

/**
 * Reference dual-accumulation form: theta_{k+1} = theta_k + alpha_k Q^{pi_k},
 * pi_{k+1}(s) = softmax(theta_{k+1}(s)). Entries of theta grow geometrically
 * under geometric stepsizes, so this mode is only intended for validating the
 * normalized implementation over short horizons.
 */
struct RawNpgResult {
    std::vector<Eigen::MatrixXd> policies;  // pi_0 .. pi_{k_max}
    std::vector<Eigen::MatrixXd> thetas;    // theta_0 .. theta_{k_max}
    std::vector<double> alphas;             // stepsizes consumed
};
RawNpgResult run_npg_raw(const TabularMdp& mdp, const std::vector<double>& alphas, int k_max);

struct EquivalenceReport {
    double max_deviation = 0.0;  // max over k of |pi_k^{dual} - pi_k^{averaged}|_inf
    int worst_k = -1;
    bool pass = false;
    double tol = 0.0;
};

/**
 * Runs the dual-accumulation and the normalized averaged form side by side
 * with beta_k = alpha_k / sum_{i<=k} alpha_i and tau = 1/alpha_0 and reports
 * the largest policy deviation over k <= k_max.
 */
EquivalenceReport check_npg_dspi_equivalence(const TabularMdp& mdp,
                                             const std::vector<double>& alphas, int k_max,
                                             double tol = 1e-10);

struct DualAveragedPiResult {
    SolverTrace trace;
    int first_optimal_k = -1;   // first k with |V* - V^{pi_k}|_inf below tolerance
    int stopped_at = -1;        // iteration where the greedy policy stabilized
    int kstar = 0;              // per-action elimination horizon
    long long budget = 0;       // n*(m-1)*kstar
};

/**
 * Dual-averaged policy iteration: greedy step on the averaged Q-function
 * (zero regularizer), deterministic lowest-index initial policy, beta_0 = 1
 * then constant beta in (0,1). Stops early once the greedy policy is stable
 * across one iteration and matches a reference greedy optimal policy. The
 * reported budget is n(m-1)*ceil(log(2/(1-gamma)) / (beta(1-gamma))).
 */
DualAveragedPiResult run_dual_averaged_pi(const TabularMdp& mdp, double beta, int k_max = -1);

}  // namespace dspi
