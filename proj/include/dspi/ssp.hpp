#pragma once

#include "dspi/mdp.hpp"
#include "dspi/regularizer.hpp"
#include "dspi/schedule.hpp"
#include "dspi/trace.hpp"

#include <iosfwd>
#include <optional>
#include <vector>

namespace dspi {

/**
 * Contraction certificate for the undiscounted optimality operator: weights
 * xi > 1 and factor kappa = max (xi-1)/xi such that the operator contracts
 * the xi-weighted sup norm by kappa.
 */
struct WeightedNorm {
    Eigen::MatrixXd xi;  // n x m, strictly > 1
    double kappa = 0.0;

    double norm(const Eigen::MatrixXd& q) const {
        return (q.cwiseAbs().array() / xi.array()).maxCoeff();
    }
    /** min{1, kappa/(1-kappa)}; bounds the off-terminal mass of any row. */
    double kappa_prime() const { return std::min(1.0, kappa / (1.0 - kappa)); }
};

/**
 * Undiscounted MDP with a terminal state. Only the n non-terminal states are
 * stored; transition rows have n+1 entries with index n pointing at the
 * terminal state, which is absorbing with zero reward and never represented
 * explicitly. Rewards lie in [-1, 0].
 *
 * `cert` carries the (xi, kappa) certificate; the loader and the instance
 * generators fill it after verifying that every stationary policy is proper.
 */
struct SspMdp {
    int n = 0;
    int m = 0;
    std::vector<double> transition;  // n*m*(n+1)
    Eigen::MatrixXd reward;          // n x m
    std::optional<WeightedNorm> cert;

    double p(int s, int a, int next) const {
        return transition[(static_cast<std::size_t>(s) * m + a) * (n + 1) + next];
    }
    double& p(int s, int a, int next) {
        return transition[(static_cast<std::size_t>(s) * m + a) * (n + 1) + next];
    }
    double p_terminal(int s, int a) const { return p(s, a, n); }
};

/** Shape and range checks only; properness is checked by check_all_proper. */
void validate(const SspMdp& ssp);

struct PropernessResult {
    bool proper = false;
    // max over deterministic policies of the expected stage count (the
    // optimal value of the all-costs-one problem); valid iff proper
    Eigen::MatrixXd expected_stages;
    // witness when improper: a state and a deterministic policy under which
    // the terminal state is unreachable from that state
    int witness_state = -1;
    std::vector<int> witness_policy;
};

/**
 * Decides whether every stationary policy is proper. Improperness is
 * equivalent to the existence of a nonempty set U of states in which some
 * action keeps all transition mass; the largest such U is computed by
 * iterated elimination, and the stage-count iteration
 * T(s,a) = 1 + sum_s' p(s'|s,a) max_a' T(s',a') converges exactly in the
 * proper case. The witness search tries the max-self-occupancy policy first,
 * then full enumeration when n*m <= 16, then falls back to a policy that
 * stays inside U.
 */
PropernessResult check_all_proper(const SspMdp& ssp);

/**
 * Builds the weighted-norm certificate xi = T + c from the stage counts of
 * check_all_proper, with margin c doubling from 1 until a 200-pair random
 * contraction test passes (cap 2^10, then an internal error is raised).
 */
WeightedNorm compute_weighted_norm(const SspMdp& ssp);

/** Certificate attached to the instance, computing and caching it if absent. */
const WeightedNorm& certificate_for(SspMdp& ssp);

QFunction apply_ssp_bellman_optimality(const QFunction& q, const SspMdp& ssp);
QFunction apply_ssp_bellman_policy(const QFunction& q, const Policy& pi, const SspMdp& ssp);
QFunction apply_ssp_smoothed_optimality(const QFunction& q, double eta, const Regularizer& nu,
                                        const SspMdp& ssp);
/** Satisfies H~_eta^pi(Q) = H~^pi(Q) + eta g(pi), g(pi)(s,a) = sum_s' p(s'|s,a) nu(pi(s')). */
QFunction apply_ssp_smoothed_policy(const QFunction& q, const Policy& pi, double eta,
                                    const Regularizer& nu, const SspMdp& ssp);

/** Solves (I - P^pi) Q = R over the non-terminal block and checks the residual. */
QFunction evaluate_policy_ssp(const Policy& pi, const SspMdp& ssp,
                              double residual_tol = kEvalResidualTol);

struct SspOptimalQResult {
    QFunction q;
    Policy greedy;
    int iterations = 0;
};

/**
 * Value iteration under the undiscounted optimality operator. The stopping
 * rule lives in the xi-weighted norm (steps below tol*(1-kappa)/(2*kappa));
 * iteration continues until the plain sup-norm fixed-point residual is also
 * below 1e-10.
 */
SspOptimalQResult optimal_q_ssp(const SspMdp& ssp, const WeightedNorm& wn, double tol);

/**
 * Averaged regularized iteration with the undiscounted operators; structure
 * matches run_dspi. Uses the certificate embedded in the instance (computing
 * a local one when absent). The recorded envelope is
 * (1-(1-kappa)beta)^{k-1} (|V*-V^{pi_0}|_inf + 2 tau nu_max) / (1-kappa).
 */
SolverTrace run_dspi_ssp(const SspMdp& ssp, const Regularizer& nu, double tau,
                         const StepsizeSchedule& schedule, int k_max);

/** Natural-gradient parametrization (entropy, tau = 1/alpha0, constant beta). */
SolverTrace run_npg_ssp(const SspMdp& ssp, double alpha0, double beta, int k_max);

struct RawNpgSspResult {
    std::vector<Eigen::MatrixXd> policies;
};
RawNpgSspResult run_npg_ssp_raw(const SspMdp& ssp, const std::vector<double>& alphas,
                                int k_max);

// JSON schema mirrors the discounted one without gamma; transition rows have
// n+1 entries (terminal last) and rewards lie in [-1,0]. The loader enforces
// properness of all policies and embeds the (xi, kappa) certificate.
SspMdp load_ssp_json(std::istream& in);
SspMdp load_ssp_file(const std::string& path);
void save_ssp_json(const SspMdp& ssp, std::ostream& out);

}  // namespace dspi
