#pragma once

#include "dspi/mdp.hpp"
#include "dspi/regularizer.hpp"

namespace dspi {

/** [H^pi(Q)](s,a) = R(s,a) + gamma sum_s' p(s'|s,a) sum_a' pi(a'|s') Q(s',a'). */
QFunction apply_bellman_policy(const QFunction& q, const Policy& pi, const TabularMdp& mdp);

/** [H(Q)](s,a) = R(s,a) + gamma sum_s' p(s'|s,a) max_a' Q(s',a'). */
QFunction apply_bellman_optimality(const QFunction& q, const TabularMdp& mdp);

/**
 * Smoothed optimality operator: the inner max over the action simplex of
 * mu.Q(s') + eta nu(mu), solved through Regularizer::argmax. With eta = 0 the
 * result equals apply_bellman_optimality exactly.
 */
QFunction apply_smoothed_bellman_optimality(const QFunction& q, double eta,
                                            const Regularizer& nu, const TabularMdp& mdp);

/** H_eta^pi(Q) = H^pi(Q) + eta f(pi), f(pi)(s,a) = gamma sum_s' p(s'|s,a) nu(pi(s')). */
QFunction apply_smoothed_bellman_policy(const QFunction& q, const Policy& pi, double eta,
                                        const Regularizer& nu, const TabularMdp& mdp);

/**
 * Exact policy evaluation: solves the (nm)x(nm) linear system
 * (I - gamma P^pi) Q = R and verifies the fixed-point residual
 * |Q - H^pi(Q)|_inf <= residual_tol.
 */
QFunction evaluate_policy_exact(const Policy& pi, const TabularMdp& mdp,
                                double residual_tol = kEvalResidualTol);

struct OptimalQResult {
    QFunction q;
    Policy greedy;  // a deterministic greedy policy for q
    int iterations = 0;
};

/**
 * Value iteration on the optimality operator. Stops once the update step
 * satisfies |Q_{t+1} - Q_t|_inf <= tol*(1-gamma)/(2*gamma), which guarantees
 * |Q - Q*|_inf <= tol for the returned iterate.
 */
OptimalQResult optimal_q(const TabularMdp& mdp, double tol);

}  // namespace dspi
