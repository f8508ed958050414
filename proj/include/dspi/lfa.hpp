#pragma once

#include "dspi/bellman.hpp"
#include "dspi/mdp.hpp"
#include "dspi/regularizer.hpp"
#include "dspi/schedule.hpp"
#include "dspi/trace.hpp"

#include <cstdint>
#include <iosfwd>
#include <vector>

namespace dspi {

/**
 * Linear features over flattened state-action pairs: row (s*m + a) of phi is
 * the feature vector of (s,a). Columns must be linearly independent, which is
 * verified at construction through the spectrum of the Gram matrix with
 * threshold 1e-8.
 */
struct FeatureMap {
    Eigen::MatrixXd phi;  // (n*m) x d
    int d() const { return static_cast<int>(phi.cols()); }
};

FeatureMap make_feature_map(Eigen::MatrixXd phi);
FeatureMap identity_features(int n, int m);
/** Random Gaussian features, orthonormalized column-wise. */
FeatureMap gaussian_features(int n, int m, int d, std::uint64_t seed);
/** One indicator column per (state tile, action); tiles group consecutive states. */
FeatureMap tile_features(int n, int m, int group_size);

// JSON schema: {d, phi: [[...]]} with n*m rows.
FeatureMap load_feature_map_json(std::istream& in, int n, int m);
void save_feature_map_json(const FeatureMap& features, std::ostream& out);

struct InitialDistribution {
    Eigen::VectorXd rho;  // distribution over states
};
InitialDistribution uniform_initial(int n);

/**
 * Discounted state visitation distribution
 * d = (1-gamma) rho' (I - gamma P_pi)^{-1} with P_pi(s,s') = sum_a pi(a|s) p(s'|s,a).
 */
Eigen::VectorXd discounted_visitation(const TabularMdp& mdp, const Policy& pi,
                                      const InitialDistribution& rho);

struct LinearFit {
    Eigen::VectorXd w;       // d coefficients
    Eigen::MatrixXd w_full;  // phi*w reshaped to n x m
};

/**
 * Weighted least-squares fit of q against the features with weights
 * mu(s,a) = state_dist(s) * pi(a|s). Solves the normal equations
 * phi' D phi w = phi' D q; when the weighted Gram matrix is singular the
 * minimum-norm solution is returned (eigenvalue cutoff 1e-10 relative to the
 * largest).
 */
LinearFit fit_linear_q(const QFunction& q, const FeatureMap& features,
                       const Eigen::VectorXd& state_dist, const Policy& pi);

/**
 * Averaged regularized iteration in the feature-induced value class: each
 * step fits the exact Q of the current policy under its own visitation
 * weights, averages the fitted tables, and applies the nu-regularized greedy
 * step. The trace records the fit error per iteration (eps) and its running
 * maximum, and the envelope adds 2*eps/(beta*(1-gamma)^2) to the tabular
 * closed form.
 */
SolverTrace run_dspi_lfa(const TabularMdp& mdp, const FeatureMap& features,
                         const InitialDistribution& rho, const Regularizer& nu, double tau,
                         const StepsizeSchedule& schedule, int k_max);

/** Natural-gradient stepsize parametrization of run_dspi_lfa (entropy, tau = 1/alpha0). */
SolverTrace run_npg_lfa(const TabularMdp& mdp, const FeatureMap& features,
                        const InitialDistribution& rho, double alpha0, double beta, int k_max);

/** Dual-accumulation reference: theta_{k+1} = theta_k + alpha_k w_k in coefficient space. */
struct RawNpgLfaResult {
    std::vector<Eigen::MatrixXd> policies;  // pi_0 .. pi_{k_max}
};
RawNpgLfaResult run_npg_lfa_raw(const TabularMdp& mdp, const FeatureMap& features,
                                const InitialDistribution& rho,
                                const std::vector<double>& alphas, int k_max);

}  // namespace dspi
