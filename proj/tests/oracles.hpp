// Independent reference implementations used as test oracles. Everything here
// is written as plain definitional loops over nested vectors, deliberately
// sharing no code path with the library implementations it checks.
#pragma once

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "dspi/mdp.hpp"

namespace oracle {

using Table = std::vector<std::vector<double>>;  // [state][action]

inline Table to_table(const Eigen::MatrixXd& m) {
    Table t(m.rows(), std::vector<double>(m.cols()));
    for (Eigen::Index s = 0; s < m.rows(); ++s)
        for (Eigen::Index a = 0; a < m.cols(); ++a) t[s][a] = m(s, a);
    return t;
}

inline Eigen::MatrixXd to_matrix(const Table& t) {
    Eigen::MatrixXd m(t.size(), t[0].size());
    for (std::size_t s = 0; s < t.size(); ++s)
        for (std::size_t a = 0; a < t[0].size(); ++a) m(s, a) = t[s][a];
    return m;
}

inline double sup_dist(const Table& x, const Table& y) {
    double d = 0.0;
    for (std::size_t s = 0; s < x.size(); ++s)
        for (std::size_t a = 0; a < x[0].size(); ++a)
            d = std::max(d, std::abs(x[s][a] - y[s][a]));
    return d;
}

// [H^pi(Q)](s,a) per definition
inline Table bellman_policy(const Table& q, const Table& pi, const dspi::TabularMdp& mdp) {
    Table out(mdp.n, std::vector<double>(mdp.m, 0.0));
    for (int s = 0; s < mdp.n; ++s) {
        for (int a = 0; a < mdp.m; ++a) {
            double acc = 0.0;
            for (int t = 0; t < mdp.n; ++t) {
                double inner = 0.0;
                for (int b = 0; b < mdp.m; ++b) inner += pi[t][b] * q[t][b];
                acc += mdp.p(s, a, t) * inner;
            }
            out[s][a] = mdp.reward(s, a) + mdp.gamma * acc;
        }
    }
    return out;
}

// [H(Q)](s,a) per definition
inline Table bellman_optimality(const Table& q, const dspi::TabularMdp& mdp) {
    Table out(mdp.n, std::vector<double>(mdp.m, 0.0));
    for (int s = 0; s < mdp.n; ++s) {
        for (int a = 0; a < mdp.m; ++a) {
            double acc = 0.0;
            for (int t = 0; t < mdp.n; ++t) {
                double best = q[t][0];
                for (int b = 1; b < mdp.m; ++b) best = std::max(best, q[t][b]);
                acc += mdp.p(s, a, t) * best;
            }
            out[s][a] = mdp.reward(s, a) + mdp.gamma * acc;
        }
    }
    return out;
}

// f(pi)(s,a) = gamma sum_s' p(s'|s,a) nu(pi(s')) for the entropy case
inline Table entropy_smoothing_term(const Table& pi, const dspi::TabularMdp& mdp) {
    Table out(mdp.n, std::vector<double>(mdp.m, 0.0));
    for (int s = 0; s < mdp.n; ++s) {
        for (int a = 0; a < mdp.m; ++a) {
            double acc = 0.0;
            for (int t = 0; t < mdp.n; ++t) {
                double h = 0.0;
                for (int b = 0; b < mdp.m; ++b)
                    if (pi[t][b] > 0.0) h -= pi[t][b] * std::log(pi[t][b]);
                acc += mdp.p(s, a, t) * h;
            }
            out[s][a] = mdp.gamma * acc;
        }
    }
    return out;
}

// fixed point of H^pi via long power iteration; error <= gamma^iters/(1-gamma)
inline Table evaluate_policy_power(const Table& pi, const dspi::TabularMdp& mdp,
                                   int iters = 3000) {
    Table q(mdp.n, std::vector<double>(mdp.m, 0.0));
    for (int i = 0; i < iters; ++i) q = bellman_policy(q, pi, mdp);
    return q;
}

inline Table deterministic_table(const std::vector<int>& actions, int m) {
    Table pi(actions.size(), std::vector<double>(m, 0.0));
    for (std::size_t s = 0; s < actions.size(); ++s) pi[s][actions[s]] = 1.0;
    return pi;
}

// componentwise max over all deterministic policies of V^pi; the optimal value
struct BruteForceResult {
    std::vector<double> v_star;
    std::vector<int> best_policy;
};

inline BruteForceResult brute_force_optimal(const dspi::TabularMdp& mdp, int eval_iters = 3000) {
    BruteForceResult result;
    result.v_star.assign(mdp.n, -1e300);
    result.best_policy.assign(mdp.n, 0);
    std::vector<int> assignment(mdp.n, 0);
    double best_total = -1e300;
    while (true) {
        Table pi = deterministic_table(assignment, mdp.m);
        Table q = evaluate_policy_power(pi, mdp, eval_iters);
        double total = 0.0;
        for (int s = 0; s < mdp.n; ++s) {
            double v = q[s][assignment[s]];
            result.v_star[s] = std::max(result.v_star[s], v);
            total += v;
        }
        if (total > best_total) {
            best_total = total;
            result.best_policy = assignment;
        }
        int pos = 0;
        while (pos < mdp.n && ++assignment[pos] == mdp.m) assignment[pos++] = 0;
        if (pos == mdp.n) break;
    }
    return result;
}

// grid search of max_mu { mu.q + eta nu(mu) } over the 2-action simplex
template <typename NuFn>
inline double grid_max_m2(const std::vector<double>& q, double eta, NuFn nu, double resolution) {
    double best = -1e300;
    const int steps = static_cast<int>(std::round(1.0 / resolution));
    for (int i = 0; i <= steps; ++i) {
        double p = static_cast<double>(i) / steps;
        std::vector<double> mu{p, 1.0 - p};
        best = std::max(best, mu[0] * q[0] + mu[1] * q[1] + eta * nu(mu));
    }
    return best;
}

inline double entropy_of(const std::vector<double>& mu) {
    double h = 0.0;
    for (double x : mu)
        if (x > 0.0) h -= x * std::log(x);
    return h;
}

inline std::vector<double> random_simplex_point(int m, std::mt19937_64& engine) {
    std::uniform_real_distribution<double> uniform(0.0, 1.0);
    std::vector<double> mu(m);
    double total = 0.0;
    for (double& x : mu) {
        x = -std::log(std::max(uniform(engine), 1e-300));
        total += x;
    }
    for (double& x : mu) x /= total;
    return mu;
}

}  // namespace oracle
