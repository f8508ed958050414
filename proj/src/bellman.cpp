#include "dspi/bellman.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace dspi {

namespace {

void check_shape(const QFunction& q, const TabularMdp& mdp) {
    if (q.values.rows() != mdp.n || q.values.cols() != mdp.m)
        throw std::invalid_argument("bellman: Q shape does not match the MDP");
}

// out(s,a) = R(s,a) + gamma * sum_s' p(s'|s,a) z(s')
QFunction backup(const Eigen::VectorXd& z, const TabularMdp& mdp) {
    QFunction out;
    out.values.resize(mdp.n, mdp.m);
    for (int s = 0; s < mdp.n; ++s) {
        for (int a = 0; a < mdp.m; ++a) {
            double acc = 0.0;
            for (int t = 0; t < mdp.n; ++t) acc += mdp.p(s, a, t) * z(t);
            out.values(s, a) = mdp.reward(s, a) + mdp.gamma * acc;
        }
    }
    return out;
}

}  // namespace

QFunction apply_bellman_policy(const QFunction& q, const Policy& pi, const TabularMdp& mdp) {
    check_shape(q, mdp);
    validate(pi, mdp.n, mdp.m);
    Eigen::VectorXd z = (pi.probs.array() * q.values.array()).rowwise().sum();
    return backup(z, mdp);
}

QFunction apply_bellman_optimality(const QFunction& q, const TabularMdp& mdp) {
    check_shape(q, mdp);
    Eigen::VectorXd z = q.values.rowwise().maxCoeff();
    return backup(z, mdp);
}

QFunction apply_smoothed_bellman_optimality(const QFunction& q, double eta,
                                            const Regularizer& nu, const TabularMdp& mdp) {
    check_shape(q, mdp);
    if (eta < 0.0) throw std::invalid_argument("bellman: eta must be nonnegative");
    if (eta == 0.0) return apply_bellman_optimality(q, mdp);
    Eigen::VectorXd z(mdp.n);
    for (int s = 0; s < mdp.n; ++s) {
        Eigen::VectorXd row = q.values.row(s).transpose();
        Eigen::VectorXd mu = nu.argmax(row, eta);
        z(s) = mu.dot(row) + eta * nu.value(mu);
    }
    return backup(z, mdp);
}

QFunction apply_smoothed_bellman_policy(const QFunction& q, const Policy& pi, double eta,
                                        const Regularizer& nu, const TabularMdp& mdp) {
    check_shape(q, mdp);
    validate(pi, mdp.n, mdp.m);
    if (eta < 0.0) throw std::invalid_argument("bellman: eta must be nonnegative");
    if (eta == 0.0) return apply_bellman_policy(q, pi, mdp);
    Eigen::VectorXd z(mdp.n);
    for (int s = 0; s < mdp.n; ++s) {
        Eigen::VectorXd row = q.values.row(s).transpose();
        z(s) = pi.probs.row(s).dot(row) + eta * nu.value(pi.probs.row(s).transpose());
    }
    return backup(z, mdp);
}

QFunction evaluate_policy_exact(const Policy& pi, const TabularMdp& mdp, double residual_tol) {
    validate(pi, mdp.n, mdp.m);
    const int nm = mdp.n * mdp.m;
    Eigen::MatrixXd system = Eigen::MatrixXd::Identity(nm, nm);
    Eigen::VectorXd rhs(nm);
    for (int s = 0; s < mdp.n; ++s) {
        for (int a = 0; a < mdp.m; ++a) {
            const int row = s * mdp.m + a;
            rhs(row) = mdp.reward(s, a);
            for (int t = 0; t < mdp.n; ++t) {
                const double pv = mdp.gamma * mdp.p(s, a, t);
                if (pv == 0.0) continue;
                for (int b = 0; b < mdp.m; ++b) {
                    system(row, t * mdp.m + b) -= pv * pi.probs(t, b);
                }
            }
        }
    }
    Eigen::VectorXd flat = system.partialPivLu().solve(rhs);
    QFunction q;
    q.values.resize(mdp.n, mdp.m);
    for (int s = 0; s < mdp.n; ++s)
        for (int a = 0; a < mdp.m; ++a) q.values(s, a) = flat(s * mdp.m + a);

    double residual =
        (q.values - apply_bellman_policy(q, pi, mdp).values).cwiseAbs().maxCoeff();
    if (!std::isfinite(residual) || residual > residual_tol) {
        std::ostringstream msg;
        msg << "evaluate_policy_exact: fixed-point residual " << residual
            << " exceeds " << residual_tol;
        throw std::runtime_error(msg.str());
    }
    return q;
}

OptimalQResult optimal_q(const TabularMdp& mdp, double tol) {
    if (!(tol > 0.0)) throw std::invalid_argument("optimal_q: tol must be positive");
    const double stop = tol * (1.0 - mdp.gamma) / (2.0 * mdp.gamma);
    QFunction q;
    q.values = Eigen::MatrixXd::Zero(mdp.n, mdp.m);
    OptimalQResult result;
    const int max_iterations = 5'000'000;
    for (int it = 0; it < max_iterations; ++it) {
        QFunction next = apply_bellman_optimality(q, mdp);
        double delta = (next.values - q.values).cwiseAbs().maxCoeff();
        q = std::move(next);
        if (delta <= stop) {
            result.iterations = it + 1;
            break;
        }
        if (it + 1 == max_iterations)
            throw std::runtime_error("optimal_q: value iteration failed to converge");
    }
    result.q = q;
    result.greedy.probs.resize(mdp.n, mdp.m);
    for (int s = 0; s < mdp.n; ++s)
        result.greedy.probs.row(s) = greedy_point_mass(q.values.row(s).transpose()).transpose();
    return result;
}

}  // namespace dspi
