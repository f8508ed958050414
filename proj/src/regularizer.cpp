#include "dspi/regularizer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "dspi/mdp.hpp"

namespace dspi {

Regularizer Regularizer::from_key(const std::string& key) {
    if (key == "zero") return Regularizer(RegularizerKind::Zero);
    if (key == "entropy") return Regularizer(RegularizerKind::ShannonEntropy);
    if (key == "neg_sq_norm") return Regularizer(RegularizerKind::ShiftedNegSquaredNorm);
    throw std::invalid_argument("unknown regularizer key: " + key +
                                " (expected zero | entropy | neg_sq_norm)");
}

std::string Regularizer::key() const {
    switch (kind_) {
        case RegularizerKind::Zero: return "zero";
        case RegularizerKind::ShannonEntropy: return "entropy";
        case RegularizerKind::ShiftedNegSquaredNorm: return "neg_sq_norm";
    }
    return "?";
}

double Regularizer::value(const Eigen::VectorXd& mu) const {
    if (!is_distribution(mu))
        throw std::invalid_argument("regularizer: argument is not a probability distribution");
    switch (kind_) {
        case RegularizerKind::Zero:
            return 0.0;
        case RegularizerKind::ShannonEntropy: {
            double h = 0.0;
            for (Eigen::Index i = 0; i < mu.size(); ++i) {
                if (mu(i) > 0.0) h -= mu(i) * std::log(mu(i));  // 0 log 0 := 0
            }
            return std::max(h, 0.0);
        }
        case RegularizerKind::ShiftedNegSquaredNorm:
            return std::max(0.5 * (1.0 - mu.squaredNorm()), 0.0);
    }
    return 0.0;
}

double Regularizer::max_value(int m) const {
    if (m < 1) throw std::invalid_argument("regularizer: m must be >= 1");
    switch (kind_) {
        case RegularizerKind::Zero: return 0.0;
        case RegularizerKind::ShannonEntropy: return std::log(static_cast<double>(m));
        case RegularizerKind::ShiftedNegSquaredNorm: return 0.5 * (1.0 - 1.0 / m);
    }
    return 0.0;
}

Eigen::VectorXd Regularizer::max_point(int m) const {
    if (m < 1) throw std::invalid_argument("regularizer: m must be >= 1");
    return Eigen::VectorXd::Constant(m, 1.0 / m);
}

Eigen::VectorXd greedy_point_mass(const Eigen::VectorXd& q) {
    int best = 0;
    for (Eigen::Index i = 1; i < q.size(); ++i) {
        if (q(i) > q(best)) best = static_cast<int>(i);
    }
    Eigen::VectorXd mu = Eigen::VectorXd::Zero(q.size());
    mu(best) = 1.0;
    return mu;
}

Eigen::VectorXd project_to_simplex(const Eigen::VectorXd& v) {
    const Eigen::Index m = v.size();
    std::vector<double> u(v.data(), v.data() + m);
    std::sort(u.begin(), u.end(), std::greater<double>());
    double cumulative = 0.0;
    double theta = 0.0;
    for (Eigen::Index j = 0; j < m; ++j) {
        cumulative += u[j];
        double candidate = (1.0 - cumulative) / static_cast<double>(j + 1);
        if (u[j] + candidate > 0.0) theta = candidate;
    }
    Eigen::VectorXd mu(m);
    for (Eigen::Index i = 0; i < m; ++i) mu(i) = std::max(v(i) + theta, 0.0);
    return mu;
}

Eigen::VectorXd Regularizer::argmax(const Eigen::VectorXd& q, double eta) const {
    if (eta < 0.0) throw std::invalid_argument("regularizer: eta must be nonnegative");
    if (!q.allFinite()) throw std::invalid_argument("regularizer: q must be finite");
    if (q.size() < 1) throw std::invalid_argument("regularizer: empty q");

    if (kind_ == RegularizerKind::Zero || eta == 0.0) return greedy_point_mass(q);

    // max-subtraction keeps the scaled scores finite and cancellation-free as
    // eta decays geometrically; both steps are invariant to the shift
    Eigen::VectorXd shifted = (q.array() - q.maxCoeff()) / eta;
    if (kind_ == RegularizerKind::ShannonEntropy) {
        Eigen::VectorXd w = shifted.array().exp();
        return w / w.sum();
    }
    return project_to_simplex(shifted);
}

}  // namespace dspi
