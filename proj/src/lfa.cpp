#include "dspi/lfa.hpp"

#include <cmath>
#include <istream>
#include <ostream>
#include <random>
#include <stdexcept>

#include "json.hpp"

namespace dspi {

using nlohmann::json;

namespace {
constexpr double kRankThreshold = 1e-8;
constexpr double kPinvCutoff = 1e-10;
}  // namespace

FeatureMap make_feature_map(Eigen::MatrixXd phi) {
    if (phi.rows() < 1 || phi.cols() < 1)
        throw std::invalid_argument("features: empty matrix");
    if (phi.cols() > phi.rows())
        throw std::invalid_argument("features: d must not exceed n*m");
    if (!phi.allFinite()) throw std::invalid_argument("features: entries must be finite");
    Eigen::MatrixXd gram = phi.transpose() * phi;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(gram);
    if (eig.eigenvalues().minCoeff() <= kRankThreshold)
        throw std::invalid_argument("features: columns are not linearly independent");
    return FeatureMap{std::move(phi)};
}

FeatureMap identity_features(int n, int m) {
    return make_feature_map(Eigen::MatrixXd::Identity(n * m, n * m));
}

FeatureMap gaussian_features(int n, int m, int d, std::uint64_t seed) {
    if (d < 1 || d > n * m) throw std::invalid_argument("features: d must lie in [1, n*m]");
    std::mt19937_64 engine(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    Eigen::MatrixXd raw(n * m, d);
    for (int r = 0; r < n * m; ++r)
        for (int c = 0; c < d; ++c) raw(r, c) = normal(engine);
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(raw);
    Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(n * m, d);
    return make_feature_map(std::move(q));
}

FeatureMap tile_features(int n, int m, int group_size) {
    if (group_size < 1) throw std::invalid_argument("features: group size must be >= 1");
    const int tiles = (n + group_size - 1) / group_size;
    Eigen::MatrixXd phi = Eigen::MatrixXd::Zero(n * m, tiles * m);
    for (int s = 0; s < n; ++s)
        for (int a = 0; a < m; ++a) phi(s * m + a, (s / group_size) * m + a) = 1.0;
    return make_feature_map(std::move(phi));
}

FeatureMap load_feature_map_json(std::istream& in, int n, int m) {
    json doc = json::parse(in);
    const int d = doc.at("d").get<int>();
    const json& rows = doc.at("phi");
    if (static_cast<int>(rows.size()) != n * m)
        throw std::invalid_argument("features json: phi must have n*m rows");
    Eigen::MatrixXd phi(n * m, d);
    for (int r = 0; r < n * m; ++r) {
        if (static_cast<int>(rows[r].size()) != d)
            throw std::invalid_argument("features json: row with wrong length");
        for (int c = 0; c < d; ++c) phi(r, c) = rows[r][c].get<double>();
    }
    return make_feature_map(std::move(phi));
}

void save_feature_map_json(const FeatureMap& features, std::ostream& out) {
    json doc;
    doc["d"] = features.d();
    json rows = json::array();
    for (Eigen::Index r = 0; r < features.phi.rows(); ++r) {
        json row = json::array();
        for (Eigen::Index c = 0; c < features.phi.cols(); ++c) row.push_back(features.phi(r, c));
        rows.push_back(std::move(row));
    }
    doc["phi"] = std::move(rows);
    out << doc.dump(2) << "\n";
}

InitialDistribution uniform_initial(int n) {
    return InitialDistribution{Eigen::VectorXd::Constant(n, 1.0 / n)};
}

Eigen::VectorXd discounted_visitation(const TabularMdp& mdp, const Policy& pi,
                                      const InitialDistribution& rho) {
    validate(pi, mdp.n, mdp.m);
    if (!is_distribution(rho.rho) || rho.rho.size() != mdp.n)
        throw std::invalid_argument("visitation: rho is not a distribution over states");
    Eigen::MatrixXd p_pi = Eigen::MatrixXd::Zero(mdp.n, mdp.n);
    for (int s = 0; s < mdp.n; ++s)
        for (int a = 0; a < mdp.m; ++a)
            for (int t = 0; t < mdp.n; ++t) p_pi(s, t) += pi.probs(s, a) * mdp.p(s, a, t);
    // d' = (1-gamma) rho' (I - gamma P)^{-1}  <=>  (I - gamma P') d = (1-gamma) rho
    Eigen::MatrixXd system =
        Eigen::MatrixXd::Identity(mdp.n, mdp.n) - mdp.gamma * p_pi.transpose();
    Eigen::VectorXd d = system.partialPivLu().solve((1.0 - mdp.gamma) * rho.rho);
    return d;
}

LinearFit fit_linear_q(const QFunction& q, const FeatureMap& features,
                       const Eigen::VectorXd& state_dist, const Policy& pi) {
    const int n = static_cast<int>(q.values.rows());
    const int m = static_cast<int>(q.values.cols());
    if (features.phi.rows() != n * m)
        throw std::invalid_argument("fit: features do not match the Q table");
    if (state_dist.size() != n)
        throw std::invalid_argument("fit: state distribution has wrong length");

    Eigen::VectorXd weights(n * m);
    Eigen::VectorXd target(n * m);
    for (int s = 0; s < n; ++s) {
        for (int a = 0; a < m; ++a) {
            weights(s * m + a) = state_dist(s) * pi.probs(s, a);
            target(s * m + a) = q.values(s, a);
        }
    }
    Eigen::MatrixXd weighted = weights.asDiagonal() * features.phi;
    Eigen::MatrixXd gram = features.phi.transpose() * weighted;  // phi' D phi
    Eigen::VectorXd moment = features.phi.transpose() * (weights.cwiseProduct(target));

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(gram);
    const double cutoff = kPinvCutoff * std::max(eig.eigenvalues().cwiseAbs().maxCoeff(), 1e-30);
    Eigen::VectorXd inv_spectrum(eig.eigenvalues().size());
    for (Eigen::Index i = 0; i < inv_spectrum.size(); ++i) {
        const double lambda = eig.eigenvalues()(i);
        inv_spectrum(i) = lambda > cutoff ? 1.0 / lambda : 0.0;
    }
    LinearFit fit;
    fit.w = eig.eigenvectors() * inv_spectrum.asDiagonal() * eig.eigenvectors().transpose() *
            moment;
    Eigen::VectorXd flat = features.phi * fit.w;
    fit.w_full.resize(n, m);
    for (int s = 0; s < n; ++s)
        for (int a = 0; a < m; ++a) fit.w_full(s, a) = flat(s * m + a);
    return fit;
}

namespace {

SolverTrace run_lfa_core(const TabularMdp& mdp, const FeatureMap& features,
                         const InitialDistribution& rho, const Regularizer& nu, double tau,
                         const StepsizeSchedule& schedule, int k_max,
                         const std::string& solver_id) {
    validate(mdp);
    if (tau < 0.0) throw std::invalid_argument("solver: tau must be nonnegative");
    if (k_max < 1) throw std::invalid_argument("solver: k_max must be >= 1");

    const OptimalQResult ref = optimal_q(mdp, kReferenceTol);
    const Eigen::VectorXd v_star = ref.q.values.rowwise().maxCoeff();
    const double gamma = mdp.gamma;
    const bool constant_schedule = schedule.kind() == ScheduleKind::ConstantAfterOne;
    const double beta_const = constant_schedule ? schedule.constant() : 0.0;

    SolverTrace tr;
    tr.solver_id = solver_id;
    tr.gamma = gamma;
    tr.tau = tau;
    tr.nu_key = nu.key();
    tr.nu_max = nu.max_value(mdp.m);
    tr.q_star = ref.q.values;
    tr.v_star = v_star;
    tr.iterations.reserve(k_max);

    Eigen::MatrixXd wbar = Eigen::MatrixXd::Zero(mdp.n, mdp.m);
    Policy pi;
    pi.probs = nu.max_point(mdp.m).transpose().replicate(mdp.n, 1);
    double eta = tau;
    double eps_running = 0.0;
    double v0_gap = 0.0;

    for (int k = 0; k < k_max; ++k) {
        QFunction qpi = evaluate_policy_exact(pi, mdp);
        Eigen::VectorXd visitation = discounted_visitation(mdp, pi, rho);
        LinearFit fit = fit_linear_q(qpi, features, visitation, pi);
        const double eps_k = (fit.w_full - qpi.values).cwiseAbs().maxCoeff();
        eps_running = std::max(eps_running, eps_k);

        Eigen::VectorXd vpi = (pi.probs.array() * qpi.values.array()).rowwise().sum();
        double v_gap = (v_star - vpi).cwiseAbs().maxCoeff();
        if (k == 0) {
            v0_gap = v_gap;
            tr.v0_gap = v0_gap;
        }

        const double beta_k = schedule.beta(k);
        if (k >= 1) eta *= (1.0 - beta_k);

        double envelope = std::numeric_limits<double>::quiet_NaN();
        if (constant_schedule) {
            const double approx_term =
                2.0 * eps_running / (beta_const * (1.0 - gamma) * (1.0 - gamma));
            envelope = k == 0 ? v0_gap + approx_term
                              : std::pow(1.0 - beta_const * (1.0 - gamma), k - 1) *
                                        (gamma * v0_gap + tau * tr.nu_max) +
                                    approx_term;
        }

        IterationRecord rec;
        rec.k = k;
        rec.policy = pi.probs;
        rec.q_pi = qpi.values;
        rec.qbar = wbar;
        rec.v_gap = v_gap;
        rec.qbar_gap = (tr.q_star - wbar).cwiseAbs().maxCoeff();
        rec.beta = beta_k;
        rec.eta = eta;
        rec.envelope = envelope;
        rec.eta_floored = eta < kEtaFloor && nu.kind() != RegularizerKind::Zero;
        rec.eps = eps_k;
        rec.eps_running = eps_running;
        tr.iterations.push_back(std::move(rec));

        wbar = (1.0 - beta_k) * wbar + beta_k * fit.w_full;
        const double eta_eff = eta < kEtaFloor ? 0.0 : eta;
        for (int s = 0; s < mdp.n; ++s)
            pi.probs.row(s) = nu.argmax(wbar.row(s).transpose(), eta_eff).transpose();
    }
    return tr;
}

}  // namespace

SolverTrace run_dspi_lfa(const TabularMdp& mdp, const FeatureMap& features,
                         const InitialDistribution& rho, const Regularizer& nu, double tau,
                         const StepsizeSchedule& schedule, int k_max) {
    return run_lfa_core(mdp, features, rho, nu, tau, schedule, k_max, "dspi_lfa");
}

SolverTrace run_npg_lfa(const TabularMdp& mdp, const FeatureMap& features,
                        const InitialDistribution& rho, double alpha0, double beta, int k_max) {
    if (!(alpha0 > 0.0)) throw std::invalid_argument("npg lfa: alpha0 must be positive");
    if (!(beta > 0.0 && beta < 1.0))
        throw std::invalid_argument("npg lfa: beta must lie strictly inside (0,1)");
    return run_lfa_core(mdp, features, rho, Regularizer(RegularizerKind::ShannonEntropy),
                        1.0 / alpha0, StepsizeSchedule::constant_after_one(beta), k_max,
                        "npg_lfa");
}

RawNpgLfaResult run_npg_lfa_raw(const TabularMdp& mdp, const FeatureMap& features,
                                const InitialDistribution& rho,
                                const std::vector<double>& alphas, int k_max) {
    validate(mdp);
    if (k_max < 0 || static_cast<std::size_t>(k_max) > alphas.size())
        throw std::invalid_argument("npg lfa raw: need one stepsize per iteration");
    const Regularizer entropy(RegularizerKind::ShannonEntropy);
    RawNpgLfaResult out;
    Eigen::VectorXd theta = Eigen::VectorXd::Zero(features.d());
    Policy pi = uniform_policy(mdp.n, mdp.m);
    out.policies.push_back(pi.probs);
    for (int k = 0; k < k_max; ++k) {
        if (!(alphas[k] > 0.0))
            throw std::invalid_argument("npg lfa raw: stepsizes must be positive");
        QFunction qpi = evaluate_policy_exact(pi, mdp);
        Eigen::VectorXd visitation = discounted_visitation(mdp, pi, rho);
        LinearFit fit = fit_linear_q(qpi, features, visitation, pi);
        theta += alphas[k] * fit.w;
        Eigen::VectorXd flat = features.phi * theta;
        for (int s = 0; s < mdp.n; ++s) {
            Eigen::VectorXd row(mdp.m);
            for (int a = 0; a < mdp.m; ++a) row(a) = flat(s * mdp.m + a);
            pi.probs.row(s) = entropy.argmax(row, 1.0).transpose();
        }
        out.policies.push_back(pi.probs);
    }
    return out;
}

}  // namespace dspi
