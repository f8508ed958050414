#include "doctest.h"

#include <cmath>
#include <random>

#include "dspi/garnet.hpp"
#include "dspi/lfa.hpp"
#include "dspi/solvers.hpp"
#include "oracles.hpp"

using namespace dspi;

TEST_CASE("feature map construction validates column rank") {
    CHECK_NOTHROW(identity_features(3, 2));
    CHECK_NOTHROW(tile_features(5, 2, 2));
    CHECK_NOTHROW(gaussian_features(4, 3, 5, 7));

    Eigen::MatrixXd dependent(4, 2);
    dependent << 1, 2, 2, 4, 3, 6, 4, 8;  // second column is twice the first
    CHECK_THROWS_AS(make_feature_map(dependent), std::invalid_argument);
    CHECK_THROWS_AS(gaussian_features(2, 2, 5, 1), std::invalid_argument);
}

TEST_CASE("feature map json round trip") {
    FeatureMap original = gaussian_features(3, 2, 4, 11);
    std::stringstream buffer;
    save_feature_map_json(original, buffer);
    FeatureMap loaded = load_feature_map_json(buffer, 3, 2);
    CHECK(loaded.d() == 4);
    CHECK((loaded.phi - original.phi).cwiseAbs().maxCoeff() == 0.0);

    std::stringstream wrong_rows;
    wrong_rows << R"({"d": 1, "phi": [[1.0], [1.0]]})";
    CHECK_THROWS_AS(load_feature_map_json(wrong_rows, 3, 2), std::invalid_argument);
}

TEST_CASE("discounted visitation distribution") {
    SUBCASE("single state") {
        TabularMdp mdp;
        mdp.n = 1;
        mdp.m = 1;
        mdp.gamma = 0.7;
        mdp.reward = Eigen::MatrixXd::Zero(1, 1);
        mdp.transition = {1.0};
        Eigen::VectorXd d = discounted_visitation(mdp, uniform_policy(1, 1), uniform_initial(1));
        CHECK(d(0) == doctest::Approx(1.0));
    }
    SUBCASE("two-state absorbing chain splits mass by the discount") {
        TabularMdp mdp;
        mdp.n = 2;
        mdp.m = 1;
        mdp.gamma = 0.5;
        mdp.reward = Eigen::MatrixXd::Zero(2, 1);
        mdp.transition.assign(4, 0.0);
        mdp.p(0, 0, 1) = 1.0;
        mdp.p(1, 0, 1) = 1.0;
        InitialDistribution rho{Eigen::VectorXd::Zero(2)};
        rho.rho(0) = 1.0;
        Eigen::VectorXd d = discounted_visitation(mdp, uniform_policy(2, 1), rho);
        // occupancy (1-gamma) sum_t gamma^t: state 0 only at t=0
        CHECK(d(0) == doctest::Approx(0.5));
        CHECK(d(1) == doctest::Approx(0.5));
    }
    SUBCASE("matches the truncated power series") {
        TabularMdp mdp = generate_garnet({6, 3, 3, 0.9, 71});
        std::mt19937_64 engine(72);
        Policy pi;
        pi.probs.resize(6, 3);
        for (int s = 0; s < 6; ++s) {
            auto mu = oracle::random_simplex_point(3, engine);
            for (int a = 0; a < 3; ++a) pi.probs(s, a) = mu[a];
        }
        InitialDistribution rho = uniform_initial(6);
        Eigen::VectorXd d = discounted_visitation(mdp, pi, rho);
        CHECK(std::abs(d.sum() - 1.0) <= 1e-10);

        // 200-term series (1-gamma) sum_t gamma^t rho' P^t
        Eigen::MatrixXd p_pi = Eigen::MatrixXd::Zero(6, 6);
        for (int s = 0; s < 6; ++s)
            for (int a = 0; a < 3; ++a)
                for (int t = 0; t < 6; ++t) p_pi(s, t) += pi.probs(s, a) * mdp.p(s, a, t);
        Eigen::RowVectorXd row = rho.rho.transpose();
        Eigen::RowVectorXd series = Eigen::RowVectorXd::Zero(6);
        double weight = 1.0 - mdp.gamma;
        for (int t = 0; t < 200; ++t) {
            series += weight * row;
            row = row * p_pi;
            weight *= mdp.gamma;
        }
        double truncation = std::pow(mdp.gamma, 200) / (1.0 - mdp.gamma);
        CHECK((d.transpose() - series).cwiseAbs().maxCoeff() <= truncation + 1e-10);
    }
}

TEST_CASE("weighted least-squares fit") {
    TabularMdp mdp = generate_garnet({4, 3, 3, 0.9, 81});
    Policy pi = uniform_policy(4, 3);
    QFunction q = evaluate_policy_exact(pi, mdp);
    Eigen::VectorXd d = discounted_visitation(mdp, pi, uniform_initial(4));

    SUBCASE("identity features reproduce the table exactly") {
        FeatureMap id = identity_features(4, 3);
        LinearFit fit = fit_linear_q(q, id, d, pi);
        CHECK((fit.w_full - q.values).cwiseAbs().maxCoeff() <= 1e-10);
    }
    SUBCASE("a single constant feature fits the weighted mean") {
        FeatureMap ones = make_feature_map(Eigen::MatrixXd::Ones(12, 1));
        Eigen::VectorXd uniform_weights = Eigen::VectorXd::Constant(4, 0.25);
        LinearFit fit = fit_linear_q(q, ones, uniform_weights, pi);
        CHECK(fit.w(0) == doctest::Approx(q.values.mean()).epsilon(1e-10));
    }
    SUBCASE("normal-equation stationarity holds even with vanishing weights") {
        // a deterministic policy zeroes the weight of every other action
        Policy det = deterministic_policy({0, 1, 2, 0}, 3);
        QFunction qd = evaluate_policy_exact(det, mdp);
        Eigen::VectorXd dd = discounted_visitation(mdp, det, uniform_initial(4));
        FeatureMap feats = gaussian_features(4, 3, 5, 17);
        LinearFit fit = fit_linear_q(qd, feats, dd, det);

        Eigen::VectorXd weights(12), target(12);
        for (int s = 0; s < 4; ++s)
            for (int a = 0; a < 3; ++a) {
                weights(s * 3 + a) = dd(s) * det.probs(s, a);
                target(s * 3 + a) = qd.values(s, a);
            }
        Eigen::VectorXd residual = feats.phi.transpose() *
                                   (weights.asDiagonal() * (target - feats.phi * fit.w));
        CHECK(residual.cwiseAbs().maxCoeff() <= 1e-9);
    }
}

TEST_CASE("identity features reproduce the tabular averaged run") {
    TabularMdp mdp = generate_garnet({4, 3, 3, 0.9, 91});
    FeatureMap id = identity_features(4, 3);
    const double tau = 1.0 / std::log(3.0);
    SolverTrace lfa = run_dspi_lfa(mdp, id, uniform_initial(4),
                                   Regularizer(RegularizerKind::ShannonEntropy), tau,
                                   StepsizeSchedule::constant_after_one(0.5), 25);
    SolverTrace tab = run_dspi(mdp, Regularizer(RegularizerKind::ShannonEntropy), tau,
                               StepsizeSchedule::constant_after_one(0.5), 25);
    for (std::size_t k = 0; k < lfa.iterations.size(); ++k) {
        CHECK((lfa.iterations[k].policy - tab.iterations[k].policy).cwiseAbs().maxCoeff() <=
              1e-10);
        CHECK(std::abs(lfa.iterations[k].v_gap - tab.iterations[k].v_gap) <= 1e-10);
    }
    // the fit is exact while every action still carries weight above the
    // pseudo-inverse cutoff; saturated policies later zero out dead
    // coordinates and the measured fit error becomes honestly nonzero
    for (std::size_t k = 0; k < 5; ++k) CHECK(lfa.iterations[k].eps <= 1e-10);
}

TEST_CASE("approximate runs satisfy the error-aware certificates") {
    TabularMdp mdp = generate_garnet({6, 3, 4, 0.9, 101});
    FeatureMap feats = gaussian_features(6, 3, 9, 5);  // rank-deficient representation
    const double beta = 0.5;
    const double tau = 1.0 / std::log(3.0);
    const double numax = std::log(3.0);
    SolverTrace tr = run_dspi_lfa(mdp, feats, uniform_initial(6),
                                  Regularizer(RegularizerKind::ShannonEntropy), tau,
                                  StepsizeSchedule::constant_after_one(beta), 120);
    const double gamma = mdp.gamma;

    for (std::size_t k = 1; k < tr.iterations.size(); ++k) {
        const IterationRecord& it = tr.iterations[k];
        // envelope with the measured approximation error
        double bound = std::pow(1.0 - beta * (1.0 - gamma), k - 1.0) *
                           (gamma * tr.v0_gap + tau * numax) +
                       2.0 * it.eps_running / (beta * (1.0 - gamma) * (1.0 - gamma));
        CHECK(it.v_gap <= bound + 1e-9);

        // almost-monotone improvement
        double allowance = 2.0 * gamma * tr.iterations[k - 1].eps_running / (1.0 - gamma);
        CHECK((tr.iterations[k - 1].q_pi.array() - it.q_pi.array() - allowance).maxCoeff() <=
              1e-9);

        // averaged fit dominated up to delta_k
        double eps_before = tr.iterations[k - 1].eps_running;
        double delta = (1.0 + gamma) / (1.0 - gamma) * eps_before *
                       (1.0 - std::pow(1.0 - beta, static_cast<double>(k))) / beta;
        CHECK((it.qbar.array() - it.q_pi.array() - delta).maxCoeff() <= 1e-9);
    }
    for (std::size_t k = 1; k + 1 < tr.iterations.size(); ++k) {
        const IterationRecord& it = tr.iterations[k];
        double eps_before = tr.iterations[k - 1].eps_running;
        double delta = (1.0 + gamma) / (1.0 - gamma) * eps_before *
                       (1.0 - std::pow(1.0 - beta, static_cast<double>(k))) / beta;
        double rhs = (1.0 - beta * (1.0 - gamma)) * it.qbar_gap +
                     beta * gamma * numax * tr.iterations[k - 1].eta + beta * gamma * delta +
                     beta * it.eps_running;
        CHECK(tr.iterations[k + 1].qbar_gap <= rhs + 1e-9);
    }
}

TEST_CASE("the averaged fit stays in the feature column space") {
    TabularMdp mdp = generate_garnet({5, 3, 3, 0.9, 141});
    FeatureMap feats = gaussian_features(5, 3, 7, 9);  // orthonormal columns
    SolverTrace tr = run_dspi_lfa(mdp, feats, uniform_initial(5),
                                  Regularizer(RegularizerKind::ShannonEntropy),
                                  1.0 / std::log(3.0), StepsizeSchedule::constant_after_one(0.5),
                                  40);
    for (std::size_t k = 0; k < tr.iterations.size(); k += 10) {
        Eigen::VectorXd flat(15);
        for (int s = 0; s < 5; ++s)
            for (int a = 0; a < 3; ++a) flat(s * 3 + a) = tr.iterations[k].qbar(s, a);
        Eigen::VectorXd projected = feats.phi * (feats.phi.transpose() * flat);
        CHECK((flat - projected).cwiseAbs().maxCoeff() <= 1e-9);
    }
}

TEST_CASE("a constant-only representation plateaus inside the approximation band") {
    TabularMdp mdp = generate_garnet({5, 3, 3, 0.85, 111});
    FeatureMap ones = make_feature_map(Eigen::MatrixXd::Ones(15, 1));
    const double beta = 0.5;
    SolverTrace tr = run_dspi_lfa(mdp, ones, uniform_initial(5),
                                  Regularizer(RegularizerKind::ShannonEntropy),
                                  1.0 / std::log(3.0), StepsizeSchedule::constant_after_one(beta),
                                  150);
    const IterationRecord& last = tr.iterations.back();
    const double band = 2.0 * last.eps_running / (beta * (1.0 - mdp.gamma) * (1.0 - mdp.gamma));
    CHECK(last.v_gap > 0.0);
    CHECK(last.v_gap <= band + 1e-6);
}

TEST_CASE("feature-space dual accumulation matches the averaged implementation") {
    TabularMdp mdp = generate_garnet({5, 3, 3, 0.9, 121});
    FeatureMap feats = tile_features(5, 3, 2);
    InitialDistribution rho = uniform_initial(5);

    const int horizon = 30;
    std::vector<double> alphas{std::log(3.0)};
    for (int k = 1; k <= horizon; ++k)
        alphas.push_back(0.5 * std::log(3.0) / std::pow(0.5, k));

    RawNpgLfaResult raw = run_npg_lfa_raw(mdp, feats, rho, alphas, horizon);
    SolverTrace averaged = run_dspi_lfa(mdp, feats, rho,
                                        Regularizer(RegularizerKind::ShannonEntropy),
                                        1.0 / alphas[0],
                                        StepsizeSchedule::custom(beta_from_alpha(alphas)),
                                        horizon + 1);
    for (int k = 0; k <= horizon; ++k)
        CHECK((raw.policies[k] - averaged.iterations[k].policy).cwiseAbs().maxCoeff() <= 1e-10);
}

TEST_CASE("natural-gradient feature runner matches its tabular counterpart on identity features") {
    TabularMdp mdp = generate_garnet({4, 2, 2, 0.9, 131});
    FeatureMap id = identity_features(4, 2);
    SolverTrace lfa = run_npg_lfa(mdp, id, uniform_initial(4), std::log(2.0), 0.5, 25);
    SolverTrace tab = run_npg(mdp, std::log(2.0), 0.5, 25);
    for (std::size_t k = 0; k < lfa.iterations.size(); ++k)
        CHECK((lfa.iterations[k].policy - tab.iterations[k].policy).cwiseAbs().maxCoeff() <=
              1e-10);

    // envelope with the measured error also holds for the feature runner
    FeatureMap feats = gaussian_features(4, 2, 5, 3);
    SolverTrace tr = run_npg_lfa(mdp, feats, uniform_initial(4), std::log(2.0), 0.5, 80);
    for (std::size_t k = 1; k < tr.iterations.size(); ++k) {
        const IterationRecord& it = tr.iterations[k];
        double bound = std::pow(1.0 - 0.5 * (1.0 - mdp.gamma), k - 1.0) *
                           (mdp.gamma * tr.v0_gap + 1.0) +
                       2.0 * it.eps_running / (0.5 * (1.0 - mdp.gamma) * (1.0 - mdp.gamma));
        CHECK(it.v_gap <= bound + 1e-9);
    }
}
