#include "dspi/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace dspi {

using nlohmann::json;

namespace {

enum class Requires {
    Nothing,
    TabularInstance,
    SspInstance,
    TabularTrace,
    LfaTrace,
    SspTrace,
    DpiRun,
};

struct CheckSpec {
    const char* name;
    const char* anchor;
    Requires req;
    double default_slack;
};

constexpr CheckSpec kCheckTable[] = {
    {"instance-valid", "types", Requires::Nothing, 0.0},
    {"tie-break", "fixed-tie-break", Requires::Nothing, 0.0},
    {"lemmaB1-contraction", "lemmaB1.1", Requires::TabularInstance, 1e-12},
    {"lemmaB1-monotone", "lemmaB1.2", Requires::TabularInstance, 1e-12},
    {"translation-invariance", "translation", Requires::TabularInstance, 1e-12},
    {"fixed-point-consistency", "bellman-fixed-point", Requires::TabularInstance, 1e-10},
    {"prop1-equivalence", "prop1", Requires::TabularInstance, 1e-10},
    {"lemma1-monotone", "lemma1", Requires::TabularTrace, 1e-10},
    {"vgap-monotone", "lemma1-values", Requires::TabularTrace, 1e-10},
    {"qbar-dominance", "lemma2-domination", Requires::TabularTrace, 1e-10},
    {"lemma2-recursion", "lemma2", Requires::TabularTrace, 1e-9},
    {"thm1.2-envelope", "thm1.2", Requires::TabularTrace, 1e-9},
    {"thm2-envelope", "thm2", Requires::TabularTrace, 1e-9},
    {"thm7-pi-rate", "thm7", Requires::TabularTrace, 1e-9},
    {"cor2-budget", "cor2", Requires::TabularTrace, 0.0},
    {"thm3-termination", "thm3", Requires::DpiRun, 1e-8},
    {"identity-features-tabular", "appC-identity", Requires::LfaTrace, 1e-10},
    {"lemmaC1-monotone", "lemmaC1", Requires::LfaTrace, 1e-9},
    {"corC2-dominance", "corC2", Requires::LfaTrace, 1e-9},
    {"lemmaC3-recursion", "lemmaC3", Requires::LfaTrace, 1e-9},
    {"thmC1-envelope", "thmC1", Requires::LfaTrace, 1e-9},
    {"thmC2-envelope", "thmC2", Requires::LfaTrace, 1e-9},
    {"propC1-equivalence", "propC1", Requires::TabularInstance, 1e-10},
    {"lemmaD1-monotone", "lemmaD1", Requires::SspTrace, 1e-10},
    {"lemmaD3-recursion", "lemmaD3", Requires::SspTrace, 1e-8},
    {"thmD1-envelope", "thmD1", Requires::SspTrace, 1e-8},
    {"thmD2-envelope", "thmD2", Requires::SspTrace, 1e-8},
    {"lemmaD4-translation", "lemmaD4", Requires::SspTrace, 1e-8},
    {"corD1-sandwich", "corD1", Requires::SspInstance, 1e-12},
    {"xi-contraction", "lemmaD2", Requires::SspInstance, 1e-10},
    {"g-bound", "g-bound", Requires::SspInstance, 1e-8},
    {"propD1-equivalence", "propD1", Requires::SspInstance, 1e-10},
};

const CheckSpec* find_check(const std::string& name) {
    for (const CheckSpec& spec : kCheckTable)
        if (name == spec.name) return &spec;
    return nullptr;
}

struct RunArtifacts {
    std::optional<TabularMdp> mdp;
    SspMdp* ssp = nullptr;  // owned by the caller frame
    std::optional<SolverTrace> trace;
    std::optional<DualAveragedPiResult> dpi;
    std::optional<FeatureMap> features;
    std::optional<InitialDistribution> rho;
    SolverSpec solver;
    double resolved_tau = -1.0;     // tau after applying the 1/nu_max default
    double resolved_alpha0 = -1.0;  // alpha0 after applying the log(m) default
    bool corrupt_envelope = false;
    bool corrupt_tiebreak = false;
};

// --------------------------------------------------------------------------
// generic helpers

CheckResult make_result(const CheckSpec& spec, double worst, int worst_k, double slack,
                        const std::string& detail) {
    CheckResult r;
    r.name = spec.name;
    r.anchor = spec.anchor;
    r.max_slack = worst;
    r.worst_k = worst_k;
    r.pass = worst <= slack;
    std::ostringstream d;
    d << detail << " (worst " << worst << ", allowed " << slack << ")";
    r.detail = d.str();
    return r;
}

double matrix_violation_leq(const Eigen::MatrixXd& lhs, const Eigen::MatrixXd& rhs) {
    // how far lhs <= rhs is from holding componentwise
    return (lhs - rhs).maxCoeff();
}

Policy random_policy(int n, int m, std::mt19937_64& engine) {
    std::uniform_real_distribution<double> uniform(0.01, 1.0);
    Policy pi;
    pi.probs.resize(n, m);
    for (int s = 0; s < n; ++s) {
        double total = 0.0;
        for (int a = 0; a < m; ++a) {
            pi.probs(s, a) = uniform(engine);
            total += pi.probs(s, a);
        }
        pi.probs.row(s) /= total;
    }
    return pi;
}

Eigen::MatrixXd random_q(int n, int m, double lo, double hi, std::mt19937_64& engine) {
    std::uniform_real_distribution<double> uniform(lo, hi);
    Eigen::MatrixXd q(n, m);
    for (int s = 0; s < n; ++s)
        for (int a = 0; a < m; ++a) q(s, a) = uniform(engine);
    return q;
}

double constant_beta_of(const SolverTrace& tr) {
    if (tr.iterations.size() < 2)
        throw std::invalid_argument("check: trace too short for an envelope check");
    const double beta = tr.iterations[1].beta;
    for (std::size_t k = 1; k < tr.iterations.size(); ++k) {
        if (tr.iterations[k].beta != beta)
            throw std::invalid_argument("check: envelope checks require a constant stepsize");
    }
    return beta;
}

// --------------------------------------------------------------------------
// trace checks

void require_rows(const SolverTrace& tr, std::size_t rows, const CheckSpec& spec) {
    if (tr.iterations.size() < rows)
        throw std::invalid_argument(std::string(spec.name) +
                                    ": trace too short for a per-iteration check");
}

CheckResult check_lemma_monotone(const CheckSpec& spec, const SolverTrace& tr, double slack) {
    require_rows(tr, 2, spec);
    double worst = -std::numeric_limits<double>::infinity();
    int worst_k = -1;
    for (std::size_t k = 1; k < tr.iterations.size(); ++k) {
        double v = matrix_violation_leq(tr.iterations[k - 1].q_pi, tr.iterations[k].q_pi);
        if (v > worst) {
            worst = v;
            worst_k = static_cast<int>(k);
        }
    }
    return make_result(spec, worst, worst_k, slack, "componentwise Q monotonicity");
}

CheckResult check_vgap_monotone(const CheckSpec& spec, const SolverTrace& tr, double slack) {
    require_rows(tr, 2, spec);
    double worst = -std::numeric_limits<double>::infinity();
    int worst_k = -1;
    for (std::size_t k = 1; k < tr.iterations.size(); ++k) {
        double v = tr.iterations[k].v_gap - tr.iterations[k - 1].v_gap;
        if (v > worst) {
            worst = v;
            worst_k = static_cast<int>(k);
        }
    }
    return make_result(spec, worst, worst_k, slack, "value gap nonincreasing");
}

CheckResult check_qbar_dominance(const CheckSpec& spec, const SolverTrace& tr, double slack) {
    require_rows(tr, 2, spec);
    double worst = -std::numeric_limits<double>::infinity();
    int worst_k = -1;
    for (std::size_t k = 0; k < tr.iterations.size(); ++k) {
        double v = matrix_violation_leq(tr.iterations[k].qbar, tr.iterations[k].q_pi);
        if (v > worst) {
            worst = v;
            worst_k = static_cast<int>(k);
        }
    }
    return make_result(spec, worst, worst_k, slack, "averaged Q dominated by current Q");
}

CheckResult check_lemma2_recursion(const CheckSpec& spec, const SolverTrace& tr, double slack) {
    require_rows(tr, 3, spec);
    const double gamma = tr.gamma;
    double worst = -std::numeric_limits<double>::infinity();
    int worst_k = -1;
    for (std::size_t k = 1; k + 1 < tr.iterations.size(); ++k) {
        const IterationRecord& cur = tr.iterations[k];
        const IterationRecord& next = tr.iterations[k + 1];
        const double eta_prev = tr.iterations[k - 1].eta;
        double rhs = (1.0 - (1.0 - gamma) * cur.beta) * cur.qbar_gap +
                     gamma * cur.beta * eta_prev * tr.nu_max;
        double v = next.qbar_gap - rhs;
        if (v > worst) {
            worst = v;
            worst_k = static_cast<int>(k);
        }
    }
    return make_result(spec, worst, worst_k, slack, "one-step contraction of the averaged gap");
}

enum class EnvelopeForm { Discounted, DiscountedLfa, Terminal, GreedyRate };

CheckResult check_envelope(const CheckSpec& spec, const SolverTrace& tr, double slack,
                           EnvelopeForm form, bool corrupt) {
    double worst = -std::numeric_limits<double>::infinity();
    int worst_k = -1;
    const double smoothing = corrupt ? 0.0 : tr.tau * tr.nu_max;
    double beta = 0.0, rate = 0.0;
    switch (form) {
        case EnvelopeForm::Discounted:
        case EnvelopeForm::DiscountedLfa:
            beta = constant_beta_of(tr);
            rate = 1.0 - (1.0 - tr.gamma) * beta;
            break;
        case EnvelopeForm::Terminal:
            beta = constant_beta_of(tr);
            rate = 1.0 - (1.0 - tr.kappa) * beta;
            break;
        case EnvelopeForm::GreedyRate:
            rate = tr.gamma;
            break;
    }
    for (std::size_t k = 1; k < tr.iterations.size(); ++k) {
        const IterationRecord& it = tr.iterations[k];
        double bound = 0.0;
        switch (form) {
            case EnvelopeForm::Discounted:
                bound = std::pow(rate, k - 1) * (tr.gamma * tr.v0_gap + smoothing);
                break;
            case EnvelopeForm::DiscountedLfa:
                bound = std::pow(rate, k - 1) * (tr.gamma * tr.v0_gap + smoothing) +
                        2.0 * it.eps_running / (beta * (1.0 - tr.gamma) * (1.0 - tr.gamma));
                break;
            case EnvelopeForm::Terminal:
                bound = std::pow(rate, k - 1) * (tr.v0_gap + 2.0 * smoothing) / (1.0 - tr.kappa);
                break;
            case EnvelopeForm::GreedyRate:
                bound = std::pow(rate, k) * tr.v0_gap;
                break;
        }
        double v = it.v_gap - bound;
        if (v > worst) {
            worst = v;
            worst_k = static_cast<int>(k);
        }
    }
    std::string what = corrupt ? "envelope with the smoothing constant zeroed"
                               : "per-iteration convergence envelope";
    if (form == EnvelopeForm::Terminal) {
        // the certificate is not unique, so the kappa this envelope was
        // evaluated under is part of the verdict
        std::ostringstream with_kappa;
        with_kappa << what << " at kappa " << tr.kappa;
        what = with_kappa.str();
    }
    return make_result(spec, worst, worst_k, slack, what);
}

CheckResult check_cor2_budget(const CheckSpec& spec, const SolverTrace& tr, double epsilon) {
    const long long budget = static_cast<long long>(
        std::ceil(2.0 / (1.0 - tr.gamma) * std::log(1.0 / (epsilon * (1.0 - tr.gamma)))));
    int first = -1;
    for (const IterationRecord& it : tr.iterations) {
        if (it.v_gap <= epsilon) {
            first = it.k;
            break;
        }
    }
    CheckResult r;
    r.name = spec.name;
    r.anchor = spec.anchor;
    r.worst_k = first;
    r.pass = first >= 0 && first <= budget;
    r.max_slack = first < 0 ? static_cast<double>(budget) : static_cast<double>(first - budget);
    std::ostringstream d;
    d << "first iteration with gap <= " << epsilon << " is " << first << ", budget " << budget;
    r.detail = d.str();
    return r;
}

// --------------------------------------------------------------------------
// linear function approximation trace checks

CheckResult check_lemmaC1(const CheckSpec& spec, const SolverTrace& tr, double slack) {
    require_rows(tr, 2, spec);
    const double gamma = tr.gamma;
    double worst = -std::numeric_limits<double>::infinity();
    int worst_k = -1;
    for (std::size_t k = 1; k < tr.iterations.size(); ++k) {
        const double eps = tr.iterations[k - 1].eps_running;
        const double allowance = 2.0 * gamma * eps / (1.0 - gamma);
        double v = matrix_violation_leq(
            tr.iterations[k - 1].q_pi,
            tr.iterations[k].q_pi + Eigen::MatrixXd::Constant(tr.iterations[k].q_pi.rows(),
                                                              tr.iterations[k].q_pi.cols(),
                                                              allowance));
        if (v > worst) {
            worst = v;
            worst_k = static_cast<int>(k);
        }
    }
    return make_result(spec, worst, worst_k, slack, "almost-monotone Q improvement");
}

double delta_bound(const SolverTrace& tr, std::size_t k, double beta) {
    // ((1+gamma)/(1-gamma)) * eps * sum_{i<k} (1-beta)^i with eps the running
    // max over fits strictly before iteration k
    const double eps = tr.iterations[k - 1].eps_running;
    const double series = (1.0 - std::pow(1.0 - beta, static_cast<double>(k))) / beta;
    return (1.0 + tr.gamma) / (1.0 - tr.gamma) * eps * series;
}

CheckResult check_corC2(const CheckSpec& spec, const SolverTrace& tr, double slack) {
    require_rows(tr, 2, spec);
    const double beta = constant_beta_of(tr);
    double worst = -std::numeric_limits<double>::infinity();
    int worst_k = -1;
    for (std::size_t k = 1; k < tr.iterations.size(); ++k) {
        const double delta = delta_bound(tr, k, beta);
        const IterationRecord& it = tr.iterations[k];
        double v = matrix_violation_leq(
            it.qbar, it.q_pi + Eigen::MatrixXd::Constant(it.q_pi.rows(), it.q_pi.cols(), delta));
        if (v > worst) {
            worst = v;
            worst_k = static_cast<int>(k);
        }
    }
    return make_result(spec, worst, worst_k, slack, "averaged fit dominated up to delta_k");
}

CheckResult check_lemmaC3(const CheckSpec& spec, const SolverTrace& tr, double slack) {
    require_rows(tr, 3, spec);
    const double gamma = tr.gamma;
    const double beta = constant_beta_of(tr);
    double worst = -std::numeric_limits<double>::infinity();
    int worst_k = -1;
    for (std::size_t k = 1; k + 1 < tr.iterations.size(); ++k) {
        const IterationRecord& cur = tr.iterations[k];
        const IterationRecord& next = tr.iterations[k + 1];
        const double eta_prev = tr.iterations[k - 1].eta;
        const double delta = delta_bound(tr, k, beta);
        const double eps = cur.eps_running;
        double rhs = (1.0 - beta * (1.0 - gamma)) * cur.qbar_gap +
                     beta * gamma * tr.nu_max * eta_prev + beta * gamma * delta + beta * eps;
        double v = next.qbar_gap - rhs;
        if (v > worst) {
            worst = v;
            worst_k = static_cast<int>(k);
        }
    }
    return make_result(spec, worst, worst_k, slack, "almost-contractive recursion");
}

CheckResult check_identity_features(const CheckSpec& spec, const RunArtifacts& art,
                                    double slack) {
    const SolverTrace& lfa = *art.trace;
    if (!art.features ||
        art.features->phi != Eigen::MatrixXd::Identity(art.features->phi.rows(),
                                                       art.features->phi.cols()))
        throw std::invalid_argument("identity-features-tabular: run uses non-identity features");
    SolverTrace tabular;
    if (art.solver.id == "npg_lfa") {
        double alpha0 = art.solver.alpha0 > 0.0 ? art.solver.alpha0
                                                : std::log(static_cast<double>(art.mdp->m));
        tabular = run_npg(*art.mdp, alpha0, art.solver.beta, art.solver.k_max);
    } else {
        Regularizer nu = Regularizer::from_key(art.solver.nu);
        double tau = art.solver.tau >= 0.0 ? art.solver.tau : 0.0;
        StepsizeSchedule schedule = art.solver.schedule == "harmonic"
                                        ? StepsizeSchedule::harmonic()
                                        : StepsizeSchedule::constant_after_one(art.solver.beta);
        tabular = run_dspi(*art.mdp, nu, tau, schedule, art.solver.k_max);
    }
    double worst = -std::numeric_limits<double>::infinity();
    int worst_k = -1;
    for (std::size_t k = 0; k < lfa.iterations.size() && k < tabular.iterations.size(); ++k) {
        double v = (lfa.iterations[k].policy - tabular.iterations[k].policy).cwiseAbs().maxCoeff();
        v = std::max(v, std::abs(lfa.iterations[k].v_gap - tabular.iterations[k].v_gap));
        if (v > worst) {
            worst = v;
            worst_k = static_cast<int>(k);
        }
    }
    return make_result(spec, worst, worst_k, slack, "identity features reproduce the tabular run");
}

// --------------------------------------------------------------------------
// terminal-state trace checks

CheckResult check_lemmaD3(const CheckSpec& spec, const RunArtifacts& art, double slack) {
    const SolverTrace& tr = *art.trace;
    require_rows(tr, 3, spec);
    const WeightedNorm& wn = *art.ssp->cert;
    double worst = -std::numeric_limits<double>::infinity();
    int worst_k = -1;
    for (std::size_t k = 1; k + 1 < tr.iterations.size(); ++k) {
        const IterationRecord& cur = tr.iterations[k];
        const IterationRecord& next = tr.iterations[k + 1];
        const double eta_prev = tr.iterations[k - 1].eta;
        double lhs = wn.norm(tr.q_star - next.qbar);
        double rhs = (1.0 - (1.0 - tr.kappa) * cur.beta) * wn.norm(tr.q_star - cur.qbar) +
                     wn.kappa_prime() * cur.beta * eta_prev * tr.nu_max;
        double v = lhs - rhs;
        if (v > worst) {
            worst = v;
            worst_k = static_cast<int>(k);
        }
    }
    return make_result(spec, worst, worst_k, slack, "weighted-norm contraction recursion");
}

CheckResult check_lemmaD4(const CheckSpec& spec, const SolverTrace& tr, double slack) {
    if (tr.iterations.size() < 2)
        throw std::invalid_argument("lemmaD4-translation: trace too short");
    double v = tr.iterations[1].qbar_gap - tr.v0_gap;
    return make_result(spec, v, 1, slack, "first averaged gap bounded by the initial value gap");
}

// --------------------------------------------------------------------------
// instance-level checks

CheckResult check_operator_suite(const CheckSpec& spec, const TabularMdp& mdp, double slack,
                                 bool monotone) {
    std::mt19937_64 engine(4242);
    std::uniform_real_distribution<double> eta_draw(0.0, 2.0);
    const Regularizer kinds[3] = {Regularizer(RegularizerKind::Zero),
                                  Regularizer(RegularizerKind::ShannonEntropy),
                                  Regularizer(RegularizerKind::ShiftedNegSquaredNorm)};
    double worst = -std::numeric_limits<double>::infinity();
    int worst_k = -1;
    const double hi = 1.0 / (1.0 - mdp.gamma);
    for (int trial = 0; trial < 200; ++trial) {
        Eigen::MatrixXd q1 = random_q(mdp.n, mdp.m, -hi, hi, engine);
        Eigen::MatrixXd q2 = random_q(mdp.n, mdp.m, -hi, hi, engine);
        const double eta = eta_draw(engine);
        const Policy pi = random_policy(mdp.n, mdp.m, engine);
        const Regularizer& nu = kinds[trial % 3];
        if (monotone) {
            Eigen::MatrixXd lo_m = q1.cwiseMin(q2);
            Eigen::MatrixXd hi_m = q1.cwiseMax(q2);
            const QFunction qlo{lo_m}, qhi{hi_m};
            const Eigen::MatrixXd outs_lo[4] = {
                apply_bellman_optimality(qlo, mdp).values,
                apply_bellman_policy(qlo, pi, mdp).values,
                apply_smoothed_bellman_optimality(qlo, eta, nu, mdp).values,
                apply_smoothed_bellman_policy(qlo, pi, eta, nu, mdp).values};
            const Eigen::MatrixXd outs_hi[4] = {
                apply_bellman_optimality(qhi, mdp).values,
                apply_bellman_policy(qhi, pi, mdp).values,
                apply_smoothed_bellman_optimality(qhi, eta, nu, mdp).values,
                apply_smoothed_bellman_policy(qhi, pi, eta, nu, mdp).values};
            for (int op = 0; op < 4; ++op) {
                double v = matrix_violation_leq(outs_lo[op], outs_hi[op]);
                if (v > worst) {
                    worst = v;
                    worst_k = trial;
                }
            }
        } else {
            const QFunction qa{q1}, qb{q2};
            const double dist = (q1 - q2).cwiseAbs().maxCoeff();
            const Eigen::MatrixXd outs_a[4] = {
                apply_bellman_optimality(qa, mdp).values,
                apply_bellman_policy(qa, pi, mdp).values,
                apply_smoothed_bellman_optimality(qa, eta, nu, mdp).values,
                apply_smoothed_bellman_policy(qa, pi, eta, nu, mdp).values};
            const Eigen::MatrixXd outs_b[4] = {
                apply_bellman_optimality(qb, mdp).values,
                apply_bellman_policy(qb, pi, mdp).values,
                apply_smoothed_bellman_optimality(qb, eta, nu, mdp).values,
                apply_smoothed_bellman_policy(qb, pi, eta, nu, mdp).values};
            for (int op = 0; op < 4; ++op) {
                double v = (outs_a[op] - outs_b[op]).cwiseAbs().maxCoeff() - mdp.gamma * dist;
                if (v > worst) {
                    worst = v;
                    worst_k = trial;
                }
            }
        }
    }
    return make_result(spec, worst, worst_k, slack,
                       monotone ? "operator monotonicity" : "operator sup-norm contraction");
}

CheckResult check_translation(const CheckSpec& spec, const TabularMdp& mdp, double slack) {
    std::mt19937_64 engine(777);
    std::uniform_real_distribution<double> shift_draw(-5.0, 5.0);
    std::uniform_real_distribution<double> eta_draw(0.0, 2.0);
    const Regularizer kinds[3] = {Regularizer(RegularizerKind::Zero),
                                  Regularizer(RegularizerKind::ShannonEntropy),
                                  Regularizer(RegularizerKind::ShiftedNegSquaredNorm)};
    double worst = -std::numeric_limits<double>::infinity();
    int worst_k = -1;
    for (int trial = 0; trial < 100; ++trial) {
        Eigen::MatrixXd q = random_q(mdp.n, mdp.m, -3.0, 3.0, engine);
        const double c = shift_draw(engine);
        const double eta = eta_draw(engine);
        const Policy pi = random_policy(mdp.n, mdp.m, engine);
        const Regularizer& nu = kinds[trial % 3];
        const QFunction base{q};
        const QFunction shifted{q.array() + c};
        const Eigen::MatrixXd outs[4] = {
            (apply_bellman_optimality(shifted, mdp).values -
             apply_bellman_optimality(base, mdp).values),
            (apply_bellman_policy(shifted, pi, mdp).values -
             apply_bellman_policy(base, pi, mdp).values),
            (apply_smoothed_bellman_optimality(shifted, eta, nu, mdp).values -
             apply_smoothed_bellman_optimality(base, eta, nu, mdp).values),
            (apply_smoothed_bellman_policy(shifted, pi, eta, nu, mdp).values -
             apply_smoothed_bellman_policy(base, pi, eta, nu, mdp).values)};
        for (int op = 0; op < 4; ++op) {
            double v = (outs[op].array() - mdp.gamma * c).abs().maxCoeff();
            if (v > worst) {
                worst = v;
                worst_k = trial;
            }
        }
    }
    return make_result(spec, worst, worst_k, slack, "translation sends Q+c to F(Q)+gamma*c");
}

CheckResult check_fixed_points(const CheckSpec& spec, const TabularMdp& mdp, double slack) {
    std::mt19937_64 engine(99);
    double worst = -std::numeric_limits<double>::infinity();
    for (int trial = 0; trial < 20; ++trial) {
        Policy pi = random_policy(mdp.n, mdp.m, engine);
        QFunction q = evaluate_policy_exact(pi, mdp);
        double res = (q.values - apply_bellman_policy(q, pi, mdp).values).cwiseAbs().maxCoeff();
        worst = std::max(worst, res);
    }
    const double tol = 1e-8;
    OptimalQResult ref = optimal_q(mdp, tol);
    double res = (ref.q.values - apply_bellman_optimality(ref.q, mdp).values)
                     .cwiseAbs()
                     .maxCoeff();
    worst = std::max(worst, res - 2.0 * tol + slack);  // allowance 2*tol for the optimality VI
    return make_result(spec, worst, -1, slack, "evaluation and optimality fixed points");
}

CheckResult check_tie_break(const CheckSpec& spec, bool corrupt) {
    auto corrupted_greedy = [](const Eigen::VectorXd& q) {
        int best = 0;
        for (Eigen::Index i = 1; i < q.size(); ++i)
            if (q(i) >= q(best)) best = static_cast<int>(i);
        Eigen::VectorXd mu = Eigen::VectorXd::Zero(q.size());
        mu(best) = 1.0;
        return mu;
    };
    struct Case {
        std::vector<double> q;
        int expected;
    };
    const Case cases[] = {
        {{0.3, 0.9, 0.9}, 1},
        {{1.0, 1.0}, 0},
        {{0.5, 0.2, 0.5}, 0},
        {{2.0, 2.0, 2.0, 2.0}, 0},
        {{-1.0, -1.0, 0.0, 0.0}, 2},
    };
    const Regularizer zero(RegularizerKind::Zero);
    double worst = 0.0;
    int worst_k = -1;
    int idx = 0;
    for (const Case& c : cases) {
        Eigen::VectorXd q = Eigen::Map<const Eigen::VectorXd>(c.q.data(), c.q.size());
        Eigen::VectorXd mu = corrupt ? corrupted_greedy(q) : zero.argmax(q, 1.0);
        Eigen::VectorXd expected = Eigen::VectorXd::Zero(q.size());
        expected(c.expected) = 1.0;
        double v = (mu - expected).cwiseAbs().maxCoeff();
        if (v > worst) {
            worst = v;
            worst_k = idx;
        }
        ++idx;
    }
    return make_result(spec, worst, worst_k, 0.0, "greedy ties resolve to the lowest index");
}

std::vector<double> alphas_for_equivalence(const RunArtifacts& art, int count) {
    const SolverSpec& solver = art.solver;
    std::vector<double> alphas;
    alphas.reserve(count);
    if (solver.id == "npg" || solver.id == "npg_lfa" || solver.id == "npg_ssp") {
        const double alpha0 = art.resolved_alpha0;
        const double beta = solver.beta;
        alphas.push_back(alpha0);
        for (int k = 1; k < count; ++k)
            alphas.push_back(beta * alpha0 / std::pow(1.0 - beta, k));
        return alphas;
    }
    if (solver.schedule == "constant" && art.resolved_tau > 0.0) {
        std::vector<double> betas(count, solver.beta);
        betas[0] = 1.0;
        return alpha_from_beta(betas, 1.0 / art.resolved_tau);
    }
    alphas.assign(count, 1.0);
    return alphas;
}

CheckResult check_prop1(const CheckSpec& spec, const RunArtifacts& art, double slack, int k) {
    std::vector<double> alphas = alphas_for_equivalence(art, k);
    EquivalenceReport rep = check_npg_dspi_equivalence(*art.mdp, alphas, k, slack);
    CheckResult r = make_result(spec, rep.max_deviation, rep.worst_k, slack,
                                "dual-accumulation and averaged forms coincide");
    return r;
}

CheckResult check_propC1(const CheckSpec& spec, const RunArtifacts& art, double slack, int k) {
    if (!art.features || !art.rho)
        throw std::invalid_argument("propC1-equivalence: needs a feature map and rho");
    std::vector<double> alphas = alphas_for_equivalence(art, k + 1);
    RawNpgLfaResult raw = run_npg_lfa_raw(*art.mdp, *art.features, *art.rho, alphas, k);
    SolverTrace averaged =
        run_dspi_lfa(*art.mdp, *art.features, *art.rho,
                     Regularizer(RegularizerKind::ShannonEntropy), 1.0 / alphas[0],
                     StepsizeSchedule::custom(beta_from_alpha(alphas)), k + 1);
    double worst = -std::numeric_limits<double>::infinity();
    int worst_k = -1;
    for (int i = 0; i <= k; ++i) {
        double v = (raw.policies[i] - averaged.iterations[i].policy).cwiseAbs().maxCoeff();
        if (v > worst) {
            worst = v;
            worst_k = i;
        }
    }
    return make_result(spec, worst, worst_k, slack,
                       "feature-space dual accumulation matches the averaged form");
}

CheckResult check_propD1(const CheckSpec& spec, RunArtifacts& art, double slack, int k) {
    std::vector<double> alphas = alphas_for_equivalence(art, k + 1);
    RawNpgSspResult raw = run_npg_ssp_raw(*art.ssp, alphas, k);
    SolverTrace averaged =
        run_dspi_ssp(*art.ssp, Regularizer(RegularizerKind::ShannonEntropy), 1.0 / alphas[0],
                     StepsizeSchedule::custom(beta_from_alpha(alphas)), k + 1);
    double worst = -std::numeric_limits<double>::infinity();
    int worst_k = -1;
    for (int i = 0; i <= k; ++i) {
        double v = (raw.policies[i] - averaged.iterations[i].policy).cwiseAbs().maxCoeff();
        if (v > worst) {
            worst = v;
            worst_k = i;
        }
    }
    return make_result(spec, worst, worst_k, slack,
                       "terminal-state dual accumulation matches the averaged form");
}

CheckResult check_corD1(const CheckSpec& spec, const SspMdp& ssp, double slack) {
    const WeightedNorm& wn = *ssp.cert;
    std::mt19937_64 engine(31);
    double worst = -std::numeric_limits<double>::infinity();
    for (int trial = 0; trial < 200; ++trial) {
        Eigen::MatrixXd q = random_q(ssp.n, ssp.m, -4.0, 4.0, engine);
        double plain = q.cwiseAbs().maxCoeff();
        double weighted = wn.norm(q);
        worst = std::max(worst, (1.0 - wn.kappa) * plain - weighted);
        worst = std::max(worst, weighted - plain);
    }
    return make_result(spec, worst, -1, slack, "weighted norm sandwiched by the sup norm");
}

CheckResult check_xi_contraction(const CheckSpec& spec, const SspMdp& ssp, double slack) {
    const WeightedNorm& wn = *ssp.cert;
    std::mt19937_64 engine(32);
    double worst = -std::numeric_limits<double>::infinity();
    int worst_k = -1;
    for (int trial = 0; trial < 200; ++trial) {
        QFunction q1{random_q(ssp.n, ssp.m, -3.0, 3.0, engine)};
        QFunction q2{random_q(ssp.n, ssp.m, -3.0, 3.0, engine)};
        double lhs = wn.norm(apply_ssp_bellman_optimality(q1, ssp).values -
                             apply_ssp_bellman_optimality(q2, ssp).values);
        double rhs = wn.kappa * wn.norm(q1.values - q2.values);
        if (lhs - rhs > worst) {
            worst = lhs - rhs;
            worst_k = trial;
        }
    }
    return make_result(spec, worst, worst_k, slack, "kappa-contraction in the weighted norm");
}

CheckResult check_g_bound(const CheckSpec& spec, const SspMdp& ssp, const Regularizer& nu,
                          double slack) {
    const WeightedNorm& wn = *ssp.cert;
    const double cap = wn.kappa_prime() * nu.max_value(ssp.m);
    std::mt19937_64 engine(33);
    double worst = -std::numeric_limits<double>::infinity();
    for (int trial = 0; trial < 100; ++trial) {
        Policy pi = random_policy(ssp.n, ssp.m, engine);
        for (int s = 0; s < ssp.n; ++s) {
            for (int a = 0; a < ssp.m; ++a) {
                double g = 0.0;
                for (int t = 0; t < ssp.n; ++t)
                    g += ssp.p(s, a, t) * nu.value(pi.probs.row(t).transpose());
                worst = std::max(worst, g - cap);
            }
        }
    }
    return make_result(spec, worst, -1, slack, "smoothing operator bounded by kappa'*nu_max");
}

CheckResult check_thm3(const CheckSpec& spec, const RunArtifacts& art, double slack) {
    const DualAveragedPiResult& dpi = *art.dpi;
    const TabularMdp& mdp = *art.mdp;
    CheckResult r;
    r.name = spec.name;
    r.anchor = spec.anchor;
    bool within = dpi.first_optimal_k >= 0 && dpi.first_optimal_k <= dpi.budget;

    // optimality cross-check of the final policy
    const Eigen::MatrixXd& final_policy = dpi.trace.iterations.back().policy;
    Eigen::VectorXd v_final =
        (final_policy.array() * dpi.trace.iterations.back().q_pi.array()).rowwise().sum();
    double policy_gap;
    double enumerated = std::pow(static_cast<double>(mdp.m), mdp.n);
    if (enumerated <= 1e5) {
        Eigen::VectorXd best = Eigen::VectorXd::Constant(mdp.n, -1e300);
        std::vector<int> assignment(mdp.n, 0);
        while (true) {
            Policy pi = deterministic_policy(assignment, mdp.m);
            QFunction q = evaluate_policy_exact(pi, mdp);
            Eigen::VectorXd v(mdp.n);
            for (int s = 0; s < mdp.n; ++s) v(s) = q.values(s, assignment[s]);
            best = best.cwiseMax(v);
            int pos = 0;
            while (pos < mdp.n && ++assignment[pos] == mdp.m) assignment[pos++] = 0;
            if (pos == mdp.n) break;
        }
        policy_gap = (best - v_final).cwiseAbs().maxCoeff();
    } else {
        policy_gap = (dpi.trace.v_star - v_final).cwiseAbs().maxCoeff();
    }

    r.pass = within && policy_gap <= slack;
    r.max_slack = within ? policy_gap : std::max<double>(policy_gap, 1.0);
    r.worst_k = dpi.first_optimal_k;
    std::ostringstream d;
    d << "optimal at iteration " << dpi.first_optimal_k << " within budget " << dpi.budget
      << " (k* = " << dpi.kstar << ", final policy gap " << policy_gap << ")";
    r.detail = d.str();
    return r;
}

// --------------------------------------------------------------------------
// solver execution

FeatureMap build_features(const SolverSpec& sp, const TabularMdp& mdp) {
    if (sp.features == "identity") return identity_features(mdp.n, mdp.m);
    if (sp.features == "gaussian") {
        int d = sp.feature_dim > 0 ? sp.feature_dim : std::max(1, mdp.n * mdp.m / 2);
        return gaussian_features(mdp.n, mdp.m, d, sp.feature_seed);
    }
    if (sp.features == "tile") return tile_features(mdp.n, mdp.m, sp.tile_size);
    if (sp.features == "file") {
        std::ifstream in(sp.feature_path);
        if (!in) throw std::invalid_argument("cannot open feature file: " + sp.feature_path);
        return load_feature_map_json(in, mdp.n, mdp.m);
    }
    throw std::invalid_argument("unknown feature kind: " + sp.features);
}

InitialDistribution build_rho(const SolverSpec& sp, int n) {
    if (sp.rho.empty()) return uniform_initial(n);
    Eigen::VectorXd rho = Eigen::Map<const Eigen::VectorXd>(sp.rho.data(), sp.rho.size());
    InitialDistribution d{rho};
    if (rho.size() != n || !is_distribution(rho))
        throw std::invalid_argument("config: rho is not a distribution over the states");
    return d;
}

void execute_solver(RunArtifacts& art, const ExperimentConfig& config) {
    const SolverSpec& sp = config.solver;
    const bool tabular_instance = art.mdp.has_value();

    auto need_mdp = [&]() -> const TabularMdp& {
        if (!tabular_instance)
            throw std::invalid_argument("solver " + sp.id + " needs a discounted instance");
        return *art.mdp;
    };
    auto need_ssp = [&]() -> SspMdp& {
        if (!art.ssp)
            throw std::invalid_argument("solver " + sp.id + " needs a terminal-state instance");
        return *art.ssp;
    };

    StepsizeSchedule schedule = sp.schedule == "harmonic"
                                    ? StepsizeSchedule::harmonic()
                                    : StepsizeSchedule::constant_after_one(sp.beta);
    if (sp.schedule != "harmonic" && sp.schedule != "constant")
        throw std::invalid_argument("unknown schedule: " + sp.schedule);

    if (sp.id == "pi") {
        art.trace = run_pi(need_mdp(), sp.k_max).trace;
    } else if (sp.id == "vi") {
        const TabularMdp& mdp = need_mdp();
        OptimalQResult ref = optimal_q(mdp, kReferenceTol);
        OptimalQResult run = optimal_q(mdp, sp.vi_tol);
        SolverTrace tr;
        tr.solver_id = "vi";
        tr.gamma = mdp.gamma;
        tr.nu_key = "zero";
        tr.q_star = ref.q.values;
        tr.v_star = ref.q.values.rowwise().maxCoeff();
        QFunction q = evaluate_policy_exact(run.greedy, mdp);
        IterationRecord rec;
        rec.k = 0;
        rec.policy = run.greedy.probs;
        rec.q_pi = q.values;
        rec.qbar = run.q.values;
        rec.v_gap = (tr.v_star - value_of(q, run.greedy).values).cwiseAbs().maxCoeff();
        rec.qbar_gap = (tr.q_star - run.q.values).cwiseAbs().maxCoeff();
        rec.beta = 1.0;
        rec.envelope = rec.v_gap;
        tr.v0_gap = rec.v_gap;
        tr.iterations.push_back(std::move(rec));
        art.trace = std::move(tr);
    } else if (sp.id == "dspi" || sp.id == "pda") {
        const TabularMdp& mdp = need_mdp();
        Regularizer nu = sp.id == "pda" ? Regularizer(RegularizerKind::ShiftedNegSquaredNorm)
                                        : Regularizer::from_key(sp.nu);
        double numax = nu.max_value(mdp.m);
        double tau = sp.tau >= 0.0 ? sp.tau : (numax > 0.0 ? 1.0 / numax : 0.0);
        art.resolved_tau = tau;
        art.trace = run_dspi(mdp, nu, tau, schedule, sp.k_max);
    } else if (sp.id == "npg") {
        const TabularMdp& mdp = need_mdp();
        double alpha0 = sp.alpha0 > 0.0 ? sp.alpha0 : std::log(static_cast<double>(mdp.m));
        art.resolved_alpha0 = alpha0;
        art.resolved_tau = 1.0 / alpha0;
        art.trace = run_npg(mdp, alpha0, sp.beta, sp.k_max);
    } else if (sp.id == "dual_averaged_pi" || sp.id == "dpi") {
        art.dpi = run_dual_averaged_pi(need_mdp(), sp.beta, sp.k_max);
        art.trace = art.dpi->trace;
    } else if (sp.id == "dspi_lfa" || sp.id == "npg_lfa") {
        const TabularMdp& mdp = need_mdp();
        art.features = build_features(sp, mdp);
        art.rho = build_rho(sp, mdp.n);
        if (sp.id == "npg_lfa") {
            double alpha0 = sp.alpha0 > 0.0 ? sp.alpha0 : std::log(static_cast<double>(mdp.m));
            art.resolved_alpha0 = alpha0;
            art.resolved_tau = 1.0 / alpha0;
            art.trace = run_npg_lfa(mdp, *art.features, *art.rho, alpha0, sp.beta, sp.k_max);
        } else {
            Regularizer nu = Regularizer::from_key(sp.nu);
            double numax = nu.max_value(mdp.m);
            double tau = sp.tau >= 0.0 ? sp.tau : (numax > 0.0 ? 1.0 / numax : 0.0);
            art.resolved_tau = tau;
            art.trace = run_dspi_lfa(mdp, *art.features, *art.rho, nu, tau, schedule, sp.k_max);
        }
    } else if (sp.id == "dspi_ssp" || sp.id == "npg_ssp") {
        SspMdp& ssp = need_ssp();
        if (sp.id == "npg_ssp") {
            double alpha0 = sp.alpha0 > 0.0 ? sp.alpha0 : std::log(static_cast<double>(ssp.m));
            art.resolved_alpha0 = alpha0;
            art.resolved_tau = 1.0 / alpha0;
            art.trace = run_npg_ssp(ssp, alpha0, sp.beta, sp.k_max);
        } else {
            Regularizer nu = Regularizer::from_key(sp.nu);
            double numax = nu.max_value(ssp.m);
            double tau = sp.tau >= 0.0 ? sp.tau : (numax > 0.0 ? 1.0 / numax : 0.0);
            art.resolved_tau = tau;
            art.trace = run_dspi_ssp(ssp, nu, tau, schedule, sp.k_max);
        }
    } else {
        throw std::invalid_argument("unknown solver id: " + sp.id);
    }
}

CheckResult evaluate_check(const CheckSpec& spec, const CheckRequest& req, RunArtifacts& art) {
    const double slack = req.slack >= 0.0 ? req.slack : spec.default_slack;
    const std::string name = spec.name;

    const bool is_lfa_trace =
        art.trace && (art.trace->solver_id == "dspi_lfa" || art.trace->solver_id == "npg_lfa");
    const bool is_ssp_trace =
        art.trace && (art.trace->solver_id == "dspi_ssp" || art.trace->solver_id == "npg_ssp");

    switch (spec.req) {
        case Requires::TabularInstance:
            if (!art.mdp) throw std::invalid_argument(name + ": needs a discounted instance");
            break;
        case Requires::SspInstance:
            if (!art.ssp) throw std::invalid_argument(name + ": needs a terminal-state instance");
            break;
        case Requires::TabularTrace:
            if (!art.trace || is_lfa_trace || is_ssp_trace)
                throw std::invalid_argument(name + ": needs a tabular discounted run");
            break;
        case Requires::LfaTrace:
            if (!is_lfa_trace)
                throw std::invalid_argument(name + ": needs a function-approximation run");
            break;
        case Requires::SspTrace:
            if (!is_ssp_trace)
                throw std::invalid_argument(name + ": needs a terminal-state run");
            break;
        case Requires::DpiRun:
            if (!art.dpi) throw std::invalid_argument(name + ": needs a dual-averaged run");
            break;
        case Requires::Nothing:
            break;
    }

    if (name == "instance-valid") {
        if (art.mdp) validate(*art.mdp);
        if (art.ssp) {
            validate(*art.ssp);
            PropernessResult proper = check_all_proper(*art.ssp);
            if (!proper.proper)
                return make_result(spec, 1.0, proper.witness_state, 0.0, "improper policy found");
        }
        return make_result(spec, 0.0, -1, 0.0, "instance invariants hold");
    }
    if (name == "tie-break") return check_tie_break(spec, art.corrupt_tiebreak);
    if (name == "lemmaB1-contraction") return check_operator_suite(spec, *art.mdp, slack, false);
    if (name == "lemmaB1-monotone") return check_operator_suite(spec, *art.mdp, slack, true);
    if (name == "translation-invariance") return check_translation(spec, *art.mdp, slack);
    if (name == "fixed-point-consistency") return check_fixed_points(spec, *art.mdp, slack);
    if (name == "prop1-equivalence") return check_prop1(spec, art, slack, req.k);
    if (name == "lemma1-monotone") return check_lemma_monotone(spec, *art.trace, slack);
    if (name == "vgap-monotone") return check_vgap_monotone(spec, *art.trace, slack);
    if (name == "qbar-dominance") return check_qbar_dominance(spec, *art.trace, slack);
    if (name == "lemma2-recursion") return check_lemma2_recursion(spec, *art.trace, slack);
    if (name == "thm1.2-envelope" || name == "thm2-envelope")
        return check_envelope(spec, *art.trace, slack, EnvelopeForm::Discounted,
                              art.corrupt_envelope);
    if (name == "thm7-pi-rate")
        return check_envelope(spec, *art.trace, slack, EnvelopeForm::GreedyRate, false);
    if (name == "cor2-budget") return check_cor2_budget(spec, *art.trace, 1e-3);
    if (name == "thm3-termination") return check_thm3(spec, art, slack);
    if (name == "identity-features-tabular") return check_identity_features(spec, art, slack);
    if (name == "lemmaC1-monotone") return check_lemmaC1(spec, *art.trace, slack);
    if (name == "corC2-dominance") return check_corC2(spec, *art.trace, slack);
    if (name == "lemmaC3-recursion") return check_lemmaC3(spec, *art.trace, slack);
    if (name == "thmC1-envelope" || name == "thmC2-envelope")
        return check_envelope(spec, *art.trace, slack, EnvelopeForm::DiscountedLfa,
                              art.corrupt_envelope);
    if (name == "propC1-equivalence") return check_propC1(spec, art, slack, req.k);
    if (name == "lemmaD1-monotone") return check_lemma_monotone(spec, *art.trace, slack);
    if (name == "lemmaD3-recursion") return check_lemmaD3(spec, art, slack);
    if (name == "thmD1-envelope" || name == "thmD2-envelope")
        return check_envelope(spec, *art.trace, slack, EnvelopeForm::Terminal,
                              art.corrupt_envelope);
    if (name == "lemmaD4-translation") return check_lemmaD4(spec, *art.trace, slack);
    if (name == "corD1-sandwich") return check_corD1(spec, *art.ssp, slack);
    if (name == "xi-contraction") return check_xi_contraction(spec, *art.ssp, slack);
    if (name == "g-bound") {
        Regularizer nu = art.solver.nu.empty() ? Regularizer(RegularizerKind::ShannonEntropy)
                                               : Regularizer::from_key(art.solver.nu);
        return check_g_bound(spec, *art.ssp, nu, slack);
    }
    if (name == "propD1-equivalence") return check_propD1(spec, art, slack, req.k);
    throw std::logic_error("unhandled check: " + name);
}

std::string instance_summary(const InstanceSpec& spec) {
    std::ostringstream out;
    switch (spec.kind) {
        case InstanceSpec::Kind::Garnet:
            out << "garnet n=" << spec.garnet.n << " m=" << spec.garnet.m
                << " b=" << spec.garnet.branching << " gamma=" << spec.garnet.gamma
                << " seed=" << spec.garnet.seed;
            break;
        case InstanceSpec::Kind::GarnetSsp:
            out << "garnet-ssp n=" << spec.garnet_ssp.n << " m=" << spec.garnet_ssp.m
                << " b=" << spec.garnet_ssp.branching
                << " termination=" << spec.garnet_ssp.termination_prob
                << " seed=" << spec.garnet_ssp.seed;
            break;
        case InstanceSpec::Kind::LayeredSsp:
            out << "layered-ssp layers=" << spec.layered.layers << " width=" << spec.layered.width
                << " m=" << spec.layered.m << " seed=" << spec.layered.seed;
            break;
        case InstanceSpec::Kind::MdpFile:
            out << "mdp-file " << spec.path;
            break;
        case InstanceSpec::Kind::SspFile:
            out << "ssp-file " << spec.path;
            break;
    }
    return out.str();
}

}  // namespace

std::vector<std::string> available_checks() {
    std::vector<std::string> names;
    for (const CheckSpec& spec : kCheckTable) names.emplace_back(spec.name);
    return names;
}

Report run_experiment(const ExperimentConfig& config, const std::string& output_root) {
    // resolve all check names up front so configuration errors surface before
    // any expensive run
    std::vector<const CheckSpec*> specs;
    for (const CheckRequest& req : config.checks) {
        const CheckSpec* spec = find_check(req.name);
        if (!spec) {
            std::ostringstream msg;
            msg << "unknown check name: " << req.name << "; available:";
            for (const std::string& name : available_checks()) msg << " " << name;
            throw std::invalid_argument(msg.str());
        }
        specs.push_back(spec);
    }

    RunArtifacts art;
    art.solver = config.solver;
    for (const std::string& c : config.corruptions) {
        if (c == "zero-smoothing-term") art.corrupt_envelope = true;
        else if (c == "tie-break-highest") art.corrupt_tiebreak = true;
        else throw std::invalid_argument("unknown corruption: " + c);
    }

    SspMdp ssp_storage;
    switch (config.instance.kind) {
        case InstanceSpec::Kind::Garnet:
            art.mdp = generate_garnet(config.instance.garnet);
            break;
        case InstanceSpec::Kind::GarnetSsp:
            ssp_storage = generate_garnet_ssp(config.instance.garnet_ssp);
            art.ssp = &ssp_storage;
            break;
        case InstanceSpec::Kind::LayeredSsp:
            ssp_storage = generate_layered_ssp(config.instance.layered);
            art.ssp = &ssp_storage;
            break;
        case InstanceSpec::Kind::MdpFile:
            art.mdp = load_mdp_file(config.instance.path);
            break;
        case InstanceSpec::Kind::SspFile:
            ssp_storage = load_ssp_file(config.instance.path);
            art.ssp = &ssp_storage;
            break;
    }

    execute_solver(art, config);

    Report report;
    report.solver_id = config.solver.id;
    report.instance_summary = instance_summary(config.instance);
    for (std::size_t i = 0; i < config.checks.size(); ++i) {
        CheckResult result = evaluate_check(*specs[i], config.checks[i], art);
        report.all_passed = report.all_passed && result.pass;
        report.checks.push_back(std::move(result));
    }

    if (!config.output_dir.empty()) {
        namespace fs = std::filesystem;
        fs::path dir = fs::path(output_root) / config.output_dir;
        fs::create_directories(dir);
        if (art.trace && config.write_trace_csv) {
            std::ofstream out(dir / "trace.csv");
            art.trace->write_csv(out);
        }
        if (art.trace && config.write_trace_json) {
            std::ofstream out(dir / "trace.json");
            art.trace->write_json(out);
        }
        std::ofstream out(dir / "report.json");
        out << report.to_json_text() << "\n";
    }
    return report;
}

std::string Report::to_json_text() const {
    json doc;
    doc["schema_version"] = schema_version;
    doc["solver"] = solver_id;
    doc["instance"] = instance_summary;
    doc["all_passed"] = all_passed;
    json list = json::array();
    for (const CheckResult& c : checks) {
        json entry;
        entry["name"] = c.name;
        entry["anchor"] = c.anchor;
        entry["pass"] = c.pass;
        entry["max_slack"] = c.max_slack;
        entry["worst_k"] = c.worst_k;
        entry["detail"] = c.detail;
        list.push_back(std::move(entry));
    }
    doc["checks"] = std::move(list);
    return doc.dump(2);
}

// ---------------------------------------------------------------------------
// configuration parsing

namespace {

InstanceSpec instance_from_json(const json& doc) {
    InstanceSpec spec;
    const std::string kind = doc.value("kind", "garnet");
    auto geti = [&](const char* key, int fallback) { return doc.value(key, fallback); };
    auto getu = [&](const char* key, std::uint64_t fallback) {
        return doc.value(key, fallback);
    };
    if (kind == "garnet") {
        spec.kind = InstanceSpec::Kind::Garnet;
        spec.garnet.n = geti("n", spec.garnet.n);
        spec.garnet.m = geti("m", spec.garnet.m);
        spec.garnet.branching = geti("b", std::min(spec.garnet.n, 2));
        spec.garnet.gamma = doc.value("gamma", spec.garnet.gamma);
        spec.garnet.seed = getu("seed", spec.garnet.seed);
    } else if (kind == "garnet-ssp") {
        spec.kind = InstanceSpec::Kind::GarnetSsp;
        spec.garnet_ssp.n = geti("n", spec.garnet_ssp.n);
        spec.garnet_ssp.m = geti("m", spec.garnet_ssp.m);
        spec.garnet_ssp.branching = geti("b", std::min(spec.garnet_ssp.n, 2));
        spec.garnet_ssp.termination_prob =
            doc.value("termination_prob", spec.garnet_ssp.termination_prob);
        spec.garnet_ssp.seed = getu("seed", spec.garnet_ssp.seed);
    } else if (kind == "layered-ssp") {
        spec.kind = InstanceSpec::Kind::LayeredSsp;
        spec.layered.layers = geti("layers", spec.layered.layers);
        spec.layered.width = geti("width", spec.layered.width);
        spec.layered.m = geti("m", spec.layered.m);
        spec.layered.branching = geti("b", std::min(spec.layered.width, 2));
        spec.layered.seed = getu("seed", spec.layered.seed);
    } else if (kind == "mdp-file") {
        spec.kind = InstanceSpec::Kind::MdpFile;
        spec.path = doc.at("path").get<std::string>();
    } else if (kind == "ssp-file") {
        spec.kind = InstanceSpec::Kind::SspFile;
        spec.path = doc.at("path").get<std::string>();
    } else {
        throw std::invalid_argument("unknown instance kind: " + kind);
    }
    return spec;
}

SolverSpec solver_from_json(const json& doc) {
    SolverSpec sp;
    sp.id = doc.value("id", sp.id);
    sp.nu = doc.value("nu", sp.nu);
    sp.tau = doc.value("tau", sp.tau);
    sp.beta = doc.value("beta", sp.beta);
    sp.alpha0 = doc.value("alpha0", sp.alpha0);
    sp.k_max = doc.value("k_max", sp.k_max);
    sp.schedule = doc.value("schedule", sp.schedule);
    sp.vi_tol = doc.value("vi_tol", sp.vi_tol);
    sp.features = doc.value("features", sp.features);
    sp.feature_dim = doc.value("feature_dim", sp.feature_dim);
    sp.tile_size = doc.value("tile_size", sp.tile_size);
    sp.feature_seed = doc.value("feature_seed", sp.feature_seed);
    sp.feature_path = doc.value("feature_path", sp.feature_path);
    if (doc.contains("rho")) sp.rho = doc.at("rho").get<std::vector<double>>();
    return sp;
}

}  // namespace

ExperimentConfig ExperimentConfig::from_json_text(const std::string& text) {
    json doc = json::parse(text);
    ExperimentConfig config;
    if (doc.contains("instance")) config.instance = instance_from_json(doc.at("instance"));
    if (doc.contains("solver")) config.solver = solver_from_json(doc.at("solver"));
    if (doc.contains("checks")) {
        for (const json& entry : doc.at("checks")) {
            CheckRequest req;
            if (entry.is_string()) {
                req.name = entry.get<std::string>();
            } else {
                req.name = entry.at("name").get<std::string>();
                req.slack = entry.value("slack", req.slack);
                req.k = entry.value("k", req.k);
            }
            config.checks.push_back(std::move(req));
        }
    }
    if (doc.contains("corruptions"))
        config.corruptions = doc.at("corruptions").get<std::vector<std::string>>();
    if (doc.contains("output")) {
        const json& out = doc.at("output");
        config.output_dir = out.value("dir", config.output_dir);
        config.write_trace_csv = out.value("trace_csv", config.write_trace_csv);
        config.write_trace_json = out.value("trace_json", config.write_trace_json);
    }
    return config;
}

ExperimentConfig ExperimentConfig::from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("cannot open config file: " + path);
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return from_json_text(buffer.str());
}

// ---------------------------------------------------------------------------
// sweep

SweepGrid sweep_grid_from_json_text(const std::string& text) {
    json doc = json::parse(text);
    const json& grid = doc.contains("grid") ? doc.at("grid") : doc;
    SweepGrid g;
    if (grid.contains("gamma")) g.gammas = grid.at("gamma").get<std::vector<double>>();
    if (grid.contains("beta")) g.betas = grid.at("beta").get<std::vector<double>>();
    if (grid.contains("n")) g.ns = grid.at("n").get<std::vector<int>>();
    if (grid.contains("m")) g.ms = grid.at("m").get<std::vector<int>>();
    if (grid.contains("seed")) g.seeds = grid.at("seed").get<std::vector<std::uint64_t>>();
    g.epsilon = grid.value("epsilon", g.epsilon);
    return g;
}

SweepResult sweep(const ExperimentConfig& base, const SweepGrid& grid) {
    if (grid.gammas.empty() || grid.betas.empty() || grid.ns.empty() || grid.ms.empty() ||
        grid.seeds.empty())
        throw std::invalid_argument("sweep: every grid dimension must be non-empty");
    if (!(grid.epsilon > 0.0)) throw std::invalid_argument("sweep: epsilon must be positive");
    if (base.solver.id != "npg" && base.solver.id != "dspi")
        throw std::invalid_argument("sweep: supported solvers are npg and dspi");

    SweepResult result;
    int index = 0;
    for (double gamma : grid.gammas) {
        for (double beta : grid.betas) {
            for (int n : grid.ns) {
                for (int m : grid.ms) {
                    for (std::uint64_t seed : grid.seeds) {
                        GarnetSpec gs = base.instance.garnet;
                        gs.n = n;
                        gs.m = m;
                        gs.branching = std::min(gs.branching, n);
                        gs.gamma = gamma;
                        gs.seed = seed;
                        TabularMdp mdp = generate_garnet(gs);

                        const long long budget = static_cast<long long>(std::ceil(
                            2.0 / (1.0 - gamma) *
                            std::log(1.0 / (grid.epsilon * (1.0 - gamma)))));
                        const int k_max = static_cast<int>(budget) + 1;

                        SolverTrace trace;
                        if (base.solver.id == "npg") {
                            double alpha0 = base.solver.alpha0 > 0.0
                                                ? base.solver.alpha0
                                                : std::log(static_cast<double>(m));
                            trace = run_npg(mdp, alpha0, beta, k_max);
                        } else {
                            Regularizer nu = Regularizer::from_key(base.solver.nu);
                            double numax = nu.max_value(m);
                            double tau = base.solver.tau >= 0.0
                                             ? base.solver.tau
                                             : (numax > 0.0 ? 1.0 / numax : 0.0);
                            trace = run_dspi(mdp, nu, tau,
                                             StepsizeSchedule::constant_after_one(beta), k_max);
                        }

                        SweepCell cell;
                        cell.index = index++;
                        cell.gamma = gamma;
                        cell.beta = beta;
                        cell.n = n;
                        cell.m = m;
                        cell.seed = seed;
                        cell.budget = budget;
                        for (const IterationRecord& it : trace.iterations) {
                            if (it.v_gap <= grid.epsilon) {
                                cell.first_k = it.k;
                                break;
                            }
                        }
                        cell.within_budget = cell.first_k >= 0 && cell.first_k <= budget;
                        result.all_within_budget =
                            result.all_within_budget && cell.within_budget;
                        result.cells.push_back(cell);
                    }
                }
            }
        }
    }
    return result;
}

void SweepResult::write_csv(std::ostream& out) const {
    out << "index,gamma,beta,n,m,seed,first_k,budget,within_budget\n";
    for (const SweepCell& c : cells) {
        char buf[64];
        std::snprintf(buf, sizeof(buf), "%.17g,%.17g", c.gamma, c.beta);
        out << c.index << ',' << buf << ',' << c.n << ',' << c.m << ',' << c.seed << ','
            << c.first_k << ',' << c.budget << ',' << (c.within_budget ? 1 : 0) << '\n';
    }
}

}  // namespace dspi
