#include "dspi/solvers.hpp"

#include <chrono>
#include <cmath>
#include <stdexcept>

namespace dspi {

namespace {

enum class EnvelopeKind { GreedyRate, ConstantClosedForm, General };

struct CoreOptions {
    std::string solver_id;
    Policy initial;
    Regularizer nu{RegularizerKind::Zero};
    double tau = 0.0;
    StepsizeSchedule schedule = StepsizeSchedule::constant_after_one(1.0);
    int k_max = 0;
    EnvelopeKind envelope = EnvelopeKind::General;
    bool stop_when_stable = false;
    bool stop_requires_optimal_match = false;
};

struct CoreResult {
    SolverTrace trace;
    int stopped_at = -1;
};

Policy regularized_greedy(const Eigen::MatrixXd& qbar, const Regularizer& nu, double eta) {
    Policy pi;
    pi.probs.resize(qbar.rows(), qbar.cols());
    for (Eigen::Index s = 0; s < qbar.rows(); ++s)
        pi.probs.row(s) = nu.argmax(qbar.row(s).transpose(), eta).transpose();
    return pi;
}

bool same_policy(const Policy& a, const Policy& b) {
    return (a.probs - b.probs).cwiseAbs().maxCoeff() == 0.0;
}

CoreResult run_core(const TabularMdp& mdp, const CoreOptions& opt) {
    validate(mdp);
    if (opt.tau < 0.0) throw std::invalid_argument("solver: tau must be nonnegative");
    if (opt.k_max < 1) throw std::invalid_argument("solver: k_max must be >= 1");

    const OptimalQResult ref = optimal_q(mdp, kReferenceTol);
    const Eigen::VectorXd v_star = ref.q.values.rowwise().maxCoeff();

    CoreResult result;
    SolverTrace& tr = result.trace;
    tr.solver_id = opt.solver_id;
    tr.gamma = mdp.gamma;
    tr.tau = opt.tau;
    tr.nu_key = opt.nu.key();
    tr.nu_max = opt.nu.max_value(mdp.m);
    tr.q_star = ref.q.values;
    tr.v_star = v_star;
    tr.iterations.reserve(opt.k_max);

    const double gamma = mdp.gamma;
    const double beta_const =
        opt.schedule.kind() == ScheduleKind::ConstantAfterOne ? opt.schedule.constant() : 0.0;

    Eigen::MatrixXd qbar = Eigen::MatrixXd::Zero(mdp.n, mdp.m);
    Policy pi = opt.initial;
    double eta = opt.tau;       // eta_0
    double eta_prev = 0.0;      // eta_{k-1}, defined from k = 1 on
    double env_prod = 1.0;      // prod_{j=1..k-1} (1 - (1-gamma) beta_j)
    double env_sum = 0.0;       // sum_{i=1..k-1} beta_i eta_{i-1} prod_{j=i+1..k-1} (...)
    double v0_gap = 0.0;

    const auto t0 = std::chrono::steady_clock::now();
    for (int k = 0; k < opt.k_max; ++k) {
        QFunction qpi = evaluate_policy_exact(pi, mdp);
        Eigen::VectorXd vpi = (pi.probs.array() * qpi.values.array()).rowwise().sum();
        double v_gap = (v_star - vpi).cwiseAbs().maxCoeff();
        if (k == 0) {
            v0_gap = v_gap;
            tr.v0_gap = v0_gap;
        }

        const double beta_k = opt.schedule.beta(k);
        if (k >= 1) {
            eta_prev = eta;
            eta *= (1.0 - beta_k);
        }

        double envelope = v0_gap;
        if (k >= 1) {
            switch (opt.envelope) {
                case EnvelopeKind::GreedyRate:
                    envelope = std::pow(gamma, k) * v0_gap;
                    break;
                case EnvelopeKind::ConstantClosedForm:
                    envelope = std::pow(1.0 - (1.0 - gamma) * beta_const, k - 1) *
                               (gamma * v0_gap + opt.tau * tr.nu_max);
                    break;
                case EnvelopeKind::General:
                    // valid only when the averaging starts at full weight
                    envelope = opt.schedule.beta(0) == 1.0
                                   ? env_prod * gamma * v0_gap + gamma * tr.nu_max * env_sum +
                                         eta_prev * tr.nu_max
                                   : std::numeric_limits<double>::quiet_NaN();
                    break;
            }
        }

        IterationRecord rec;
        rec.k = k;
        rec.policy = pi.probs;
        rec.q_pi = qpi.values;
        rec.qbar = qbar;
        rec.v_gap = v_gap;
        rec.qbar_gap = (tr.q_star - qbar).cwiseAbs().maxCoeff();
        rec.beta = beta_k;
        rec.eta = eta;
        rec.envelope = envelope;
        rec.eta_floored = eta < kEtaFloor && opt.nu.kind() != RegularizerKind::Zero;
        rec.wallclock_s =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        tr.iterations.push_back(std::move(rec));

        qbar = (1.0 - beta_k) * qbar + beta_k * qpi.values;
        if (k >= 1) {
            const double factor = 1.0 - (1.0 - gamma) * beta_k;
            env_prod *= factor;
            env_sum = factor * env_sum + beta_k * eta_prev;
        }

        const double eta_eff = eta < kEtaFloor ? 0.0 : eta;
        Policy next = regularized_greedy(qbar, opt.nu, eta_eff);

        if (opt.stop_when_stable && same_policy(next, pi)) {
            bool stop = true;
            if (opt.stop_requires_optimal_match) stop = same_policy(next, ref.greedy);
            if (stop) {
                result.stopped_at = k;
                break;
            }
        }
        pi = std::move(next);
    }
    return result;
}

}  // namespace

PiResult run_pi(const TabularMdp& mdp, int k_max) {
    CoreOptions opt;
    opt.solver_id = "pi";
    opt.initial = uniform_policy(mdp.n, mdp.m);
    opt.nu = Regularizer(RegularizerKind::Zero);
    opt.tau = 0.0;
    opt.schedule = StepsizeSchedule::constant_after_one(1.0);
    opt.k_max = k_max;
    opt.envelope = EnvelopeKind::GreedyRate;
    opt.stop_when_stable = true;
    CoreResult core = run_core(mdp, opt);
    return PiResult{std::move(core.trace), core.stopped_at};
}

SolverTrace run_dspi(const TabularMdp& mdp, const Regularizer& nu, double tau,
                     const StepsizeSchedule& schedule, int k_max) {
    CoreOptions opt;
    opt.solver_id = "dspi";
    opt.initial.probs = nu.max_point(mdp.m).transpose().replicate(mdp.n, 1);
    opt.nu = nu;
    opt.tau = tau;
    opt.schedule = schedule;
    opt.k_max = k_max;
    opt.envelope = schedule.kind() == ScheduleKind::ConstantAfterOne
                       ? EnvelopeKind::ConstantClosedForm
                       : EnvelopeKind::General;
    return run_core(mdp, opt).trace;
}

SolverTrace run_npg(const TabularMdp& mdp, double alpha0, double beta, int k_max) {
    if (!(alpha0 > 0.0)) throw std::invalid_argument("npg: alpha0 must be positive");
    if (!(beta > 0.0 && beta < 1.0))
        throw std::invalid_argument("npg: beta must lie strictly inside (0,1)");
    CoreOptions opt;
    opt.solver_id = "npg";
    opt.initial = uniform_policy(mdp.n, mdp.m);
    opt.nu = Regularizer(RegularizerKind::ShannonEntropy);
    opt.tau = 1.0 / alpha0;
    opt.schedule = StepsizeSchedule::constant_after_one(beta);
    opt.k_max = k_max;
    opt.envelope = EnvelopeKind::ConstantClosedForm;
    return run_core(mdp, opt).trace;
}

RawNpgResult run_npg_raw(const TabularMdp& mdp, const std::vector<double>& alphas, int k_max) {
    validate(mdp);
    if (k_max < 0 || static_cast<std::size_t>(k_max) > alphas.size())
        throw std::invalid_argument("npg raw: need one stepsize per iteration");
    const Regularizer entropy(RegularizerKind::ShannonEntropy);
    RawNpgResult out;
    Eigen::MatrixXd theta = Eigen::MatrixXd::Zero(mdp.n, mdp.m);
    Policy pi = uniform_policy(mdp.n, mdp.m);
    out.policies.push_back(pi.probs);
    out.thetas.push_back(theta);
    for (int k = 0; k < k_max; ++k) {
        if (!(alphas[k] > 0.0)) throw std::invalid_argument("npg raw: stepsizes must be positive");
        QFunction qpi = evaluate_policy_exact(pi, mdp);
        theta += alphas[k] * qpi.values;
        pi = regularized_greedy(theta, entropy, 1.0);
        out.policies.push_back(pi.probs);
        out.thetas.push_back(theta);
        out.alphas.push_back(alphas[k]);
    }
    return out;
}

EquivalenceReport check_npg_dspi_equivalence(const TabularMdp& mdp,
                                             const std::vector<double>& alphas, int k_max,
                                             double tol) {
    if (k_max < 1) throw std::invalid_argument("equivalence: k_max must be >= 1");
    if (static_cast<std::size_t>(k_max) > alphas.size())
        throw std::invalid_argument("equivalence: need one stepsize per iteration");

    RawNpgResult raw = run_npg_raw(mdp, alphas, k_max);

    std::vector<double> truncated(alphas.begin(), alphas.begin() + k_max);
    std::vector<double> betas = beta_from_alpha(truncated);
    CoreOptions opt;
    opt.solver_id = "dspi";
    opt.initial = uniform_policy(mdp.n, mdp.m);
    opt.nu = Regularizer(RegularizerKind::ShannonEntropy);
    opt.tau = 1.0 / alphas[0];
    opt.schedule = StepsizeSchedule::custom(betas);
    opt.k_max = k_max;
    opt.envelope = EnvelopeKind::General;
    SolverTrace averaged = run_core(mdp, opt).trace;

    EquivalenceReport report;
    report.tol = tol;
    for (int k = 0; k <= k_max; ++k) {
        const Eigen::MatrixXd& dual = raw.policies[k];
        Eigen::MatrixXd avg;
        if (k < static_cast<int>(averaged.iterations.size())) {
            avg = averaged.iterations[k].policy;
        } else {
            // one policy past the recorded trace: rebuild it from the last
            // record's running average
            const IterationRecord& last = averaged.iterations.back();
            Eigen::MatrixXd qbar =
                (1.0 - last.beta) * last.qbar + last.beta * last.q_pi;
            double eta = last.eta < kEtaFloor ? 0.0 : last.eta;
            avg = regularized_greedy(qbar, opt.nu, eta).probs;
        }
        double dev = (dual - avg).cwiseAbs().maxCoeff();
        if (dev > report.max_deviation) {
            report.max_deviation = dev;
            report.worst_k = k;
        }
    }
    report.pass = report.max_deviation <= tol;
    return report;
}

DualAveragedPiResult run_dual_averaged_pi(const TabularMdp& mdp, double beta, int k_max) {
    if (!(beta > 0.0 && beta < 1.0))
        throw std::invalid_argument("dual-averaged pi: beta must lie strictly inside (0,1)");
    validate(mdp);

    const int kstar = static_cast<int>(
        std::ceil(std::log(2.0 / (1.0 - mdp.gamma)) / (beta * (1.0 - mdp.gamma))));
    const long long budget = static_cast<long long>(mdp.n) * (mdp.m - 1) * kstar;

    CoreOptions opt;
    opt.solver_id = "dual_averaged_pi";
    opt.initial = deterministic_policy(std::vector<int>(mdp.n, 0), mdp.m);
    opt.nu = Regularizer(RegularizerKind::Zero);
    opt.tau = 0.0;
    opt.schedule = StepsizeSchedule::constant_after_one(beta);
    opt.k_max = k_max > 0 ? k_max : static_cast<int>(budget) + 1;
    opt.envelope = EnvelopeKind::ConstantClosedForm;
    opt.stop_when_stable = true;
    opt.stop_requires_optimal_match = true;
    CoreResult core = run_core(mdp, opt);

    DualAveragedPiResult result;
    result.trace = std::move(core.trace);
    result.stopped_at = core.stopped_at;
    result.kstar = kstar;
    result.budget = budget;
    for (const IterationRecord& it : result.trace.iterations) {
        if (it.v_gap <= 1e-9) {
            result.first_optimal_k = it.k;
            break;
        }
    }
    return result;
}

}  // namespace dspi
