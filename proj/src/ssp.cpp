#include "dspi/ssp.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace dspi {

using nlohmann::json;

void validate(const SspMdp& ssp) {
    if (ssp.n < 1 || ssp.m < 1) throw std::invalid_argument("ssp: n and m must be positive");
    if (ssp.reward.rows() != ssp.n || ssp.reward.cols() != ssp.m)
        throw std::invalid_argument("ssp: reward must be n x m");
    if (ssp.transition.size() != static_cast<std::size_t>(ssp.n) * ssp.m * (ssp.n + 1))
        throw std::invalid_argument("ssp: transition must hold n*m*(n+1) entries");
    for (int s = 0; s < ssp.n; ++s) {
        for (int a = 0; a < ssp.m; ++a) {
            double r = ssp.reward(s, a);
            if (!std::isfinite(r) || r < -1.0 || r > 0.0) {
                std::ostringstream msg;
                msg << "ssp: reward(" << s << "," << a << ") = " << r << " outside [-1,0]";
                throw std::invalid_argument(msg.str());
            }
            double sum = 0.0;
            for (int t = 0; t <= ssp.n; ++t) {
                double pr = ssp.p(s, a, t);
                if (!std::isfinite(pr) || pr < 0.0)
                    throw std::invalid_argument("ssp: negative transition probability");
                sum += pr;
            }
            if (std::abs(sum - 1.0) > kDistributionTol * (ssp.n + 1)) {
                std::ostringstream msg;
                msg << "ssp: transition row (" << s << "," << a << ") sums to " << sum;
                throw std::invalid_argument(msg.str());
            }
        }
    }
}

namespace {

// Largest set U of states such that every member has an action keeping all
// transition mass inside U. Nonempty U is exactly the improper case.
std::vector<char> trapped_set(const SspMdp& ssp) {
    std::vector<char> in_set(ssp.n, 1);
    bool changed = true;
    while (changed) {
        changed = false;
        for (int s = 0; s < ssp.n; ++s) {
            if (!in_set[s]) continue;
            bool has_staying_action = false;
            for (int a = 0; a < ssp.m && !has_staying_action; ++a) {
                double inside = 0.0;
                for (int t = 0; t < ssp.n; ++t)
                    if (in_set[t]) inside += ssp.p(s, a, t);
                if (inside >= 1.0 - 1e-12) has_staying_action = true;
            }
            if (!has_staying_action) {
                in_set[s] = 0;
                changed = true;
            }
        }
    }
    return in_set;
}

// States that cannot reach the terminal state in the support graph under a
// fixed deterministic policy; empty result means the policy is proper.
std::vector<int> unreachable_states(const SspMdp& ssp, const std::vector<int>& policy) {
    std::vector<char> reaches(ssp.n, 0);
    // backward closure from the terminal state
    bool changed = true;
    while (changed) {
        changed = false;
        for (int s = 0; s < ssp.n; ++s) {
            if (reaches[s]) continue;
            const int a = policy[s];
            if (ssp.p_terminal(s, a) > 0.0) {
                reaches[s] = 1;
                changed = true;
                continue;
            }
            for (int t = 0; t < ssp.n; ++t) {
                if (reaches[t] && ssp.p(s, a, t) > 0.0) {
                    reaches[s] = 1;
                    changed = true;
                    break;
                }
            }
        }
    }
    std::vector<int> unreachable;
    for (int s = 0; s < ssp.n; ++s)
        if (!reaches[s]) unreachable.push_back(s);
    return unreachable;
}

std::vector<int> max_self_occupancy_policy(const SspMdp& ssp) {
    std::vector<int> policy(ssp.n, 0);
    for (int s = 0; s < ssp.n; ++s) {
        double best = -1.0;
        for (int a = 0; a < ssp.m; ++a) {
            double inside = 0.0;
            for (int t = 0; t < ssp.n; ++t) inside += ssp.p(s, a, t);
            if (inside > best) {
                best = inside;
                policy[s] = a;
            }
        }
    }
    return policy;
}

}  // namespace

PropernessResult check_all_proper(const SspMdp& ssp) {
    validate(ssp);
    PropernessResult result;
    std::vector<char> trapped = trapped_set(ssp);
    const bool improper = std::any_of(trapped.begin(), trapped.end(), [](char c) { return c; });

    if (!improper) {
        result.proper = true;
        // stage-count iteration: converges geometrically once no policy can
        // stay off-terminal forever
        Eigen::MatrixXd t_now = Eigen::MatrixXd::Zero(ssp.n, ssp.m);
        for (int it = 0; it < 1'000'000; ++it) {
            Eigen::VectorXd best = t_now.rowwise().maxCoeff();
            Eigen::MatrixXd t_next(ssp.n, ssp.m);
            for (int s = 0; s < ssp.n; ++s) {
                for (int a = 0; a < ssp.m; ++a) {
                    double acc = 0.0;
                    for (int t = 0; t < ssp.n; ++t) acc += ssp.p(s, a, t) * best(t);
                    t_next(s, a) = 1.0 + acc;
                }
            }
            double delta = (t_next - t_now).cwiseAbs().maxCoeff();
            t_now = std::move(t_next);
            if (delta <= 1e-13 * std::max(1.0, t_now.maxCoeff())) break;
            if (it + 1 == 1'000'000)
                throw std::runtime_error("check_all_proper: stage-count iteration stalled");
        }
        result.expected_stages = std::move(t_now);
        return result;
    }

    result.proper = false;
    // witness search: max-self-occupancy first, then enumeration on tiny
    // instances, then any policy that stays inside the trapped set
    std::vector<int> candidate = max_self_occupancy_policy(ssp);
    std::vector<int> stuck = unreachable_states(ssp, candidate);
    if (!stuck.empty()) {
        result.witness_state = stuck.front();
        result.witness_policy = std::move(candidate);
        return result;
    }
    if (ssp.n * ssp.m <= 16) {
        std::vector<int> policy(ssp.n, 0);
        while (true) {
            stuck = unreachable_states(ssp, policy);
            if (!stuck.empty()) {
                result.witness_state = stuck.front();
                result.witness_policy = policy;
                return result;
            }
            int pos = 0;
            while (pos < ssp.n && ++policy[pos] == ssp.m) policy[pos++] = 0;
            if (pos == ssp.n) break;
        }
    }
    std::vector<int> staying(ssp.n, 0);
    int witness = -1;
    for (int s = 0; s < ssp.n; ++s) {
        if (!trapped[s]) continue;
        if (witness < 0) witness = s;
        for (int a = 0; a < ssp.m; ++a) {
            double inside = 0.0;
            for (int t = 0; t < ssp.n; ++t)
                if (trapped[t]) inside += ssp.p(s, a, t);
            if (inside >= 1.0 - 1e-12) {
                staying[s] = a;
                break;
            }
        }
    }
    result.witness_state = witness;
    result.witness_policy = std::move(staying);
    return result;
}

WeightedNorm compute_weighted_norm(const SspMdp& ssp) {
    PropernessResult proper = check_all_proper(ssp);
    if (!proper.proper)
        throw std::invalid_argument(
            "compute_weighted_norm: not every stationary policy is proper (witness state " +
            std::to_string(proper.witness_state) + ")");

    for (double margin = 1.0; margin <= 1024.0; margin *= 2.0) {
        WeightedNorm wn;
        wn.xi = proper.expected_stages.array() + margin;
        wn.kappa = ((wn.xi.array() - 1.0) / wn.xi.array()).maxCoeff();
        if (!(wn.kappa > 0.0 && wn.kappa < 1.0)) continue;

        // certify empirically before returning
        std::mt19937_64 engine(0x5e0000ull + static_cast<std::uint64_t>(margin));
        std::uniform_real_distribution<double> uniform(-3.0, 3.0);
        bool certified = true;
        double worst_lhs = 0.0, worst_rhs = 0.0;
        int worst_trial = -1;
        for (int trial = 0; trial < 200 && certified; ++trial) {
            QFunction q1, q2;
            q1.values.resize(ssp.n, ssp.m);
            q2.values.resize(ssp.n, ssp.m);
            for (int s = 0; s < ssp.n; ++s) {
                for (int a = 0; a < ssp.m; ++a) {
                    q1.values(s, a) = uniform(engine);
                    q2.values(s, a) = uniform(engine);
                }
            }
            double lhs = wn.norm(apply_ssp_bellman_optimality(q1, ssp).values -
                                 apply_ssp_bellman_optimality(q2, ssp).values);
            double rhs = wn.kappa * wn.norm(q1.values - q2.values);
            if (lhs > rhs + 1e-10) {
                certified = false;
                worst_lhs = lhs;
                worst_rhs = rhs;
                worst_trial = trial;
            }
        }
        if (certified) return wn;
        if (margin == 1024.0) {
            std::ostringstream msg;
            msg << "compute_weighted_norm: contraction certificate failed up to margin 2^10"
                << " (trial " << worst_trial << ": " << worst_lhs << " > kappa-bound "
                << worst_rhs << ")";
            throw std::runtime_error(msg.str());
        }
    }
    throw std::runtime_error(
        "compute_weighted_norm: contraction certificate failed up to margin 2^10");
}

const WeightedNorm& certificate_for(SspMdp& ssp) {
    if (!ssp.cert) ssp.cert = compute_weighted_norm(ssp);
    return *ssp.cert;
}

namespace {

void check_shape(const QFunction& q, const SspMdp& ssp) {
    if (q.values.rows() != ssp.n || q.values.cols() != ssp.m)
        throw std::invalid_argument("ssp bellman: Q shape does not match the instance");
}

QFunction ssp_backup(const Eigen::VectorXd& z, const SspMdp& ssp) {
    QFunction out;
    out.values.resize(ssp.n, ssp.m);
    for (int s = 0; s < ssp.n; ++s) {
        for (int a = 0; a < ssp.m; ++a) {
            double acc = 0.0;
            for (int t = 0; t < ssp.n; ++t) acc += ssp.p(s, a, t) * z(t);
            out.values(s, a) = ssp.reward(s, a) + acc;
        }
    }
    return out;
}

}  // namespace

QFunction apply_ssp_bellman_optimality(const QFunction& q, const SspMdp& ssp) {
    check_shape(q, ssp);
    return ssp_backup(q.values.rowwise().maxCoeff(), ssp);
}

QFunction apply_ssp_bellman_policy(const QFunction& q, const Policy& pi, const SspMdp& ssp) {
    check_shape(q, ssp);
    validate(pi, ssp.n, ssp.m);
    Eigen::VectorXd z = (pi.probs.array() * q.values.array()).rowwise().sum();
    return ssp_backup(z, ssp);
}

QFunction apply_ssp_smoothed_optimality(const QFunction& q, double eta, const Regularizer& nu,
                                        const SspMdp& ssp) {
    check_shape(q, ssp);
    if (eta < 0.0) throw std::invalid_argument("ssp bellman: eta must be nonnegative");
    if (eta == 0.0) return apply_ssp_bellman_optimality(q, ssp);
    Eigen::VectorXd z(ssp.n);
    for (int s = 0; s < ssp.n; ++s) {
        Eigen::VectorXd row = q.values.row(s).transpose();
        Eigen::VectorXd mu = nu.argmax(row, eta);
        z(s) = mu.dot(row) + eta * nu.value(mu);
    }
    return ssp_backup(z, ssp);
}

QFunction apply_ssp_smoothed_policy(const QFunction& q, const Policy& pi, double eta,
                                    const Regularizer& nu, const SspMdp& ssp) {
    check_shape(q, ssp);
    validate(pi, ssp.n, ssp.m);
    if (eta < 0.0) throw std::invalid_argument("ssp bellman: eta must be nonnegative");
    if (eta == 0.0) return apply_ssp_bellman_policy(q, pi, ssp);
    Eigen::VectorXd z(ssp.n);
    for (int s = 0; s < ssp.n; ++s) {
        Eigen::VectorXd row = q.values.row(s).transpose();
        z(s) = pi.probs.row(s).dot(row) + eta * nu.value(pi.probs.row(s).transpose());
    }
    return ssp_backup(z, ssp);
}

QFunction evaluate_policy_ssp(const Policy& pi, const SspMdp& ssp, double residual_tol) {
    validate(pi, ssp.n, ssp.m);
    const int nm = ssp.n * ssp.m;
    Eigen::MatrixXd system = Eigen::MatrixXd::Identity(nm, nm);
    Eigen::VectorXd rhs(nm);
    for (int s = 0; s < ssp.n; ++s) {
        for (int a = 0; a < ssp.m; ++a) {
            const int row = s * ssp.m + a;
            rhs(row) = ssp.reward(s, a);
            for (int t = 0; t < ssp.n; ++t) {
                const double pv = ssp.p(s, a, t);
                if (pv == 0.0) continue;
                for (int b = 0; b < ssp.m; ++b) system(row, t * ssp.m + b) -= pv * pi.probs(t, b);
            }
        }
    }
    Eigen::VectorXd flat = system.partialPivLu().solve(rhs);
    QFunction q;
    q.values.resize(ssp.n, ssp.m);
    for (int s = 0; s < ssp.n; ++s)
        for (int a = 0; a < ssp.m; ++a) q.values(s, a) = flat(s * ssp.m + a);
    double residual =
        (q.values - apply_ssp_bellman_policy(q, pi, ssp).values).cwiseAbs().maxCoeff();
    if (!std::isfinite(residual) || residual > residual_tol) {
        std::ostringstream msg;
        msg << "evaluate_policy_ssp: residual " << residual
            << " exceeds " << residual_tol << "; the policy appears improper";
        throw std::runtime_error(msg.str());
    }
    return q;
}

SspOptimalQResult optimal_q_ssp(const SspMdp& ssp, const WeightedNorm& wn, double tol) {
    if (!(tol > 0.0)) throw std::invalid_argument("optimal_q_ssp: tol must be positive");
    const double stop = tol * (1.0 - wn.kappa) / (2.0 * wn.kappa);
    QFunction q;
    q.values = Eigen::MatrixXd::Zero(ssp.n, ssp.m);
    SspOptimalQResult result;
    const int max_iterations = 2'000'000;
    for (int it = 0; it < max_iterations; ++it) {
        QFunction next = apply_ssp_bellman_optimality(q, ssp);
        double step_weighted = wn.norm(next.values - q.values);
        double step_plain = (next.values - q.values).cwiseAbs().maxCoeff();
        q = std::move(next);
        if (step_weighted <= stop && step_plain <= 0.5e-10) {
            result.iterations = it + 1;
            break;
        }
        if (it + 1 == max_iterations)
            throw std::runtime_error("optimal_q_ssp: value iteration failed to converge");
    }
    result.q = q;
    result.greedy.probs.resize(ssp.n, ssp.m);
    for (int s = 0; s < ssp.n; ++s)
        result.greedy.probs.row(s) = greedy_point_mass(q.values.row(s).transpose()).transpose();
    return result;
}

namespace {

SolverTrace run_ssp_core(const SspMdp& ssp, const Regularizer& nu, double tau,
                         const StepsizeSchedule& schedule, int k_max,
                         const std::string& solver_id, Policy initial) {
    if (tau < 0.0) throw std::invalid_argument("solver: tau must be nonnegative");
    if (k_max < 1) throw std::invalid_argument("solver: k_max must be >= 1");
    WeightedNorm local;
    if (!ssp.cert) local = compute_weighted_norm(ssp);
    const WeightedNorm& wn = ssp.cert ? *ssp.cert : local;
    const SspOptimalQResult ref = optimal_q_ssp(ssp, wn, kReferenceTol);
    const Eigen::VectorXd v_star = ref.q.values.rowwise().maxCoeff();
    const double kappa = wn.kappa;
    const bool constant_schedule = schedule.kind() == ScheduleKind::ConstantAfterOne;
    const double beta_const = constant_schedule ? schedule.constant() : 0.0;

    SolverTrace tr;
    tr.solver_id = solver_id;
    tr.kappa = kappa;
    tr.tau = tau;
    tr.nu_key = nu.key();
    tr.nu_max = nu.max_value(ssp.m);
    tr.q_star = ref.q.values;
    tr.v_star = v_star;
    tr.iterations.reserve(k_max);

    Eigen::MatrixXd qbar = Eigen::MatrixXd::Zero(ssp.n, ssp.m);
    Policy pi = std::move(initial);
    double eta = tau;
    double eta_prev = 0.0;
    double env_prod = 1.0;  // prod_{j=1..k-1} (1 - (1-kappa) beta_j)
    double env_sum = 0.0;
    double v0_gap = 0.0;

    for (int k = 0; k < k_max; ++k) {
        QFunction qpi = evaluate_policy_ssp(pi, ssp);
        Eigen::VectorXd vpi = (pi.probs.array() * qpi.values.array()).rowwise().sum();
        double v_gap = (v_star - vpi).cwiseAbs().maxCoeff();
        if (k == 0) {
            v0_gap = v_gap;
            tr.v0_gap = v0_gap;
        }

        const double beta_k = schedule.beta(k);
        if (k >= 1) {
            eta_prev = eta;
            eta *= (1.0 - beta_k);
        }

        double envelope = v0_gap;
        if (k >= 1) {
            if (constant_schedule) {
                envelope = std::pow(1.0 - (1.0 - kappa) * beta_const, k - 1) *
                           (v0_gap + 2.0 * tau * tr.nu_max) / (1.0 - kappa);
            } else if (schedule.beta(0) == 1.0) {
                envelope = (env_prod * v0_gap + wn.kappa_prime() * tr.nu_max * env_sum +
                            eta_prev * tr.nu_max) /
                           (1.0 - kappa);
            } else {
                envelope = std::numeric_limits<double>::quiet_NaN();
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
        rec.eta_floored = eta < kEtaFloor && nu.kind() != RegularizerKind::Zero;
        tr.iterations.push_back(std::move(rec));

        qbar = (1.0 - beta_k) * qbar + beta_k * qpi.values;
        if (k >= 1) {
            const double factor = 1.0 - (1.0 - kappa) * beta_k;
            env_prod *= factor;
            env_sum = factor * env_sum + beta_k * eta_prev;
        }

        const double eta_eff = eta < kEtaFloor ? 0.0 : eta;
        for (int s = 0; s < ssp.n; ++s)
            pi.probs.row(s) = nu.argmax(qbar.row(s).transpose(), eta_eff).transpose();
    }
    return tr;
}

}  // namespace

SolverTrace run_dspi_ssp(const SspMdp& ssp, const Regularizer& nu, double tau,
                         const StepsizeSchedule& schedule, int k_max) {
    validate(ssp);
    Policy pi;
    pi.probs = nu.max_point(ssp.m).transpose().replicate(ssp.n, 1);
    return run_ssp_core(ssp, nu, tau, schedule, k_max, "dspi_ssp", std::move(pi));
}

SolverTrace run_npg_ssp(const SspMdp& ssp, double alpha0, double beta, int k_max) {
    validate(ssp);
    if (!(alpha0 > 0.0)) throw std::invalid_argument("npg ssp: alpha0 must be positive");
    if (!(beta > 0.0 && beta < 1.0))
        throw std::invalid_argument("npg ssp: beta must lie strictly inside (0,1)");
    return run_ssp_core(ssp, Regularizer(RegularizerKind::ShannonEntropy), 1.0 / alpha0,
                        StepsizeSchedule::constant_after_one(beta), k_max, "npg_ssp",
                        uniform_policy(ssp.n, ssp.m));
}

RawNpgSspResult run_npg_ssp_raw(const SspMdp& ssp, const std::vector<double>& alphas,
                                int k_max) {
    validate(ssp);
    if (k_max < 0 || static_cast<std::size_t>(k_max) > alphas.size())
        throw std::invalid_argument("npg ssp raw: need one stepsize per iteration");
    const Regularizer entropy(RegularizerKind::ShannonEntropy);
    RawNpgSspResult out;
    Eigen::MatrixXd theta = Eigen::MatrixXd::Zero(ssp.n, ssp.m);
    Policy pi = uniform_policy(ssp.n, ssp.m);
    out.policies.push_back(pi.probs);
    for (int k = 0; k < k_max; ++k) {
        if (!(alphas[k] > 0.0))
            throw std::invalid_argument("npg ssp raw: stepsizes must be positive");
        QFunction qpi = evaluate_policy_ssp(pi, ssp);
        theta += alphas[k] * qpi.values;
        for (int s = 0; s < ssp.n; ++s)
            pi.probs.row(s) = entropy.argmax(theta.row(s).transpose(), 1.0).transpose();
        out.policies.push_back(pi.probs);
    }
    return out;
}

SspMdp load_ssp_json(std::istream& in) {
    json doc = json::parse(in);
    SspMdp ssp;
    ssp.n = doc.at("n").get<int>();
    ssp.m = doc.at("m").get<int>();
    if (ssp.n < 1 || ssp.m < 1) throw std::invalid_argument("ssp json: n and m must be positive");
    const json& rew = doc.at("reward");
    ssp.reward.resize(ssp.n, ssp.m);
    for (int s = 0; s < ssp.n; ++s)
        for (int a = 0; a < ssp.m; ++a) ssp.reward(s, a) = rew.at(s).at(a).get<double>();
    const json& tr = doc.at("transition");
    ssp.transition.assign(static_cast<std::size_t>(ssp.n) * ssp.m * (ssp.n + 1), 0.0);
    for (int s = 0; s < ssp.n; ++s) {
        for (int a = 0; a < ssp.m; ++a) {
            const json& row = tr.at(s).at(a);
            if (static_cast<int>(row.size()) != ssp.n + 1)
                throw std::invalid_argument(
                    "ssp json: transition rows need n+1 entries (terminal last)");
            for (int t = 0; t <= ssp.n; ++t) ssp.p(s, a, t) = row[t].get<double>();
        }
    }
    validate(ssp);
    PropernessResult proper = check_all_proper(ssp);
    if (!proper.proper)
        throw std::invalid_argument(
            "ssp json: instance admits an improper policy (witness state " +
            std::to_string(proper.witness_state) + ")");
    ssp.cert = compute_weighted_norm(ssp);
    return ssp;
}

SspMdp load_ssp_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("cannot open ssp file: " + path);
    return load_ssp_json(in);
}

void save_ssp_json(const SspMdp& ssp, std::ostream& out) {
    json doc;
    doc["n"] = ssp.n;
    doc["m"] = ssp.m;
    json rew = json::array();
    for (int s = 0; s < ssp.n; ++s) {
        json row = json::array();
        for (int a = 0; a < ssp.m; ++a) row.push_back(ssp.reward(s, a));
        rew.push_back(std::move(row));
    }
    doc["reward"] = std::move(rew);
    json tr = json::array();
    for (int s = 0; s < ssp.n; ++s) {
        json per_state = json::array();
        for (int a = 0; a < ssp.m; ++a) {
            json row = json::array();
            for (int t = 0; t <= ssp.n; ++t) row.push_back(ssp.p(s, a, t));
            per_state.push_back(std::move(row));
        }
        tr.push_back(std::move(per_state));
    }
    doc["transition"] = std::move(tr);
    out << doc.dump(2) << "\n";
}

}  // namespace dspi
