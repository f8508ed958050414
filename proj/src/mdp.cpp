#include "dspi/mdp.hpp"

#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace dspi {

using nlohmann::json;

bool is_distribution(const Eigen::VectorXd& mu, double tol) {
    if (mu.size() == 0) return false;
    double sum = 0.0;
    for (Eigen::Index i = 0; i < mu.size(); ++i) {
        if (!std::isfinite(mu(i)) || mu(i) < -tol) return false;
        sum += mu(i);
    }
    return std::abs(sum - 1.0) <= tol * std::max<double>(1, mu.size());
}

void validate(const TabularMdp& mdp) {
    if (mdp.n < 1 || mdp.m < 1) throw std::invalid_argument("mdp: n and m must be positive");
    if (!(mdp.gamma > 0.0 && mdp.gamma < 1.0))
        throw std::invalid_argument("mdp: gamma must lie strictly inside (0,1)");
    if (mdp.reward.rows() != mdp.n || mdp.reward.cols() != mdp.m)
        throw std::invalid_argument("mdp: reward must be n x m");
    if (mdp.transition.size() != static_cast<std::size_t>(mdp.n) * mdp.m * mdp.n)
        throw std::invalid_argument("mdp: transition must hold n*m*n entries");
    for (int s = 0; s < mdp.n; ++s) {
        for (int a = 0; a < mdp.m; ++a) {
            double r = mdp.reward(s, a);
            if (!std::isfinite(r) || r < 0.0 || r > 1.0) {
                std::ostringstream msg;
                msg << "mdp: reward(" << s << "," << a << ") = " << r << " outside [0,1]";
                throw std::invalid_argument(msg.str());
            }
            double sum = 0.0;
            for (int t = 0; t < mdp.n; ++t) {
                double pr = mdp.p(s, a, t);
                if (!std::isfinite(pr) || pr < 0.0) {
                    std::ostringstream msg;
                    msg << "mdp: negative transition probability at (" << s << "," << a << "," << t << ")";
                    throw std::invalid_argument(msg.str());
                }
                sum += pr;
            }
            if (std::abs(sum - 1.0) > kDistributionTol * mdp.n) {
                std::ostringstream msg;
                msg << "mdp: transition row (" << s << "," << a << ") sums to " << sum;
                throw std::invalid_argument(msg.str());
            }
        }
    }
}

void validate(const Policy& pi, int n, int m) {
    if (pi.probs.rows() != n || pi.probs.cols() != m)
        throw std::invalid_argument("policy: shape mismatch");
    for (int s = 0; s < n; ++s) {
        if (!is_distribution(pi.probs.row(s).transpose())) {
            std::ostringstream msg;
            msg << "policy: row " << s << " is not a probability distribution";
            throw std::invalid_argument(msg.str());
        }
    }
}

Policy uniform_policy(int n, int m) {
    Policy pi;
    pi.probs = Eigen::MatrixXd::Constant(n, m, 1.0 / m);
    return pi;
}

Policy deterministic_policy(const std::vector<int>& actions, int m) {
    Policy pi;
    pi.probs = Eigen::MatrixXd::Zero(static_cast<int>(actions.size()), m);
    for (std::size_t s = 0; s < actions.size(); ++s) {
        if (actions[s] < 0 || actions[s] >= m)
            throw std::invalid_argument("deterministic_policy: action index out of range");
        pi.probs(static_cast<int>(s), actions[s]) = 1.0;
    }
    return pi;
}

VFunction value_of(const QFunction& q, const Policy& pi) {
    if (q.values.rows() != pi.probs.rows() || q.values.cols() != pi.probs.cols())
        throw std::invalid_argument("value_of: shape mismatch");
    VFunction v;
    v.values = (q.values.array() * pi.probs.array()).rowwise().sum();
    return v;
}

TabularMdp load_mdp_json(std::istream& in) {
    json doc = json::parse(in);
    TabularMdp mdp;
    mdp.n = doc.at("n").get<int>();
    mdp.m = doc.at("m").get<int>();
    mdp.gamma = doc.at("gamma").get<double>();
    if (mdp.n < 1 || mdp.m < 1) throw std::invalid_argument("mdp json: n and m must be positive");

    const json& rew = doc.at("reward");
    if (!rew.is_array() || static_cast<int>(rew.size()) != mdp.n)
        throw std::invalid_argument("mdp json: reward must have n rows");
    mdp.reward.resize(mdp.n, mdp.m);
    for (int s = 0; s < mdp.n; ++s) {
        if (static_cast<int>(rew[s].size()) != mdp.m)
            throw std::invalid_argument("mdp json: reward row with wrong length");
        for (int a = 0; a < mdp.m; ++a) mdp.reward(s, a) = rew[s][a].get<double>();
    }

    const json& tr = doc.at("transition");
    if (!tr.is_array() || static_cast<int>(tr.size()) != mdp.n)
        throw std::invalid_argument("mdp json: transition must have n outer rows");
    mdp.transition.assign(static_cast<std::size_t>(mdp.n) * mdp.m * mdp.n, 0.0);
    for (int s = 0; s < mdp.n; ++s) {
        if (static_cast<int>(tr[s].size()) != mdp.m)
            throw std::invalid_argument("mdp json: transition row with wrong action count");
        for (int a = 0; a < mdp.m; ++a) {
            if (static_cast<int>(tr[s][a].size()) != mdp.n)
                throw std::invalid_argument("mdp json: transition row with wrong successor count");
            for (int t = 0; t < mdp.n; ++t) mdp.p(s, a, t) = tr[s][a][t].get<double>();
        }
    }
    validate(mdp);
    return mdp;
}

TabularMdp load_mdp_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("cannot open mdp file: " + path);
    return load_mdp_json(in);
}

void save_mdp_json(const TabularMdp& mdp, std::ostream& out) {
    json doc;
    doc["n"] = mdp.n;
    doc["m"] = mdp.m;
    doc["gamma"] = mdp.gamma;
    json rew = json::array();
    for (int s = 0; s < mdp.n; ++s) {
        json row = json::array();
        for (int a = 0; a < mdp.m; ++a) row.push_back(mdp.reward(s, a));
        rew.push_back(std::move(row));
    }
    doc["reward"] = std::move(rew);
    json tr = json::array();
    for (int s = 0; s < mdp.n; ++s) {
        json per_state = json::array();
        for (int a = 0; a < mdp.m; ++a) {
            json row = json::array();
            for (int t = 0; t < mdp.n; ++t) row.push_back(mdp.p(s, a, t));
            per_state.push_back(std::move(row));
        }
        tr.push_back(std::move(per_state));
    }
    doc["transition"] = std::move(tr);
    out << doc.dump(2) << "\n";
}

}  // namespace dspi
