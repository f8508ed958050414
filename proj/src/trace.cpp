#include "dspi/trace.hpp"

#include <cmath>
#include <cstdio>
#include <ostream>

#include "json.hpp"

namespace dspi {

using nlohmann::json;

namespace {

std::string fmt(double x) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", x);
    return buf;
}

json matrix_to_json(const Eigen::MatrixXd& m) {
    json rows = json::array();
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        json row = json::array();
        for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
        rows.push_back(std::move(row));
    }
    return rows;
}

}  // namespace

void SolverTrace::write_csv(std::ostream& out) const {
    out << "k,v_gap,qbar_gap,envelope,eta,beta\n";
    for (const IterationRecord& it : iterations) {
        out << it.k << ',' << fmt(it.v_gap) << ',' << fmt(it.qbar_gap) << ','
            << fmt(it.envelope) << ',' << fmt(it.eta) << ',' << fmt(it.beta) << '\n';
    }
}

void SolverTrace::write_json(std::ostream& out) const {
    json doc;
    doc["solver"] = solver_id;
    if (std::isfinite(gamma)) doc["gamma"] = gamma;
    if (std::isfinite(kappa)) doc["kappa"] = kappa;
    doc["tau"] = tau;
    doc["nu"] = nu_key;
    doc["nu_max"] = nu_max;
    doc["v0_gap"] = v0_gap;
    doc["q_star"] = matrix_to_json(q_star);
    json records = json::array();
    for (const IterationRecord& it : iterations) {
        json rec;
        rec["k"] = it.k;
        rec["v_gap"] = it.v_gap;
        rec["qbar_gap"] = it.qbar_gap;
        rec["envelope"] = it.envelope;
        rec["eta"] = it.eta;
        rec["beta"] = it.beta;
        rec["eta_floored"] = it.eta_floored;
        if (std::isfinite(it.eps)) {
            rec["eps"] = it.eps;
            rec["eps_running"] = it.eps_running;
        }
        rec["policy"] = matrix_to_json(it.policy);
        rec["q_pi"] = matrix_to_json(it.q_pi);
        rec["qbar"] = matrix_to_json(it.qbar);
        records.push_back(std::move(rec));
    }
    doc["iterations"] = std::move(records);
    out << doc.dump(2) << "\n";
}

}  // namespace dspi
