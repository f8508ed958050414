#pragma once

#include <Eigen/Dense>

#include <iosfwd>
#include <limits>
#include <string>
#include <vector>

namespace dspi {

/**
 * One solver iteration. `qbar` is the running average entering iteration k
 * (so row 0 carries the all-zero initial average), `beta` and `eta` are the
 * stepsize and smoothing weight used at iteration k to form policy k+1, and
 * `envelope` is the convergence bound the run is certified against.
 */
struct IterationRecord {
    int k = 0;
    Eigen::MatrixXd policy;  // pi_k
    Eigen::MatrixXd q_pi;    // exact Q for pi_k
    Eigen::MatrixXd qbar;    // averaged Q entering iteration k
    double v_gap = 0.0;      // |V* - V^{pi_k}|_inf
    double qbar_gap = 0.0;   // |Q* - qbar|_inf
    double beta = 0.0;
    double eta = 0.0;
    double envelope = 0.0;
    bool eta_floored = false;
    // function-approximation runs only
    double eps = std::numeric_limits<double>::quiet_NaN();          // |W_k - Q^{pi_k}|_inf
    double eps_running = std::numeric_limits<double>::quiet_NaN();  // max over i <= k
    // in-memory diagnostic; excluded from exports so repeated runs produce
    // identical files
    double wallclock_s = 0.0;
};

struct SolverTrace {
    std::string solver_id;
    double gamma = std::numeric_limits<double>::quiet_NaN();
    double kappa = std::numeric_limits<double>::quiet_NaN();  // terminal-state runs only
    double tau = 0.0;
    double nu_max = 0.0;
    std::string nu_key;
    double v0_gap = 0.0;  // |V* - V^{pi_0}|_inf
    Eigen::MatrixXd q_star;
    Eigen::VectorXd v_star;
    std::vector<IterationRecord> iterations;

    /** Columns: k, v_gap, qbar_gap, envelope, eta, beta. */
    void write_csv(std::ostream& out) const;
    /** Full trace including per-iteration policies. */
    void write_json(std::ostream& out) const;
};

}  // namespace dspi
