#pragma once

#include "dspi/garnet.hpp"
#include "dspi/lfa.hpp"
#include "dspi/mdp.hpp"
#include "dspi/solvers.hpp"
#include "dspi/ssp.hpp"

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace dspi {

struct InstanceSpec {
    enum class Kind { Garnet, GarnetSsp, LayeredSsp, MdpFile, SspFile };
    Kind kind = Kind::Garnet;
    GarnetSpec garnet;
    GarnetSspSpec garnet_ssp;
    LayeredSspSpec layered;
    std::string path;
};

struct SolverSpec {
    // pi | vi | dspi | pda | npg | dual_averaged_pi | dspi_lfa | npg_lfa |
    // dspi_ssp | npg_ssp
    std::string id = "dspi";
    std::string nu = "entropy";
    double tau = -1.0;     // negative: default to 1/nu_max (0 when nu_max = 0)
    double beta = 0.5;
    double alpha0 = -1.0;  // negative: default to log(m)
    int k_max = 100;
    std::string schedule = "constant";  // constant | harmonic
    double vi_tol = 1e-10;
    // linear function approximation
    std::string features = "identity";  // identity | gaussian | tile | file
    int feature_dim = -1;
    int tile_size = 2;
    std::uint64_t feature_seed = 1;
    std::string feature_path;
    std::vector<double> rho;  // initial state distribution; empty = uniform
};

struct CheckRequest {
    std::string name;
    // negative: use the registered default slack
    double slack = -1.0;
    // horizon for the equivalence checks
    int k = 40;
};

struct ExperimentConfig {
    InstanceSpec instance;
    SolverSpec solver;
    std::vector<CheckRequest> checks;
    // negative-control switches that deliberately break a certified quantity:
    //   zero-smoothing-term   envelope constants evaluated with tau*nu_max = 0
    //   tie-break-highest     tie-break check evaluated with highest-index greedy
    std::vector<std::string> corruptions;
    std::string output_dir;  // empty: nothing written
    bool write_trace_csv = true;
    bool write_trace_json = true;

    static ExperimentConfig from_json_text(const std::string& text);
    static ExperimentConfig from_file(const std::string& path);
};

struct CheckResult {
    std::string name;
    std::string anchor;
    bool pass = false;
    double max_slack = 0.0;  // worst violation observed (<= 0 when passing)
    int worst_k = -1;
    std::string detail;
};

struct Report {
    int schema_version = 1;
    std::string solver_id;
    std::string instance_summary;
    std::vector<CheckResult> checks;
    bool all_passed = true;

    std::string to_json_text() const;
};

std::vector<std::string> available_checks();

/**
 * Generates or loads the instance, runs the configured solver, evaluates the
 * requested certificate checks, and (when an output directory is configured)
 * writes trace.csv, trace.json, and report.json under
 * output_root/output_dir. Unknown check names raise std::invalid_argument
 * listing the available ones.
 */
Report run_experiment(const ExperimentConfig& config, const std::string& output_root = ".");

struct SweepGrid {
    std::vector<double> gammas;
    std::vector<double> betas;
    std::vector<int> ns;
    std::vector<int> ms;
    std::vector<std::uint64_t> seeds;
    double epsilon = 1e-3;
};

struct SweepCell {
    int index = 0;
    double gamma = 0.0;
    double beta = 0.0;
    int n = 0;
    int m = 0;
    std::uint64_t seed = 0;
    int first_k = -1;  // first iteration with v_gap <= epsilon
    long long budget = 0;
    bool within_budget = false;
};

struct SweepResult {
    std::vector<SweepCell> cells;
    bool all_within_budget = true;
    void write_csv(std::ostream& out) const;
};

/**
 * Runs the base solver on every grid cell (deterministic row order), records
 * the first iteration reaching the target gap, and compares it against the
 * budget ceil(2 (1-gamma)^{-1} log(1/(eps (1-gamma)))).
 */
SweepResult sweep(const ExperimentConfig& base, const SweepGrid& grid);

SweepGrid sweep_grid_from_json_text(const std::string& text);

}  // namespace dspi
