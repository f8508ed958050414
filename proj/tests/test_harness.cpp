#include "doctest.h"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "dspi/experiment.hpp"
#include "dspi/garnet.hpp"

using namespace dspi;

TEST_CASE("garnet generation is a deterministic function of the seed") {
    GarnetSpec spec{7, 4, 3, 0.9, 42};
    TabularMdp a = generate_garnet(spec);
    TabularMdp b = generate_garnet(spec);
    CHECK(a.transition == b.transition);
    CHECK((a.reward - b.reward).cwiseAbs().maxCoeff() == 0.0);

    TabularMdp c = generate_garnet({7, 4, 3, 0.9, 43});
    CHECK(c.transition != a.transition);
}

TEST_CASE("garnet branching structure") {
    TabularMdp dense = generate_garnet({5, 2, 5, 0.9, 1});
    for (int s = 0; s < 5; ++s)
        for (int a = 0; a < 2; ++a)
            for (int t = 0; t < 5; ++t) CHECK(dense.p(s, a, t) > 0.0);

    TabularMdp sparse = generate_garnet({8, 2, 3, 0.9, 1});
    for (int s = 0; s < 8; ++s) {
        for (int a = 0; a < 2; ++a) {
            int nonzero = 0;
            for (int t = 0; t < 8; ++t) nonzero += sparse.p(s, a, t) > 0.0 ? 1 : 0;
            CHECK(nonzero == 3);
        }
    }
    CHECK_THROWS_AS(generate_garnet({3, 2, 4, 0.9, 1}), std::invalid_argument);
}

TEST_CASE("a thousand generated instances pass validation") {
    for (std::uint64_t seed = 0; seed < 1000; ++seed) {
        GarnetSpec spec{2 + static_cast<int>(seed % 7), 2 + static_cast<int>(seed % 3),
                        1 + static_cast<int>(seed % 2), 0.5 + 0.4 * ((seed % 5) / 5.0), seed};
        spec.branching = std::min(spec.branching, spec.n);
        CHECK_NOTHROW(validate(generate_garnet(spec)));
    }
}

TEST_CASE("terminal-state generators guarantee properness") {
    SspMdp instant = generate_garnet_ssp({4, 2, 2, 1.0, 3});
    for (int s = 0; s < 4; ++s)
        for (int a = 0; a < 2; ++a) CHECK(instant.p_terminal(s, a) == 1.0);

    for (std::uint64_t seed = 0; seed < 200; ++seed) {
        GarnetSspSpec spec{2 + static_cast<int>(seed % 5), 2 + static_cast<int>(seed % 2), 2,
                           0.05 + 0.4 * ((seed % 4) / 4.0), seed};
        spec.branching = std::min(spec.branching, spec.n);
        SspMdp ssp = generate_garnet_ssp(spec);
        CHECK(check_all_proper(ssp).proper);
    }

    GarnetSspSpec spec{5, 3, 2, 0.2, 7};
    SspMdp a = generate_garnet_ssp(spec);
    SspMdp b = generate_garnet_ssp(spec);
    CHECK(a.transition == b.transition);
}

TEST_CASE("experiment runner evaluates the configured checks") {
    ExperimentConfig config = ExperimentConfig::from_json_text(R"({
        "instance": {"kind": "garnet", "n": 5, "m": 3, "b": 2, "gamma": 0.9, "seed": 11},
        "solver": {"id": "dspi", "nu": "entropy", "tau": -1, "beta": 0.5, "k_max": 50},
        "checks": ["lemma1-monotone", "qbar-dominance", "lemma2-recursion",
                    "thm1.2-envelope", "vgap-monotone", "tie-break"]
    })");
    Report report = run_experiment(config);
    CHECK(report.all_passed);
    CHECK(report.checks.size() == 6);
    for (const CheckResult& check : report.checks) CHECK(check.pass);
}

TEST_CASE("every configured check appears exactly once in the report") {
    ExperimentConfig config = ExperimentConfig::from_json_text(R"({
        "instance": {"kind": "garnet", "n": 4, "m": 2, "b": 2, "gamma": 0.85, "seed": 5},
        "solver": {"id": "npg", "beta": 0.5, "k_max": 40},
        "checks": ["thm2-envelope", "cor2-budget", "lemma1-monotone"]
    })");
    Report report = run_experiment(config);
    CHECK(report.checks.size() == 3);
    CHECK(report.checks[0].name == "thm2-envelope");
    CHECK(report.checks[1].name == "cor2-budget");
    CHECK(report.checks[2].name == "lemma1-monotone");
    CHECK(report.all_passed);
}

TEST_CASE("unknown check names raise a config error listing the registry") {
    ExperimentConfig config = ExperimentConfig::from_json_text(R"({
        "instance": {"kind": "garnet", "n": 3, "m": 2, "b": 2, "gamma": 0.9, "seed": 1},
        "solver": {"id": "dspi", "k_max": 5},
        "checks": ["no-such-check"]
    })");
    try {
        run_experiment(config);
        FAIL("expected a config error");
    } catch (const std::invalid_argument& e) {
        std::string message = e.what();
        CHECK(message.find("no-such-check") != std::string::npos);
        CHECK(message.find("lemma1-monotone") != std::string::npos);
    }
}

TEST_CASE("corrupting the envelope constant makes the envelope check fail") {
    ExperimentConfig config = ExperimentConfig::from_json_text(R"({
        "instance": {"kind": "garnet", "n": 6, "m": 4, "b": 3, "gamma": 0.8, "seed": 7},
        "solver": {"id": "dspi", "nu": "entropy", "tau": 20.0, "beta": 0.5, "k_max": 40},
        "checks": ["thm1.2-envelope"],
        "corruptions": ["zero-smoothing-term"]
    })");
    Report corrupted = run_experiment(config);
    CHECK_FALSE(corrupted.all_passed);
    CHECK(corrupted.checks[0].worst_k >= 1);  // the violating iteration is reported

    config.corruptions.clear();
    Report clean = run_experiment(config);
    CHECK(clean.all_passed);
}

TEST_CASE("corrupting the tie-break rule makes the tie-break check fail") {
    ExperimentConfig config = ExperimentConfig::from_json_text(R"({
        "instance": {"kind": "garnet", "n": 3, "m": 2, "b": 2, "gamma": 0.9, "seed": 2},
        "solver": {"id": "dspi", "k_max": 3},
        "checks": ["tie-break"],
        "corruptions": ["tie-break-highest"]
    })");
    Report corrupted = run_experiment(config);
    CHECK_FALSE(corrupted.all_passed);

    config.corruptions.clear();
    CHECK(run_experiment(config).all_passed);
}

TEST_CASE("reports and traces are identical across repeated runs") {
    const std::string config_text = R"({
        "instance": {"kind": "garnet", "n": 5, "m": 3, "b": 2, "gamma": 0.9, "seed": 77},
        "solver": {"id": "dspi", "nu": "entropy", "tau": -1, "beta": 0.5, "k_max": 30},
        "checks": ["lemma1-monotone", "thm1.2-envelope"],
        "output": {"dir": "determinism_probe"}
    })";
    namespace fs = std::filesystem;
    fs::path root = fs::temp_directory_path() / "dspi_determinism";
    fs::remove_all(root);

    ExperimentConfig config = ExperimentConfig::from_json_text(config_text);
    Report first = run_experiment(config, (root / "a").string());
    Report second = run_experiment(config, (root / "b").string());
    CHECK(first.to_json_text() == second.to_json_text());

    auto slurp = [](const fs::path& p) {
        std::ifstream in(p);
        std::ostringstream buffer;
        buffer << in.rdbuf();
        return buffer.str();
    };
    for (const char* file : {"trace.csv", "trace.json", "report.json"}) {
        std::string a = slurp(root / "a" / "determinism_probe" / file);
        std::string b = slurp(root / "b" / "determinism_probe" / file);
        CHECK(a == b);
        CHECK_FALSE(a.empty());
    }
    fs::remove_all(root);
}

TEST_CASE("trace csv schema") {
    ExperimentConfig config = ExperimentConfig::from_json_text(R"({
        "instance": {"kind": "garnet", "n": 4, "m": 2, "b": 2, "gamma": 0.9, "seed": 13},
        "solver": {"id": "dspi", "k_max": 10},
        "checks": [],
        "output": {"dir": "schema_probe"}
    })");
    namespace fs = std::filesystem;
    fs::path root = fs::temp_directory_path() / "dspi_schema";
    fs::remove_all(root);
    run_experiment(config, root.string());
    std::ifstream in(root / "schema_probe" / "trace.csv");
    std::string header;
    std::getline(in, header);
    CHECK(header == "k,v_gap,qbar_gap,envelope,eta,beta");
    int rows = 0;
    std::string line;
    while (std::getline(in, line))
        if (!line.empty()) ++rows;
    CHECK(rows == 10);
    fs::remove_all(root);
}

TEST_CASE("sweep honors the first-hit budget and reduces to a single run") {
    ExperimentConfig base = ExperimentConfig::from_json_text(R"({
        "instance": {"kind": "garnet", "b": 2},
        "solver": {"id": "npg", "beta": 0.5}
    })");
    SweepGrid grid;
    grid.gammas = {0.8, 0.9};
    grid.betas = {0.5};
    grid.ns = {5};
    grid.ms = {3};
    grid.seeds = {1, 2};
    grid.epsilon = 1e-3;
    SweepResult result = sweep(base, grid);
    CHECK(result.cells.size() == 4);
    CHECK(result.all_within_budget);
    for (const SweepCell& cell : result.cells) {
        CHECK(cell.first_k >= 0);
        CHECK(cell.first_k <= cell.budget);
    }

    // single-cell grid agrees with a direct run of the same configuration
    SweepGrid single;
    single.gammas = {0.9};
    single.betas = {0.5};
    single.ns = {5};
    single.ms = {3};
    single.seeds = {1};
    SweepResult one = sweep(base, single);
    CHECK(one.cells.size() == 1);

    TabularMdp mdp = generate_garnet({5, 3, 2, 0.9, 1});
    SolverTrace tr = run_npg(mdp, std::log(3.0), 0.5, static_cast<int>(one.cells[0].budget) + 1);
    int first = -1;
    for (const IterationRecord& it : tr.iterations)
        if (it.v_gap <= 1e-3) {
            first = it.k;
            break;
        }
    CHECK(one.cells[0].first_k == first);

    SweepGrid empty = single;
    empty.seeds.clear();
    CHECK_THROWS_AS(sweep(base, empty), std::invalid_argument);
}

TEST_CASE("sweep csv output") {
    ExperimentConfig base = ExperimentConfig::from_json_text(R"({
        "instance": {"kind": "garnet", "b": 2},
        "solver": {"id": "npg", "beta": 0.5}
    })");
    SweepGrid grid;
    grid.gammas = {0.8};
    grid.betas = {0.5};
    grid.ns = {4};
    grid.ms = {2};
    grid.seeds = {3};
    SweepResult result = sweep(base, grid);
    std::ostringstream out;
    result.write_csv(out);
    std::string text = out.str();
    CHECK(text.find("index,gamma,beta,n,m,seed,first_k,budget,within_budget") == 0);
}

TEST_CASE("terminal-state experiment configs run end to end") {
    ExperimentConfig config = ExperimentConfig::from_json_text(R"({
        "instance": {"kind": "layered-ssp", "layers": 3, "width": 2, "m": 2, "b": 2, "seed": 5},
        "solver": {"id": "dspi_ssp", "nu": "entropy", "tau": -1, "beta": 0.5, "k_max": 60},
        "checks": ["instance-valid", "lemmaD1-monotone", "lemmaD3-recursion",
                    "thmD1-envelope", "lemmaD4-translation", "corD1-sandwich",
                    "xi-contraction", "g-bound", {"name": "propD1-equivalence", "k": 25}]
    })");
    Report report = run_experiment(config);
    for (const CheckResult& check : report.checks) {
        INFO(check.name, ": ", check.detail);
        CHECK(check.pass);
    }
}

TEST_CASE("function-approximation experiment configs run end to end") {
    ExperimentConfig config = ExperimentConfig::from_json_text(R"({
        "instance": {"kind": "garnet", "n": 5, "m": 3, "b": 3, "gamma": 0.9, "seed": 19},
        "solver": {"id": "dspi_lfa", "nu": "entropy", "tau": -1, "beta": 0.5, "k_max": 60,
                    "features": "gaussian", "feature_dim": 8, "feature_seed": 4},
        "checks": ["lemmaC1-monotone", "corC2-dominance", "lemmaC3-recursion",
                    "thmC1-envelope", {"name": "propC1-equivalence", "k": 25}]
    })");
    Report report = run_experiment(config);
    for (const CheckResult& check : report.checks) {
        INFO(check.name, ": ", check.detail);
        CHECK(check.pass);
    }
}

TEST_CASE("value-iteration and projection-smoothing solver ids") {
    ExperimentConfig vi = ExperimentConfig::from_json_text(R"({
        "instance": {"kind": "garnet", "n": 5, "m": 3, "b": 2, "gamma": 0.9, "seed": 21},
        "solver": {"id": "vi", "vi_tol": 1e-8},
        "checks": ["instance-valid"]
    })");
    Report vi_report = run_experiment(vi);
    CHECK(vi_report.all_passed);

    // "pda" selects the projection-based smoother and satisfies its envelope
    ExperimentConfig pda = ExperimentConfig::from_json_text(R"({
        "instance": {"kind": "garnet", "n": 5, "m": 3, "b": 2, "gamma": 0.9, "seed": 21},
        "solver": {"id": "pda", "tau": -1, "beta": 0.5, "k_max": 60},
        "checks": ["thm1.2-envelope", "lemma1-monotone", "lemma2-recursion"]
    })");
    Report pda_report = run_experiment(pda);
    CHECK(pda_report.all_passed);

    ExperimentConfig unknown = ExperimentConfig::from_json_text(R"({
        "instance": {"kind": "garnet", "n": 3, "m": 2, "b": 2, "gamma": 0.9, "seed": 1},
        "solver": {"id": "simulated-annealing"},
        "checks": []
    })");
    CHECK_THROWS_AS(run_experiment(unknown), std::invalid_argument);
}

TEST_CASE("mismatched solver and check families raise config errors") {
    ExperimentConfig config = ExperimentConfig::from_json_text(R"({
        "instance": {"kind": "garnet", "n": 4, "m": 2, "b": 2, "gamma": 0.9, "seed": 3},
        "solver": {"id": "pi", "k_max": 10},
        "checks": ["lemmaD1-monotone"]
    })");
    CHECK_THROWS_AS(run_experiment(config), std::invalid_argument);

    ExperimentConfig ssp_solver_on_mdp = ExperimentConfig::from_json_text(R"({
        "instance": {"kind": "garnet", "n": 4, "m": 2, "b": 2, "gamma": 0.9, "seed": 3},
        "solver": {"id": "dspi_ssp", "k_max": 10},
        "checks": []
    })");
    CHECK_THROWS_AS(run_experiment(ssp_solver_on_mdp), std::invalid_argument);
}
