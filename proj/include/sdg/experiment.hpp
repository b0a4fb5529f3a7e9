#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "sdg/dynamics.hpp"
#include "sdg/solver.hpp"

namespace sdg {

// A fully resolved experiment: the problem (from a preset or an inline
// polynomial spec), the solver grid, the Monte Carlo budget, and the stage
// pipeline. Built by parse_experiment_config, which validates every field
// and reports errors with their JSON path.
struct ExperimentConfig {
    std::string name;
    GameProblem problem;
    std::string problem_source;  // "preset:<name>" or "inline"

    std::vector<double> grid_lo, grid_hi;
    std::vector<std::size_t> grid_nodes;
    SolverOptions solver;

    std::uint64_t seed = 1;
    std::size_t mc_batch = 4000;
    std::size_t mc_steps = 100;

    double start_time = 0.0;
    std::vector<double> start_state;
    std::vector<std::vector<double>> probes;  // rows (t, x_1..x_d)

    std::vector<std::string> pipeline;

    // stage knobs, all optional in the file
    double dpp_radius = 0.5;
    double dpp_cap_frac = 0.5;  // cap time = t0 + frac * (T - t0)
    double dpp_tolerance = 3e-2;
    std::size_t feedback_decisions = 20;
    std::size_t saddle_deviations = 50;
    std::size_t saddle_segments = 3;
    double saddle_epsilon = 3e-2;
    double certify_threshold = 1.5e-2;
    double certify_rho_frac = 0.5;
    std::size_t certify_min_bin = 50;
    std::size_t family_count = 8;
    std::size_t family_segments = 3;
    std::vector<std::size_t> sweep_factors{1, 2, 4};

    nlohmann::ordered_json echo;  // raw config, embedded in the manifest
};

// Parses and validates a config document. Throws ConfigError whose message
// starts with the JSON path of the offending field.
ExperimentConfig parse_experiment_config(const nlohmann::ordered_json& doc);

// Reads the file, parses JSON, then validates.
ExperimentConfig load_experiment_config(const std::string& path);

struct StageOutcome {
    std::string stage;
    std::string status;  // "ok" | "error"
    std::string error;
    double wall_ms = 0.0;
    std::vector<std::string> artifacts;
    // (artifact kind, verdict) pairs produced by this stage
    std::vector<std::pair<std::string, std::string>> verdicts;
};

struct ExperimentResult {
    std::vector<StageOutcome> stages;
    std::string out_dir;

    bool any_error() const;
    bool any_fail() const;          // some verdict == "fail"
    bool any_inconclusive() const;  // some verdict == "inconclusive"
    // 0 when every stage ran and no verdict failed (strict also rejects
    // inconclusive); 1 otherwise.
    int exit_code(bool strict) const;
};

// Runs the pipeline, writing artifacts into out_dir (created if missing):
// per-stage *.grid.csv and *.cert.json files, manifest.json, summary.csv.
// All artifact bytes are deterministic in the config; only the manifest's
// wall-time fields vary between runs. Stage errors are recorded and halt
// the pipeline.
ExperimentResult run_experiment(const ExperimentConfig& cfg,
                                const std::string& out_dir, int threads);

}  // namespace sdg
