#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "sdg/dynamics.hpp"
#include "sdg/path.hpp"
#include "sdg/strategy.hpp"

namespace sdg {

enum class Scheme : std::uint8_t { euler_maruyama };

struct SimulationConfig {
    std::size_t n_steps = 100;
    std::uint64_t rng_seed = 0;
    Scheme scheme = Scheme::euler_maruyama;
    std::size_t batch_size = 1;
    double overflow_guard = 1e12;  // |X|_inf above this aborts the path
    int threads = 1;
};

// A strategy for each player. Both must start at the simulation start (a
// start rule that fires at the first grid point) and use the problem's
// control sets; the engine checks this when stepping begins.
struct StrategyPair {
    ElementaryStrategy u;
    ElementaryStrategy v;
};

// Euler-Maruyama step: X_{k+1} = X_k + b h + sigma dW_k, with actions held
// over [t_k, t_{k+1}) at their value chosen from the prefix up to t_k. The
// noise increment for (path, step, component) is a pure function of
// (rng_seed, path_index, step, component), so batches decorrelate and two
// strategy pairs simulated under the same seed see identical noise.
SamplePath simulate_path(const GameProblem& problem, const StrategyPair& pair,
                         double start_time, std::span<const double> start_state,
                         const SimulationConfig& cfg, std::size_t path_index);

// Single path under substream 0.
SamplePath simulate(const GameProblem& problem, const StrategyPair& pair,
                    double start_time, std::span<const double> start_state,
                    const SimulationConfig& cfg);

struct BatchSummary {
    double mean = 0.0;
    double stddev = 0.0;
    double std_error = 0.0;
    std::size_t n_ok = 0;
    std::size_t n_failed = 0;
    std::string first_error;  // empty when n_failed == 0

    std::string to_json_string() const;
};

struct BatchResult {
    std::vector<SamplePath> paths;  // failed paths are left empty
    std::vector<std::optional<std::string>> errors;  // one slot per path
    BatchSummary payoff;  // summary of g(X_T) over successful paths
};

// Simulates cfg.batch_size paths and keeps them. Memory is proportional to
// batch_size * n_steps; use simulate_reduce for large batches.
BatchResult simulate_batch(const GameProblem& problem, const StrategyPair& pair,
                           double start_time,
                           std::span<const double> start_state,
                           const SimulationConfig& cfg);

using PathFunctional = std::function<double(const SamplePath&)>;

// Simulates the batch, evaluates `f` on each path, and discards the path.
// Per-path values land in `per_path` (when given) in path-index order;
// failed paths carry NaN there and are excluded from the summary. The
// reduction order is fixed, so results are independent of cfg.threads.
BatchSummary simulate_reduce(const GameProblem& problem,
                             const StrategyPair& pair, double start_time,
                             std::span<const double> start_state,
                             const SimulationConfig& cfg,
                             const PathFunctional& f,
                             std::vector<double>* per_path = nullptr);

// CSV export with the realized action columns re-derived through
// action_at, i.e. through the strategies' own declarative semantics.
std::string path_to_csv(const GameProblem& problem, const StrategyPair& pair,
                        const SamplePath& path);

}  // namespace sdg
