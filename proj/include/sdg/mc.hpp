#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "sdg/grid.hpp"
#include "sdg/sde.hpp"
#include "sdg/stopping.hpp"
#include "sdg/strategy.hpp"

namespace sdg {

// Monte Carlo layer: value estimates under strategy pairs, common-random-
// number comparisons across whole strategy families, and the statistical
// checks (saddle quality, dynamic-programming residuals) that turn those
// estimates into pass/fail/inconclusive certificates.

// E[g(X_T)] under one pair. When `per_path` is given it receives one payoff
// per path (NaN for failed paths), which is what the common-random-number
// difference estimates feed on.
BatchSummary estimate_value(const GameProblem& problem, const StrategyPair& pair,
                            double start_time,
                            std::span<const double> start_state,
                            const SimulationConfig& cfg,
                            std::vector<double>* per_path = nullptr);

BatchSummary estimate_functional(const GameProblem& problem,
                                 const StrategyPair& pair, double start_time,
                                 std::span<const double> start_state,
                                 const SimulationConfig& cfg,
                                 const PathFunctional& f,
                                 std::vector<double>* per_path = nullptr);

// A value function on space-time, the shape shared by solved grids, closed
// forms, and verification candidates.
using ValueFn = std::function<double(double t, std::span<const double> x)>;

ValueFn grid_value_fn(std::shared_ptr<const ValueGrid> vg);

// Path functional w(rho(X), X_rho): evaluates the stopping rule on the
// complete path (horizon fallback) and reads the value function there.
PathFunctional stopped_value(ValueFn w, RulePtr rho);

// ---- strategy families ----------------------------------------------------

struct StrategyFamily {
    Player player = Player::one;
    std::vector<ElementaryStrategy> members;
};

// One constant strategy per action in the player's set.
StrategyFamily constant_family(const GameProblem& problem, Player player);

// `count` random piecewise-constant strategies, `segments` blocks each,
// with decision times and action indices drawn from the counter stream of
// `seed`. Deterministic in (seed, count, segments).
StrategyFamily random_family(const GameProblem& problem, Player player,
                             std::size_t count, std::size_t segments,
                             std::uint64_t seed, double start_time = 0.0);

// ---- family-vs-family value matrix ----------------------------------------

struct GameMatrix {
    std::size_t n_u = 0, n_v = 0;
    std::vector<double> mean;       // row-major, u-member major
    std::vector<double> std_error;
    std::vector<std::string> u_labels, v_labels;
    // max_u min_v and min_v max_u of `mean`, with the chosen entries.
    double lower = 0.0, upper = 0.0;
    std::size_t lower_u = 0, lower_v = 0;
    std::size_t upper_u = 0, upper_v = 0;

    double at(std::size_t i, std::size_t j) const { return mean[i * n_v + j]; }
    double se_at(std::size_t i, std::size_t j) const {
        return std_error[i * n_v + j];
    }
    nlohmann::ordered_json to_json() const;
};

// Every entry runs under cfg.rng_seed with the same path indices, so all
// pairs see identical noise and the minimax comparisons are differences of
// coupled estimates. lower <= upper holds exactly: both are entries of the
// same matrix.
GameMatrix upper_lower_values(const GameProblem& problem,
                              const StrategyFamily& u_family,
                              const StrategyFamily& v_family, double start_time,
                              std::span<const double> start_state,
                              const SimulationConfig& cfg);

// Recomputes lower/upper and their argument indices from `mean` (strict
// comparisons, ties to the lowest index).
void matrix_minimax(GameMatrix& m);

struct BestResponse {
    std::size_t index = 0;
    double value = 0.0;
    double std_error = 0.0;
};

// Best family member against a fixed opponent under common random numbers:
// argmax of the estimated value for player one, argmin for player two.
BestResponse best_response(const GameProblem& problem,
                           const StrategyFamily& family,
                           const ElementaryStrategy& opponent,
                           double start_time, std::span<const double> start_state,
                           const SimulationConfig& cfg);

// ---- statistical certificates ----------------------------------------------

// Verdict band. `margin` is oriented so that nonnegative means the checked
// property holds; `threshold` is the modeling slack granted before a
// violation counts (discretization error and the like).
//
//   fail:         margin < -(threshold + 3 se)   clear violation
//   inconclusive: se > 0 and |margin| < 3 se     sign lost in noise
//   pass:         everything else                holds, or within slack
//
// Exact checks (se = 0) never come out inconclusive.
std::string band_verdict(double margin, double std_error, double threshold);

struct CertificateReport {
    std::string kind;
    double estimate = 0.0;    // the primary measured quantity
    double std_error = 0.0;   // its standard error
    double threshold = 0.0;   // slack handed to the verdict band
    double margin = 0.0;      // the banded quantity
    std::string verdict;      // "pass" | "fail" | "inconclusive"
    nlohmann::ordered_json details;

    nlohmann::ordered_json to_json() const;
};

// epsilon-saddle check for a candidate pair: estimates the best gain any
// deviation in the two families achieves against the pair (per-path
// differences under common random numbers). estimate = best gain,
// margin = epsilon - gain, threshold = 0 (epsilon is already the slack).
CertificateReport check_saddle(const GameProblem& problem,
                               const StrategyPair& pair,
                               const StrategyFamily& u_deviations,
                               const StrategyFamily& v_deviations,
                               double start_time,
                               std::span<const double> start_state,
                               const SimulationConfig& cfg, double epsilon);

// One-sided dynamic-programming check for a value function w. The witness
// plays one side; every opponent in the family plays the other; paths stop
// at rho (horizon fallback).
//
//   super: w(t0,x0) >= E[w(rho, X_rho)] for every opponent
//          margin = w0 - max_opponent E[w(rho, X_rho)]
//   sub:   w(t0,x0) <= E[w(rho, X_rho)] for every opponent
//          margin = min_opponent E[w(rho, X_rho)] - w0
//
// The four combinations of direction and witness player are the four
// half-principles a value candidate can satisfy.
enum class HalfDpp : std::uint8_t { super, sub };

CertificateReport check_half_dpp(const GameProblem& problem, const ValueFn& w,
                                 HalfDpp direction,
                                 const ElementaryStrategy& witness,
                                 const StrategyFamily& opponents, RulePtr rho,
                                 double start_time,
                                 std::span<const double> start_state,
                                 const SimulationConfig& cfg, double threshold);

// Two-sided residual |E[v(rho, X_rho)] - v(t0, x0)| for a solved grid under
// a fixed pair. estimate = signed residual, margin = tolerance - |residual|.
CertificateReport dpp_residual(const GameProblem& problem, const ValueGrid& vg,
                               const StrategyPair& pair, RulePtr rho,
                               double start_time,
                               std::span<const double> start_state,
                               const SimulationConfig& cfg, double tolerance);

}  // namespace sdg
