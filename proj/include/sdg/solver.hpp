#pragma once

#include <cstddef>
#include <memory>
#include <optional>
#include <span>

#include "sdg/grid.hpp"
#include "sdg/strategy.hpp"

namespace sdg {

// How spatial boundary nodes are treated during the backward sweep.
//   clamped_terminal: boundary values stay frozen at the terminal data.
//   extrapolated:     boundary nodes are updated like interior ones, with
//                     missing neighbors replaced by their nearest in-grid
//                     node (constant extrapolation).
enum class BoundaryMode : std::uint8_t { clamped_terminal, extrapolated };

struct SolverOptions {
    BoundaryMode boundary = BoundaryMode::clamped_terminal;
    // applied to the exact stability bound; the closed-form bound is taken
    // as a second ceiling
    double cfl_safety = 0.95;
    std::optional<double> dt_override;  // bypasses the step planner
    std::size_t min_steps = 1;
    std::size_t max_levels = 250000;
    std::size_t memory_cap = std::size_t(3) << 30;  // bytes of level storage
    // per-(node, pair) stencil cache ceiling; above it (or for problems
    // marked time-inhomogeneous) coefficients are re-evaluated per level
    std::size_t cache_cap = std::size_t(1) << 30;
    int threads = 1;
};

// Chooses the time step from a stability scan of the coefficients over the
// grid and returns the complete grid geometry. Throws CflError when the
// scheme cannot be made monotone on this grid (cross-diffusion dominance,
// unequal spacing with correlated noise) and ConfigError when the resulting
// grid would exceed the level or memory caps.
SpaceTimeGrid plan_grid(const GameProblem& problem, std::span<const double> lo,
                        std::span<const double> hi,
                        std::span<const std::size_t> nodes,
                        const SolverOptions& opts = {}, double t0 = 0.0);

// Backward sweep of the explicit monotone scheme from the terminal payoff.
// Every (level, node) entry carries the exact discrete minimax over the two
// control sets together with the optimizing pair (lowest indices on ties).
ValueGrid solve_isaacs(const GameProblem& problem, Side side,
                       const SpaceTimeGrid& grid, const SolverOptions& opts = {});

// Feedback table read off the recorded saddle indices: player one takes the
// u column, player two the v column. `level_stride` thins the stored levels
// (0 picks a stride that keeps at most ~512 of them).
FeedbackTable extract_feedback(const ValueGrid& vg, Player player,
                               std::size_t level_stride = 0);

// Elementary strategy playing the table on a uniform decision grid with
// `n_decisions` windows over [t0, horizon].
ElementaryStrategy feedback_strategy(const GameProblem& problem, Player player,
                                     std::shared_ptr<const FeedbackTable> table,
                                     std::size_t n_decisions, double t0 = 0.0);

}  // namespace sdg
