#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "sdg/controls.hpp"

namespace sdg {

// Coefficient evaluators write into caller-provided buffers so the hot
// loops (PDE sweeps, path stepping) run allocation-free. All evaluators
// must be pure functions of their arguments and safe to call concurrently.
//
// drift:     out has d entries.
// diffusion: out has d * d' entries, row-major (row = state component).
using DriftFn = std::function<void(
    double t, std::span<const double> x, std::span<const double> u,
    std::span<const double> v, std::span<double> out)>;
using DiffusionFn = std::function<void(
    double t, std::span<const double> x, std::span<const double> u,
    std::span<const double> v, std::span<double> out)>;
using PayoffFn = std::function<double(std::span<const double> x)>;

// A two-player zero-sum game: controlled dynamics, terminal payoff paid by
// player two to player one, and the two finite action sets. Player one
// (the u player) maximizes the expected payoff, player two minimizes.
struct GameProblem {
    std::string name;
    int dim_state = 1;
    int dim_noise = 1;
    DriftFn drift;
    DiffusionFn diffusion;
    PayoffFn payoff;
    double payoff_min = 0.0;  // declared bounds: payoff_min <= g <= payoff_max
    double payoff_max = 0.0;
    ControlSet u_set;
    ControlSet v_set;
    double horizon = 1.0;
    // Declares that drift and diffusion ignore t, which lets grid solvers
    // cache per-node coefficients across time levels.
    bool time_homogeneous = true;

    void validate() const;  // throws EvaluationError on a malformed problem
};

enum class Side : std::uint8_t { lower, upper };

inline const char* side_name(Side s) {
    return s == Side::lower ? "lower" : "upper";
}

// Evaluation point for the Hamiltonian: time, state, gradient and Hessian
// of the test function. The Hessian is symmetrized on construction;
// asymmetry beyond 1e-12 (relative to its largest entry) is an error.
struct HamiltonianQuery {
    double t = 0.0;
    std::vector<double> x;
    std::vector<double> grad;  // d entries
    std::vector<double> hess;  // d*d entries, row-major, symmetrized

    HamiltonianQuery(double t_, std::vector<double> x_,
                     std::vector<double> grad_, std::vector<double> hess_);
};

struct HamiltonianResult {
    double value = 0.0;
    // Index of the outer optimizer's point and of the inner optimizer's
    // response at that point. Ties break toward the lowest index.
    std::size_t u_index = 0;
    std::size_t v_index = 0;
};

// b(t,x,u,v).p + 1/2 tr(sigma sigma^T M) for one control pair.
double generator_value(const GameProblem& problem, const HamiltonianQuery& q,
                       std::span<const double> u, std::span<const double> v);

// Exact discrete minimax of generator_value over the two control sets.
//   lower: max over u of min over v.
//   upper: min over v of max over u.
HamiltonianResult hamiltonian(const GameProblem& problem, Side side,
                              const HamiltonianQuery& q);

// Sampled regularity audit of the coefficient fields. Estimates are maxima
// of difference quotients over random pairs; they are informative lower
// bounds on the true constants, not certificates.
struct AuditSpec {
    double radius = 2.0;       // samples drawn with |x|, |y| <= radius
    std::size_t n_samples = 2000;
    std::uint64_t rng_seed = 1;
};

struct AuditReport {
    double drift_lipschitz = 0.0;      // max |b(x)-b(y)| / |x-y|
    double diffusion_lipschitz = 0.0;  // max |s(x)-s(y)|_F / |x-y|
    double growth_ratio = 0.0;         // max (|b| + |s|_F) / (1 + |x|)
    double payoff_excess = 0.0;        // max violation of declared payoff bounds
    std::size_t non_finite = 0;        // evaluations that returned NaN/inf
};

AuditReport audit_coefficients(const GameProblem& problem, const AuditSpec& spec);

}  // namespace sdg
