#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "sdg/dynamics.hpp"
#include "sdg/grid.hpp"
#include "sdg/grid_function.hpp"
#include "sdg/mc.hpp"
#include "sdg/sde.hpp"
#include "sdg/stopping.hpp"
#include "sdg/strategy.hpp"

namespace sdg {

// The four one-sided candidate classes. "super"/"sub" is the inequality the
// candidate claims against the game value named by "upper"/"lower":
//
//   super_upper: w >= V+   witnessed by a player-two strategy
//   sub_upper:   w <= V+   witnessed by a player-one response to each v
//   super_lower: w >= V-   witnessed by a player-two response to each u
//   sub_lower:   w <= V-   witnessed by a player-one strategy
//
// The chain sub_lower <= V- <= V+ <= super_upper brackets both values with
// only the two independently-witnessed classes.
enum class CandidateClass : std::uint8_t {
    super_upper,
    sub_upper,
    super_lower,
    sub_lower,
};

const char* candidate_class_name(CandidateClass c);

// Super candidates must decrease in expectation along their witness's play;
// sub candidates must increase.
bool is_super(CandidateClass c);

// Which player the witness controls, and which side the adversary family
// must supply. Super classes are witnessed by player two, sub by player one.
Player witness_player(CandidateClass c);
Player opponent_player(CandidateClass c);

// Produces the witness strategy restarted at `start`. Response-type
// witnesses (sub_upper, super_lower) need the concrete opponent and throw
// ConfigError on nullptr; independent witnesses ignore it.
using WitnessFn =
    std::function<ElementaryStrategy(RulePtr start, const ElementaryStrategy* opponent)>;

struct SemiSolutionCandidate {
    CandidateClass cls = CandidateClass::super_upper;
    GridFunction value;
    WitnessFn witness;
    std::string label;
};

// Same strategy, restarted: the start rule becomes `start` and every
// segment rule is clipped from below at it. Selectors are reused, so they
// now read prefixes up to the clipped firing times.
ElementaryStrategy restart_strategy(const ElementaryStrategy& s, RulePtr start);

// The opposite player shadows `opponent`: whenever the opponent commits an
// action, the responder looks it up in `table` (index into the opponent's
// set -> index into the responder's set) and commits the mapped action at
// the same moment. Table must cover the opponent's whole set.
ElementaryStrategy response_strategy(const GameProblem& problem,
                                     const ElementaryStrategy& opponent,
                                     std::span<const std::size_t> table,
                                     RulePtr start);

// Candidate with an independent witness (super_upper or sub_lower only).
// The stored strategy is restarted on demand via restart_strategy.
SemiSolutionCandidate make_strategy_candidate(CandidateClass cls, GridFunction value,
                                              ElementaryStrategy witness,
                                              std::string label);

// Candidate witnessed by a response table (sub_upper or super_lower only).
SemiSolutionCandidate make_response_candidate(CandidateClass cls,
                                              const GameProblem& problem,
                                              GridFunction value,
                                              std::vector<std::size_t> table,
                                              std::string label);

// A solved grid as a candidate: an upper-side grid becomes super_upper with
// its own extracted player-two feedback as witness, a lower-side grid
// becomes sub_lower with the player-one feedback. `n_decisions` is the
// number of feedback read-out times handed to feedback_strategy.
SemiSolutionCandidate candidate_from_grid(const GameProblem& problem,
                                          std::shared_ptr<const ValueGrid> values,
                                          std::size_t n_decisions);

struct TerminalCheck {
    bool ok = false;
    double worst_slack = 0.0;  // min over samples of the claimed inequality
    std::vector<double> worst_x;
    std::size_t n_checked = 0;
};

// Deterministic lattice scan of the terminal inequality: w(T,x) >= g(x) for
// super classes, <= for sub. `epsilon` is the tolerated undershoot (0 means
// exact); interpolated candidates need a few ulps.
TerminalCheck check_terminal(const GameProblem& problem,
                             const SemiSolutionCandidate& cand,
                             std::span<const double> lo, std::span<const double> hi,
                             std::size_t nodes_per_axis, double epsilon = 0.0);

struct CertifyOptions {
    // Intermediate and final read-out rules; defaults are "at the start"
    // and "at the horizon". rho is also the restart point of the witness.
    RulePtr rho;
    RulePtr tau;
    SimulationConfig cfg;
    double threshold = 0.0;     // slack handed to the verdict band
    std::size_t min_bin = 50;   // smallest cell the conditional test may use
    std::size_t space_bins = 16;  // per-axis histogram resolution at rho
};

// Monte Carlo audit of the one-sided martingale property that defines the
// candidate's class. For each opponent in `opponents` the play is the
// witness started at the simulation start, concatenated with the witness
// restarted at rho. Along each path w is read at rho and at tau; paths are
// grouped by their rho-time and binned by their rho-state, and each bin must
// satisfy E[w(tau).. - w(rho)..] <= 0 for super (>= 0 for sub), plus one
// anchor bin testing E[w(rho)..] against w(start). The report carries the
// worst bin. Exact (zero variance) bins pass or fail outright; noisy bins
// inside three standard errors come back "inconclusive".
CertificateReport certify(const GameProblem& problem,
                          const SemiSolutionCandidate& cand,
                          const StrategyFamily& opponents, double start_time,
                          std::span<const double> start_state,
                          const CertifyOptions& opts);

// Lattice operation on two candidates of the same class: pointwise min for
// super, max for sub. The combined witness decides at its start which input
// attains the optimum at the start state and delegates to that witness
// (ties go to `a`).
SemiSolutionCandidate lattice_combine(const SemiSolutionCandidate& a,
                                      const SemiSolutionCandidate& b);

// Smooth comparison function for local improvements. Callers supply value
// and derivatives; the factories below cover the shapes the tests use.
struct TestFunction {
    std::function<double(double t, std::span<const double> x)> value;
    std::function<double(double t, std::span<const double> x)> dt;
    std::function<void(double t, std::span<const double> x, std::span<double> grad)> grad;
    std::function<void(double t, std::span<const double> x, std::span<double> hess)> hess;
    std::string label;
};

// level + slope_t (t - t_center) + sum_i curvature_i (x_i - x_center_i)^2
TestFunction quadratic_test(double level, double slope_t, double t_center,
                            std::vector<double> x_center,
                            std::vector<double> curvature);

struct BumpSpec {
    double center_t = 0.0;
    std::vector<double> center_x;
    double radius_t = 0.0;   // half-width of the time window
    double radius_x = 0.0;   // euclidean space radius
    double delta = 0.0;      // how far the bump cuts below/above phi
    double eta = 0.0;        // required clearance on the shell; delta <= eta/4
    double gap = 0.0;        // required strictness of the generator sign
    std::size_t samples_per_axis = 9;  // space samples for the lattice checks
    std::size_t time_samples = 5;
    std::size_t witness_action = 0;          // super: player-two action inside
    std::vector<std::size_t> response_table;  // sub: player-one response inside
};

// Local improvement of a super_upper candidate. Verifies on a sample
// lattice over the ball B((center_t, center_x); radius) that
//   dt phi + sup_u L^{u, witness_action} phi <= -gap  inside the ball,
//   phi >= w + eta                                    on B minus half-B,
// and that delta <= eta / 4 and the ball sits inside (0, horizon). On
// success the result's value is min(phi - delta, w) inside the ball (w
// elsewhere) and the witness plays `witness_action` inside the half-ball
// until its first exit, then the base witness restarted there. Violations
// throw PreconditionError naming the worst sample point.
SemiSolutionCandidate bump_super(const GameProblem& problem,
                                 const SemiSolutionCandidate& base,
                                 const TestFunction& phi, const BumpSpec& spec);

// Dual improvement of a sub_upper candidate: requires
//   dt phi + L^{h(v), v} phi >= +gap for every v     inside the ball,
//   phi <= w - eta                                    on the shell,
// with h the spec's response_table. Value becomes max(phi + delta, w)
// inside the ball; the witness responds through h inside the half-ball.
SemiSolutionCandidate bump_sub(const GameProblem& problem,
                               const SemiSolutionCandidate& base,
                               const TestFunction& phi, const BumpSpec& spec);

}  // namespace sdg
