#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "sdg/path.hpp"

namespace sdg {

class StoppingRule;
using RulePtr = std::shared_ptr<const StoppingRule>;

struct FirstExitSpec {
    std::vector<double> center;
    double radius = 1.0;
    // false: fires when |x - center| >= radius (euclidean, space only).
    // true:  fires when max(|x - center|, |t - t0|) >= radius.
    bool space_time = false;
    double t0 = 0.0;          // time center for the space-time ball
    RulePtr after;            // optional: ignore exits before this rule fires
    std::optional<double> cap_time;  // optional: fire at min(exit, cap)
};

// A stopping rule on path space: a functional that watches a trajectory
// prefix and commits to a stop time. The contract has two parts.
//
//   scan(prefix, from): given the promise that the rule has NOT fired at
//   any grid index < from, examine indices [from, prefix.size()) and return
//   the grid time of the first firing, or nullopt if the rule has not fired
//   by the end of the prefix. scan(prefix, 0) is the plain functional
//   evaluation on that prefix.
//
//   Commit monotonicity: once scan reports a firing time on some prefix,
//   every extension of that prefix reports the same time. All built-in
//   rules satisfy this by construction (their firing condition at index k
//   reads only data up to k); it is asserted property-style in tests.
//
// A rule that never fires corresponds to stopping at the horizon: callers
// map nullopt on a complete path to the path's final time.
class StoppingRule {
public:
    virtual ~StoppingRule() = default;
    virtual std::optional<double> scan(const PathView& prefix,
                                       std::size_t from) const = 0;
    virtual std::string label() const = 0;

    // Serialization hooks: non-null only for the declaratively describable
    // rule kinds. Combinator rules stay opaque.
    virtual const double* as_constant_time() const { return nullptr; }
    virtual const FirstExitSpec* as_first_exit() const { return nullptr; }
};

// Functional evaluation on a complete path: the committed stop time, or the
// path's final time if the rule never fires.
double rule_time(const StoppingRule& rule, const SamplePath& path);
inline double rule_time(const RulePtr& rule, const SamplePath& path) {
    return rule_time(*rule, path);
}

// --- built-in rules -------------------------------------------------------

// Fires at the first grid time >= t_star (at the prefix start if t_star
// precedes it). Decision-time grids are lists of these.
RulePtr constant_rule(double t_star);

RulePtr first_exit_rule(FirstExitSpec spec);

// min(a, b): fires when the first of the two fires.
RulePtr min_rule(RulePtr a, RulePtr b);

// max(a, b): fires once both have fired, at the later time.
RulePtr max_rule(RulePtr a, RulePtr b);

// Predicate evaluated on the prefix truncated at a decision rule's firing
// point. Used for branch rules/selectors (lattice switches, bump regions).
using PathPredicate = std::function<bool(const PathView& prefix_at_decision)>;

// Decides between two rules by evaluating `pick_first` on the prefix up to
// the firing of `decide_at`; thereafter behaves as the chosen rule. Both
// branch rules must never fire before `decide_at`.
RulePtr branch_rule(RulePtr decide_at, PathPredicate pick_first, RulePtr if_true,
                    RulePtr if_false);

// --- incremental evaluation ----------------------------------------------

// Cursor used by the simulation engine: feeds growing prefixes to a rule
// while remembering how far it has scanned, so each new grid point is
// examined once. advance() returns the committed firing time once fired.
class RuleCursor {
public:
    explicit RuleCursor(const StoppingRule* rule) : rule_(rule) {}

    std::optional<double> advance(const PathView& prefix) {
        if (fired_) return fired_;
        if (next_from_ >= prefix.size()) return std::nullopt;
        fired_ = rule_->scan(prefix, next_from_);
        next_from_ = prefix.size();
        return fired_;
    }

    // Start scanning at `from` (used when a rule only becomes active once
    // the previous segment has fired).
    void set_from(std::size_t from) { next_from_ = from; }

private:
    const StoppingRule* rule_;
    std::size_t next_from_ = 0;
    std::optional<double> fired_;
};

}  // namespace sdg
