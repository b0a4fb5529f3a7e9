#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "sdg/controls.hpp"
#include "sdg/stopping.hpp"

namespace sdg {

enum class Player : std::uint8_t { one, two };

inline const char* player_name(Player p) {
    return p == Player::one ? "one" : "two";
}

struct FeedbackTable;

struct ThresholdDesc {
    int coord = 0;
    double level = 0.0;
    std::size_t below = 0, above = 0;
};

// Chooses an action when a segment becomes active. The selector sees the
// path prefix up to (and including) the firing point of the previous
// segment's rule, and returns an index into the player's control set, so
// the chosen action is a set member by construction.
class ActionSelector {
public:
    virtual ~ActionSelector() = default;
    virtual std::size_t select(const PathView& prefix) const = 0;
    virtual std::string label() const = 0;

    // Serialization hooks, non-null/engaged for describable selector kinds.
    virtual const std::size_t* as_constant_index() const { return nullptr; }
    virtual const ThresholdDesc* as_threshold() const { return nullptr; }
    virtual const FeedbackTable* as_feedback_table() const { return nullptr; }
};

using SelectorPtr = std::shared_ptr<const ActionSelector>;

SelectorPtr constant_selector(std::size_t index);

// index_below while x[coord] < level at the decision point, else index_above.
SelectorPtr threshold_selector(int coord, double level, std::size_t index_below,
                               std::size_t index_above);

// Applies `inner` to the prefix truncated at the firing of `truncate_at`,
// then maps the result through `table` (entry i gives the replacement for
// inner's index i). Used to build response strategies that shadow an
// opponent's selectors through a response table.
SelectorPtr mapped_selector(RulePtr truncate_at, SelectorPtr inner,
                            std::vector<std::size_t> table);

// Evaluates `pick_first` on the prefix truncated at the firing of
// `decide_at`, then delegates to the chosen selector with the full prefix.
SelectorPtr branch_selector(RulePtr decide_at, PathPredicate pick_first,
                            SelectorPtr if_true, SelectorPtr if_false);

// Nearest-node lookup into a precomputed (time level, grid node) -> control
// index table. This is the feedback form extracted from solved value grids;
// it lives here so path-space code has no dependency on the PDE solver.
struct FeedbackTable {
    std::vector<double> level_times;        // ascending
    std::vector<double> axis_lo, axis_hi;   // one entry per state axis
    std::vector<std::size_t> axis_nodes;    // nodes per axis
    std::vector<std::uint16_t> control_index;  // levels x nodes, row-major
    std::string source;                     // description for serialization

    std::size_t node_count() const;
    // nearest (level, node) pair for a space-time point, clamped to the grid
    std::size_t lookup(double t, std::span<const double> x) const;
};

SelectorPtr feedback_selector(std::shared_ptr<const FeedbackTable> table);

// One block of an elementary strategy: hold the action chosen by `selector`
// until `rule` fires.
struct StrategySegment {
    RulePtr rule;
    SelectorPtr selector;
};

// An elementary feedback strategy: a start rule tau_0 and segments
// (tau_k, xi_k), k = 1..n. The action on (tau_{k-1}, tau_k] is
// xi_k(path prefix up to tau_{k-1}). Rules must fire in non-decreasing
// order on every path (checked wherever the strategy is evaluated), and
// the last rule must reach the horizon (a never-firing rule counts as
// firing at the horizon).
class ElementaryStrategy {
public:
    ElementaryStrategy(Player player, ControlSet control_set, RulePtr start_rule,
                       std::vector<StrategySegment> segments,
                       std::string label = "");

    Player player() const { return player_; }
    const ControlSet& control_set() const { return control_set_; }
    const RulePtr& start_rule() const { return start_rule_; }
    const std::vector<StrategySegment>& segments() const { return segments_; }
    const std::string& label() const { return label_; }

private:
    Player player_;
    ControlSet control_set_;
    RulePtr start_rule_;
    std::vector<StrategySegment> segments_;
    std::string label_;
};

// Strategy that plays one fixed action from the start rule to the horizon.
ElementaryStrategy constant_strategy(Player player, const ControlSet& set,
                                     std::size_t index,
                                     RulePtr start_rule = nullptr);

// The action the strategy holds at time t on this path, as an index into
// its control set. Requires tau_0(path) < t <= horizon; asks for the action
// at or before the start rule are errors, as are non-monotone rule firings.
std::size_t action_index_at(const ElementaryStrategy& strategy,
                            const SamplePath& path, double t);

// Same, returning the control point itself.
std::span<const double> action_at(const ElementaryStrategy& strategy,
                                  const SamplePath& path, double t);

// Concatenation at the tail's start rule: play `head` on (s, tau], then
// `tail` on (tau, T]. The result's segment rules are the head's rules
// clipped at tau followed by the tail's rules.
ElementaryStrategy concatenate(const ElementaryStrategy& head,
                               const ElementaryStrategy& tail);

// Indicator combination: follow `a` on paths where `pick_first` holds at
// the firing of `decide_at`, else follow `b`. Both inputs must start at
// `decide_at` (they are the two branch strategies of a lattice switch).
ElementaryStrategy switch_at(RulePtr decide_at, PathPredicate pick_first,
                             const ElementaryStrategy& a,
                             const ElementaryStrategy& b);

}  // namespace sdg
