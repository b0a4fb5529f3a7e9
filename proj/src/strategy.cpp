#include "sdg/strategy.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "sdg/errors.hpp"

namespace sdg {

namespace {

class ConstantSelector final : public ActionSelector {
public:
    explicit ConstantSelector(std::size_t index) : index_(index) {}
    std::size_t select(const PathView&) const override { return index_; }
    std::string label() const override {
        return "constant(" + std::to_string(index_) + ")";
    }
    const std::size_t* as_constant_index() const override { return &index_; }

private:
    std::size_t index_;
};

class ThresholdSelector final : public ActionSelector {
public:
    ThresholdSelector(int coord, double level, std::size_t below,
                      std::size_t above)
        : desc_{coord, level, below, above},
          coord_(coord), level_(level), below_(below), above_(above) {}

    const ThresholdDesc* as_threshold() const override { return &desc_; }

    std::size_t select(const PathView& prefix) const override {
        return prefix.last_state()[coord_] < level_ ? below_ : above_;
    }
    std::string label() const override {
        return "threshold(x" + std::to_string(coord_ + 1) + " vs " +
               std::to_string(level_) + ")";
    }

private:
    ThresholdDesc desc_;
    int coord_;
    double level_;
    std::size_t below_, above_;
};

class MappedSelector final : public ActionSelector {
public:
    MappedSelector(RulePtr truncate_at, SelectorPtr inner,
                   std::vector<std::size_t> table)
        : truncate_at_(std::move(truncate_at)),
          inner_(std::move(inner)),
          table_(std::move(table)) {}

    std::size_t select(const PathView& prefix) const override {
        PathView at = prefix;
        if (truncate_at_) {
            const auto t = truncate_at_->scan(prefix, 0);
            if (!t)
                throw StrategyError(
                    "mapped selector: truncation rule has not fired");
            at = prefix.prefix(prefix.first_index_at_or_after(*t) + 1);
        }
        const std::size_t base = inner_->select(at);
        if (base >= table_.size())
            throw StrategyError("mapped selector: no table entry for index " +
                                std::to_string(base));
        return table_[base];
    }
    std::string label() const override { return "mapped(" + inner_->label() + ")"; }

private:
    RulePtr truncate_at_;
    SelectorPtr inner_;
    std::vector<std::size_t> table_;
};

class BranchSelector final : public ActionSelector {
public:
    BranchSelector(RulePtr decide_at, PathPredicate pick_first,
                   SelectorPtr if_true, SelectorPtr if_false)
        : decide_at_(std::move(decide_at)),
          pick_first_(std::move(pick_first)),
          if_true_(std::move(if_true)),
          if_false_(std::move(if_false)) {}

    std::size_t select(const PathView& prefix) const override {
        const auto td = decide_at_->scan(prefix, 0);
        if (!td)
            throw StrategyError("branch selector: decision rule has not fired");
        const std::size_t di = prefix.first_index_at_or_after(*td);
        const bool first = pick_first_(prefix.prefix(di + 1));
        return (first ? if_true_ : if_false_)->select(prefix);
    }
    std::string label() const override {
        return "branch(" + if_true_->label() + " | " + if_false_->label() + ")";
    }

private:
    RulePtr decide_at_;
    PathPredicate pick_first_;
    SelectorPtr if_true_, if_false_;
};

class TableFeedbackSelector final : public ActionSelector {
public:
    explicit TableFeedbackSelector(std::shared_ptr<const FeedbackTable> table)
        : table_(std::move(table)) {}

    std::size_t select(const PathView& prefix) const override {
        return table_->control_index[table_->lookup(prefix.last_time(),
                                                    prefix.last_state())];
    }
    std::string label() const override {
        return "feedback(" + table_->source + ")";
    }
    const FeedbackTable* as_feedback_table() const override {
        return table_.get();
    }

private:
    std::shared_ptr<const FeedbackTable> table_;
};

}  // namespace

SelectorPtr constant_selector(std::size_t index) {
    return std::make_shared<ConstantSelector>(index);
}

SelectorPtr threshold_selector(int coord, double level, std::size_t below,
                               std::size_t above) {
    return std::make_shared<ThresholdSelector>(coord, level, below, above);
}

SelectorPtr mapped_selector(RulePtr truncate_at, SelectorPtr inner,
                            std::vector<std::size_t> table) {
    return std::make_shared<MappedSelector>(std::move(truncate_at),
                                            std::move(inner), std::move(table));
}

SelectorPtr branch_selector(RulePtr decide_at, PathPredicate pick_first,
                            SelectorPtr if_true, SelectorPtr if_false) {
    return std::make_shared<BranchSelector>(std::move(decide_at),
                                            std::move(pick_first),
                                            std::move(if_true),
                                            std::move(if_false));
}

std::size_t FeedbackTable::node_count() const {
    std::size_t n = 1;
    for (std::size_t c : axis_nodes) n *= c;
    return n;
}

std::size_t FeedbackTable::lookup(double t, std::span<const double> x) const {
    // nearest stored time level
    const auto it = std::lower_bound(level_times.begin(), level_times.end(), t);
    std::size_t level;
    if (it == level_times.begin()) {
        level = 0;
    } else if (it == level_times.end()) {
        level = level_times.size() - 1;
    } else {
        const std::size_t hi = static_cast<std::size_t>(it - level_times.begin());
        level = (*it - t <= t - level_times[hi - 1]) ? hi : hi - 1;
    }
    // nearest grid node, clamped per axis
    std::size_t node = 0;
    for (std::size_t a = 0; a < axis_nodes.size(); ++a) {
        const std::size_t n = axis_nodes[a];
        const double h = n > 1 ? (axis_hi[a] - axis_lo[a]) / static_cast<double>(n - 1) : 1.0;
        double pos = (x[a] - axis_lo[a]) / h;
        pos = std::max(0.0, std::min(pos, static_cast<double>(n - 1)));
        const std::size_t i = static_cast<std::size_t>(std::llround(pos));
        node = node * n + std::min(i, n - 1);
    }
    return level * node_count() + node;
}

SelectorPtr feedback_selector(std::shared_ptr<const FeedbackTable> table) {
    return std::make_shared<TableFeedbackSelector>(std::move(table));
}

ElementaryStrategy::ElementaryStrategy(Player player, ControlSet control_set,
                                       RulePtr start_rule,
                                       std::vector<StrategySegment> segments,
                                       std::string label)
    : player_(player),
      control_set_(std::move(control_set)),
      start_rule_(std::move(start_rule)),
      segments_(std::move(segments)),
      label_(std::move(label)) {
    if (!start_rule_) throw StrategyError("strategy: missing start rule");
    if (segments_.empty()) throw StrategyError("strategy: no segments");
    for (const auto& seg : segments_)
        if (!seg.rule || !seg.selector)
            throw StrategyError("strategy: null rule or selector");
}

ElementaryStrategy constant_strategy(Player player, const ControlSet& set,
                                     std::size_t index, RulePtr start_rule) {
    if (index >= set.size())
        throw StrategyError("constant strategy: index out of range");
    if (!start_rule)
        start_rule = constant_rule(-std::numeric_limits<double>::infinity());
    std::vector<StrategySegment> segs;
    segs.push_back({constant_rule(std::numeric_limits<double>::infinity()),
                    constant_selector(index)});
    return ElementaryStrategy(player, set, std::move(start_rule), std::move(segs),
                              "const[" + std::to_string(index) + "]");
}

std::size_t action_index_at(const ElementaryStrategy& strategy,
                            const SamplePath& path, double t) {
    PathView full(path);
    const auto s0 = strategy.start_rule()->scan(full, 0);
    const double tau0 = s0 ? *s0 : path.back_time();
    if (!(t > tau0))
        throw StrategyError("action requested at or before the start rule (t=" +
                            std::to_string(t) + ", tau0=" + std::to_string(tau0) +
                            ")");
    double prev = tau0;
    for (const auto& seg : strategy.segments()) {
        const auto fk = seg.rule->scan(full, 0);
        const double tk = fk ? *fk : path.back_time();
        if (tk < prev)
            throw StrategyError("stopping rules fired out of order (" +
                                std::to_string(tk) + " < " +
                                std::to_string(prev) + ")");
        if (t <= tk) {
            const std::size_t pi = full.first_index_at_or_after(prev);
            const std::size_t idx =
                seg.selector->select(full.prefix(pi + 1));
            if (idx >= strategy.control_set().size())
                throw StrategyError("selector returned index outside the set");
            return idx;
        }
        prev = tk;
    }
    throw StrategyError("last stopping rule did not reach the horizon");
}

std::span<const double> action_at(const ElementaryStrategy& strategy,
                                  const SamplePath& path, double t) {
    return strategy.control_set().point(action_index_at(strategy, path, t));
}

ElementaryStrategy concatenate(const ElementaryStrategy& head,
                               const ElementaryStrategy& tail) {
    if (head.player() != tail.player())
        throw StrategyError("concatenate: player mismatch");
    if (!(head.control_set() == tail.control_set()))
        throw StrategyError("concatenate: control set mismatch");
    const RulePtr& at = tail.start_rule();
    std::vector<StrategySegment> segs;
    segs.reserve(head.segments().size() + tail.segments().size());
    for (const auto& seg : head.segments())
        segs.push_back({min_rule(seg.rule, at), seg.selector});
    for (const auto& seg : tail.segments()) segs.push_back(seg);
    return ElementaryStrategy(head.player(), head.control_set(),
                              head.start_rule(), std::move(segs),
                              head.label() + " (+) " + tail.label());
}

ElementaryStrategy switch_at(RulePtr decide_at, PathPredicate pick_first,
                             const ElementaryStrategy& a,
                             const ElementaryStrategy& b) {
    if (a.player() != b.player())
        throw StrategyError("switch: player mismatch");
    if (!(a.control_set() == b.control_set()))
        throw StrategyError("switch: control set mismatch");
    const std::size_t n = std::max(a.segments().size(), b.segments().size());
    const RulePtr never =
        constant_rule(std::numeric_limits<double>::infinity());
    std::vector<StrategySegment> segs;
    segs.reserve(n);
    for (std::size_t m = 0; m < n; ++m) {
        const bool in_a = m < a.segments().size();
        const bool in_b = m < b.segments().size();
        // padding: a never-firing rule and the branch's last selector (the
        // padded segment is empty on that branch's paths, so the selector
        // is never consulted there)
        const RulePtr ra = in_a ? a.segments()[m].rule : never;
        const RulePtr rb = in_b ? b.segments()[m].rule : never;
        const SelectorPtr sa =
            in_a ? a.segments()[m].selector : a.segments().back().selector;
        const SelectorPtr sb =
            in_b ? b.segments()[m].selector : b.segments().back().selector;
        segs.push_back({branch_rule(decide_at, pick_first, ra, rb),
                        branch_selector(decide_at, pick_first, sa, sb)});
    }
    return ElementaryStrategy(a.player(), a.control_set(), decide_at,
                              std::move(segs),
                              "switch[" + a.label() + " | " + b.label() + "]");
}

}  // namespace sdg
