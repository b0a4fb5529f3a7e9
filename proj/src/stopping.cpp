#include "sdg/stopping.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "sdg/errors.hpp"

namespace sdg {

double rule_time(const StoppingRule& rule, const SamplePath& path) {
    PathView full(path);
    const auto fired = rule.scan(full, 0);
    return fired ? *fired : path.back_time();
}

namespace {

class ConstantRule final : public StoppingRule {
public:
    explicit ConstantRule(double t_star) : t_star_(t_star) {}

    std::optional<double> scan(const PathView& prefix,
                               std::size_t from) const override {
        std::size_t k = prefix.first_index_at_or_after(t_star_);
        k = std::max(k, from);
        if (k >= prefix.size()) return std::nullopt;
        return prefix.time(k);
    }

    std::string label() const override {
        return "constant(" + std::to_string(t_star_) + ")";
    }

    const double* as_constant_time() const override { return &t_star_; }

private:
    double t_star_;
};

class FirstExitRule final : public StoppingRule {
public:
    explicit FirstExitRule(FirstExitSpec spec) : spec_(std::move(spec)) {
        if (!(spec_.radius > 0.0))
            throw EvaluationError("first_exit: radius must be > 0");
        if (spec_.center.empty())
            throw EvaluationError("first_exit: empty center");
    }

    std::optional<double> scan(const PathView& prefix,
                               std::size_t from) const override {
        std::optional<double> best;

        // cap component: a plain constant rule
        if (spec_.cap_time) {
            std::size_t k = prefix.first_index_at_or_after(*spec_.cap_time);
            k = std::max(k, from);
            if (k < prefix.size()) best = prefix.time(k);
        }

        // exit component, admissible only once `after` has fired
        std::size_t start = from;
        bool admissible = true;
        if (spec_.after) {
            const auto af = spec_.after->scan(prefix, 0);
            if (!af) {
                admissible = false;
            } else {
                start = std::max(start, prefix.first_index_at_or_after(*af));
            }
        }
        if (admissible) {
            const std::size_t d = spec_.center.size();
            for (std::size_t k = start; k < prefix.size(); ++k) {
                if (best && prefix.time(k) >= *best) break;
                const auto x = prefix.state(k);
                double r2 = 0.0;
                for (std::size_t i = 0; i < d; ++i) {
                    const double dx = x[i] - spec_.center[i];
                    r2 += dx * dx;
                }
                double dist = std::sqrt(r2);
                if (spec_.space_time)
                    dist = std::max(dist, std::abs(prefix.time(k) - spec_.t0));
                if (dist >= spec_.radius) {
                    best = prefix.time(k);
                    break;
                }
            }
        }
        return best;
    }

    std::string label() const override {
        return std::string("first_exit(r=") + std::to_string(spec_.radius) +
               (spec_.space_time ? ", space_time" : "") + ")";
    }

    const FirstExitSpec* as_first_exit() const override { return &spec_; }

private:
    FirstExitSpec spec_;
};

class MinRule final : public StoppingRule {
public:
    MinRule(RulePtr a, RulePtr b) : a_(std::move(a)), b_(std::move(b)) {}

    // min fires when the first component fires, so "not fired before `from`"
    // holds for both components and scanning each from `from` is sound.
    std::optional<double> scan(const PathView& prefix,
                               std::size_t from) const override {
        const auto ta = a_->scan(prefix, from);
        const auto tb = b_->scan(prefix, from);
        if (ta && tb) return std::min(*ta, *tb);
        return ta ? ta : tb;
    }

    std::string label() const override {
        return "min(" + a_->label() + ", " + b_->label() + ")";
    }

private:
    RulePtr a_, b_;
};

class MaxRule final : public StoppingRule {
public:
    MaxRule(RulePtr a, RulePtr b) : a_(std::move(a)), b_(std::move(b)) {}

    // A component may fire well before the max does, so components are
    // always evaluated as functionals from index 0.
    std::optional<double> scan(const PathView& prefix,
                               std::size_t /*from*/) const override {
        const auto ta = a_->scan(prefix, 0);
        if (!ta) return std::nullopt;
        const auto tb = b_->scan(prefix, 0);
        if (!tb) return std::nullopt;
        return std::max(*ta, *tb);
    }

    std::string label() const override {
        return "max(" + a_->label() + ", " + b_->label() + ")";
    }

private:
    RulePtr a_, b_;
};

class BranchRule final : public StoppingRule {
public:
    BranchRule(RulePtr decide_at, PathPredicate pick_first, RulePtr if_true,
               RulePtr if_false)
        : decide_at_(std::move(decide_at)),
          pick_first_(std::move(pick_first)),
          if_true_(std::move(if_true)),
          if_false_(std::move(if_false)) {}

    std::optional<double> scan(const PathView& prefix,
                               std::size_t from) const override {
        const auto td = decide_at_->scan(prefix, 0);
        // before the decision rule fires neither branch may fire
        if (!td) return std::nullopt;
        const std::size_t di = prefix.first_index_at_or_after(*td);
        const bool first = pick_first_(prefix.prefix(di + 1));
        const auto& chosen = first ? if_true_ : if_false_;
        const auto t = chosen->scan(prefix, from);
        if (t && *t < *td)
            throw StrategyError("branch rule fired before its decision rule");
        return t;
    }

    std::string label() const override {
        return "branch(" + decide_at_->label() + ")";
    }

private:
    RulePtr decide_at_;
    PathPredicate pick_first_;
    RulePtr if_true_, if_false_;
};

}  // namespace

RulePtr constant_rule(double t_star) {
    return std::make_shared<ConstantRule>(t_star);
}

RulePtr first_exit_rule(FirstExitSpec spec) {
    return std::make_shared<FirstExitRule>(std::move(spec));
}

RulePtr min_rule(RulePtr a, RulePtr b) {
    return std::make_shared<MinRule>(std::move(a), std::move(b));
}

RulePtr max_rule(RulePtr a, RulePtr b) {
    return std::make_shared<MaxRule>(std::move(a), std::move(b));
}

RulePtr branch_rule(RulePtr decide_at, PathPredicate pick_first, RulePtr if_true,
                    RulePtr if_false) {
    return std::make_shared<BranchRule>(std::move(decide_at),
                                        std::move(pick_first),
                                        std::move(if_true), std::move(if_false));
}

}  // namespace sdg
