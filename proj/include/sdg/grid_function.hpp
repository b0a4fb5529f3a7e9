#pragma once

#include <functional>
#include <memory>
#include <span>
#include <string>
#include <utility>

#include "sdg/errors.hpp"
#include "sdg/grid.hpp"
#include "sdg/numfmt.hpp"

namespace sdg {

// A candidate value function on space-time. Wraps either a closed form, a
// solved grid, or a min/max combination of other candidates, behind one
// callable interface. Copies share the underlying data.
class GridFunction {
public:
    using Fn = std::function<double(double t, std::span<const double> x)>;

    GridFunction() = default;

    static GridFunction constant(double c) {
        GridFunction g;
        g.fn_ = [c](double, std::span<const double>) { return c; };
        g.label_ = "const " + format_double(c);
        return g;
    }

    // Keeps the grid alive for as long as any copy of the function exists.
    static GridFunction from_values(std::shared_ptr<const ValueGrid> vg) {
        if (!vg) throw ConfigError("GridFunction::from_values: null grid");
        GridFunction g;
        g.label_ = vg->problem_name() + "/" + side_name(vg->side());
        g.fn_ = [vg = std::move(vg)](double t, std::span<const double> x) {
            return vg->interpolate(t, x);
        };
        return g;
    }

    static GridFunction from_callable(Fn f, std::string label) {
        if (!f) throw ConfigError("GridFunction::from_callable: empty callable");
        GridFunction g;
        g.fn_ = std::move(f);
        g.label_ = std::move(label);
        return g;
    }

    static GridFunction combine_min(GridFunction a, GridFunction b) {
        return combine(std::move(a), std::move(b), /*take_min=*/true);
    }

    static GridFunction combine_max(GridFunction a, GridFunction b) {
        return combine(std::move(a), std::move(b), /*take_min=*/false);
    }

    double operator()(double t, std::span<const double> x) const {
        if (!fn_) throw ConfigError("GridFunction: evaluated while empty");
        return fn_(t, x);
    }

    const std::string& label() const { return label_; }
    bool empty() const { return !fn_; }

private:
    static GridFunction combine(GridFunction a, GridFunction b, bool take_min) {
        if (a.empty() || b.empty())
            throw ConfigError("GridFunction: cannot combine an empty function");
        GridFunction g;
        g.label_ = std::string(take_min ? "min[" : "max[") + a.label_ + ", " + b.label_ + "]";
        g.fn_ = [fa = a.fn_, fb = b.fn_, take_min](double t, std::span<const double> x) {
            const double va = fa(t, x);
            const double vb = fb(t, x);
            return take_min ? std::min(va, vb) : std::max(va, vb);
        };
        return g;
    }

    Fn fn_;
    std::string label_;
};

}  // namespace sdg
