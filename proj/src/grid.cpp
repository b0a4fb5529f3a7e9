#include "sdg/grid.hpp"

#include <algorithm>
#include <cmath>

#include "sdg/errors.hpp"
#include "sdg/numfmt.hpp"

namespace sdg {

std::size_t SpaceTimeGrid::node_index(std::span<const std::size_t> multi) const {
    std::size_t idx = 0;
    for (int a = 0; a < dim; ++a) idx = idx * nodes[a] + multi[a];
    return idx;
}

void SpaceTimeGrid::node_multi(std::size_t node, std::span<std::size_t> out) const {
    for (int a = dim - 1; a >= 0; --a) {
        out[a] = node % nodes[a];
        node /= nodes[a];
    }
}

void SpaceTimeGrid::node_coords(std::size_t node, std::span<double> out) const {
    for (int a = dim - 1; a >= 0; --a) {
        const std::size_t i = node % nodes[a];
        node /= nodes[a];
        out[a] = lo[a] + static_cast<double>(i) * spacing[a];
    }
}

bool SpaceTimeGrid::is_boundary(std::size_t node) const {
    for (int a = dim - 1; a >= 0; --a) {
        const std::size_t i = node % nodes[a];
        node /= nodes[a];
        if (i == 0 || i + 1 == nodes[a]) return true;
    }
    return false;
}

void SpaceTimeGrid::validate() const {
    if (dim < 1 || dim > 2)
        throw ConfigError("grid: only one or two state dimensions supported");
    const std::size_t d = static_cast<std::size_t>(dim);
    if (lo.size() != d || hi.size() != d || nodes.size() != d ||
        spacing.size() != d)
        throw ConfigError("grid: axis array sizes do not match dim");
    std::size_t count = 1;
    for (int a = 0; a < dim; ++a) {
        if (nodes[a] < 3) throw ConfigError("grid: need at least 3 nodes per axis");
        if (!(lo[a] < hi[a])) throw ConfigError("grid: axis bounds out of order");
        count *= nodes[a];
    }
    if (count != node_count) throw ConfigError("grid: node_count mismatch");
    if (n_levels < 2) throw ConfigError("grid: need at least 2 time levels");
    if (!(t0 < horizon)) throw ConfigError("grid: t0 must precede the horizon");
    if (!(dt > 0.0)) throw ConfigError("grid: dt must be positive");
}

ValueGrid::ValueGrid(SpaceTimeGrid grid, Side side, std::string problem_name)
    : grid_(std::move(grid)), side_(side), problem_name_(std::move(problem_name)) {
    grid_.validate();
    values_.assign(grid_.n_levels * grid_.node_count, 0.0);
    u_idx_.assign(grid_.n_levels * grid_.node_count, 0);
    v_idx_.assign(grid_.n_levels * grid_.node_count, 0);
}

double ValueGrid::interpolate(double t, std::span<const double> x) const {
    const auto& g = grid_;
    // bracketing time levels
    double tc = std::clamp(t, g.t0, g.horizon);
    std::size_t j0 = 0;
    if (g.n_levels > 1) {
        const double pos = (tc - g.t0) / g.dt;
        j0 = static_cast<std::size_t>(std::max(0.0, std::floor(pos)));
        j0 = std::min(j0, g.n_levels - 2);
    }
    const double tj = g.level_time(j0);
    const double tj1 = g.level_time(j0 + 1);
    double lam = (tc - tj) / (tj1 - tj);
    lam = std::clamp(lam, 0.0, 1.0);

    // per-axis cell and weight
    std::size_t base[2] = {0, 0};
    double w[2] = {0.0, 0.0};
    for (int a = 0; a < g.dim; ++a) {
        const double xc = std::clamp(x[a], g.lo[a], g.hi[a]);
        double pos = (xc - g.lo[a]) / g.spacing[a];
        pos = std::clamp(pos, 0.0, static_cast<double>(g.nodes[a] - 1));
        std::size_t i = static_cast<std::size_t>(std::floor(pos));
        i = std::min(i, g.nodes[a] - 2);
        base[a] = i;
        w[a] = std::clamp(pos - static_cast<double>(i), 0.0, 1.0);
    }

    auto corner = [&](std::size_t level, std::size_t da, std::size_t db) {
        std::size_t multi[2] = {base[0] + da, g.dim > 1 ? base[1] + db : 0};
        return value(level, g.node_index({multi, static_cast<std::size_t>(g.dim)}));
    };
    auto slab = [&](std::size_t level) {
        if (g.dim == 1)
            return (1.0 - w[0]) * corner(level, 0, 0) + w[0] * corner(level, 1, 0);
        return (1.0 - w[0]) * ((1.0 - w[1]) * corner(level, 0, 0) +
                               w[1] * corner(level, 0, 1)) +
               w[0] * ((1.0 - w[1]) * corner(level, 1, 0) +
                       w[1] * corner(level, 1, 1));
    };
    return (1.0 - lam) * slab(j0) + lam * slab(j0 + 1);
}

double ValueGrid::probe(std::span<const double> probe_point) const {
    if (probe_point.size() != static_cast<std::size_t>(grid_.dim) + 1)
        throw ConfigError("probe: expected (t, x_1..x_d)");
    return interpolate(probe_point[0], probe_point.subspan(1));
}

std::string ValueGrid::to_csv(std::size_t level_stride) const {
    if (level_stride == 0) level_stride = 1;
    const auto& g = grid_;
    std::string out = "t";
    for (int a = 0; a < g.dim; ++a) out += ",x_" + std::to_string(a + 1);
    out += ",value,u_index,v_index\n";
    double coords[2];
    for (std::size_t j = 0; j < g.n_levels; ++j) {
        const bool keep = (j % level_stride == 0) || (j + 1 == g.n_levels);
        if (!keep) continue;
        const std::string ts = format_double(g.level_time(j));
        for (std::size_t n = 0; n < g.node_count; ++n) {
            g.node_coords(n, {coords, static_cast<std::size_t>(g.dim)});
            out += ts;
            for (int a = 0; a < g.dim; ++a) out += "," + format_double(coords[a]);
            out += "," + format_double(value(j, n));
            out += "," + std::to_string(u_saddle(j, n));
            out += "," + std::to_string(v_saddle(j, n));
            out += "\n";
        }
    }
    return out;
}

nlohmann::ordered_json ValueGrid::meta_json() const {
    nlohmann::ordered_json m;
    m["problem"] = problem_name_;
    m["side"] = side_name(side_);
    m["dim"] = grid_.dim;
    m["lo"] = grid_.lo;
    m["hi"] = grid_.hi;
    m["nodes"] = grid_.nodes;
    m["t0"] = grid_.t0;
    m["horizon"] = grid_.horizon;
    m["dt"] = grid_.dt;
    m["n_levels"] = grid_.n_levels;
    m["node_count"] = grid_.node_count;
    return m;
}

}  // namespace sdg
