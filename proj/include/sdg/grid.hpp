#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "sdg/dynamics.hpp"

namespace sdg {

// Uniform tensor grid on [lo, hi]^d x [t0, horizon]. Spatial spacing is per
// axis; time levels are uniform with the last level forced to the horizon
// exactly. Node indexing is row-major over the axes.
struct SpaceTimeGrid {
    int dim = 1;
    std::vector<double> lo, hi, spacing;
    std::vector<std::size_t> nodes;
    double t0 = 0.0;
    double horizon = 1.0;
    double dt = 1.0;
    std::size_t n_levels = 2;  // includes the terminal level
    std::size_t node_count = 0;

    double level_time(std::size_t j) const {
        return j + 1 == n_levels ? horizon : t0 + static_cast<double>(j) * dt;
    }

    std::size_t node_index(std::span<const std::size_t> multi) const;
    void node_multi(std::size_t node, std::span<std::size_t> out) const;
    void node_coords(std::size_t node, std::span<double> out) const;
    bool is_boundary(std::size_t node) const;

    void validate() const;  // throws ConfigError on malformed geometry
};

// The solved value function on a space-time grid, one full slab per time
// level, plus the optimizing control pair recorded at every (level, node).
class ValueGrid {
public:
    ValueGrid(SpaceTimeGrid grid, Side side, std::string problem_name);

    const SpaceTimeGrid& grid() const { return grid_; }
    Side side() const { return side_; }
    const std::string& problem_name() const { return problem_name_; }

    double value(std::size_t level, std::size_t node) const {
        return values_[level * grid_.node_count + node];
    }
    std::span<double> level_values(std::size_t level) {
        return {values_.data() + level * grid_.node_count, grid_.node_count};
    }
    std::span<const double> level_values(std::size_t level) const {
        return {values_.data() + level * grid_.node_count, grid_.node_count};
    }

    std::uint16_t u_saddle(std::size_t level, std::size_t node) const {
        return u_idx_[level * grid_.node_count + node];
    }
    std::uint16_t v_saddle(std::size_t level, std::size_t node) const {
        return v_idx_[level * grid_.node_count + node];
    }
    std::span<std::uint16_t> level_u_saddle(std::size_t level) {
        return {u_idx_.data() + level * grid_.node_count, grid_.node_count};
    }
    std::span<std::uint16_t> level_v_saddle(std::size_t level) {
        return {v_idx_.data() + level * grid_.node_count, grid_.node_count};
    }

    // Multilinear in space, linear in time, clamped to the grid box.
    double interpolate(double t, std::span<const double> x) const;

    // probe = (t, x_1, ..., x_d)
    double probe(std::span<const double> probe_point) const;

    // Rows: t, x_1..x_d, value, u_index, v_index in (level, node) order.
    // Levels are thinned by `level_stride`; the first and terminal levels
    // are always included.
    std::string to_csv(std::size_t level_stride = 1) const;

    nlohmann::ordered_json meta_json() const;

private:
    SpaceTimeGrid grid_;
    Side side_;
    std::string problem_name_;
    std::vector<double> values_;
    std::vector<std::uint16_t> u_idx_, v_idx_;
};

}  // namespace sdg
