#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace sdg {

// One realized trajectory on a deterministic time grid. States are stored
// flat, row-major: state k occupies [k*dim, (k+1)*dim). The noise record
// (increment draws, one row of dim_noise per step) is optional; it is kept
// by the simulator for export and replay, and is deliberately invisible
// through PathView so decision rules can never read it.
struct SamplePath {
    int dim = 1;
    int dim_noise = 0;
    std::vector<double> times;   // strictly increasing, times.front() = start
    std::vector<double> states;  // times.size() * dim
    std::vector<double> noise;   // (times.size()-1) * dim_noise, may be empty

    std::size_t size() const { return times.size(); }
    double start_time() const { return times.front(); }
    double back_time() const { return times.back(); }
    std::span<const double> state(std::size_t k) const {
        return {states.data() + k * static_cast<std::size_t>(dim),
                static_cast<std::size_t>(dim)};
    }

    void validate() const;  // grid/shape invariants, throws on violation

    // CSV rows: t, x_1..x_d [, u_1..u_k, v_1..v_l when actions are given].
    // Actions are per step; the terminal row repeats the last step's pair.
    std::string to_csv(std::span<const double> u_actions = {},
                       std::span<const double> v_actions = {}, int u_dim = 0,
                       int v_dim = 0) const;
};

// A read-only prefix of a path: the first `count` grid points. This is the
// only view of the trajectory that stopping rules and action selectors
// receive, which enforces non-anticipativity structurally.
class PathView {
public:
    PathView(const SamplePath& path, std::size_t count)
        : path_(&path), count_(count) {}
    explicit PathView(const SamplePath& path)
        : path_(&path), count_(path.size()) {}

    std::size_t size() const { return count_; }
    int dim() const { return path_->dim; }
    double time(std::size_t k) const { return path_->times[k]; }
    std::span<const double> state(std::size_t k) const { return path_->state(k); }
    double last_time() const { return path_->times[count_ - 1]; }
    std::span<const double> last_state() const { return path_->state(count_ - 1); }

    PathView prefix(std::size_t count) const { return PathView(*path_, count); }

    // Index of the first grid time >= t within this view, or size() if none.
    std::size_t first_index_at_or_after(double t) const;

private:
    const SamplePath* path_;
    std::size_t count_;
};

}  // namespace sdg
