#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace sdg {

// A finite control set: an explicit list of points in R^k. Both players'
// action spaces are of this form; optimization over a control set is always
// an exhaustive scan, and selectors address members by index so that any
// chosen action is a member by construction.
class ControlSet {
public:
    static constexpr std::size_t default_max_points = 256;

    // Empty set; placeholder state only. GameProblem::validate rejects it.
    ControlSet() = default;

    // points is a list of coordinate rows, all of the same dimension.
    ControlSet(std::string label, std::vector<std::vector<double>> points,
               std::size_t max_points = default_max_points);

    // n equally spaced scalar points on [lo, hi]. n == 1 gives the midpoint.
    static ControlSet uniform(std::string label, double lo, double hi,
                              std::size_t n);
    static ControlSet singleton(std::string label, std::vector<double> point);

    const std::string& label() const { return label_; }
    std::size_t size() const { return count_; }
    int dim() const { return dim_; }

    std::span<const double> point(std::size_t i) const {
        return {flat_.data() + i * static_cast<std::size_t>(dim_),
                static_cast<std::size_t>(dim_)};
    }

    // Scalar sets come up constantly in tests and presets.
    double scalar(std::size_t i) const { return flat_[i * dim_]; }

    bool operator==(const ControlSet& other) const {
        return dim_ == other.dim_ && flat_ == other.flat_;
    }

private:
    std::string label_;
    int dim_ = 0;
    std::size_t count_ = 0;
    std::vector<double> flat_;  // count * dim, row-major
};

}  // namespace sdg
