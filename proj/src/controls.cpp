#include "sdg/controls.hpp"

#include <cmath>

#include "sdg/errors.hpp"

namespace sdg {

ControlSet::ControlSet(std::string label,
                       std::vector<std::vector<double>> points,
                       std::size_t max_points)
    : label_(std::move(label)) {
    if (points.empty())
        throw EvaluationError("control set '" + label_ + "' is empty");
    if (points.size() > max_points)
        throw EvaluationError("control set '" + label_ + "' has " +
                              std::to_string(points.size()) +
                              " points, cap is " + std::to_string(max_points));
    dim_ = static_cast<int>(points.front().size());
    if (dim_ == 0)
        throw EvaluationError("control set '" + label_ + "' has dimension 0");
    count_ = points.size();
    flat_.reserve(count_ * dim_);
    for (const auto& p : points) {
        if (static_cast<int>(p.size()) != dim_)
            throw EvaluationError("control set '" + label_ +
                                  "': mixed point dimensions");
        for (double c : p) {
            if (!std::isfinite(c))
                throw EvaluationError("control set '" + label_ +
                                      "': non-finite coordinate");
            flat_.push_back(c);
        }
    }
}

ControlSet ControlSet::uniform(std::string label, double lo, double hi,
                               std::size_t n) {
    std::vector<std::vector<double>> pts;
    pts.reserve(n);
    if (n == 1) {
        pts.push_back({0.5 * (lo + hi)});
    } else {
        for (std::size_t i = 0; i < n; ++i) {
            const double t = static_cast<double>(i) / static_cast<double>(n - 1);
            pts.push_back({lo + t * (hi - lo)});
        }
    }
    return ControlSet(std::move(label), std::move(pts));
}

ControlSet ControlSet::singleton(std::string label, std::vector<double> point) {
    return ControlSet(std::move(label), {std::move(point)});
}

}  // namespace sdg
