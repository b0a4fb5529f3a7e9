#include "sdg/path.hpp"

#include <algorithm>
#include <cmath>

#include "sdg/errors.hpp"
#include "sdg/numfmt.hpp"

namespace sdg {

void SamplePath::validate() const {
    if (dim < 1) throw EvaluationError("path: dim must be >= 1");
    if (times.size() < 1) throw EvaluationError("path: empty time grid");
    for (std::size_t k = 0; k + 1 < times.size(); ++k)
        if (!(times[k] < times[k + 1]))
            throw EvaluationError("path: time grid not strictly increasing");
    if (states.size() != times.size() * static_cast<std::size_t>(dim))
        throw EvaluationError("path: state array shape mismatch");
    if (!noise.empty() &&
        noise.size() != (times.size() - 1) * static_cast<std::size_t>(dim_noise))
        throw EvaluationError("path: noise array shape mismatch");
    for (double t : times)
        if (!std::isfinite(t)) throw EvaluationError("path: non-finite time");
}

std::string SamplePath::to_csv(std::span<const double> u_actions,
                               std::span<const double> v_actions, int u_dim,
                               int v_dim) const {
    std::string out = "t";
    for (int i = 0; i < dim; ++i) out += ",x_" + std::to_string(i + 1);
    for (int i = 0; i < u_dim; ++i) out += ",u_" + std::to_string(i + 1);
    for (int i = 0; i < v_dim; ++i) out += ",v_" + std::to_string(i + 1);
    out += "\n";
    const std::size_t n_steps = size() - 1;
    for (std::size_t k = 0; k < size(); ++k) {
        out += format_double(times[k]);
        for (double c : state(k)) out += "," + format_double(c);
        // the action row for the terminal point repeats the final step
        const std::size_t step = std::min(k, n_steps > 0 ? n_steps - 1 : 0);
        for (int i = 0; i < u_dim; ++i)
            out += "," + format_double(u_actions[step * u_dim + i]);
        for (int i = 0; i < v_dim; ++i)
            out += "," + format_double(v_actions[step * v_dim + i]);
        out += "\n";
    }
    return out;
}

std::size_t PathView::first_index_at_or_after(double t) const {
    const double* begin = path_->times.data();
    const double* end = begin + count_;
    return static_cast<std::size_t>(std::lower_bound(begin, end, t) - begin);
}

}  // namespace sdg
