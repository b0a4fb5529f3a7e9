#pragma once

// Reference values computed by means independent of the library under test:
// direct scans, quadrature, and exhaustive enumeration. Tests freeze these
// numbers (or recompute them here) and compare the library against them.

#include <cmath>
#include <functional>
#include <limits>
#include <vector>

namespace oracle {

// Envelope of g over the interval |y - x| <= radius, by dense scan.
inline double envelope_max(const std::function<double(double)>& g, double x,
                           double radius, int n = 200001) {
    double best = -std::numeric_limits<double>::infinity();
    for (int i = 0; i < n; ++i) {
        const double y = x - radius + 2.0 * radius * i / (n - 1);
        best = std::max(best, g(y));
    }
    return best;
}

inline double envelope_min(const std::function<double(double)>& g, double x,
                           double radius, int n = 200001) {
    double best = std::numeric_limits<double>::infinity();
    for (int i = 0; i < n; ++i) {
        const double y = x - radius + 2.0 * radius * i / (n - 1);
        best = std::min(best, g(y));
    }
    return best;
}

// Front-propagation solution of -v_t - speed*|v_x| = 0 with terminal data g:
// the running max of g over a ball growing at `speed`.
inline double hopf_lax_max(const std::function<double(double)>& g, double t,
                           double x, double horizon, double speed) {
    return envelope_max(g, x, speed * (horizon - t));
}

inline double hopf_lax_min(const std::function<double(double)>& g, double t,
                           double x, double horizon, double speed) {
    return envelope_min(g, x, speed * (horizon - t));
}

// E[g(x + sqrt(var) Z)] for standard normal Z, by Simpson quadrature on
// [-8, 8] standard deviations. Plenty for bounded smooth g.
inline double gauss_expectation(const std::function<double(double)>& g,
                                double x, double var, int n = 4001) {
    if (var <= 0.0) return g(x);
    const double sd = std::sqrt(var);
    const double lo = -8.0, hi = 8.0;
    const double h = (hi - lo) / (n - 1);
    double acc = 0.0;
    for (int i = 0; i < n; ++i) {
        const double z = lo + i * h;
        const double w = (i == 0 || i == n - 1) ? 1.0 : (i % 2 ? 4.0 : 2.0);
        acc += w * g(x + sd * z) * std::exp(-0.5 * z * z);
    }
    return acc * h / 3.0 / std::sqrt(2.0 * 3.14159265358979323846);
}

// Exhaustive matrix minimax over explicit value tables.
struct MatrixGame {
    std::vector<std::vector<double>> cells;  // cells[i][j], i over u, j over v

    double upper() const {  // min over j of max over i
        double best = std::numeric_limits<double>::infinity();
        for (std::size_t j = 0; j < cells[0].size(); ++j) {
            double inner = -std::numeric_limits<double>::infinity();
            for (std::size_t i = 0; i < cells.size(); ++i)
                inner = std::max(inner, cells[i][j]);
            best = std::min(best, inner);
        }
        return best;
    }
    double lower() const {  // max over i of min over j
        double best = -std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < cells.size(); ++i) {
            double inner = std::numeric_limits<double>::infinity();
            for (std::size_t j = 0; j < cells[0].size(); ++j)
                inner = std::min(inner, cells[i][j]);
            best = std::max(best, inner);
        }
        return best;
    }
};

}  // namespace oracle
