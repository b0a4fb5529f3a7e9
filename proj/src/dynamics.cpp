#include "sdg/dynamics.hpp"

#include <cmath>
#include <limits>

#include "sdg/errors.hpp"
#include "sdg/rng.hpp"

namespace sdg {

namespace {

std::string point_str(std::span<const double> p) {
    std::string s = "(";
    for (std::size_t i = 0; i < p.size(); ++i) {
        if (i) s += ", ";
        s += std::to_string(p[i]);
    }
    return s + ")";
}

void check_finite(std::span<const double> vals, const char* what, double t,
                  std::span<const double> x) {
    for (double c : vals) {
        if (!std::isfinite(c))
            throw EvaluationError(std::string(what) + " non-finite at t=" +
                                  std::to_string(t) + ", x=" + point_str(x));
    }
}

}  // namespace

void GameProblem::validate() const {
    if (dim_state < 1) throw EvaluationError(name + ": dim_state must be >= 1");
    if (dim_noise < 1) throw EvaluationError(name + ": dim_noise must be >= 1");
    if (!drift || !diffusion || !payoff)
        throw EvaluationError(name + ": missing coefficient evaluator");
    if (!(payoff_min <= payoff_max))
        throw EvaluationError(name + ": payoff bounds out of order");
    if (!(horizon > 0.0)) throw EvaluationError(name + ": horizon must be > 0");
    if (u_set.size() == 0 || v_set.size() == 0)
        throw EvaluationError(name + ": empty control set");
}

HamiltonianQuery::HamiltonianQuery(double t_, std::vector<double> x_,
                                   std::vector<double> grad_,
                                   std::vector<double> hess_)
    : t(t_), x(std::move(x_)), grad(std::move(grad_)), hess(std::move(hess_)) {
    const std::size_t d = x.size();
    if (grad.size() != d || hess.size() != d * d)
        throw EvaluationError("hamiltonian query: dimension mismatch");
    double scale = 0.0;
    for (double h : hess) scale = std::max(scale, std::abs(h));
    for (std::size_t i = 0; i < d; ++i) {
        for (std::size_t j = i + 1; j < d; ++j) {
            const double a = hess[i * d + j];
            const double b = hess[j * d + i];
            if (std::abs(a - b) > 1e-12 * std::max(1.0, scale))
                throw EvaluationError("hamiltonian query: hessian asymmetry");
            const double s = 0.5 * (a + b);
            hess[i * d + j] = s;
            hess[j * d + i] = s;
        }
    }
}

double generator_value(const GameProblem& problem, const HamiltonianQuery& q,
                       std::span<const double> u, std::span<const double> v) {
    const int d = problem.dim_state;
    const int dn = problem.dim_noise;
    double b[8];
    double sig[64];
    std::span<double> bs(b, static_cast<std::size_t>(d));
    std::span<double> ss(sig, static_cast<std::size_t>(d * dn));
    problem.drift(q.t, q.x, u, v, bs);
    problem.diffusion(q.t, q.x, u, v, ss);
    check_finite(bs, "drift", q.t, q.x);
    check_finite(ss, "diffusion", q.t, q.x);

    double val = 0.0;
    for (int i = 0; i < d; ++i) val += b[i] * q.grad[i];
    // 1/2 tr(sigma sigma^T M) = 1/2 sum_{i,j} M_ij (sigma sigma^T)_ij
    for (int i = 0; i < d; ++i) {
        for (int j = 0; j < d; ++j) {
            double a_ij = 0.0;
            for (int k = 0; k < dn; ++k) a_ij += sig[i * dn + k] * sig[j * dn + k];
            val += 0.5 * a_ij * q.hess[i * d + j];
        }
    }
    return val;
}

HamiltonianResult hamiltonian(const GameProblem& problem, Side side,
                              const HamiltonianQuery& q) {
    if (static_cast<int>(q.x.size()) != problem.dim_state)
        throw EvaluationError(problem.name + ": query dimension mismatch");
    if (problem.dim_state > 8)
        throw EvaluationError("state dimension above stack buffer limit (8)");

    const std::size_t nu = problem.u_set.size();
    const std::size_t nv = problem.v_set.size();
    HamiltonianResult res;

    if (side == Side::upper) {
        // min over v of max over u
        double best_outer = std::numeric_limits<double>::infinity();
        for (std::size_t j = 0; j < nv; ++j) {
            double best_inner = -std::numeric_limits<double>::infinity();
            std::size_t inner_arg = 0;
            for (std::size_t i = 0; i < nu; ++i) {
                const double g = generator_value(problem, q,
                                                 problem.u_set.point(i),
                                                 problem.v_set.point(j));
                if (g > best_inner) {
                    best_inner = g;
                    inner_arg = i;
                }
            }
            if (best_inner < best_outer) {
                best_outer = best_inner;
                res.v_index = j;
                res.u_index = inner_arg;
            }
        }
        res.value = best_outer;
    } else {
        // max over u of min over v
        double best_outer = -std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < nu; ++i) {
            double best_inner = std::numeric_limits<double>::infinity();
            std::size_t inner_arg = 0;
            for (std::size_t j = 0; j < nv; ++j) {
                const double g = generator_value(problem, q,
                                                 problem.u_set.point(i),
                                                 problem.v_set.point(j));
                if (g < best_inner) {
                    best_inner = g;
                    inner_arg = j;
                }
            }
            if (best_inner > best_outer) {
                best_outer = best_inner;
                res.u_index = i;
                res.v_index = inner_arg;
            }
        }
        res.value = best_outer;
    }
    return res;
}

AuditReport audit_coefficients(const GameProblem& problem,
                               const AuditSpec& spec) {
    problem.validate();
    const int d = problem.dim_state;
    const int dn = problem.dim_noise;
    CounterRng rng(spec.rng_seed, 0xa0d17);
    AuditReport rep;

    std::vector<double> x(d), y(d), bx(d), by(d);
    std::vector<double> sx(d * dn), sy(d * dn);

    auto norm = [](std::span<const double> p) {
        double s = 0.0;
        for (double c : p) s += c * c;
        return std::sqrt(s);
    };
    auto sample_point = [&](std::vector<double>& out) {
        // uniform in the euclidean ball of the audit radius
        for (;;) {
            for (int i = 0; i < d; ++i) out[i] = rng.uniform(-spec.radius, spec.radius);
            if (norm(out) <= spec.radius) return;
        }
    };
    auto count_finite = [&](std::span<const double> vals) {
        for (double c : vals)
            if (!std::isfinite(c)) {
                ++rep.non_finite;
                return false;
            }
        return true;
    };

    for (std::size_t s = 0; s < spec.n_samples; ++s) {
        sample_point(x);
        sample_point(y);
        const double t = rng.uniform(0.0, problem.horizon);
        const auto u = problem.u_set.point(rng.index(problem.u_set.size()));
        const auto v = problem.v_set.point(rng.index(problem.v_set.size()));

        problem.drift(t, x, u, v, bx);
        problem.drift(t, y, u, v, by);
        problem.diffusion(t, x, u, v, sx);
        problem.diffusion(t, y, u, v, sy);
        if (!count_finite(bx) || !count_finite(by) || !count_finite(sx) ||
            !count_finite(sy))
            continue;

        double dxy = 0.0;
        for (int i = 0; i < d; ++i) dxy += (x[i] - y[i]) * (x[i] - y[i]);
        dxy = std::sqrt(dxy);
        if (dxy > 1e-9) {
            double db = 0.0;
            for (int i = 0; i < d; ++i) db += (bx[i] - by[i]) * (bx[i] - by[i]);
            rep.drift_lipschitz = std::max(rep.drift_lipschitz, std::sqrt(db) / dxy);
            double ds = 0.0;
            for (std::size_t i = 0; i < sx.size(); ++i)
                ds += (sx[i] - sy[i]) * (sx[i] - sy[i]);
            rep.diffusion_lipschitz =
                std::max(rep.diffusion_lipschitz, std::sqrt(ds) / dxy);
        }
        rep.growth_ratio = std::max(
            rep.growth_ratio, (norm(bx) + norm(sx)) / (1.0 + norm(x)));

        const double g = problem.payoff(x);
        if (!std::isfinite(g)) {
            ++rep.non_finite;
        } else {
            rep.payoff_excess = std::max(
                rep.payoff_excess, std::max(problem.payoff_min - g,
                                            g - problem.payoff_max));
        }
    }
    rep.payoff_excess = std::max(rep.payoff_excess, 0.0);
    return rep;
}

}  // namespace sdg
