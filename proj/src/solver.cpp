#include "sdg/solver.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>
#include <string>
#include <vector>

#include "sdg/errors.hpp"
#include "sdg/parallel.hpp"

namespace sdg {

namespace {

// Stencil slots. d = 1: E, W. d = 2: E, W, N, S plus the four corners; the
// corner pair used depends on the sign of the cross-diffusion term.
constexpr int kSlotOffsets2[8][2] = {{+1, 0}, {-1, 0}, {0, +1}, {0, -1},
                                     {+1, +1}, {-1, -1}, {+1, -1}, {-1, +1}};

std::size_t stencil_size(int dim) { return dim == 1 ? 2 : 8; }

std::string node_str(const SpaceTimeGrid& g, std::size_t node) {
    double c[2];
    g.node_coords(node, {c, static_cast<std::size_t>(g.dim)});
    std::string s = "(" + std::to_string(c[0]);
    if (g.dim > 1) s += ", " + std::to_string(c[1]);
    return s + ")";
}

// Per-control-pair neighbor coefficients before the time step factor. The
// update is v <- (1 - dt*sum) v_c + dt * sum_i s_i v_i; all s_i >= 0 and
// 1 - dt*sum >= 0 make the update monotone in every input.
struct Stencil {
    double s[8];
    double sum;
};

class CoefficientEvaluator {
public:
    CoefficientEvaluator(const GameProblem& p, const SpaceTimeGrid& g)
        : p_(&p), g_(&g), d_(p.dim_state), dn_(p.dim_noise),
          b_(d_), sig_(static_cast<std::size_t>(d_) * dn_), a_(d_ * d_) {}

    Stencil build(double t, std::span<const double> x, std::span<const double> u,
                  std::span<const double> v) {
        p_->drift(t, x, u, v, b_);
        p_->diffusion(t, x, u, v, sig_);
        for (double c : b_)
            if (!std::isfinite(c)) fail_finite("drift", t, x);
        for (double c : sig_)
            if (!std::isfinite(c)) fail_finite("diffusion", t, x);
        for (int i = 0; i < d_; ++i)
            for (int j = 0; j < d_; ++j) {
                double acc = 0.0;
                for (int c = 0; c < dn_; ++c)
                    acc += sig_[i * dn_ + c] * sig_[j * dn_ + c];
                a_[i * d_ + j] = acc;
            }

        Stencil st{};
        if (d_ == 1) {
            const double dx = g_->spacing[0];
            const double diff = a_[0] / (2.0 * dx * dx);
            st.s[0] = diff + std::max(b_[0], 0.0) / dx;
            st.s[1] = diff + std::max(-b_[0], 0.0) / dx;
            st.sum = st.s[0] + st.s[1];
            return st;
        }

        const double dx = g_->spacing[0];
        const double dy = g_->spacing[1];
        const double a11 = a_[0], a22 = a_[3];
        const double a12 = 0.5 * (a_[1] + a_[2]);
        double am = std::abs(a12);
        const double scale = std::max({1.0, a11, a22, am});
        if (am > 1e-14 * scale) {
            if (std::abs(dx - dy) > 1e-12 * dx)
                throw CflError(
                    "scheme: cross-diffusion requires equal grid spacing "
                    "(dx=" + std::to_string(dx) + ", dy=" + std::to_string(dy) +
                    ")");
            if (a11 - am < -1e-12 * scale || a22 - am < -1e-12 * scale)
                throw CflError(
                    "scheme: diffusion matrix is not diagonally dominant "
                    "(a11=" + std::to_string(a11) + ", a22=" +
                    std::to_string(a22) + ", a12=" + std::to_string(a12) +
                    "); the 7-point stencil cannot stay monotone");
        } else {
            am = 0.0;
        }
        const double face1 = std::max(a11 - am, 0.0) / (2.0 * dx * dx);
        const double face2 = std::max(a22 - am, 0.0) / (2.0 * dy * dy);
        const double corner = am / (2.0 * dx * dx);
        st.s[0] = face1 + std::max(b_[0], 0.0) / dx;
        st.s[1] = face1 + std::max(-b_[0], 0.0) / dx;
        st.s[2] = face2 + std::max(b_[1], 0.0) / dy;
        st.s[3] = face2 + std::max(-b_[1], 0.0) / dy;
        if (a12 >= 0.0) {
            st.s[4] = corner;
            st.s[5] = corner;
            st.s[6] = 0.0;
            st.s[7] = 0.0;
        } else {
            st.s[4] = 0.0;
            st.s[5] = 0.0;
            st.s[6] = corner;
            st.s[7] = corner;
        }
        st.sum = 0.0;
        for (std::size_t k = 0; k < 8; ++k) st.sum += st.s[k];
        return st;
    }

    double max_abs_a() const {
        double m = 0.0;
        for (double c : a_) m = std::max(m, std::abs(c));
        return m;
    }
    double max_abs_b() const {
        double m = 0.0;
        for (double c : b_) m = std::max(m, std::abs(c));
        return m;
    }

private:
    [[noreturn]] void fail_finite(const char* what, double t,
                                  std::span<const double> x) const {
        std::string s = std::string(what) + " non-finite at t=" +
                        std::to_string(t) + ", x=(" + std::to_string(x[0]);
        if (x.size() > 1) s += ", " + std::to_string(x[1]);
        throw EvaluationError(s + ")");
    }

    const GameProblem* p_;
    const SpaceTimeGrid* g_;
    int d_, dn_;
    std::vector<double> b_, sig_, a_;
};

std::vector<std::uint32_t> neighbor_table(const SpaceTimeGrid& g) {
    const std::size_t ns = stencil_size(g.dim);
    if (g.node_count > std::numeric_limits<std::uint32_t>::max())
        throw ConfigError("grid: too many nodes for the neighbor table");
    std::vector<std::uint32_t> table(g.node_count * ns);
    std::size_t multi[2];
    for (std::size_t n = 0; n < g.node_count; ++n) {
        g.node_multi(n, {multi, static_cast<std::size_t>(g.dim)});
        for (std::size_t k = 0; k < ns; ++k) {
            std::size_t nb[2];
            for (int a = 0; a < g.dim; ++a) {
                const int off = g.dim == 1 ? (k == 0 ? +1 : -1)
                                           : kSlotOffsets2[k][a];
                const long long i = static_cast<long long>(multi[a]) + off;
                // constant extrapolation: clamp to the grid box
                const long long clamped = std::clamp(
                    i, 0ll, static_cast<long long>(g.nodes[a]) - 1);
                nb[a] = static_cast<std::size_t>(clamped);
            }
            table[n * ns + k] = static_cast<std::uint32_t>(
                g.node_index({nb, static_cast<std::size_t>(g.dim)}));
        }
    }
    return table;
}

std::vector<std::uint8_t> boundary_mask(const SpaceTimeGrid& g) {
    std::vector<std::uint8_t> mask(g.node_count);
    for (std::size_t n = 0; n < g.node_count; ++n)
        mask[n] = g.is_boundary(n) ? 1 : 0;
    return mask;
}

struct SweepContext {
    const GameProblem* problem;
    const SpaceTimeGrid* grid;
    Side side;
    const SolverOptions* opts;
    std::size_t n_u, n_v, ns;
    const std::vector<std::uint32_t>* neighbors;
    const std::vector<std::uint8_t>* boundary;
    // cached stencils, laid out node-major then pair (u-major), each entry
    // ns coefficients plus the precomputed sum; empty when not cached
    std::vector<double> cache;

    bool cached() const { return !cache.empty(); }
    const double* cache_entry(std::size_t node, std::size_t pair) const {
        return cache.data() + (node * (n_u * n_v) + pair) * (ns + 1);
    }
};

// One node update: exact minimax over the control pairs of the monotone
// one-step value. Ties resolve to the lowest indices; for Side::lower the
// outer loop is u, for Side::upper it is v.
void update_node(const SweepContext& ctx, CoefficientEvaluator& eval,
                 double t_eval, std::size_t node, std::span<const double> data,
                 double dt, double* out_value, std::uint16_t* out_u,
                 std::uint16_t* out_v) {
    const auto& g = *ctx.grid;
    const std::size_t ns = ctx.ns;
    const std::uint32_t* nbr = ctx.neighbors->data() + node * ns;
    double coords[2];
    g.node_coords(node, {coords, static_cast<std::size_t>(g.dim)});
    const std::span<const double> x{coords, static_cast<std::size_t>(g.dim)};
    const double vc = data[node];
    double nv[8];
    for (std::size_t k = 0; k < ns; ++k) nv[k] = data[nbr[k]];

    auto pair_value = [&](std::size_t iu, std::size_t iv) {
        double local[9];
        const double* s;
        double sum;
        if (ctx.cached()) {
            const double* e = ctx.cache_entry(node, iu * ctx.n_v + iv);
            s = e;
            sum = e[ns];
        } else {
            const Stencil st = eval.build(t_eval, x, ctx.problem->u_set.point(iu),
                                          ctx.problem->v_set.point(iv));
            std::memcpy(local, st.s, sizeof(double) * ns);
            local[ns] = st.sum;
            s = local;
            sum = st.sum;
        }
        const double dts = dt * sum;
        if (dts > 1.0)
            throw CflError("scheme: time step " + std::to_string(dt) +
                           " breaks monotonicity at x=" + node_str(g, node) +
                           " (needs dt <= " + std::to_string(1.0 / sum) + ")");
        double acc = (1.0 - dts) * vc;
        for (std::size_t k = 0; k < ns; ++k) acc += (dt * s[k]) * nv[k];
        return acc;
    };

    double best;
    std::size_t bu = 0, bv = 0;
    if (ctx.side == Side::lower) {
        best = -std::numeric_limits<double>::infinity();
        for (std::size_t iu = 0; iu < ctx.n_u; ++iu) {
            double inner = std::numeric_limits<double>::infinity();
            std::size_t arg = 0;
            for (std::size_t iv = 0; iv < ctx.n_v; ++iv) {
                const double c = pair_value(iu, iv);
                if (c < inner) {
                    inner = c;
                    arg = iv;
                }
            }
            if (inner > best) {
                best = inner;
                bu = iu;
                bv = arg;
            }
        }
    } else {
        best = std::numeric_limits<double>::infinity();
        for (std::size_t iv = 0; iv < ctx.n_v; ++iv) {
            double inner = -std::numeric_limits<double>::infinity();
            std::size_t arg = 0;
            for (std::size_t iu = 0; iu < ctx.n_u; ++iu) {
                const double c = pair_value(iu, iv);
                if (c > inner) {
                    inner = c;
                    arg = iu;
                }
            }
            if (inner < best) {
                best = inner;
                bv = iv;
                bu = arg;
            }
        }
    }
    *out_value = best;
    *out_u = static_cast<std::uint16_t>(bu);
    *out_v = static_cast<std::uint16_t>(bv);
}

void sweep_level(SweepContext& ctx, double t_eval, double dt,
                 std::span<const double> data, std::span<double> out_values,
                 std::span<std::uint16_t> out_u, std::span<std::uint16_t> out_v) {
    const bool skip_boundary =
        ctx.opts->boundary == BoundaryMode::clamped_terminal;
    parallel_for(ctx.grid->node_count, ctx.opts->threads,
                 [&](std::size_t lo, std::size_t hi) {
                     CoefficientEvaluator eval(*ctx.problem, *ctx.grid);
                     for (std::size_t n = lo; n < hi; ++n) {
                         if (skip_boundary && (*ctx.boundary)[n]) {
                             out_values[n] = data[n];
                             continue;
                         }
                         update_node(ctx, eval, t_eval, n, data, dt,
                                     &out_values[n], &out_u[n], &out_v[n]);
                     }
                 });
}

void fill_cache(SweepContext& ctx) {
    const auto& g = *ctx.grid;
    const std::size_t pairs = ctx.n_u * ctx.n_v;
    const std::size_t entry = ctx.ns + 1;
    ctx.cache.resize(g.node_count * pairs * entry);
    const double t_eval = g.horizon;
    parallel_for(g.node_count, ctx.opts->threads,
                 [&](std::size_t lo, std::size_t hi) {
                     CoefficientEvaluator eval(*ctx.problem, g);
                     double coords[2];
                     for (std::size_t n = lo; n < hi; ++n) {
                         g.node_coords(n,
                                       {coords, static_cast<std::size_t>(g.dim)});
                         const std::span<const double> x{
                             coords, static_cast<std::size_t>(g.dim)};
                         for (std::size_t iu = 0; iu < ctx.n_u; ++iu)
                             for (std::size_t iv = 0; iv < ctx.n_v; ++iv) {
                                 const Stencil st = eval.build(
                                     t_eval, x, ctx.problem->u_set.point(iu),
                                     ctx.problem->v_set.point(iv));
                                 double* e = ctx.cache.data() +
                                             (n * pairs + iu * ctx.n_v + iv) *
                                                 entry;
                                 for (std::size_t k = 0; k < ctx.ns; ++k)
                                     e[k] = st.s[k];
                                 e[ctx.ns] = st.sum;
                             }
                     }
                 });
}

SpaceTimeGrid make_geometry(const GameProblem& problem,
                            std::span<const double> lo,
                            std::span<const double> hi,
                            std::span<const std::size_t> nodes, double t0) {
    SpaceTimeGrid g;
    g.dim = problem.dim_state;
    g.lo.assign(lo.begin(), lo.end());
    g.hi.assign(hi.begin(), hi.end());
    g.nodes.assign(nodes.begin(), nodes.end());
    g.t0 = t0;
    g.horizon = problem.horizon;
    if (g.dim < 1 || g.dim > 2)
        throw ConfigError("grid: only one or two state dimensions supported");
    const std::size_t d = static_cast<std::size_t>(g.dim);
    if (lo.size() != d || hi.size() != d || nodes.size() != d)
        throw ConfigError("grid: axis array sizes do not match the problem");
    g.spacing.resize(d);
    g.node_count = 1;
    for (std::size_t a = 0; a < d; ++a) {
        if (g.nodes[a] < 3)
            throw ConfigError("grid: need at least 3 nodes per axis");
        if (!(g.lo[a] < g.hi[a]))
            throw ConfigError("grid: axis bounds out of order");
        g.spacing[a] = (g.hi[a] - g.lo[a]) / static_cast<double>(g.nodes[a] - 1);
        g.node_count *= g.nodes[a];
    }
    if (!(t0 >= 0.0) || !(t0 < g.horizon))
        throw ConfigError("grid: t0 must lie in [0, horizon)");
    return g;
}

}  // namespace

SpaceTimeGrid plan_grid(const GameProblem& problem, std::span<const double> lo,
                        std::span<const double> hi,
                        std::span<const std::size_t> nodes,
                        const SolverOptions& opts, double t0) {
    problem.validate();
    SpaceTimeGrid g = make_geometry(problem, lo, hi, nodes, t0);
    const double span = g.horizon - g.t0;

    double dt = 0.0;
    if (opts.dt_override) {
        if (!(*opts.dt_override > 0.0))
            throw ConfigError("plan: dt_override must be positive");
        dt = *opts.dt_override;
    } else {
        // stability scan over nodes, control pairs, and (for problems with
        // time-dependent coefficients) a sample of evaluation times
        std::vector<double> times;
        if (problem.time_homogeneous) {
            times = {g.horizon};
        } else {
            times = {g.t0, g.t0 + 0.25 * span, g.t0 + 0.5 * span,
                     g.t0 + 0.75 * span, g.horizon};
        }
        CoefficientEvaluator eval(problem, g);
        double s_max = 0.0, a_max = 0.0, b_max = 0.0;
        double coords[2];
        for (double t : times) {
            for (std::size_t n = 0; n < g.node_count; ++n) {
                g.node_coords(n, {coords, static_cast<std::size_t>(g.dim)});
                const std::span<const double> x{coords,
                                                static_cast<std::size_t>(g.dim)};
                for (std::size_t iu = 0; iu < problem.u_set.size(); ++iu)
                    for (std::size_t iv = 0; iv < problem.v_set.size(); ++iv) {
                        const Stencil st =
                            eval.build(t, x, problem.u_set.point(iu),
                                       problem.v_set.point(iv));
                        s_max = std::max(s_max, st.sum);
                        a_max = std::max(a_max, eval.max_abs_a());
                        b_max = std::max(b_max, eval.max_abs_b());
                    }
            }
        }
        double dx_min = g.spacing[0];
        for (double s : g.spacing) dx_min = std::min(dx_min, s);
        const double dt_closed =
            dx_min * dx_min /
            (static_cast<double>(g.dim) * a_max + dx_min * b_max + 1e-12);
        const double dt_exact = s_max > 0.0 ? opts.cfl_safety / s_max : span;
        dt = std::min(dt_closed, dt_exact);
    }

    std::size_t steps = static_cast<std::size_t>(std::ceil(span / dt - 1e-12));
    steps = std::max(steps, std::max<std::size_t>(opts.min_steps, 1));
    if (steps + 1 > opts.max_levels)
        throw ConfigError("plan: " + std::to_string(steps + 1) +
                          " time levels exceed the cap of " +
                          std::to_string(opts.max_levels) +
                          "; coarsen the grid or raise max_levels");
    const std::size_t bytes_per_level = g.node_count * (8 + 2 + 2);
    if ((steps + 1) * bytes_per_level > opts.memory_cap)
        throw ConfigError("plan: level storage " +
                          std::to_string((steps + 1) * bytes_per_level) +
                          " bytes exceeds the memory cap of " +
                          std::to_string(opts.memory_cap));
    g.n_levels = steps + 1;
    g.dt = span / static_cast<double>(steps);
    g.validate();
    return g;
}

ValueGrid solve_isaacs(const GameProblem& problem, Side side,
                       const SpaceTimeGrid& grid, const SolverOptions& opts) {
    problem.validate();
    grid.validate();
    if (grid.dim != problem.dim_state)
        throw ConfigError("solve: grid dimension does not match the problem");
    if (problem.u_set.size() > 65535 || problem.v_set.size() > 65535)
        throw ConfigError("solve: control sets too large for saddle storage");

    ValueGrid vg(grid, side, problem.name);
    const std::size_t m = grid.n_levels - 1;

    // terminal data
    {
        auto vals = vg.level_values(m);
        double coords[2];
        for (std::size_t n = 0; n < grid.node_count; ++n) {
            grid.node_coords(n, {coords, static_cast<std::size_t>(grid.dim)});
            const double gval =
                problem.payoff({coords, static_cast<std::size_t>(grid.dim)});
            if (!std::isfinite(gval))
                throw EvaluationError("solve: terminal payoff non-finite at " +
                                      node_str(grid, n));
            vals[n] = gval;
        }
    }

    SweepContext ctx;
    ctx.problem = &problem;
    ctx.grid = &grid;
    ctx.side = side;
    ctx.opts = &opts;
    ctx.n_u = problem.u_set.size();
    ctx.n_v = problem.v_set.size();
    ctx.ns = stencil_size(grid.dim);
    const auto neighbors = neighbor_table(grid);
    const auto boundary = boundary_mask(grid);
    ctx.neighbors = &neighbors;
    ctx.boundary = &boundary;

    const std::size_t cache_bytes =
        grid.node_count * ctx.n_u * ctx.n_v * (ctx.ns + 1) * sizeof(double);
    if (problem.time_homogeneous && cache_bytes <= opts.cache_cap)
        fill_cache(ctx);

    // terminal-level saddles: the minimax pair the scheme would choose when
    // stepping off the terminal data (values themselves stay g)
    {
        std::vector<double> scratch(grid.node_count);
        SweepContext term_ctx = ctx;  // boundary handling identical
        sweep_level(term_ctx, grid.horizon, grid.dt, vg.level_values(m),
                    scratch, vg.level_u_saddle(m), vg.level_v_saddle(m));
    }

    for (std::size_t j = m; j-- > 0;) {
        const double t_eval = grid.level_time(j + 1);
        sweep_level(ctx, t_eval, grid.dt, vg.level_values(j + 1),
                    vg.level_values(j), vg.level_u_saddle(j),
                    vg.level_v_saddle(j));
        if (opts.boundary == BoundaryMode::clamped_terminal) {
            // frozen boundary keeps the terminal pair annotation
            auto u_out = vg.level_u_saddle(j);
            auto v_out = vg.level_v_saddle(j);
            auto u_term = vg.level_u_saddle(m);
            auto v_term = vg.level_v_saddle(m);
            for (std::size_t n = 0; n < grid.node_count; ++n)
                if (boundary[n]) {
                    u_out[n] = u_term[n];
                    v_out[n] = v_term[n];
                }
        }
    }
    return vg;
}

FeedbackTable extract_feedback(const ValueGrid& vg, Player player,
                               std::size_t level_stride) {
    const auto& g = vg.grid();
    if (level_stride == 0)
        level_stride = std::max<std::size_t>(1, (g.n_levels + 511) / 512);
    FeedbackTable t;
    t.axis_lo = g.lo;
    t.axis_hi = g.hi;
    t.axis_nodes = g.nodes;
    t.source = vg.problem_name() + "/" + side_name(vg.side()) + "/" +
               (player == Player::one ? "u" : "v");
    for (std::size_t j = 0; j < g.n_levels; ++j) {
        const bool keep = (j % level_stride == 0) || (j + 1 == g.n_levels);
        if (!keep) continue;
        t.level_times.push_back(g.level_time(j));
        for (std::size_t n = 0; n < g.node_count; ++n)
            t.control_index.push_back(player == Player::one ? vg.u_saddle(j, n)
                                                            : vg.v_saddle(j, n));
    }
    return t;
}

ElementaryStrategy feedback_strategy(const GameProblem& problem, Player player,
                                     std::shared_ptr<const FeedbackTable> table,
                                     std::size_t n_decisions, double t0) {
    if (!table) throw StrategyError("feedback strategy: null table");
    if (n_decisions < 1)
        throw StrategyError("feedback strategy: need at least one window");
    const ControlSet& set =
        player == Player::one ? problem.u_set : problem.v_set;
    for (std::uint16_t c : table->control_index)
        if (c >= set.size())
            throw StrategyError(
                "feedback strategy: table entry outside the control set");
    const double span = problem.horizon - t0;
    auto sel = feedback_selector(table);
    std::vector<StrategySegment> segs;
    segs.reserve(n_decisions);
    for (std::size_t k = 1; k < n_decisions; ++k) {
        const double tk =
            t0 + static_cast<double>(k) * span / static_cast<double>(n_decisions);
        segs.push_back({constant_rule(tk), sel});
    }
    segs.push_back(
        {constant_rule(std::numeric_limits<double>::infinity()), sel});
    return ElementaryStrategy(
        player, set, constant_rule(-std::numeric_limits<double>::infinity()),
        std::move(segs), "feedback[" + table->source + "]");
}

}  // namespace sdg
