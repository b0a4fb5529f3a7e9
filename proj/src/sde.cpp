#include "sdg/sde.hpp"

#include <cmath>
#include <limits>

#include "sdg/errors.hpp"
#include "sdg/numfmt.hpp"
#include "sdg/parallel.hpp"
#include "sdg/rng.hpp"

namespace sdg {

namespace {

// Walks a strategy's segments as the path grows. Activation of a segment
// re-scans its rule from index 0, which is what catches rules that "wanted"
// to fire before their predecessor (a monotonicity violation); after
// activation the rule is advanced incrementally, one new grid point per
// step.
class StrategyCursor {
public:
    explicit StrategyCursor(const ElementaryStrategy& s) : s_(&s) {}

    void start(const SamplePath& path) {
        PathView view(path, 1);
        const auto f0 = s_->start_rule()->scan(view, 0);
        if (!f0)
            throw StrategyError("strategy '" + s_->label() +
                                "': start rule did not fire at the start");
        last_fire_ = *f0;
        activate(view);
    }

    // `count` is the number of genuinely computed grid points; the storage
    // behind `path` is pre-sized, so the view must be bounded explicitly.
    void on_append(const SamplePath& path, std::size_t count) {
        if (done_) return;
        PathView view(path, count);
        const auto f = cursor_->advance(view);
        if (f) {
            if (*f < last_fire_) fail_order(*f);
            last_fire_ = *f;
            ++seg_;
            activate(view);
        }
    }

    std::size_t current_action() const {
        if (done_)
            throw StrategyError("strategy '" + s_->label() +
                                "': rules exhausted before the horizon");
        return action_;
    }

private:
    void activate(const PathView& view) {
        while (true) {
            if (seg_ >= s_->segments().size()) {
                done_ = true;
                return;
            }
            const auto& seg = s_->segments()[seg_];
            const auto f = seg.rule->scan(view, 0);
            if (f) {
                if (*f < last_fire_) fail_order(*f);
                // fired at the activation point: zero-length segment
                last_fire_ = *f;
                ++seg_;
                continue;
            }
            action_ = seg.selector->select(view);
            if (action_ >= s_->control_set().size())
                throw StrategyError("strategy '" + s_->label() +
                                    "': selector returned an index outside "
                                    "the control set");
            cursor_.emplace(seg.rule.get());
            cursor_->set_from(view.size());
            return;
        }
    }

    [[noreturn]] void fail_order(double t) const {
        throw StrategyError("strategy '" + s_->label() +
                            "': stopping rule fired out of order (" +
                            std::to_string(t) + " < " +
                            std::to_string(last_fire_) + ")");
    }

    const ElementaryStrategy* s_;
    std::size_t seg_ = 0;
    double last_fire_ = 0.0;
    std::size_t action_ = 0;
    std::optional<RuleCursor> cursor_;
    bool done_ = false;
};

void check_pair(const GameProblem& problem, const StrategyPair& pair) {
    if (pair.u.player() != Player::one || pair.v.player() != Player::two)
        throw StrategyError("strategy pair: players out of position");
    if (!(pair.u.control_set() == problem.u_set) ||
        !(pair.v.control_set() == problem.v_set))
        throw StrategyError("strategy pair: control sets do not match problem");
}

// One Euler-Maruyama trajectory written into `path` (buffers reused).
void run_path(const GameProblem& problem, const StrategyPair& pair,
              double start_time, std::span<const double> start_state,
              const SimulationConfig& cfg, std::size_t path_index,
              SamplePath& path) {
    const int d = problem.dim_state;
    const int dn = problem.dim_noise;
    const std::size_t n = cfg.n_steps;
    if (n == 0) throw EvaluationError("simulate: n_steps must be >= 1");
    if (static_cast<int>(start_state.size()) != d)
        throw EvaluationError("simulate: start state dimension mismatch");
    const double T = problem.horizon;
    if (!(start_time < T))
        throw EvaluationError("simulate: start time at or beyond the horizon");
    const double h = (T - start_time) / static_cast<double>(n);

    path.dim = d;
    path.dim_noise = dn;
    path.times.resize(n + 1);
    path.states.resize((n + 1) * d);
    path.noise.resize(n * dn);
    for (std::size_t k = 0; k <= n; ++k)
        path.times[k] = start_time + static_cast<double>(k) * h;
    path.times[n] = T;  // exact horizon, immune to rounding drift
    for (int i = 0; i < d; ++i) path.states[i] = start_state[i];

    StrategyCursor cu(pair.u), cv(pair.v);
    cu.start(path);
    cv.start(path);

    const double sqrt_h = std::sqrt(h);
    std::vector<double> b(d), sig(d * dn), dw(dn);

    for (std::size_t k = 0; k < n; ++k) {
        const auto u = problem.u_set.point(cu.current_action());
        const auto v = problem.v_set.point(cv.current_action());
        const double t = path.times[k];
        const std::span<const double> x{path.states.data() + k * d,
                                        static_cast<std::size_t>(d)};
        problem.drift(t, x, u, v, b);
        problem.diffusion(t, x, u, v, sig);
        for (int c = 0; c < dn; ++c) {
            dw[c] = sqrt_h * counter_normal(cfg.rng_seed, path_index, k,
                                            static_cast<std::uint64_t>(c));
            path.noise[k * dn + c] = dw[c];
        }
        double* xn = path.states.data() + (k + 1) * d;
        for (int i = 0; i < d; ++i) {
            double s = x[i] + b[i] * h;
            for (int c = 0; c < dn; ++c) s += sig[i * dn + c] * dw[c];
            if (!std::isfinite(s))
                throw EvaluationError("simulate: non-finite state at t=" +
                                      std::to_string(path.times[k + 1]));
            if (std::abs(s) > cfg.overflow_guard)
                throw ExplosionError("simulate: state exceeded overflow guard "
                                     "at t=" +
                                     std::to_string(path.times[k + 1]));
            xn[i] = s;
        }
        // actions for the next step may use the prefix up to t_{k+1}
        cu.on_append(path, k + 2);
        cv.on_append(path, k + 2);
    }
}

BatchSummary summarize(const std::vector<double>& values,
                       const std::vector<std::optional<std::string>>& errors) {
    BatchSummary s;
    double sum = 0.0;
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (errors[i]) {
            ++s.n_failed;
            if (s.first_error.empty()) s.first_error = *errors[i];
            continue;
        }
        sum += values[i];
        ++s.n_ok;
    }
    if (s.n_ok > 0) s.mean = sum / static_cast<double>(s.n_ok);
    if (s.n_ok > 1) {
        double ss = 0.0;
        for (std::size_t i = 0; i < values.size(); ++i) {
            if (errors[i]) continue;
            const double dvi = values[i] - s.mean;
            ss += dvi * dvi;
        }
        s.stddev = std::sqrt(ss / static_cast<double>(s.n_ok - 1));
        s.std_error = s.stddev / std::sqrt(static_cast<double>(s.n_ok));
    }
    return s;
}

}  // namespace

SamplePath simulate_path(const GameProblem& problem, const StrategyPair& pair,
                         double start_time, std::span<const double> start_state,
                         const SimulationConfig& cfg, std::size_t path_index) {
    problem.validate();
    check_pair(problem, pair);
    SamplePath path;
    run_path(problem, pair, start_time, start_state, cfg, path_index, path);
    return path;
}

SamplePath simulate(const GameProblem& problem, const StrategyPair& pair,
                    double start_time, std::span<const double> start_state,
                    const SimulationConfig& cfg) {
    return simulate_path(problem, pair, start_time, start_state, cfg, 0);
}

BatchResult simulate_batch(const GameProblem& problem, const StrategyPair& pair,
                           double start_time,
                           std::span<const double> start_state,
                           const SimulationConfig& cfg) {
    problem.validate();
    check_pair(problem, pair);
    const std::size_t n = cfg.batch_size;
    BatchResult result;
    result.paths.resize(n);
    result.errors.resize(n);
    std::vector<double> payoffs(n, 0.0);
    parallel_for(n, cfg.threads, [&](std::size_t lo, std::size_t hi) {
        for (std::size_t i = lo; i < hi; ++i) {
            try {
                run_path(problem, pair, start_time, start_state, cfg, i,
                         result.paths[i]);
                payoffs[i] =
                    problem.payoff(result.paths[i].state(cfg.n_steps));
            } catch (const Error& e) {
                result.errors[i] = e.what();
                result.paths[i] = SamplePath{};
            }
        }
    });
    result.payoff = summarize(payoffs, result.errors);
    return result;
}

BatchSummary simulate_reduce(const GameProblem& problem,
                             const StrategyPair& pair, double start_time,
                             std::span<const double> start_state,
                             const SimulationConfig& cfg,
                             const PathFunctional& f,
                             std::vector<double>* per_path) {
    problem.validate();
    check_pair(problem, pair);
    const std::size_t n = cfg.batch_size;
    std::vector<double> values(n, std::numeric_limits<double>::quiet_NaN());
    std::vector<std::optional<std::string>> errors(n);
    parallel_for(n, cfg.threads, [&](std::size_t lo, std::size_t hi) {
        SamplePath scratch;  // buffers reused across this worker's paths
        for (std::size_t i = lo; i < hi; ++i) {
            try {
                run_path(problem, pair, start_time, start_state, cfg, i,
                         scratch);
                values[i] = f(scratch);
            } catch (const Error& e) {
                errors[i] = e.what();
            }
        }
    });
    BatchSummary s = summarize(values, errors);
    if (per_path) *per_path = std::move(values);
    return s;
}

std::string BatchSummary::to_json_string() const {
    std::string j = "{\n";
    j += "  \"mean\": " + format_double(mean) + ",\n";
    j += "  \"stddev\": " + format_double(stddev) + ",\n";
    j += "  \"std_error\": " + format_double(std_error) + ",\n";
    j += "  \"n_ok\": " + std::to_string(n_ok) + ",\n";
    j += "  \"n_failed\": " + std::to_string(n_failed) + "\n";
    j += "}\n";
    return j;
}

std::string path_to_csv(const GameProblem& problem, const StrategyPair& pair,
                        const SamplePath& path) {
    const std::size_t n = path.size() - 1;
    const int ud = problem.u_set.dim();
    const int vd = problem.v_set.dim();
    std::vector<double> ua(n * ud), va(n * vd);
    for (std::size_t k = 0; k < n; ++k) {
        const auto u = action_at(pair.u, path, path.times[k + 1]);
        const auto v = action_at(pair.v, path, path.times[k + 1]);
        for (int i = 0; i < ud; ++i) ua[k * ud + i] = u[i];
        for (int i = 0; i < vd; ++i) va[k * vd + i] = v[i];
    }
    return path.to_csv(ua, va, ud, vd);
}

}  // namespace sdg
